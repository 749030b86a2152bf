"""Finite-difference gradient suite over every differentiable component.

Each check builds a small seeded instance, a scalar loss (a random
projection of the component's output), and compares the hand-written
backward pass with central differences. Used by ``clinner gradcheck``.
"""
from __future__ import annotations

import time

import numpy as np

from . import crf
from .annotation import EntityMention
from .corpus import AnnotatedDocument
from .gazetteer import TermDictionary, build_matcher
from .nn import layers as L
from .nn.gradcheck import grad_check
from .sections import HeadingLexicon
from .text import RawDocument, tokenize_document

TOLERANCE = 1e-4
CRF_TOLERANCE = 1e-6


def check_gru_cell(rng, d_in=5, d_h=4):
    p = L.GruParams.init(rng, d_in, d_h)
    p.b[...] = rng.normal(scale=0.5, size=p.b.shape)
    x, h0, A = rng.normal(size=d_in), rng.normal(size=d_h), rng.normal(size=d_h)

    def fn():
        h, cache = L.gru_cell_forward(x, h0, p)
        dx, dh0, g = L.gru_cell_backward(A, cache, p)
        return float(h @ A), {"W": g.W, "U": g.U, "b": g.b, "x": dx, "h_prev": dh0}

    return grad_check(fn, {"W": p.W, "U": p.U, "b": p.b, "x": x, "h_prev": h0})


def check_bigru(rng, T=5, d_in=4, d_h=3):
    pf, pb = L.GruParams.init(rng, d_in, d_h), L.GruParams.init(rng, d_in, d_h)
    X, A = rng.normal(size=(T, d_in)), rng.normal(size=(T, 2 * d_h))

    def fn():
        H, cache = L.bigru_forward(X, pf, pb)
        dX, gf, gb = L.bigru_backward(A, cache, pf, pb)
        return float(np.sum(H * A)), {"X": dX, "fW": gf.W, "fU": gf.U, "fb": gf.b,
                                      "bW": gb.W, "bU": gb.U, "bb": gb.b}

    return grad_check(fn, {"X": X, "fW": pf.W, "fU": pf.U, "fb": pf.b, "bW": pb.W, "bU": pb.U, "bb": pb.b})


def check_char_cnn(rng, n_tok=3, length=7, d_c=4, d_f=5):
    Xc = rng.normal(size=(n_tok, length, d_c))
    lengths = np.array([length, length - 2, 3])[:n_tok]
    F, bias, A = rng.normal(size=(d_c, 3, d_f)), rng.normal(size=d_f), rng.normal(size=(n_tok, d_f))

    def fn():
        out, cache = L.char_cnn_batch_forward(Xc, lengths, F, bias)
        dXc, dF, db = L.char_cnn_batch_backward(A, cache)
        return float(np.sum(out * A)), {"Xc": dXc, "F": dF, "bias": db}

    return grad_check(fn, {"Xc": Xc, "F": F, "bias": bias})


def check_linear(rng, n=4, d_in=5, d_out=3):
    x, W, b, A = rng.normal(size=(n, d_in)), rng.normal(size=(d_out, d_in)), rng.normal(size=d_out), \
        rng.normal(size=(n, d_out))

    def fn():
        y = L.linear(x, W, b)
        dx, dW, db = L.linear_backward(A, x, W)
        return float(np.sum(y * A)), {"x": dx, "W": dW, "b": db}

    return grad_check(fn, {"x": x, "W": W, "b": b})


def check_crf_nll(rng, T=5, K=5):
    E = rng.normal(size=(T, K))
    tr = crf.Transitions(rng.normal(size=(K, K)), rng.normal(size=K), rng.normal(size=K))
    gold = rng.integers(K, size=T)

    def fn():
        loss, dE, (dt, ds, de) = crf.crf_nll(E, tr, gold)
        return loss, {"E": dE, "trans": dt, "start": ds, "stop": de}

    return grad_check(fn, {"E": E, "trans": tr.trans, "start": tr.start, "stop": tr.stop})


def toy_tagger(seed=0):
    """A 3-token hybrid tagger with two biGRU layers and its one training sentence."""
    from .tagger import FeatureSource, TaggerConfig, TaggerModel, build_vocab, make_examples

    doc = AnnotatedDocument(tokenize_document(RawDocument("toy", "took aspirin daily")),
                            [EntityMention(5, 12, "DrugName")])
    d = TermDictionary()
    d.add("aspirin", "DrugName", "toy")
    feat = FeatureSource(build_matcher(d), HeadingLexicon.from_pairs([("history", "HISTORY")]))
    cfg = TaggerConfig(word_dim=4, char_emb_dim=3, char_filters=4, hidden_dim=3, num_gru_layers=2,
                       dropout_rate=0.0, use_gazetteer_feature=True, use_section_feature=True, seed=seed)
    model = TaggerModel(cfg, build_vocab([doc.tdoc]), feat.lexicon.n_classes)
    ex = make_examples(model, [doc], feat)[0]
    return model, ex.sentences[0], ex.gold[0]


def check_tagger(rng, seed=0):
    model, fs, gold = toy_tagger(seed)
    # give the transitions non-trivial values without touching masked entries
    for name in ("crf_trans", "crf_start", "crf_stop"):
        v = model.params[name].value
        free = v > crf.MASKED / 2
        v[free] = rng.normal(size=int(free.sum()))

    def fn():
        model.zero_grad()
        loss = model.loss_and_grad(fs, gold)
        return loss, {k: q.grad.copy() for k, q in model.params.items()}

    return grad_check(fn, {k: q.value for k, q in model.params.items()})


CHECKS = (
    ("gru_cell", check_gru_cell, TOLERANCE),
    ("bigru", check_bigru, TOLERANCE),
    ("char_cnn", check_char_cnn, TOLERANCE),
    ("linear", check_linear, TOLERANCE),
    ("crf_nll", check_crf_nll, CRF_TOLERANCE),
    ("tagger", check_tagger, TOLERANCE),
)


def gradient_suite(seed=0):
    """Returns ``[(name, max relative error, tolerance, seconds)]`` for every component."""
    out = []
    for i, (name, fn, tol) in enumerate(CHECKS):
        rng = np.random.default_rng([seed, i])
        t0 = time.perf_counter()
        err = fn(rng)
        out.append((name, err, tol, time.perf_counter() - t0))
    return out

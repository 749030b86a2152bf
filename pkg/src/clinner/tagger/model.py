"""biGRU-CRF tagger with optional gazetteer and section feature embeddings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import crf
from ..annotation import LabelSet, MisalignedMention, OverlappingMentions, encode_document
from ..nn import layers as L
from .config import TaggerConfig
from .vocab import PAD_ID, Vocab


class AlignmentError(ValueError):
    pass


class FeatureConfigMismatch(ValueError):
    pass


@dataclass
class FeaturizedSentence:
    word_ids: np.ndarray   # (T,)
    char_ids: np.ndarray   # (T, L), padded with PAD on both sides and at the tail
    char_lens: np.ndarray  # (T,) including the two boundary pads
    gaz_ids: np.ndarray | None = None
    sec_ids: np.ndarray | None = None

    def __len__(self):
        return len(self.word_ids)


def featurize(tdoc, vocab: Vocab, labels: LabelSet, gaz_mentions=None, section_ids=None,
              max_chars=20) -> list[FeaturizedSentence]:
    """Per-sentence model inputs.

    Gazetteer mentions become IOB label ids over tokens (``O`` when none
    are given); ``section_ids`` is one list of class ids per sentence.
    """
    gaz_tags = None
    if gaz_mentions is not None:
        try:
            gaz_tags = encode_document(tdoc, gaz_mentions)
        except (MisalignedMention, OverlappingMentions) as exc:
            raise AlignmentError(f"gazetteer mentions for {tdoc.doc.id}: {exc}") from None
    if section_ids is not None:
        if len(section_ids) != len(tdoc.sentences) or any(
            len(s) != len(ids) for s, ids in zip(tdoc.sentences, section_ids)
        ):
            raise AlignmentError(f"section ids do not align with the tokens of {tdoc.doc.id}")

    out = []
    for si, sent in enumerate(tdoc.sentences):
        T = len(sent)
        char_seqs = [vocab.char_ids(tok.surface[:max_chars]) for tok in sent]
        width = max(len(c) for c in char_seqs) + 2
        char_ids = np.full((T, width), PAD_ID, dtype=np.int64)
        for i, cs in enumerate(char_seqs):
            char_ids[i, 1:1 + len(cs)] = cs
        out.append(FeaturizedSentence(
            word_ids=np.array([vocab.word_id(tok.surface) for tok in sent], dtype=np.int64),
            char_ids=char_ids,
            char_lens=np.array([len(c) + 2 for c in char_seqs], dtype=np.int64),
            gaz_ids=None if gaz_tags is None else np.array(labels.encode(gaz_tags[si]), dtype=np.int64),
            sec_ids=None if section_ids is None else np.asarray(section_ids[si], dtype=np.int64),
        ))
    return out


class TaggerModel:
    """All learned weights plus the vocabulary and label set they index."""

    def __init__(self, config: TaggerConfig, vocab: Vocab, n_sections=None, embeddings=None):
        self.config = config
        self.vocab = vocab
        self.labels = LabelSet(config.entity_types)
        self.n_sections = n_sections if n_sections is not None else config.n_section_classes
        rng = np.random.default_rng(config.seed)
        c = config
        K = len(self.labels)
        p = {}

        def add(name, value, decay=False):
            p[name] = L.Parameter(name, value, decay)

        word = L.uniform_init(rng, (vocab.n_words, c.word_dim))
        if embeddings is not None:
            self._load_pretrained(word, *embeddings)
        word[PAD_ID] = 0.0
        add("word_emb", word)
        add("char_emb", L.uniform_init(rng, (vocab.n_chars, c.char_emb_dim)))
        add("cnn_filters", L.uniform_init(rng, (c.char_emb_dim, 3, c.char_filters), 3 * c.char_emb_dim), True)
        add("cnn_bias", np.zeros(c.char_filters))
        d_in = c.word_dim + c.char_filters
        if c.use_gazetteer_feature:
            add("gaz_emb", L.uniform_init(rng, (K, c.feature_dim)))
            d_in += c.feature_dim
        if c.use_section_feature:
            add("sec_emb", L.uniform_init(rng, (self.n_sections, c.feature_dim)))
            d_in += c.feature_dim
        for layer in range(c.num_gru_layers):
            for side in ("f", "b"):
                g = L.GruParams.init(rng, d_in, c.hidden_dim)
                add(f"gru{layer}_{side}_W", g.W, True)
                add(f"gru{layer}_{side}_U", g.U, True)
                add(f"gru{layer}_{side}_b", g.b)
            d_in = 2 * c.hidden_dim
        add("out_W", L.uniform_init(rng, (K, d_in)), True)
        add("out_b", np.zeros(K))
        tr = crf.Transitions.for_labels(self.labels, c.constrained_crf)
        add("crf_trans", tr.trans)
        add("crf_start", tr.start)
        add("crf_stop", tr.stop)
        self.params = p
        self._bind()

    def _load_pretrained(self, table, words, matrix):
        if matrix.shape[1] != table.shape[1]:
            raise ValueError(f"embedding dim {matrix.shape[1]} != word_dim {table.shape[1]}")
        for w, row in zip(words, matrix):
            i = self.vocab.word_index.get(w)
            if i is not None:
                table[i] = row

    def _bind(self):
        """Views over parameter arrays; optimizer updates are in place so these stay valid."""
        p = self.params
        self.gru = [
            tuple(
                L.GruParams(p[f"gru{l}_{s}_W"].value, p[f"gru{l}_{s}_U"].value, p[f"gru{l}_{s}_b"].value)
                for s in ("f", "b")
            )
            for l in range(self.config.num_gru_layers)
        ]
        mask = crf.iob_mask(self.labels) if self.config.constrained_crf else None
        self.transitions = crf.Transitions(p["crf_trans"].value, p["crf_start"].value, p["crf_stop"].value, mask)
        self.transitions.apply_mask()

    @property
    def n_parameters(self) -> int:
        return sum(q.value.size for q in self.params.values())

    def weight_params(self):
        return [q for q in self.params.values() if q.decay]

    def zero_grad(self):
        for q in self.params.values():
            q.zero_grad()

    # -- forward / backward -----------------------------------------------

    def _check_features(self, fs: FeaturizedSentence):
        c = self.config
        if c.use_gazetteer_feature and fs.gaz_ids is None:
            raise FeatureConfigMismatch("model uses the gazetteer feature but none was supplied")
        if c.use_section_feature and fs.sec_ids is None:
            raise FeatureConfigMismatch("model uses the section feature but none was supplied")

    def forward(self, fs: FeaturizedSentence, train=False, rng=None):
        """Emission scores (T, 2k+1) and the cache for :meth:`backward`."""
        if len(fs) == 0:
            raise L.EmptySequence("cannot tag an empty sentence")
        self._check_features(fs)
        p = self.params
        rate = self.config.dropout_rate
        parts = [p["word_emb"].value[fs.word_ids]]
        Xc = p["char_emb"].value[fs.char_ids]
        cv, ccache = L.char_cnn_batch_forward(Xc, fs.char_lens, p["cnn_filters"].value, p["cnn_bias"].value)
        parts.append(cv)
        if self.config.use_gazetteer_feature:
            parts.append(p["gaz_emb"].value[fs.gaz_ids])
        if self.config.use_section_feature:
            parts.append(p["sec_emb"].value[fs.sec_ids])
        X = np.concatenate(parts, axis=1)
        X, mask0 = L.dropout(X, rate, rng, train)
        layer_caches = []
        for pf, pb in self.gru:
            H, gcache = L.bigru_forward(X, pf, pb)
            H, m = L.dropout(H, rate, rng, train)
            layer_caches.append((gcache, m))
            X = H
        E = L.linear(X, p["out_W"].value, p["out_b"].value)
        return E, (fs, ccache, [q.shape[1] for q in parts], mask0, layer_caches, X)

    def backward(self, dE, cache):
        """Accumulate parameter gradients of a loss with gradient ``dE`` w.r.t. the emissions."""
        fs, ccache, widths, mask0, layer_caches, X = cache
        p = self.params
        dX, dW, db = L.linear_backward(dE, X, p["out_W"].value)
        p["out_W"].grad += dW
        p["out_b"].grad += db
        for layer in range(len(self.gru) - 1, -1, -1):
            gcache, m = layer_caches[layer]
            pf, pb = self.gru[layer]
            dX, gf, gb = L.bigru_backward(L.dropout_backward(dX, m), gcache, pf, pb)
            for side, g in (("f", gf), ("b", gb)):
                p[f"gru{layer}_{side}_W"].grad += g.W
                p[f"gru{layer}_{side}_U"].grad += g.U
                p[f"gru{layer}_{side}_b"].grad += g.b
        dX = L.dropout_backward(dX, mask0)
        offsets = np.cumsum([0] + widths)
        piece = lambda i: dX[:, offsets[i]:offsets[i + 1]]
        np.add.at(p["word_emb"].grad, fs.word_ids, piece(0))
        dXc, dF, dcb = L.char_cnn_batch_backward(np.ascontiguousarray(piece(1)), ccache)
        p["cnn_filters"].grad += dF
        p["cnn_bias"].grad += dcb
        np.add.at(p["char_emb"].grad, fs.char_ids, dXc)
        i = 2
        if self.config.use_gazetteer_feature:
            np.add.at(p["gaz_emb"].grad, fs.gaz_ids, piece(i))
            i += 1
        if self.config.use_section_feature:
            np.add.at(p["sec_emb"].grad, fs.sec_ids, piece(i))

    def loss_and_grad(self, fs: FeaturizedSentence, gold_ids, train=False, rng=None) -> float:
        """CRF negative log-likelihood of one sentence; gradients are added to ``.grad``."""
        E, cache = self.forward(fs, train, rng)
        loss, dE, (dtr, ds, de) = crf.crf_nll(E, self.transitions, gold_ids)
        p = self.params
        p["crf_trans"].grad += dtr
        p["crf_start"].grad += ds
        p["crf_stop"].grad += de
        self.backward(dE, cache)
        return loss

    def decode(self, fs: FeaturizedSentence) -> list[str]:
        E, _ = self.forward(fs, train=False)
        path, _ = crf.viterbi_decode(E, self.transitions)
        return self.labels.decode(path)

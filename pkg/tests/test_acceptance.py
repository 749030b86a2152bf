"""Acceptance criteria, each at its stated tolerance and time budget.

Run ``pytest tests/test_acceptance.py`` to get one PASS/FAIL line per
criterion in the terminal summary.
"""
import itertools
import json
import time

import numpy as np
import pytest

from clinner.annotation import EntityMention, LabelSet, decode_iob, encode_iob, is_valid_iob, repair_tags
from clinner.corpus import write_corpus
from clinner.crf import Transitions, brute_force, log_partition, viterbi_decode
from clinner.diagnostics import gradient_suite
from clinner.evaluation import (
    aggregate_seeds,
    evaluate,
    fold_lists,
    format_table,
    length_buckets,
    stratified_folds,
    subsample_to_entity_count,
)
from clinner.experiment import ExperimentConfig, run_experiment
from clinner.gazetteer import annotate, build_matcher, term_key
from clinner.synth import SynthSpec, generate_corpus
from clinner.tagger import (
    TaggerConfig,
    TaggerModel,
    TaggerSystem,
    build_vocab,
    load,
    round_half_up,
    save,
    train_with_mean_epoch,
)
from clinner.text import tokenize

TINY = dict(word_dim=8, char_emb_dim=4, char_filters=6, hidden_dim=8)


def test_criterion_1_crf_oracle(criterion):
    with criterion(1, "CRF forward/Viterbi equal brute force on 200 instances") as info:
        rng = np.random.default_rng(2024)
        t0 = time.perf_counter()
        worst = 0.0
        for _ in range(200):
            T, K = int(rng.integers(1, 6)), int(rng.integers(1, 5))
            E = rng.normal(size=(T, K))
            tr = Transitions(rng.normal(size=(K, K)), rng.normal(size=K), rng.normal(size=K))
            logz, best, best_score = brute_force(E, tr)
            worst = max(worst, abs(log_partition(E, tr) - logz))
            path, score = viterbi_decode(E, tr)
            assert path == best and abs(score - best_score) < 1e-9
        elapsed = time.perf_counter() - t0
        info.update(max_logz_err=f"{worst:.1e}", runtime=f"{elapsed:.2f}s")
        assert worst < 1e-9
        assert elapsed < 10


def test_criterion_2_gradient_suite(criterion):
    with criterion(2, "analytic gradients match central differences") as info:
        t0 = time.perf_counter()
        results = gradient_suite(seed=0)
        elapsed = time.perf_counter() - t0
        info.update({name: f"{err:.1e}" for name, err, _, _ in results})
        assert {r[0] for r in results} == {"gru_cell", "bigru", "char_cnn", "linear", "crf_nll", "tagger"}
        for name, err, tol, _ in results:
            assert tol == (1e-6 if name == "crf_nll" else 1e-4)
            assert err < tol, f"{name}: {err:.3e} >= {tol}"
        assert elapsed < 60


def _random_layout(rng, types):
    words = ["".join(rng.choice(list("abcdeé"), size=int(rng.integers(1, 5)))) for _ in range(rng.integers(1, 16))]
    text = " ".join(words)
    toks = tokenize(text)
    mentions, i = [], 0
    while i < len(toks):
        if rng.random() < 0.4:
            j = min(len(toks) - 1, i + int(rng.integers(0, 4)))
            mentions.append(EntityMention(toks[i].start, toks[j].end, str(rng.choice(types)),
                                          text[toks[i].start:toks[j].end]))
            i = j + 1
        else:
            i += 1
    return text, toks, mentions


def test_criterion_3_iob_codec(criterion):
    with criterion(3, "IOB round trip, repair validity and idempotence") as info:
        rng = np.random.default_rng(3)
        types = ["A", "B", "C"]
        for _ in range(1000):
            text, toks, mentions = _random_layout(rng, types)
            assert decode_iob(toks, encode_iob(toks, mentions), text) == sorted(mentions)
        alphabet = ["O"] + [f"{p}-{t}" for p in "BI" for t in types]
        for _ in range(1000):
            tags = [str(t) for t in rng.choice(alphabet, size=int(rng.integers(0, 20)))]
            fixed = repair_tags(tags)
            assert is_valid_iob(fixed) and repair_tags(fixed) == fixed
        sent = "placed on heparin sodium"
        tags = encode_iob(tokenize(sent), [EntityMention(10, 24, "DRUG")])
        assert tags == ["O", "O", "B-DRUG", "I-DRUG"]
        info.update(layouts=1000, repairs=1000)


def _gazetteer_scores(corpus):
    d = corpus.term_dictionary()
    matcher = build_matcher(d)
    gold = {doc.id: doc.mentions for doc in corpus.docs}
    pred = {doc.id: annotate(matcher, doc.tdoc) for doc in corpus.docs}
    sound = all((term_key(m.text, d.stopwords), m.etype) in d for ms in pred.values() for m in ms)
    return evaluate(gold, pred, tuple(corpus.terms)), sound


def test_criterion_4_gazetteer(criterion):
    with criterion(4, "terminology system exact on clean text, sound under noise") as info:
        clean, sound_clean = _gazetteer_scores(generate_corpus(SynthSpec(n_docs=50, seed=41)))
        assert clean.precision() == 1.0 and clean.recall() == 1.0 and sound_clean
        recalls = []
        for noise in (0.1, 0.3, 0.6):
            noisy, sound = _gazetteer_scores(generate_corpus(SynthSpec(n_docs=50, seed=42, noise_rate=noise)))
            assert sound
            recalls.append(noisy.recall())
        info.update(clean_P=clean.precision(), clean_R=clean.recall(),
                    noisy_R="/".join(f"{r:.3f}" for r in recalls))
        assert recalls[1] < 1.0          # 30% surface noise
        assert all(r < 1.0 for r in recalls)


def test_criterion_5_overfit(criterion):
    with criterion(5, "pure tagger overfits a 50-document corpus") as info:
        cfg = TaggerConfig(max_epochs=50)
        assert (cfg.word_dim, cfg.hidden_dim) == (25, 50)
        corpus = generate_corpus(SynthSpec(n_docs=50, seed=1))
        t0 = time.perf_counter()
        system = TaggerSystem(cfg).fit(corpus.docs, corpus.docs)
        elapsed = time.perf_counter() - t0
        gold = {d.id: d.mentions for d in corpus.docs}
        pred = {d.id: system.predict(d) for d in corpus.docs}
        f = evaluate(gold, pred, cfg.entity_types).f("exact")
        info.update(train_F=f"{f:.4f}", epochs=system.report.stopped_epoch, runtime=f"{elapsed:.0f}s")
        assert f >= 0.95
        assert system.report.stopped_epoch <= 50
        assert elapsed < 300


def _write_c6_data(root):
    corpus = generate_corpus(SynthSpec(n_docs=300, seed=7, noise_rate=0.3, dict_coverage=0.8,
                                       sentences_per_doc=(3, 6)))
    write_corpus(root / "train", corpus.docs[:200])
    write_corpus(root / "test", corpus.docs[200:])
    (root / "dictionary.tsv").write_text(corpus.dictionary_tsv(), encoding="utf-8")
    (root / "headings.tsv").write_text(corpus.headings_tsv(), encoding="utf-8")
    (root / "stopwords.txt").write_text("".join(f"{w}\n" for w in corpus.stopwords), encoding="utf-8")
    return corpus


def test_criterion_6_hybrid_low_regime(criterion, tmp_path):
    with criterion(6, "hybrid gain over pure is larger with 20 than with 200 training documents") as info:
        t0 = time.perf_counter()
        _write_c6_data(tmp_path)
        means = {}
        for n_train in (20, 200):
            cfg = ExperimentConfig.from_dict({
                "corpus": str(tmp_path / "train"), "test": str(tmp_path / "test"),
                "dictionary": str(tmp_path / "dictionary.tsv"), "headings": str(tmp_path / "headings.tsv"),
                "stopwords": str(tmp_path / "stopwords.txt"),
                "systems": ["pure", "hybrid"], "seeds": [0, 1, 2, 3, 4], "train_docs": n_train,
                "tagger": {"lr": 0.003, "max_epochs": 25, "patience": 4},
            })
            rep = run_experiment(cfg, tmp_path / f"out{n_train}")
            for system in ("pure", "hybrid"):
                means[(system, n_train)] = rep["systems"][system]["aggregate"]["mean"]["exact/micro/f"]
        elapsed = time.perf_counter() - t0
        gap20 = means[("hybrid", 20)] - means[("pure", 20)]
        gap200 = means[("hybrid", 200)] - means[("pure", 200)]
        info.update({f"{s}@{n}": f"{v:.3f}" for (s, n), v in sorted(means.items())})
        info.update(gap20=f"{gap20:+.3f}", gap200=f"{gap200:+.3f}", runtime=f"{elapsed:.0f}s")
        assert means[("hybrid", 20)] > means[("pure", 20)]
        assert gap20 > gap200
        assert elapsed < 900


def test_criterion_7_metric_fixtures(criterion):
    with criterion(7, "exact/partial scorer fixtures and exact <= partial") as info:
        M = EntityMention
        types = ("Disease", "Drug")
        r = evaluate({"d": [M(0, 10, "Disease")]}, {"d": [M(0, 10, "Disease"), M(20, 25, "Disease")]}, types)
        assert r.precision() == 0.5 and r.recall() == 1.0 and abs(r.f() - 2 / 3) < 1e-12
        r = evaluate({"d": [M(0, 10, "Disease")]}, {"d": [M(3, 12, "Disease")]}, types)
        assert r.get("exact").tp == 0 and r.f("partial") == 1.0
        r = evaluate({"d": [M(0, 10, "Disease")]}, {"d": [M(3, 12, "Drug")]}, types)
        assert r.get("partial").tp == 0
        r = evaluate({"d": [M(0, 10, "Disease")]}, {"d": [M(0, 4, "Disease"), M(5, 10, "Disease")]}, types)
        assert (r.get("partial").tp, r.get("partial").fp) == (1, 1)
        rng = np.random.default_rng(7)
        n_fixtures = 2000
        for _ in range(n_fixtures):
            def draw(n, overlap):
                out, taken = [], set()
                for _ in range(n):
                    s, ln = int(rng.integers(0, 40)), int(rng.integers(1, 8))
                    if not overlap and taken & set(range(s, s + ln)):
                        continue
                    taken |= set(range(s, s + ln))
                    out.append(M(s, s + ln, str(rng.choice(types))))
                return out
            gold = {"d": draw(int(rng.integers(0, 8)), False)}
            pred = {"d": draw(int(rng.integers(0, 8)), True)}
            r = evaluate(gold, pred, types)
            for t in ("micro", *types):
                assert r.get("exact", t).tp <= r.get("partial", t).tp
                assert r.f("exact", t) <= r.f("partial", t)
        info.update(random_fixtures=n_fixtures)


class _Doc:
    def __init__(self, i, doc_type, n_tokens, n_mentions):
        self.id, self.doc_type, self.n_tokens = f"d{i:03d}", doc_type, n_tokens
        self.mentions = [EntityMention(j, j + 1, "DrugName") for j in range(n_mentions)]


def test_criterion_8_protocol(criterion):
    with criterion(8, "folds, subsampling, seed aggregation, mean-epoch retraining") as info:
        rng = np.random.default_rng(8)
        docs = [_Doc(i, str(rng.choice(["a", "b", "c"])), int(rng.integers(10, 500)), int(rng.integers(0, 6)))
                for i in range(150)]
        assign = stratified_folds(docs, 6, seed=1)
        buckets = dict(zip((d.id for d in docs), length_buckets([d.n_tokens for d in docs])))
        worst = 0
        for key in {(d.doc_type, buckets[d.id]) for d in docs}:
            counts = np.bincount([assign[d.id] for d in docs if (d.doc_type, buckets[d.id]) == key], minlength=6)
            worst = max(worst, int(counts.max() - counts.min()))
        assert worst <= 1
        sub = subsample_to_entity_count(docs, 100, seed=3)
        got = sum(len(d.mentions) for d in sub)
        assert got >= 100 and got - len(sub[-1].mentions) < 100
        assert [d.id for d in sub] == [d.id for d in subsample_to_entity_count(docs, 100, seed=3)]
        fake = [{"exact/micro/f": f, "exact/micro/p": f, "exact/micro/r": f} for f in (0.8, 0.9, 0.85, 0.7, 0.95)]
        agg = aggregate_seeds(fake)
        row = format_table([("synthetic", "hybrid", agg)]).splitlines()[1]
        assert "84.0 [70.0-95.0]" in row
        corpus = generate_corpus(SynthSpec(n_docs=18, seed=8, sentences_per_doc=(3, 5)))
        cfg = TaggerConfig(word_dim=10, char_emb_dim=6, char_filters=8, hidden_dim=16, max_epochs=15,
                           patience=3, lr=0.02)
        folds = [corpus.docs[0:6], corpus.docs[6:12], corpus.docs[12:18]]
        res = train_with_mean_epoch(lambda ds: TaggerModel(cfg, build_vocab([d.tdoc for d in ds])), folds)
        expected = round_half_up(sum(res.best_epochs) / len(res.best_epochs))
        assert len(set(res.best_epochs)) > 1
        assert res.n_epochs == expected and res.reports[-1].stopped_epoch == expected
        assert round_half_up(5.0) == 5 and round_half_up(4.5) == 5
        info.update(max_stratum_imbalance=worst, subsample_entities=got, best_epochs=res.best_epochs,
                    final_epochs=res.n_epochs)


def test_criterion_9_determinism(criterion, tmp_path):
    with criterion(9, "train, predict, synth, crossval reproducible; save/load exact") as info:
        spec = SynthSpec(n_docs=10, seed=9, sentences_per_doc=(2, 4), noise_rate=0.2)
        a, b = tmp_path / "s1", tmp_path / "s2"
        generate_corpus(spec).write(a)
        generate_corpus(spec).write(b)
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        assert files and all((a / f).read_bytes() == (b / f).read_bytes() for f in files)
        corpus = generate_corpus(spec)
        cfg = TaggerConfig(**TINY, max_epochs=3, lr=0.01, seed=4)
        runs = [TaggerSystem(cfg).fit(corpus.docs[:7], corpus.docs[7:]) for _ in range(2)]
        assert runs[0].report == runs[1].report
        for k, q in runs[0].model.params.items():
            assert np.array_equal(q.value, runs[1].model.params[k].value)
        preds = [[s.predict(d) for d in corpus.docs] for s in runs]
        assert preds[0] == preds[1]
        save(runs[0].model, tmp_path / "m.npz")
        loaded = load(tmp_path / "m.npz")
        from clinner.tagger import predict
        assert [predict(loaded, d.tdoc) for d in corpus.docs] == preds[0]
        exp = ExperimentConfig.from_dict({
            "corpus": str(a / "docs"), "dictionary": str(a / "dictionary.tsv"), "headings": str(a / "headings.tsv"),
            "systems": ["terminology", "pure", "hybrid"], "seeds": [0, 1], "folds": 2,
            "tagger": {**TINY, "max_epochs": 2, "lr": 0.01},
        })
        reports = []
        for out in ("cv1", "cv2"):
            run_experiment(exp, tmp_path / out)
            reports.append((tmp_path / out / "report.json").read_bytes())
        assert reports[0] == reports[1]
        info.update(synth_files=len(files), crossval_report_bytes=len(reports[0]))

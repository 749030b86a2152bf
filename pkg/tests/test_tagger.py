import importlib

import numpy as np
import pytest

from clinner.annotation import EntityMention, LabelSet, ParseError, is_valid_iob
from clinner.corpus import AnnotatedDocument
from clinner.gazetteer import TermDictionary, build_matcher
from clinner.sections import HeadingLexicon
from clinner.tagger import (
    AlignmentError,
    ConfigError,
    CorruptContainer,
    FeatureConfigMismatch,
    FeatureSource,
    FormatVersionMismatch,
    NoTrainingData,
    TaggerConfig,
    TaggerModel,
    TaggerSystem,
    build_vocab,
    featurize,
    load,
    load_config,
    load_embeddings,
    make_examples,
    predict,
    random_search,
    round_half_up,
    save,
    train,
    train_with_mean_epoch,
)
from clinner.tagger.vocab import NUM_ID, UNK_ID
from clinner.text import RawDocument, tokenize_document

train_mod = importlib.import_module("clinner.tagger.train")

TINY = dict(word_dim=6, char_emb_dim=4, char_filters=5, hidden_dim=6, dropout_rate=0.0)


def doc(text, mentions=(), doc_id="d"):
    return AnnotatedDocument(tokenize_document(RawDocument(doc_id, text)), list(mentions))


def tiny_model(docs, **kw):
    cfg = TaggerConfig(**{**TINY, **kw})
    return TaggerModel(cfg, build_vocab([d.tdoc for d in docs]))


def test_featurize_gazetteer_ids():
    d = doc("He takes heparin sodium")
    labels = LabelSet()
    vocab = build_vocab([d.tdoc])
    fs = featurize(d.tdoc, vocab, labels, [EntityMention(9, 23, "DrugName")], None)[0]
    b, i = labels.index["B-DrugName"], labels.index["I-DrugName"]
    assert fs.gaz_ids.tolist() == [0, 0, b, i]
    fs = featurize(d.tdoc, vocab, labels, [], None)[0]
    assert fs.gaz_ids.tolist() == [0, 0, 0, 0]


def test_featurize_unknown_and_numbers():
    vocab = build_vocab([doc("aspirin given").tdoc])
    fs = featurize(doc("zzz given 40").tdoc, vocab, LabelSet())[0]
    assert fs.word_ids[0] == UNK_ID
    assert fs.word_ids[2] == NUM_ID
    assert fs.word_ids[1] == vocab.word_id("given")


def test_featurize_alignment_errors():
    d = doc("He takes heparin")
    vocab = build_vocab([d.tdoc])
    with pytest.raises(AlignmentError):
        featurize(d.tdoc, vocab, LabelSet(), [EntityMention(4, 7, "DrugName")], None)
    with pytest.raises(AlignmentError):
        featurize(d.tdoc, vocab, LabelSet(), None, [[0, 0]])


def test_emission_shape_and_eval_determinism():
    d = doc("one two three four five six seven")
    m = tiny_model([d])
    fs = make_examples(m, [d])[0].sentences[0]
    E1, _ = m.forward(fs)
    E2, _ = m.forward(fs)
    assert E1.shape == (7, 11)
    np.testing.assert_array_equal(E1, E2)


def test_hybrid_disabled_matches_pure_parameter_count():
    d = doc("some text")
    vocab = build_vocab([d.tdoc])
    pure = TaggerModel(TaggerConfig(**TINY), vocab)
    off = TaggerModel(TaggerConfig(**TINY, use_gazetteer_feature=False, use_section_feature=False), vocab)
    hyb = TaggerModel(TaggerConfig(**TINY, use_gazetteer_feature=True, use_section_feature=True), vocab, 8)
    assert off.n_parameters == pure.n_parameters
    assert set(off.params) == set(pure.params)
    n_tags = len(LabelSet())
    extra = n_tags * 5 + 8 * 5 + 2 * 3 * 6 * 10  # feature tables + wider GRU input
    assert hyb.n_parameters - pure.n_parameters == extra


def test_config_validation_and_flat_file(tmp_path):
    with pytest.raises(ConfigError):
        TaggerConfig(hidden_dim=0)
    with pytest.raises(ConfigError):
        TaggerConfig(dropout_rate=1.0)
    with pytest.raises(ConfigError):
        TaggerConfig(use_gazetteer_feature=True, feature_dim=7)
    with pytest.raises(ConfigError, match="bogus"):
        TaggerConfig.from_dict({"bogus": 1})
    p = tmp_path / "c.cfg"
    p.write_text("# tiny\nhidden_dim = 7\nlr=0.01\nuse_section_feature=true\nentity_types=A,B\n")
    cfg = load_config(p)
    assert (cfg.hidden_dim, cfg.lr, cfg.use_section_feature, cfg.entity_types) == (7, 0.01, True, ("A", "B"))
    assert TaggerConfig.from_dict(cfg.to_dict()) == cfg
    assert TaggerConfig.english().word_dim == 100 and TaggerConfig.french().word_dim == 200


def test_feature_mismatch():
    d = doc("takes heparin")
    m = tiny_model([d], use_gazetteer_feature=True)
    with pytest.raises(FeatureConfigMismatch):
        predict(m, d.tdoc)
    with pytest.raises(FeatureConfigMismatch):
        make_examples(m, [d])
    pure = tiny_model([d])
    with pytest.raises(FeatureConfigMismatch):
        predict(pure, d.tdoc, gaz_mentions=[])


def test_untrained_model_valid_iob():
    d = doc("a b c d e f g h. i j k l")
    for seed in range(5):
        m = tiny_model([d], seed=seed)
        preds = predict(m, d.tdoc)
        for sent, fs in zip(d.tdoc.sentences, make_examples(m, [d], with_gold=False)[0].sentences):
            assert is_valid_iob(m.decode(fs))
        ordered = sorted(preds)
        assert all(not a.overlaps(b) for a, b in zip(ordered, ordered[1:]))


def test_overfit_one_sentence():
    d = doc("patient took aspirin for chest pain", [EntityMention(13, 20, "DrugName"),
                                                   EntityMention(25, 35, "DiseaseDisorder")])
    m = tiny_model([d], lr=0.05)
    train(m, [d], fixed_epochs=40)
    assert [(x.start, x.end, x.etype) for x in predict(m, d.tdoc)] == [(13, 20, "DrugName"), (25, 35, "DiseaseDisorder")]


def test_train_requires_data_and_dev():
    d = doc("some text")
    m = tiny_model([d])
    with pytest.raises(ValueError):
        train(m, [d])
    with pytest.raises(NoTrainingData):
        train(m, [doc("")], fixed_epochs=1)


def test_train_determinism_and_patience(clean_corpus):
    tr, dev = clean_corpus.docs[:6], clean_corpus.docs[6:9]
    reports, weights = [], []
    for _ in range(2):
        s = TaggerSystem(TaggerConfig(**{**TINY, "dropout_rate": 0.5}, max_epochs=4, lr=0.01, seed=3))
        s.fit(tr, dev)
        reports.append(s.report)
        weights.append({k: q.value.copy() for k, q in s.model.params.items()})
    assert reports[0] == reports[1]
    for k in weights[0]:
        np.testing.assert_array_equal(weights[0][k], weights[1][k])
    r = reports[0]
    assert r.best_epoch <= r.stopped_epoch
    assert all(0.0 <= f <= 1.0 for f in r.dev_f) and all(np.isfinite(r.train_loss))
    s = TaggerSystem(TaggerConfig(**TINY, max_epochs=20, patience=0, lr=1e-12)).fit(tr, dev)
    # with a negligible step size dev F never improves after epoch 1
    assert s.report.dev_f[1] <= s.report.dev_f[0]
    assert s.report.stopped_epoch == 2 and s.report.best_epoch == 1


def test_best_weights_restored(clean_corpus):
    tr, dev = clean_corpus.docs[:6], clean_corpus.docs[6:9]
    s = TaggerSystem(TaggerConfig(**TINY, max_epochs=6, patience=2, lr=0.02)).fit(tr, dev)
    from clinner.tagger.train import dev_f_score
    ex = make_examples(s.model, dev)
    assert dev_f_score(s.model, ex) == s.report.best_dev_f


def test_round_half_up():
    assert [round_half_up(x) for x in (4.5, 5.0, 5.49, 2.5, 0.5)] == [5, 5, 5, 3, 1]


def test_mean_epoch_uses_rounded_mean(monkeypatch):
    calls = []
    real = train_mod.TrainReport

    def fake_train(model, train_docs, dev_docs=None, features=None, fixed_epochs=None, progress=None):
        calls.append(fixed_epochs)
        best = [4, 6][len(calls) - 1] if fixed_epochs is None else fixed_epochs
        return real(best_epoch=best, stopped_epoch=best)

    monkeypatch.setattr(train_mod, "train", fake_train)
    res = train_with_mean_epoch(lambda docs: object(), [[1], [2]])
    assert res.best_epochs == [4, 6] and res.n_epochs == 5
    assert calls == [None, None, 5]
    with pytest.raises(ValueError):
        train_with_mean_epoch(lambda docs: object(), [[1, 2]])


def test_mean_epoch_deterministic(clean_corpus):
    folds = [clean_corpus.docs[0:3], clean_corpus.docs[3:6]]
    cfg = TaggerConfig(**TINY, max_epochs=3, lr=0.01)
    factory = lambda docs: TaggerModel(cfg, build_vocab([d.tdoc for d in docs]))
    a, b = (train_with_mean_epoch(factory, folds) for _ in range(2))
    assert a.best_epochs == b.best_epochs and a.n_epochs == b.n_epochs
    for k in a.model.params:
        np.testing.assert_array_equal(a.model.params[k].value, b.model.params[k].value)


def _hybrid_system(corpus, **kw):
    d = TermDictionary()
    for term, etype in corpus.dictionary:
        d.add(term, etype)
    lex = HeadingLexicon.from_pairs(corpus.headings)
    feats = FeatureSource(build_matcher(d), lex)
    cfg = TaggerConfig(**TINY, use_gazetteer_feature=True, use_section_feature=True, **kw)
    return TaggerSystem(cfg, feats)


def test_save_load_round_trip(tmp_path, clean_corpus):
    s = _hybrid_system(clean_corpus, max_epochs=2).fit(clean_corpus.docs[:4], fixed_epochs=2)
    path = tmp_path / "m.npz"
    save(s.model, path)
    m2 = load(path)
    assert m2.config == s.model.config and m2.vocab == s.model.vocab
    for k, q in s.model.params.items():
        np.testing.assert_array_equal(q.value, m2.params[k].value)
    for d in clean_corpus.docs[4:8]:
        gaz, sec = s.features.for_model(m2, d.tdoc)
        assert predict(m2, d.tdoc, gaz, sec) == s.predict(d)
        fs = make_examples(m2, [d], s.features, with_gold=False)[0].sentences[0]
        np.testing.assert_array_equal(m2.forward(fs)[0], s.model.forward(fs)[0])


def test_container_errors(tmp_path):
    d = doc("text here")
    m = tiny_model([d])
    path = tmp_path / "m.npz"
    save(m, path)
    raw = path.read_bytes()
    bad = tmp_path / "trunc.npz"
    bad.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(CorruptContainer):
        load(bad)
    import clinner.tagger.persist as persist
    old = persist.FORMAT_VERSION
    try:
        persist.FORMAT_VERSION = old + 1
        save(m, path)
    finally:
        persist.FORMAT_VERSION = old
    with pytest.raises(FormatVersionMismatch):
        load(path)


def test_embeddings_loader(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("2 3\nAspirin 1 2 3\naspirin 9 9 9\nheparin 0.5 0 -1\n", encoding="utf-8")
    words, M = load_embeddings(p)
    assert words == ["aspirin", "heparin"]
    np.testing.assert_array_equal(M, [[1, 2, 3], [0.5, 0, -1]])
    p.write_text("a 1 2\nb 1\n")
    with pytest.raises(ParseError):
        load_embeddings(p)
    d = doc("aspirin given")
    s = TaggerSystem(TaggerConfig(**{**TINY, "word_dim": 3}), embeddings=(words, M))
    m = s.new_model([d])
    np.testing.assert_array_equal(m.params["word_emb"].value[m.vocab.word_id("heparin")], [0.5, 0, -1])
    np.testing.assert_array_equal(m.params["word_emb"].value[m.vocab.word_id("Aspirin")], [1, 2, 3])


def test_random_search_budget_and_determinism():
    space = {"hidden_dim": [4, 8, 16], "lr": {"low": 1e-4, "high": 1e-1, "log": True}}
    scorer = lambda cfg, folds: cfg.hidden_dim + cfg.lr
    best, trials = random_search(space, [[], []], budget=1, seed=5, scorer=scorer)
    assert len(trials) == 1
    assert best.hidden_dim == trials[0]["params"]["hidden_dim"]
    _, t1 = random_search(space, [[], []], budget=6, seed=5, scorer=scorer)
    _, t2 = random_search(space, [[], []], budget=6, seed=5, scorer=scorer)
    assert t1 == t2
    with pytest.raises(ValueError):
        random_search(space, [[], []], budget=0)


def test_random_search_prefers_working_config(clean_corpus):
    docs = clean_corpus.docs[:8]
    folds = [docs[:4], docs[4:]]
    space = {"lr": [1e-9, 0.02]}
    base = TaggerConfig(**TINY, max_epochs=6, patience=2)
    best, trials = random_search(space, folds, budget=6, seed=1, base=base)
    assert {t["params"]["lr"] for t in trials} == {1e-9, 0.02}
    assert best.lr == 0.02

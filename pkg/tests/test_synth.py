import hashlib
from pathlib import Path

import pytest

from clinner.annotation import encode_document
from clinner.evaluation import evaluate
from clinner.gazetteer import annotate, build_matcher, term_key
from clinner.sections import detect_headings
from clinner.synth import SynthSpec, generate_corpus


def tree_digest(root):
    h = hashlib.sha256()
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def gazetteer_report(corpus):
    matcher = build_matcher(corpus.term_dictionary())
    gold = {d.id: d.mentions for d in corpus.docs}
    pred = {d.id: annotate(matcher, d.tdoc) for d in corpus.docs}
    return evaluate(gold, pred, tuple(corpus.terms)), pred


def test_byte_identical(tmp_path):
    spec = SynthSpec(n_docs=8, seed=5, noise_rate=0.3, dict_coverage=0.8)
    generate_corpus(spec).write(tmp_path / "a")
    generate_corpus(spec).write(tmp_path / "b")
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
    generate_corpus(SynthSpec(n_docs=8, seed=6)).write(tmp_path / "c")
    assert tree_digest(tmp_path / "a") != tree_digest(tmp_path / "c")


def test_plant_rate_zero():
    c = generate_corpus(SynthSpec(n_docs=10, seed=1, plant_rate=0.0))
    assert all(not d.mentions for d in c.docs)


def test_per_type_plant_rate():
    c = generate_corpus(SynthSpec(n_docs=15, seed=2, plant_rate={"DrugName": 0.5}))
    types = {m.etype for d in c.docs for m in d.mentions}
    assert types == {"DrugName"}


def test_gold_is_well_formed(clean_corpus):
    for d in clean_corpus.docs:
        encode_document(d.tdoc, d.mentions)
        for m in d.mentions:
            assert d.text[m.start:m.end] == m.text
    assert sum(len(d.mentions) for d in clean_corpus.docs) > 50
    assert len({d.doc_type for d in clean_corpus.docs}) > 1


def test_headings_inserted(clean_corpus):
    lex = clean_corpus.heading_lexicon()
    assert sum(len(detect_headings(d.tdoc, lex)) for d in clean_corpus.docs) >= len(clean_corpus.docs)


def test_noise_free_gazetteer_is_perfect(clean_corpus):
    r, _ = gazetteer_report(clean_corpus)
    assert r.precision() == 1.0 and r.recall() == 1.0


def test_noise_lowers_recall_but_stays_sound(noisy_corpus):
    r, pred = gazetteer_report(noisy_corpus)
    assert r.recall() < 1.0
    d = noisy_corpus.term_dictionary()
    for doc in noisy_corpus.docs:
        for m in pred[doc.id]:
            assert (term_key(m.text, d.stopwords), m.etype) in d
    # noised gold surfaces are never dictionary entries
    by_span = {(doc.id, m.start, m.end): m for doc in noisy_corpus.docs for m in doc.mentions}
    assert noisy_corpus.noisy
    for key in noisy_corpus.noisy:
        m = by_span[key]
        assert (term_key(m.text, d.stopwords), m.etype) not in d


def test_dictionary_coverage(noisy_corpus):
    n_terms = sum(len(v) for v in noisy_corpus.terms.values())
    assert len(noisy_corpus.dictionary) == pytest.approx(0.8 * n_terms, abs=len(noisy_corpus.terms))


def test_invalid_spec():
    for kw in ({"noise_rate": 1.5}, {"plant_rate": -0.1}, {"sentences_per_doc": (3, 2)}, {"n_docs": -1}):
        with pytest.raises(ValueError):
            SynthSpec(**kw)

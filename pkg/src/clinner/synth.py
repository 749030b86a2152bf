"""Seeded synthetic clinical-like corpora with planted dictionary entities.

Text is built from pseudo-words, so the only structure is what the
generator plants: typed terms (some multi-token, some with an inner
stopword), per-type cue words, section headings that shift entity rates,
and optional surface noise on planted mentions. Term and background tokens
never collide, which makes the terminology system exact on noise-free data.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotation import DEFAULT_TYPES, EntityMention, encode_document
from .corpus import AnnotatedDocument, write_corpus, write_text
from .gazetteer import TermDictionary, term_key
from .sections import DEFAULT_SECTION_CLASSES, HeadingLexicon
from .text import DEFAULT_ABBREVIATIONS, MATCH_POLICY, RawDocument, normalize_token, tokenize_document

CONSONANTS = "bcdfghjklmnprstvz"
VOWELS = "aeiou"
ACCENTED = {"e": "é", "a": "à", "o": "ô", "i": "ï", "u": "ù"}
STOPWORDS = ("de", "du", "of", "the")

SUFFIXES = {
    "DrugName": ("ine", "ol", "zan"),
    "SignSymptom": ("algie", "ur"),
    "DiseaseDisorder": ("ite", "ome", "ose"),
    "DiagProcLabTest": ("graphie", "scopie", "metrie"),
    "TherapeuticProc": ("ectomie", "plastie"),
}

HEADINGS = {
    "HISTORY": ("History", "Antécédents", "Past medical history"),
    "MEDICATIONS": ("Medications", "Traitement", "Current medications"),
    "EXAM": ("Physical examination", "Examen clinique"),
    "LABS": ("Laboratory results", "Biologie"),
    "IMAGING": ("Imaging", "Imagerie"),
    "PLAN": ("Plan", "Conduite à tenir"),
    "OTHER": ("Comments", "Divers"),
}

DOC_TYPE_SECTIONS = {
    "discharge_summary": ("HISTORY", "MEDICATIONS", "EXAM", "LABS", "PLAN"),
    "letter": ("HISTORY", "EXAM", "PLAN", "MEDICATIONS"),
    "operative_report": ("HISTORY", "OTHER", "PLAN"),
    "exam_report": ("LABS", "IMAGING", "OTHER"),
}

# section class -> entity type -> rate multiplier
SECTION_BOOST = {
    "HISTORY": {"DiseaseDisorder": 2.0, "SignSymptom": 2.0, "DrugName": 0.5},
    "MEDICATIONS": {"DrugName": 3.0, "DiagProcLabTest": 0.3, "SignSymptom": 0.3},
    "EXAM": {"SignSymptom": 2.5},
    "LABS": {"DiagProcLabTest": 3.0, "DrugName": 0.3},
    "IMAGING": {"DiagProcLabTest": 2.0, "DiseaseDisorder": 1.5},
    "PLAN": {"TherapeuticProc": 2.5, "DrugName": 1.5},
    "OTHER": {"TherapeuticProc": 1.5},
}


@dataclass
class SynthSpec:
    n_docs: int = 50
    doc_types: dict = field(default_factory=lambda: {
        "discharge_summary": 0.4, "letter": 0.3, "operative_report": 0.15, "exam_report": 0.15})
    sentences_per_doc: tuple = (4, 10)
    background_vocab: int = 400
    entity_types: tuple = DEFAULT_TYPES
    terms_per_type: int = 60
    plant_rate: object = 0.3
    noise_rate: float = 0.0
    dict_coverage: float = 1.0
    cue_rate: float = 0.6
    seed: int = 0
    id_prefix: str = "synth"

    def __post_init__(self):
        self.entity_types = tuple(self.entity_types)
        self.sentences_per_doc = tuple(self.sentences_per_doc)
        rates = [self.noise_rate, self.dict_coverage, self.cue_rate]
        rates += list(self.plant_rate.values()) if isinstance(self.plant_rate, dict) else [self.plant_rate]
        if any(not 0.0 <= r <= 1.0 for r in rates):
            raise ValueError("rates must lie in [0, 1]")
        if self.n_docs < 0 or self.terms_per_type < 1 or self.background_vocab < 1:
            raise ValueError("n_docs >= 0, terms_per_type >= 1 and background_vocab >= 1 required")
        lo, hi = self.sentences_per_doc
        if not 1 <= lo <= hi:
            raise ValueError("sentences_per_doc must be (lo, hi) with 1 <= lo <= hi")

    def rate(self, etype):
        if isinstance(self.plant_rate, dict):
            return float(self.plant_rate.get(etype, 0.0))
        return float(self.plant_rate)


@dataclass
class SynthCorpus:
    docs: list
    terms: dict           # etype -> list of term surfaces (full entity vocabulary)
    dictionary: list      # (term, etype) pairs exposed to the terminology system
    stopwords: tuple
    headings: list        # (heading, class) pairs
    frequency: dict       # background token -> count
    noisy: set = field(default_factory=set)  # (doc id, start, end) of noised mentions

    def term_dictionary(self, types=None) -> TermDictionary:
        d = TermDictionary(stopwords=frozenset(self.stopwords), types=tuple(types or self.terms))
        for term, etype in self.dictionary:
            d.add(term, etype, "synth")
        return d

    def heading_lexicon(self) -> HeadingLexicon:
        return HeadingLexicon.from_pairs(self.headings, DEFAULT_SECTION_CLASSES)

    def dictionary_tsv(self) -> str:
        return "".join(f"{t}\t{e}\tsynth\n" for t, e in self.dictionary)

    def headings_tsv(self) -> str:
        return "".join(f"{h}\t{c}\n" for h, c in self.headings)

    def write(self, directory):
        directory = Path(directory)
        write_corpus(directory / "docs", self.docs)
        write_text(directory / "dictionary.tsv", self.dictionary_tsv())
        write_text(directory / "headings.tsv", self.headings_tsv())
        write_text(directory / "stopwords.txt", "".join(f"{w}\n" for w in self.stopwords))
        write_text(directory / "frequency.tsv", "".join(f"{w}\t{c}\n" for w, c in self.frequency.items()))


class _Words:
    """Pseudo-word factory that never hands out the same normalized token twice."""

    def __init__(self, rng, reserved):
        self.rng = rng
        self.used = set(reserved)

    def make(self, syllables, suffix="", accent_p=0.0):
        for _ in range(1000):
            w = "".join(CONSONANTS[self.rng.integers(len(CONSONANTS))] + VOWELS[self.rng.integers(len(VOWELS))]
                        for _ in range(syllables)) + suffix
            if accent_p and self.rng.random() < accent_p:
                i = int(self.rng.integers(len(w)))
                if w[i] in ACCENTED:
                    w = w[:i] + ACCENTED[w[i]] + w[i + 1:]
            key = normalize_token(w, MATCH_POLICY)
            if key not in self.used:
                self.used.add(key)
                return w
        raise RuntimeError("pseudo-word space exhausted; lower the vocabulary sizes")


def _reserved_tokens():
    out = set(STOPWORDS) | {a.lower() for a in DEFAULT_ABBREVIATIONS}
    for forms in HEADINGS.values():
        for h in forms:
            out |= set(term_key(h))
    return out


def _make_term(words: _Words, rng, etype):
    r = rng.random()
    n = 1 if r < 0.6 else (2 if r < 0.9 else 3)
    suffixes = SUFFIXES.get(etype, ("",))
    toks = [words.make(int(rng.integers(2, 4)), accent_p=0.2) for _ in range(n - 1)]
    suffix = suffixes[int(rng.integers(len(suffixes)))] if rng.random() < 0.7 else ""
    toks.append(words.make(int(rng.integers(1, 3)), suffix, accent_p=0.2))
    if n == 3 and rng.random() < 0.5:
        toks[1] = STOPWORDS[int(rng.integers(len(STOPWORDS)))]
    return " ".join(toks)


def _misspell(rng, token, taken):
    letters = [i for i, ch in enumerate(token) if ch.isalpha()]
    for _ in range(100):
        i = letters[int(rng.integers(len(letters)))]
        ch = CONSONANTS[int(rng.integers(len(CONSONANTS)))] if token[i] not in VOWELS else \
            VOWELS[int(rng.integers(len(VOWELS)))]
        cand = token[:i] + ch + token[i + 1:]
        if normalize_token(cand) != normalize_token(token) and normalize_token(cand) not in taken:
            return cand
    return token + "x"


def _noisy_surface(rng, term, taken):
    toks = term.split(" ")
    content = [i for i, t in enumerate(toks) if t not in STOPWORDS]
    i = content[int(rng.integers(len(content)))]
    toks[i] = _misspell(rng, toks[i], taken)
    j = content[int(rng.integers(len(content)))]
    if rng.random() < 0.5:
        toks[j] = toks[j].upper() if rng.random() < 0.5 else toks[j].capitalize()
    elif rng.random() < 0.5:
        toks[j] = normalize_token(toks[j], MATCH_POLICY) if toks[j].islower() else toks[j]
    return " ".join(toks)


def _capitalize(s):
    return s[:1].upper() + s[1:]


def generate_corpus(spec: SynthSpec) -> SynthCorpus:
    rng = np.random.default_rng(spec.seed)
    words = _Words(rng, _reserved_tokens())

    terms = {t: [_make_term(words, rng, t) for _ in range(spec.terms_per_type)] for t in spec.entity_types}
    cues = {t: [words.make(2) for _ in range(3)] for t in spec.entity_types}
    background = [words.make(int(rng.integers(2, 4))) for _ in range(spec.background_vocab)]
    zipf = 1.0 / np.arange(1, len(background) + 1)
    zipf /= zipf.sum()
    frequency = {w: int(round(1e6 * p)) for w, p in zip(background, zipf)}
    taken = set(words.used)

    dictionary = []
    for t in spec.entity_types:
        order = rng.permutation(len(terms[t]))
        n_cov = int(round(spec.dict_coverage * len(terms[t])))
        dictionary += [(terms[t][i], t) for i in sorted(order[:n_cov])]

    headings = [(h, cls) for cls in DEFAULT_SECTION_CLASSES for h in HEADINGS[cls]]
    type_names = list(spec.doc_types)
    type_p = np.array([spec.doc_types[n] for n in type_names], dtype=np.float64)
    type_p /= type_p.sum()

    docs, noisy = [], set()
    lo, hi = spec.sentences_per_doc
    for d in range(spec.n_docs):
        doc_id = f"{spec.id_prefix}-{spec.seed}-{d:04d}"
        dtype = type_names[int(rng.choice(len(type_names), p=type_p))]
        sections = DOC_TYPE_SECTIONS.get(dtype, DEFAULT_SECTION_CLASSES)
        n_sent = int(rng.integers(lo, hi + 1))
        # spread sentences over sections, at least one section
        n_sec = min(len(sections), max(1, n_sent // 2))
        per_sec = np.full(n_sec, n_sent // n_sec)
        per_sec[: n_sent % n_sec] += 1

        pieces, mentions, pos = [], [], 0

        def emit(s):
            nonlocal pos
            pieces.append(s)
            pos += len(s)

        for si in range(n_sec):
            cls = sections[si]
            forms = HEADINGS[cls]
            if si:
                emit("\n\n")
            emit(forms[int(rng.integers(len(forms)))] + ":")
            emit("\n\n")
            for k in range(int(per_sec[si])):
                if k:
                    emit(" ")
                n_bg = int(rng.integers(4, 11))
                bg = [background[i] for i in rng.choice(len(background), size=n_bg, p=zipf)]
                if rng.random() < 0.2:
                    slot = int(rng.integers(1, n_bg))
                    bg[slot:slot] = [str(int(rng.integers(1, 500))), "mg"]
                slots = {}
                for t in spec.entity_types:
                    rate = min(1.0, spec.rate(t) * SECTION_BOOST.get(cls, {}).get(t, 1.0))
                    if rng.random() < rate:
                        free = [s for s in range(len(bg)) if s not in slots]
                        if free:
                            slots[free[int(rng.integers(len(free)))]] = t
                toks = []  # (surface, etype or None)
                for s, w in enumerate(bg):
                    if s in slots:
                        t = slots[s]
                        if rng.random() < spec.cue_rate:
                            toks.append((cues[t][int(rng.integers(3))], None))
                        toks.append((terms[t][int(rng.integers(len(terms[t])))], t))
                    toks.append((w, None))
                for i, (surface, t) in enumerate(toks):
                    if i:
                        emit(" ")
                    if t is not None and rng.random() < spec.noise_rate:
                        surface = _noisy_surface(rng, surface, taken)
                        noisy.add((doc_id, pos, pos + len(surface)))
                    if i == 0:
                        surface = _capitalize(surface)
                    if t is not None:
                        mentions.append(EntityMention(pos, pos + len(surface), t, surface))
                    emit(surface)
                emit(".")
        text = "".join(pieces)
        tdoc = tokenize_document(RawDocument(doc_id, text, dtype))
        encode_document(tdoc, mentions)  # alignment guard
        docs.append(AnnotatedDocument(tdoc, mentions))

    return SynthCorpus(docs, terms, dictionary, STOPWORDS, headings, frequency, noisy)

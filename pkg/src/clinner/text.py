"""Rule-based sentence segmentation, tokenization and token normalization.

Offsets are always counted in Unicode code points so they line up with
BRAT standoff files.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

NUM_TOKEN = "<num>"

DEFAULT_ABBREVIATIONS = frozenset(
    ["Dr", "Pr", "M", "Mme", "Mlle", "mg", "cf", "vs", "etc", "ex", "Mr", "Mrs", "St", "No"]
)

_NUMBER_RE = re.compile(r"\d+(?:[.,]\d+)*")
_BLANK_LINE_RE = re.compile(r"\n[ \t\r\f\v]*\n")
_TERMINAL_RE = re.compile(r"[.!?]+(?=\s+[^\W_]|\s+\d)")


@dataclass(frozen=True)
class NormPolicy:
    lowercase: bool = True
    strip_accents: bool = True
    numbers: bool = False


MATCH_POLICY = NormPolicy()
MODEL_POLICY = NormPolicy(numbers=True)


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str
    doc_type: str = "unknown"

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be non-empty")


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int
    norm: str


@dataclass
class TokenizedDocument:
    doc: RawDocument
    sentences: list[list[Token]]
    spans: list[tuple[int, int]] = field(default_factory=list)

    @property
    def tokens(self) -> list[Token]:
        return [tok for sent in self.sentences for tok in sent]

    def __len__(self):
        return sum(len(s) for s in self.sentences)


def strip_diacritics(s: str) -> str:
    decomposed = unicodedata.normalize("NFD", s)
    kept = "".join(ch for ch in decomposed if not unicodedata.category(ch).startswith("M"))
    return unicodedata.normalize("NFC", kept)


def normalize_token(surface: str, policy: NormPolicy = MATCH_POLICY) -> str:
    if surface == NUM_TOKEN:
        return surface
    if policy.numbers and _NUMBER_RE.fullmatch(surface):
        return NUM_TOKEN
    out = surface
    if policy.lowercase:
        out = out.lower()
    if policy.strip_accents:
        out = strip_diacritics(out)
    # a lone combining mark can strip to nothing
    return out or surface


def load_abbreviations(path) -> frozenset[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(line.strip() for line in lines if line.strip())


def _preceding_word(text: str, pos: int) -> str:
    i = pos
    while i > 0 and text[i - 1].isalpha():
        i -= 1
    return text[i:pos]


def segment_sentences(text: str, abbreviations=DEFAULT_ABBREVIATIONS) -> list[tuple[int, int]]:
    """Split ``text`` into sentence spans.

    Boundaries fall after runs of ``.``, ``!`` or ``?`` that are followed
    by whitespace and then an uppercase letter or a digit, and on blank
    lines. A period directly after a listed abbreviation never splits.
    Each span is trimmed of surrounding whitespace.
    """
    cuts = set()
    for m in _BLANK_LINE_RE.finditer(text):
        cuts.add(m.start())
    for m in _TERMINAL_RE.finditer(text):
        nxt = text[m.end():].lstrip()
        if not nxt or not (nxt[0].isupper() or nxt[0].isdecimal()):
            continue
        if m.group() == "." and _preceding_word(text, m.start()) in abbreviations:
            continue
        cuts.add(m.end())

    spans = []
    prev = 0
    for cut in sorted(cuts) + [len(text)]:
        start, end = prev, cut
        while start < end and text[start].isspace():
            start += 1
        while end > start and text[end - 1].isspace():
            end -= 1
        if start < end:
            spans.append((start, end))
        prev = cut
    return spans


def _char_class(ch: str) -> str:
    if ch.isspace():
        return "space"
    if ch.isdecimal():
        return "digit"
    if ch.isalpha() or unicodedata.category(ch).startswith("M"):
        return "alpha"
    return "punct"


def tokenize(text: str, span=None, policy: NormPolicy = MATCH_POLICY) -> list[Token]:
    """Tokenize ``text[span]`` on whitespace and character-class changes.

    Letters and digits form maximal runs; every other non-space character
    is a token of its own.
    """
    start, end = span if span is not None else (0, len(text))
    tokens = []
    i = start
    while i < end:
        cls = _char_class(text[i])
        if cls == "space":
            i += 1
            continue
        j = i + 1
        if cls != "punct":
            while j < end and _char_class(text[j]) == cls:
                j += 1
        surface = text[i:j]
        tokens.append(Token(surface, i, j, normalize_token(surface, policy)))
        i = j
    return tokens


def tokenize_document(
    doc: RawDocument, abbreviations=DEFAULT_ABBREVIATIONS, policy: NormPolicy = MATCH_POLICY
) -> TokenizedDocument:
    spans = segment_sentences(doc.text, abbreviations)
    sentences = [tokenize(doc.text, sp, policy) for sp in spans]
    kept = [(sp, s) for sp, s in zip(spans, sentences) if s]
    return TokenizedDocument(doc, [s for _, s in kept], [sp for sp, _ in kept])

"""Section-heading detection and the per-token "last heading" feature."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .annotation import ParseError
from .text import MATCH_POLICY, TokenizedDocument, normalize_token, tokenize

NONE_CLASS = "NONE"
DEFAULT_SECTION_CLASSES = ("HISTORY", "MEDICATIONS", "EXAM", "LABS", "IMAGING", "PLAN", "OTHER")


def heading_key(text: str, policy=MATCH_POLICY) -> str:
    text = text.strip()
    while text.endswith(":"):
        text = text[:-1].rstrip()
    return " ".join(normalize_token(t.surface, policy) for t in tokenize(text))


@dataclass
class HeadingLexicon:
    headings: dict  # normalized heading -> class name
    classes: tuple = DEFAULT_SECTION_CLASSES

    def __post_init__(self):
        self.classes = tuple(c for c in self.classes if c != NONE_CLASS)
        for cls in self.headings.values():
            if cls not in self.classes:
                raise ValueError(f"heading class {cls!r} not among {self.classes}")
        # NONE is always id 0
        self.class_ids = {NONE_CLASS: 0, **{c: i + 1 for i, c in enumerate(self.classes)}}

    @property
    def n_classes(self) -> int:
        return len(self.class_ids)

    @classmethod
    def from_pairs(cls, pairs, classes=None):
        pairs = list(pairs)
        if classes is None:
            classes = tuple(dict.fromkeys(c for _, c in pairs))
        return cls({heading_key(h): c for h, c in pairs}, classes)


def load_heading_lexicon(path, classes=None) -> HeadingLexicon:
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ParseError(f"expected heading<TAB>class, got {line!r}", lineno)
        pairs.append((cols[0], cols[1].strip()))
    return HeadingLexicon.from_pairs(pairs, classes)


def write_heading_lexicon(lex: HeadingLexicon) -> str:
    return "".join(f"{h}\t{c}\n" for h, c in sorted(lex.headings.items()))


def detect_headings(tdoc: TokenizedDocument, lex: HeadingLexicon) -> list[tuple[int, str]]:
    text = tdoc.doc.text
    out = []
    for i, sent in enumerate(tdoc.sentences):
        key = heading_key(text[sent[0].start:sent[-1].end])
        cls = lex.headings.get(key)
        if cls is not None:
            out.append((i, cls))
    return out


def assign_section_feature(tdoc: TokenizedDocument, headings, lex: HeadingLexicon) -> list[list[int]]:
    """Section class id per token: the class of the nearest heading at or before its sentence."""
    by_sent = dict(headings)
    current = lex.class_ids[NONE_CLASS]
    out = []
    for i, sent in enumerate(tdoc.sentences):
        if i in by_sent:
            current = lex.class_ids[by_sent[i]]
        out.append([current] * len(sent))
    return out

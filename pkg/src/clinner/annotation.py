"""Entity mentions, IOB tagging, and the BRAT / CoNLL file formats."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .text import Token, TokenizedDocument, normalize_token

log = logging.getLogger(__name__)

DEFAULT_TYPES = ("DrugName", "SignSymptom", "DiseaseDisorder", "DiagProcLabTest", "TherapeuticProc")


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class TextMismatch(ValueError):
    pass


class MisalignedMention(ValueError):
    pass


class OverlappingMentions(ValueError):
    pass


class UnknownEntityType(ValueError):
    pass


@dataclass(frozen=True, order=True)
class EntityMention:
    start: int
    end: int
    etype: str
    text: str = ""

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"mention must have start < end, got ({self.start}, {self.end})")

    @property
    def key(self):
        return (self.etype, self.start, self.end)

    def overlaps(self, other: "EntityMention") -> bool:
        return self.start < other.end and other.start < self.end


class LabelSet:
    """Ordered entity types and the derived ``2k+1`` IOB label alphabet.

    Label 0 is ``O``; type ``i`` owns ``B-`` at ``2i+1`` and ``I-`` at ``2i+2``.
    """

    def __init__(self, types=DEFAULT_TYPES):
        types = tuple(types)
        if not types:
            raise ValueError("at least one entity type is required")
        if len(set(types)) != len(types):
            raise ValueError(f"duplicate entity types in {types}")
        self.types = types
        self.type_index = {t: i for i, t in enumerate(types)}
        self.labels = ["O"]
        for t in types:
            self.labels += [f"B-{t}", f"I-{t}"]
        self.index = {lab: i for i, lab in enumerate(self.labels)}

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        return isinstance(other, LabelSet) and self.types == other.types

    def __repr__(self):
        return f"LabelSet({self.types!r})"

    def check_type(self, etype):
        if etype not in self.type_index:
            raise UnknownEntityType(f"unknown entity type {etype!r}; expected one of {self.types}")

    def encode(self, tags) -> list[int]:
        return [self.index[t] for t in tags]

    def decode(self, ids) -> list[str]:
        return [self.labels[i] for i in ids]


def _split_tag(tag):
    if tag == "O":
        return "O", None
    prefix, _, etype = tag.partition("-")
    if prefix not in ("B", "I") or not etype:
        raise ValueError(f"malformed IOB tag {tag!r}")
    return prefix, etype


def is_valid_iob(tags) -> bool:
    prev = "O"
    for tag in tags:
        prefix, etype = _split_tag(tag)
        if prefix == "I" and prev not in (f"B-{etype}", f"I-{etype}"):
            return False
        prev = tag
    return True


def repair_tags(tags) -> list[str]:
    """Rewrite every ``I-t`` lacking a same-type predecessor as ``B-t``."""
    out = []
    prev = "O"
    for tag in tags:
        prefix, etype = _split_tag(tag)
        if prefix == "I" and prev not in (f"B-{etype}", f"I-{etype}"):
            tag = f"B-{etype}"
        out.append(tag)
        prev = tag
    return out


def check_non_overlapping(mentions):
    ordered = sorted(mentions)
    for a, b in zip(ordered, ordered[1:]):
        if a.overlaps(b):
            raise OverlappingMentions(f"mentions overlap: {a} and {b}")


def encode_iob(tokens: list[Token], mentions) -> list[str]:
    check_non_overlapping(mentions)
    starts = {tok.start: i for i, tok in enumerate(tokens)}
    ends = {tok.end: i for i, tok in enumerate(tokens)}
    tags = ["O"] * len(tokens)
    for m in mentions:
        if m.start not in starts or m.end not in ends:
            raise MisalignedMention(
                f"{m.etype} mention [{m.start}, {m.end}) {m.text!r} does not align with token boundaries"
            )
        first, last = starts[m.start], ends[m.end]
        tags[first] = f"B-{m.etype}"
        for i in range(first + 1, last + 1):
            tags[i] = f"I-{m.etype}"
    return tags


def _span_text(tokens, first, last, text):
    if text is not None:
        return text[tokens[first].start:tokens[last].end]
    parts = [tokens[first].surface]
    for a, b in zip(tokens[first:last], tokens[first + 1:last + 1]):
        parts.append(" " * (b.start - a.end) + b.surface)
    return "".join(parts)


def decode_iob(tokens: list[Token], tags, text: str | None = None) -> list[EntityMention]:
    if len(tokens) != len(tags):
        raise ValueError(f"{len(tokens)} tokens but {len(tags)} tags")
    tags = repair_tags(tags)
    mentions = []
    i = 0
    while i < len(tags):
        prefix, etype = _split_tag(tags[i])
        if prefix != "B":
            i += 1
            continue
        j = i
        while j + 1 < len(tags) and tags[j + 1] == f"I-{etype}":
            j += 1
        mentions.append(
            EntityMention(tokens[i].start, tokens[j].end, etype, _span_text(tokens, i, j, text))
        )
        i = j + 1
    return mentions


def encode_document(tdoc: TokenizedDocument, mentions) -> list[list[str]]:
    """IOB-encode document-level mentions sentence by sentence."""
    check_non_overlapping(mentions)
    per_sent = [[] for _ in tdoc.sentences]
    bounds = [(s[0].start, s[-1].end) for s in tdoc.sentences]
    for m in mentions:
        for i, (lo, hi) in enumerate(bounds):
            if lo <= m.start and m.end <= hi:
                per_sent[i].append(m)
                break
        else:
            raise MisalignedMention(
                f"{m.etype} mention [{m.start}, {m.end}) {m.text!r} is not contained in a single sentence"
            )
    return [encode_iob(sent, ms) for sent, ms in zip(tdoc.sentences, per_sent)]


def decode_document(tdoc: TokenizedDocument, tags_per_sentence) -> list[EntityMention]:
    out = []
    for sent, tags in zip(tdoc.sentences, tags_per_sentence):
        out.extend(decode_iob(sent, tags, tdoc.doc.text))
    return out


# -- BRAT standoff --------------------------------------------------------

_BRAT_T_RE = re.compile(r"^(T\d+)\t(\S+) (\d+) (\d+)\t(.*)$")


def _flat(s):
    return s.replace("\n", " ").replace("\r", " ")


def read_brat(ann_text: str, doc, types=None) -> list[EntityMention]:
    """Parse the textbound (``T``) lines of a ``.ann`` file.

    Other annotation kinds are skipped with a warning. The quoted text of
    every textbound must match the document slice.
    """
    text = doc.text
    mentions = []
    for lineno, line in enumerate(ann_text.splitlines(), start=1):
        if not line.strip():
            continue
        if not line.startswith("T"):
            log.warning("%s line %d: ignoring non-textbound annotation %r", doc.id, lineno, line[:40])
            continue
        m = _BRAT_T_RE.match(line)
        if m is None:
            raise ParseError(f"malformed textbound annotation {line!r}", lineno)
        _, etype, start, end, quoted = m.groups()
        start, end = int(start), int(end)
        if end <= start:
            raise ParseError(f"end offset {end} not after start {start}", lineno)
        if end > len(text):
            raise ParseError(f"end offset {end} beyond document length {len(text)}", lineno)
        if types is not None and etype not in types:
            raise UnknownEntityType(f"line {lineno}: unknown entity type {etype!r}")
        if _flat(text[start:end]) != quoted:
            raise TextMismatch(
                f"{doc.id} line {lineno}: annotation text {quoted!r} != document slice {text[start:end]!r}"
            )
        mentions.append(EntityMention(start, end, etype, text[start:end]))
    check_non_overlapping(mentions)
    return sorted(mentions)


def write_brat(mentions) -> str:
    lines = [
        f"T{i}\t{m.etype} {m.start} {m.end}\t{_flat(m.text)}\n"
        for i, m in enumerate(sorted(mentions), start=1)
    ]
    return "".join(lines)


# -- CoNLL columns --------------------------------------------------------


def write_conll(sentences, tags_per_sentence) -> str:
    """Four tab-separated columns per token: surface, start, end, tag.

    ``sentences`` is a list of token lists (or a TokenizedDocument).
    """
    if isinstance(sentences, TokenizedDocument):
        sentences = sentences.sentences
    out = []
    for sent, tags in zip(sentences, tags_per_sentence):
        if len(sent) != len(tags):
            raise ValueError(f"{len(sent)} tokens but {len(tags)} tags")
        for tok, tag in zip(sent, tags):
            out.append(f"{tok.surface}\t{tok.start}\t{tok.end}\t{tag}\n")
        out.append("\n")
    return "".join(out)


def read_conll(text: str, policy=None):
    """Return ``[(tokens, tags), ...]``, one pair per sentence."""
    sentences = []
    tokens, tags = [], []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            if tokens:
                sentences.append((tokens, tags))
                tokens, tags = [], []
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise ParseError(f"expected 4 tab-separated columns, got {len(cols)}", lineno)
        surface, start, end, tag = cols
        try:
            start, end = int(start), int(end)
        except ValueError:
            raise ParseError(f"non-integer offsets {cols[1]!r}, {cols[2]!r}", lineno) from None
        if end - start != len(surface):
            raise ParseError(f"offsets [{start}, {end}) do not fit surface {surface!r}", lineno)
        try:
            _split_tag(tag)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        norm = normalize_token(surface) if policy is None else normalize_token(surface, policy)
        tokens.append(Token(surface, start, end, norm))
        tags.append(tag)
    if tokens:
        sentences.append((tokens, tags))
    return sentences

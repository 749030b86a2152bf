"""Terminology-based annotator.

Terms are tokenized and normalized exactly like document tokens, stored
with stopwords removed, and compiled into a token trie. Matching may skip
a bounded number of stopword tokens between entry tokens.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

from .annotation import DEFAULT_TYPES, EntityMention, ParseError, UnknownEntityType
from .text import MATCH_POLICY, NormPolicy, TokenizedDocument, normalize_token, tokenize

log = logging.getLogger(__name__)

MAX_STOPWORD_SKIP = 2
DEFAULT_TOP_N = 10_000


@dataclass
class TermDictionary:
    # (tokens, etype) -> source id of the first occurrence
    entries: dict = field(default_factory=dict)
    stopwords: frozenset = frozenset()
    types: tuple = DEFAULT_TYPES
    policy: NormPolicy = MATCH_POLICY

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def add(self, term: str, etype: str, source: str = "") -> bool:
        if etype not in self.types:
            raise UnknownEntityType(f"unknown entity type {etype!r}; expected one of {self.types}")
        key = term_key(term, self.stopwords, self.policy)
        if not key:
            log.warning("dropping term %r: empty after stopword removal", term)
            return False
        self.entries.setdefault((key, etype), source)
        return True


def term_key(term: str, stopwords=frozenset(), policy: NormPolicy = MATCH_POLICY) -> tuple:
    toks = (normalize_token(t.surface, policy) for t in tokenize(term))
    return tuple(t for t in toks if t not in stopwords)


def load_stopwords(path, policy: NormPolicy = MATCH_POLICY) -> frozenset:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(normalize_token(w.strip(), policy) for w in lines if w.strip())


def load_terms(path, type_map=None, types=DEFAULT_TYPES, stopwords=frozenset(),
               policy: NormPolicy = MATCH_POLICY) -> TermDictionary:
    """Read a term TSV: ``term<TAB>type[<TAB>source]``.

    ``type_map`` optionally maps the file's type labels onto the
    configured entity types.
    """
    d = TermDictionary(stopwords=frozenset(stopwords), types=tuple(types), policy=policy)
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) not in (2, 3) or not cols[0].strip():
            raise ParseError(f"expected term<TAB>type[<TAB>source], got {line!r}", lineno)
        term, etype = cols[0], cols[1].strip()
        source = cols[2].strip() if len(cols) == 3 else ""
        if type_map is not None:
            if etype not in type_map:
                raise UnknownEntityType(f"line {lineno}: type {etype!r} not in type map")
            etype = type_map[etype]
        try:
            d.add(term, etype, source)
        except UnknownEntityType as exc:
            raise UnknownEntityType(f"line {lineno}: {exc}") from None
    return d


def load_frequency(path, policy: NormPolicy = MATCH_POLICY) -> dict:
    freq = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ParseError(f"expected token<TAB>count, got {line!r}", lineno)
        try:
            count = int(cols[1])
        except ValueError:
            raise ParseError(f"non-integer count {cols[1]!r}", lineno) from None
        if count < 0:
            raise ParseError(f"negative count {count}", lineno)
        tok = normalize_token(cols[0].strip(), policy)
        freq[tok] = freq.get(tok, 0) + count
    return freq


def top_n_threshold(freq: dict, n: int = DEFAULT_TOP_N) -> int:
    """Count of the ``n``-th most frequent token (tokens at or above it are "common")."""
    if not freq:
        return 1
    counts = sorted(freq.values(), reverse=True)
    return max(counts[min(n, len(counts)) - 1], 1)


def filter_common_terms(d: TermDictionary, freq: dict, threshold: int) -> TermDictionary:
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    kept = {
        key: src for key, src in d.entries.items()
        if len(key[0]) > 1 or freq.get(key[0][0], 0) < threshold
    }
    return TermDictionary(kept, d.stopwords, d.types, d.policy)


class MatcherAutomaton:
    """Immutable token trie; accepting nodes carry ``(type index, etype, n_tokens, source)``."""

    def __init__(self, d: TermDictionary):
        children = [{}]
        accept = {}
        type_index = {t: i for i, t in enumerate(d.types)}
        for (key, etype), source in sorted(d.entries.items()):
            node = 0
            for tok in key:
                nxt = children[node].get(tok)
                if nxt is None:
                    nxt = len(children)
                    children[node][tok] = nxt
                    children.append({})
                node = nxt
            accept.setdefault(node, []).append((type_index[etype], etype, len(key), source))
        self._children = tuple(MappingProxyType(c) for c in children)
        self._accept = MappingProxyType({k: tuple(sorted(v)) for k, v in accept.items()})
        self.stopwords = d.stopwords
        self.types = d.types
        self.policy = d.policy
        self.n_entries = len(d)

    def find(self, norms) -> list[tuple[int, int, tuple]]:
        """Longest match starting at every position: ``(first, last, accepts)``, inclusive."""
        out = []
        n = len(norms)
        for i in range(n):
            node = self._children[0].get(norms[i])
            if node is None:
                continue
            best = (i, self._accept[node]) if node in self._accept else None
            j = i + 1
            skipped = 0
            while j < n:
                tok = norms[j]
                nxt = self._children[node].get(tok)
                if nxt is not None:
                    node, skipped = nxt, 0
                    if node in self._accept:
                        best = (j, self._accept[node])
                elif tok in self.stopwords and skipped < MAX_STOPWORD_SKIP:
                    skipped += 1
                else:
                    break
                j += 1
            if best is not None:
                out.append((i, best[0], best[1]))
        return out


def build_matcher(d: TermDictionary) -> MatcherAutomaton:
    return MatcherAutomaton(d)


def parse_policy(policy):
    """``"det"`` or ``"rand:<seed>"`` -> ``("det", None)`` / ``("rand", seed)``."""
    if isinstance(policy, tuple):
        return policy
    if policy in (None, "det", "deterministic"):
        return ("det", None)
    kind, _, seed = str(policy).partition(":")
    if kind in ("rand", "random") and seed.lstrip("-").isdigit():
        return ("rand", int(seed))
    raise ValueError(f"bad conflict policy {policy!r}; use 'det' or 'rand:<seed>'")


def resolve_conflicts(candidates, policy="det", types=DEFAULT_TYPES) -> list[EntityMention]:
    kind, seed = parse_policy(policy)
    tindex = {t: i for i, t in enumerate(types)}
    cands = sorted(set(candidates), key=lambda m: (m.start, m.end, tindex.get(m.etype, len(tindex))))

    if kind == "det":
        kept = []
        order = sorted(cands, key=lambda m: (-(m.end - m.start), m.start, tindex.get(m.etype, len(tindex))))
        for m in order:
            if not any(m.overlaps(k) for k in kept):
                kept.append(m)
        return sorted(kept)

    rng = random.Random(seed)
    kept = []
    # connected groups of transitively overlapping candidates, in document order
    groups, cur, cur_end = [], [], None
    for m in cands:
        if cur and m.start >= cur_end:
            groups.append(cur)
            cur = []
        if not cur:
            cur_end = m.end
        cur.append(m)
        cur_end = max(cur_end, m.end)
    if cur:
        groups.append(cur)
    for group in groups:
        remaining = list(group)
        while remaining:
            pick = remaining[rng.randrange(len(remaining))]
            kept.append(pick)
            remaining = [m for m in remaining if not m.overlaps(pick)]
    return sorted(kept)


def match_candidates(matcher: MatcherAutomaton, tdoc: TokenizedDocument) -> list[EntityMention]:
    text = tdoc.doc.text
    out = []
    for sent in tdoc.sentences:
        norms = [normalize_token(t.surface, matcher.policy) for t in sent]
        for first, last, accepts in matcher.find(norms):
            start, end = sent[first].start, sent[last].end
            for _, etype, _, _ in accepts:
                out.append(EntityMention(start, end, etype, text[start:end]))
    return out


def annotate(matcher: MatcherAutomaton, tdoc: TokenizedDocument, policy="det") -> list[EntityMention]:
    if matcher.n_entries == 0:
        return []
    return resolve_conflicts(match_candidates(matcher, tdoc), policy, matcher.types)

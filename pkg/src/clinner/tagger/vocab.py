from __future__ import annotations

import numpy as np

from ..annotation import ParseError
from ..text import MODEL_POLICY, normalize_token

PAD, UNK, NUM = "<pad>", "<unk>", "<num>"
WORD_RESERVED = (PAD, UNK, NUM)
CHAR_RESERVED = (PAD, UNK)
PAD_ID, UNK_ID, NUM_ID = 0, 1, 2


class Vocab:
    def __init__(self, words, chars):
        self.words = list(WORD_RESERVED) + [w for w in words if w not in WORD_RESERVED]
        self.chars = list(CHAR_RESERVED) + [c for c in chars if c not in CHAR_RESERVED]
        self.word_index = {w: i for i, w in enumerate(self.words)}
        self.char_index = {c: i for i, c in enumerate(self.chars)}
        if len(self.word_index) != len(self.words) or len(self.char_index) != len(self.chars):
            raise ValueError("duplicate vocabulary entries")

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.words == other.words and self.chars == other.chars

    @property
    def n_words(self):
        return len(self.words)

    @property
    def n_chars(self):
        return len(self.chars)

    def word_id(self, surface: str) -> int:
        return self.word_index.get(normalize_token(surface, MODEL_POLICY), UNK_ID)

    def char_ids(self, surface: str) -> list[int]:
        return [self.char_index.get(c, UNK_ID) for c in surface]


def build_vocab(tdocs, extra_words=()) -> Vocab:
    """Words (model-normalized) and raw characters, in first-seen order."""
    words, chars = {}, {}
    for tdoc in tdocs:
        for sent in tdoc.sentences:
            for tok in sent:
                words.setdefault(normalize_token(tok.surface, MODEL_POLICY), None)
                for c in tok.surface:
                    chars.setdefault(c, None)
    for w in extra_words:
        words.setdefault(w, None)
    return Vocab(words, chars)


def load_embeddings(path, policy=MODEL_POLICY):
    """Text embeddings: ``word v1 ... vd`` per line, optional ``count dim`` header.

    Words are normalized like model input; on collisions the first vector wins.
    Returns ``(words, matrix)``.
    """
    words, rows, dim = [], [], None
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                dim = int(parts[1])
                continue
            word, vals = parts[0], parts[1:]
            if dim is None:
                dim = len(vals)
            if len(vals) != dim:
                raise ParseError(f"expected {dim} values, got {len(vals)}", lineno)
            try:
                vec = [float(v) for v in vals]
            except ValueError:
                raise ParseError("non-numeric embedding value", lineno) from None
            w = normalize_token(word, policy)
            if w in seen:
                continue
            seen.add(w)
            words.append(w)
            rows.append(vec)
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), dim or 0)
    return words, matrix

"""Model container: an ``.npz`` archive of named float64 tensors plus a JSON header.

The header (``__meta__``) records the format version, the full config, the
vocabularies and the section-class count. Tensors are stored under
``param/<name>`` and reload bit-exactly.
"""
from __future__ import annotations

import json
import zipfile

import numpy as np

from .config import TaggerConfig
from .model import TaggerModel
from .vocab import CHAR_RESERVED, WORD_RESERVED, Vocab

FORMAT_VERSION = 1
MAGIC = "clinner-tagger"


class CorruptContainer(ValueError):
    pass


class FormatVersionMismatch(ValueError):
    pass


def save(model: TaggerModel, path):
    meta = {
        "magic": MAGIC,
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "words": model.vocab.words[len(WORD_RESERVED):],
        "chars": model.vocab.chars[len(CHAR_RESERVED):],
        "n_sections": model.n_sections,
        "params": {k: list(q.shape) for k, q in model.params.items()},
    }
    arrays = {f"param/{k}": q.value for k, q in model.params.items()}
    arrays["__meta__"] = np.array(json.dumps(meta, ensure_ascii=False))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load(path) -> TaggerModel:
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["__meta__"]))
            arrays = {k[len("param/"):]: z[k] for k in z.files if k.startswith("param/")}
    except FileNotFoundError:
        raise
    except (zipfile.BadZipFile, EOFError, OSError, KeyError, ValueError) as exc:
        raise CorruptContainer(f"{path}: unreadable model container ({exc})") from None
    if meta.get("magic") != MAGIC:
        raise CorruptContainer(f"{path}: not a tagger model container")
    if meta.get("format_version") != FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"{path}: container format {meta.get('format_version')}, this build reads {FORMAT_VERSION}"
        )
    model = TaggerModel(TaggerConfig.from_dict(meta["config"]), Vocab(meta["words"], meta["chars"]),
                        meta["n_sections"])
    if set(arrays) != set(model.params):
        raise CorruptContainer(f"{path}: parameter set does not match the config")
    for k, q in model.params.items():
        if arrays[k].shape != q.shape:
            raise CorruptContainer(f"{path}: parameter {k} has shape {arrays[k].shape}, expected {q.shape}")
        np.copyto(q.value, arrays[k])
    model.transitions.apply_mask()
    return model

from __future__ import annotations

import ast
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..annotation import DEFAULT_TYPES

FEATURE_DIM = 5


class ConfigError(ValueError):
    pass


@dataclass
class TaggerConfig:
    """Every knob of the tagger.

    Defaults are desk-scale. ``english()`` / ``french()`` give the word
    embedding sizes used with the large pretrained vectors.
    """
    entity_types: tuple = DEFAULT_TYPES
    word_dim: int = 25
    char_emb_dim: int = 10
    char_filters: int = 20
    hidden_dim: int = 50
    num_gru_layers: int = 1
    dropout_rate: float = 0.5
    l2_lambda: float = 1e-8
    lr: float = 1e-3
    max_epochs: int = 100
    patience: int = 5
    seed: int = 0
    use_gazetteer_feature: bool = False
    use_section_feature: bool = False
    feature_dim: int = FEATURE_DIM
    max_word_chars: int = 20
    n_section_classes: int = 8
    constrained_crf: bool = True
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entity_types = tuple(self.entity_types)
        self.validate()

    def validate(self):
        for name in ("word_dim", "char_emb_dim", "char_filters", "hidden_dim", "num_gru_layers",
                     "max_epochs", "max_word_chars", "n_section_classes"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.patience < 0:
            raise ConfigError("patience must be >= 0")
        if self.l2_lambda < 0 or self.lr <= 0:
            raise ConfigError("l2_lambda must be >= 0 and lr > 0")
        if (self.use_gazetteer_feature or self.use_section_feature) and self.feature_dim != FEATURE_DIM:
            raise ConfigError(f"feature_dim is fixed at {FEATURE_DIM} when features are enabled")
        if not self.entity_types:
            raise ConfigError("entity_types must be non-empty")

    @classmethod
    def english(cls, **kw):
        return cls(word_dim=100, **kw)

    @classmethod
    def french(cls, **kw):
        return cls(word_dim=200, **kw)

    @property
    def hybrid(self) -> bool:
        return self.use_gazetteer_feature or self.use_section_feature

    def replace(self, **kw) -> "TaggerConfig":
        d = self.to_dict()
        d.update(kw)
        return TaggerConfig.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["entity_types"] = list(self.entity_types)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TaggerConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        kw = {}
        for name, value in d.items():
            default = known[name].default
            try:
                if name == "entity_types":
                    value = tuple(value.split(",")) if isinstance(value, str) else tuple(value)
                elif name == "extra":
                    value = dict(value)
                elif isinstance(default, bool):
                    value = _to_bool(value)
                elif isinstance(default, int):
                    value = int(value)
                elif isinstance(default, float):
                    value = float(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"field {name}: {exc}") from None
            kw[name] = value
        return cls(**kw)


def _to_bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str):
        if v.lower() in ("1", "true", "yes", "on"):
            return True
        if v.lower() in ("0", "false", "no", "off"):
            return False
    if isinstance(v, int):
        return bool(v)
    raise ValueError(f"not a boolean: {v!r}")


def read_flat_config(path) -> dict:
    """JSON object, or ``key=value`` lines (``#`` comments allowed)."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return json.loads(text)
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        value = value.strip()
        try:
            out[key.strip()] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            out[key.strip()] = value
    return out


def load_config(path) -> TaggerConfig:
    return TaggerConfig.from_dict(read_flat_config(path))

"""Training and benchmark configuration, plus the flat key=value file format.

The config file is one `key = value` per line, `#` starts a comment, no
nesting. Unknown keys are rejected. Keys shared by training and generation
(seed, d_embed, d_token, ctx_len) appear once and feed both configs, which
also guarantees the generator and the trainer derive the same frozen
encoder from the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError

STRATEGIES = ("coop", "locoop", "gacoop")
LR_SCHEDULES = ("constant", "cosine")
CTX_INITS = ("gauss", "zeros")


@dataclass
class TrainConfig:
    strategy: str = "gacoop"
    epochs: int = 50
    lr: float = 0.002
    batch_size: int = 32
    lam: float = 0.25
    tau: float = 0.01
    k_rank: int | None = None  # None: n_classes // 2 below 400 classes, else 200
    ctx_len: int = 16
    d_token: int = 8
    d_embed: int = 64
    seed: int = 0
    lr_schedule: str = "cosine"
    add_ood_gradient: bool = False
    raw_ood_gradient: bool = False
    ctx_init: str = "gauss"

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.k_rank is not None and self.k_rank < 0:
            raise ConfigError(f"k_rank must be >= 0, got {self.k_rank}")
        for name in ("ctx_len", "d_token", "d_embed"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ConfigError(f"lr_schedule must be one of {LR_SCHEDULES}")
        if self.ctx_init not in CTX_INITS:
            raise ConfigError(f"ctx_init must be one of {CTX_INITS}")

    def effective_k_rank(self, n_classes: int) -> int:
        if self.k_rank is not None:
            return self.k_rank
        return max(1, n_classes // 2) if n_classes < 400 else 200


@dataclass
class SynthConfig:
    n_classes: int = 20
    d_embed: int = 64
    n_regions: int = 9
    train_shots: int = 4
    test_per_class: int = 50
    ood_samples: int = 500
    ood_classes: int = 10
    alpha: float = 0.8
    rho: float = 0.6
    beta: float = 0.3
    n_background: int = 16
    ood_margin: float = 0.3
    d_token: int = 8
    ctx_len: int = 16
    seed: int = 0

    def validate(self) -> None:
        for name in (
            "n_classes",
            "d_embed",
            "train_shots",
            "test_per_class",
            "ood_samples",
            "ood_classes",
            "n_background",
            "d_token",
            "ctx_len",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_regions < 0:
            raise ConfigError(f"n_regions must be >= 0, got {self.n_regions}")
        for name in ("alpha", "rho", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if not 0.0 < self.ood_margin <= 1.0:
            raise ConfigError(f"ood_margin must be in (0, 1], got {self.ood_margin}")


# key name in the file -> (dataclass attr, owner tags)
_TRAIN_KEYS = {
    "strategy": "strategy",
    "epochs": "epochs",
    "lr": "lr",
    "batch_size": "batch_size",
    "lambda": "lam",
    "tau": "tau",
    "k_rank": "k_rank",
    "lr_schedule": "lr_schedule",
    "add_ood_gradient": "add_ood_gradient",
    "raw_ood_gradient": "raw_ood_gradient",
    "ctx_init": "ctx_init",
}
_SYNTH_KEYS = {
    "n_classes": "n_classes",
    "n_regions": "n_regions",
    "train_shots": "train_shots",
    "test_per_class": "test_per_class",
    "ood_samples": "ood_samples",
    "ood_classes": "ood_classes",
    "alpha": "alpha",
    "rho": "rho",
    "beta": "beta",
    "n_background": "n_background",
    "ood_margin": "ood_margin",
}
_SHARED_KEYS = ("seed", "d_embed", "d_token", "ctx_len")


def _coerce(key: str, raw: str, target_type) -> object:
    raw = raw.strip()
    try:
        if target_type is bool:
            if raw not in ("true", "false"):
                raise ValueError("expected true or false")
            return raw == "true"
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None


def _field_types(cls) -> dict[str, type]:
    out = {}
    for f in fields(cls):
        if f.name == "k_rank":
            out[f.name] = int
        elif f.type in ("int", int):
            out[f.name] = int
        elif f.type in ("float", float):
            out[f.name] = float
        elif f.type in ("bool", bool):
            out[f.name] = bool
        else:
            out[f.name] = str
    return out


def default_config() -> tuple[TrainConfig, SynthConfig]:
    return TrainConfig(), SynthConfig()


def parse_config_text(text: str) -> tuple[TrainConfig, SynthConfig]:
    train_cfg, synth_cfg = default_config()
    train_types = _field_types(TrainConfig)
    synth_types = _field_types(SynthConfig)
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key in _TRAIN_KEYS:
            attr = _TRAIN_KEYS[key]
            setattr(train_cfg, attr, _coerce(key, raw, train_types[attr]))
        elif key in _SYNTH_KEYS:
            attr = _SYNTH_KEYS[key]
            setattr(synth_cfg, attr, _coerce(key, raw, synth_types[attr]))
        elif key in _SHARED_KEYS:
            value = _coerce(key, raw, int)
            setattr(train_cfg, key, value)
            setattr(synth_cfg, key, value)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    train_cfg.validate()
    synth_cfg.validate()
    return train_cfg, synth_cfg


def load_config(path) -> tuple[TrainConfig, SynthConfig]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def dump_config(train_cfg: TrainConfig, synth_cfg: SynthConfig) -> str:
    """Effective configuration in the same key=value format."""
    lines = ["# training"]
    for key, attr in _TRAIN_KEYS.items():
        value = getattr(train_cfg, attr)
        if value is None:
            continue
        lines.append(f"{key} = {str(value).lower() if isinstance(value, bool) else value}")
    lines.append("# shared")
    for key in _SHARED_KEYS:
        lines.append(f"{key} = {getattr(train_cfg, key)}")
    lines.append("# synthetic benchmark")
    for key, attr in _SYNTH_KEYS.items():
        lines.append(f"{key} = {getattr(synth_cfg, attr)}")
    return "\n".join(lines) + "\n"

"""Feature banks: the synthetic benchmark generator and the FBNK file format.

FBNK container (all integers little-endian):

    magic   4 bytes  b"FBNK"
    version u32      1
    section u8       0 = feature bank, 1 = prompt checkpoint

Bank payload (section 0):

    n_samples u32, n_regions u32, d_embed u32, n_classes u32, split u8
    labels  i32[n_samples]            (-1 marks OOD)
    globals f32[n_samples * d_embed]               row-major
    regions f32[n_samples * n_regions * d_embed]   [sample][region][dim]

Checkpoint payload (section 1):

    strategy u8 (0 coop, 1 locoop, 2 gacoop)
    ctx_len u32, d_token u32, d_embed u32, n_classes u32
    seed u64, tau f64, conflict_ratio f64
    params f64[ctx_len * d_token]     row-major ctx

Split tags: 0 train, 1 id_test, 2 ood.

Synthetic benchmark. Class prototypes are NOT free random directions: the
frozen encoder can only realize text features of the form
normalize(shared_shift + per_class_offset), so free prototypes would leave
the task unlearnable by prompt tuning. Instead the generator derives the
same frozen encoder the trainer will build from the shared seed (streams
STREAM_W / STREAM_CLASS_EMB) and takes the prototypes to be that encoder's
text features at a hidden target prompt. A consistent solution therefore
exists and the benchmark is separable by construction.

Draw order (one derived stream each, see rng.derive_seed):
  1000 hidden target prompt, 1002 background pool, 1003 OOD prototypes,
  1004 train samples, 1005 id_test samples, 1006 ood samples.
Per sample: global noise direction first, then per region in index order
one uniform for the signal/background choice, one uniform for the
corruption choice when applicable, one pool pick (raw u64 mod pool size)
when applicable, then the region's noise direction.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .config import STRATEGIES, SynthConfig
from .errors import (
    BadMagicError,
    ConfigError,
    ContractViolation,
    InvariantError,
    TruncatedFileError,
    VersionError,
)
from .model import PromptParams, build_encoder, encode_text
from .numerics import l2_normalize
from .objectives import OOD_LABEL, Sample
from .rng import SeededRng, derive_seed

MAGIC = b"FBNK"
VERSION = 1
SECTION_BANK = 0
SECTION_CHECKPOINT = 1

SPLITS = ("train", "id_test", "ood")

STREAM_SYNTH_TARGET = 1000
STREAM_SYNTH_BACKGROUND = 1002
STREAM_SYNTH_OOD_PROTO = 1003
STREAM_SYNTH_TRAIN = 1004
STREAM_SYNTH_ID_TEST = 1005
STREAM_SYNTH_OOD = 1006

#: Scale of the hidden target prompt the prototypes are generated from.
TARGET_PROMPT_SCALE = 0.05

_NORM_TOL = 1e-4


@dataclass
class FeatureBank:
    """Frozen pre-encoded features for one split. Storage is float32."""

    labels: np.ndarray  # (n,) int32, -1 for OOD
    globals: np.ndarray  # (n, d_embed) float32
    regions: np.ndarray  # (n, R, d_embed) float32
    n_classes: int
    split: str

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int32)
        self.globals = np.asarray(self.globals, dtype=np.float32)
        self.regions = np.asarray(self.regions, dtype=np.float32)
        if self.split not in SPLITS:
            raise InvariantError(f"unknown split {self.split!r}")
        n = self.labels.shape[0]
        if self.globals.shape[0] != n or self.regions.shape[0] != n:
            raise InvariantError("label/feature counts disagree")
        if self.regions.ndim != 3 or self.regions.shape[2] != self.globals.shape[1]:
            raise InvariantError(f"bad region tensor shape {self.regions.shape}")
        if np.any(self.labels < OOD_LABEL) or np.any(self.labels >= self.n_classes):
            raise InvariantError("labels out of [-1, n_classes)")
        self._check_norms()

    def _check_norms(self) -> None:
        for name, arr in (("global", self.globals), ("region", self.regions)):
            flat = arr.reshape(-1, self.d_embed).astype(np.float64)
            if flat.size == 0:
                continue
            if not np.all(np.isfinite(flat)):
                raise InvariantError(f"non-finite {name} feature")
            norms = np.sqrt((flat * flat).sum(axis=1))
            if np.any(norms < 1e-12):
                raise InvariantError(f"zero-norm {name} feature row")
            off = np.abs(norms - 1.0)
            if off.max() > _NORM_TOL:
                warnings.warn(
                    f"{int((off > _NORM_TOL).sum())} {name} rows off unit norm by "
                    f"up to {off.max():.3g}; re-normalizing",
                    stacklevel=3,
                )
                fixed = (flat / norms[:, None]).astype(np.float32)
                arr[...] = fixed.reshape(arr.shape)

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]

    @property
    def n_regions(self) -> int:
        return self.regions.shape[1]

    @property
    def d_embed(self) -> int:
        return self.globals.shape[1]

    def to_samples(self) -> list[Sample]:
        """Promote to float64 and re-normalize exactly; one Sample per row."""
        g64 = self.globals.astype(np.float64)
        g64 /= np.sqrt((g64 * g64).sum(axis=1))[:, None]
        r64 = self.regions.astype(np.float64)
        if r64.size:
            norms = np.sqrt((r64 * r64).sum(axis=2))
            r64 /= norms[:, :, None]
        return [
            Sample(global_feature=g64[i], region_features=r64[i], label=int(self.labels[i]))
            for i in range(self.n_samples)
        ]


def _mix(weight: float, base: np.ndarray, other: np.ndarray) -> np.ndarray:
    return l2_normalize(weight * base + (1.0 - weight) * other)


def _sample_features(
    rng: SeededRng,
    prototype: np.ndarray,
    prototypes: np.ndarray,
    background: np.ndarray,
    cfg: SynthConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Global + region features for one sample around `prototype`."""
    d = cfg.d_embed
    glob = _mix(cfg.alpha, prototype, rng.unit_vector(d))
    regions = np.empty((cfg.n_regions, d))
    for j in range(cfg.n_regions):
        is_signal = rng.uniform() < cfg.rho
        if is_signal:
            corrupted = rng.uniform() < cfg.beta
            if corrupted:
                pick = background[rng.next_u64() % cfg.n_background]
                regions[j] = _mix(0.5, prototype, pick)
            else:
                regions[j] = _mix(cfg.alpha, prototype, rng.unit_vector(d))
        else:
            pick = background[rng.next_u64() % cfg.n_background]
            regions[j] = _mix(0.7, pick, rng.unit_vector(d))
    return glob, regions


def _build_bank(
    rng: SeededRng,
    class_ids: list[int],
    prototypes_by_class: np.ndarray,
    all_id_prototypes: np.ndarray,
    background: np.ndarray,
    cfg: SynthConfig,
    labels: list[int],
    split: str,
) -> FeatureBank:
    globals_ = np.empty((len(class_ids), cfg.d_embed))
    regions = np.empty((len(class_ids), cfg.n_regions, cfg.d_embed))
    for i, c in enumerate(class_ids):
        globals_[i], regions[i] = _sample_features(
            rng, prototypes_by_class[c], all_id_prototypes, background, cfg
        )
    return FeatureBank(
        labels=np.array(labels, dtype=np.int32),
        globals=globals_.astype(np.float32),
        regions=regions.astype(np.float32),
        n_classes=cfg.n_classes,
        split=split,
    )


def generate_synthetic(cfg: SynthConfig) -> tuple[FeatureBank, FeatureBank, FeatureBank]:
    """Deterministic (train, id_test, ood) banks; a pure function of cfg."""
    cfg.validate()
    enc = build_encoder(
        cfg.seed, cfg.n_classes, cfg.d_embed, cfg.d_token, cfg.ctx_len, tau=1.0
    )
    target_rng = SeededRng(derive_seed(cfg.seed, STREAM_SYNTH_TARGET))
    hidden = PromptParams(
        ctx=target_rng.normal(0.0, TARGET_PROMPT_SCALE, n=cfg.ctx_len * cfg.d_token).reshape(
            cfg.ctx_len, cfg.d_token
        )
    )
    prototypes = encode_text(hidden, enc).g.copy()

    bg_rng = SeededRng(derive_seed(cfg.seed, STREAM_SYNTH_BACKGROUND))
    background = np.stack([bg_rng.unit_vector(cfg.d_embed) for _ in range(cfg.n_background)])

    ood_rng = SeededRng(derive_seed(cfg.seed, STREAM_SYNTH_OOD_PROTO))
    ood_protos = []
    attempts = 0
    while len(ood_protos) < cfg.ood_classes:
        cand = ood_rng.unit_vector(cfg.d_embed)
        attempts += 1
        if float((prototypes @ cand).max()) < cfg.ood_margin:
            ood_protos.append(cand)
        if attempts > 1000 * cfg.ood_classes:
            raise ConfigError(
                f"cannot place {cfg.ood_classes} OOD prototypes at margin "
                f"{cfg.ood_margin} (tried {attempts} candidates)"
            )
    ood_protos = np.stack(ood_protos)

    train_ids = [c for c in range(cfg.n_classes) for _ in range(cfg.train_shots)]
    train = _build_bank(
        SeededRng(derive_seed(cfg.seed, STREAM_SYNTH_TRAIN)),
        train_ids, prototypes, prototypes, background, cfg, train_ids, "train",
    )
    test_ids = [c for c in range(cfg.n_classes) for _ in range(cfg.test_per_class)]
    id_test = _build_bank(
        SeededRng(derive_seed(cfg.seed, STREAM_SYNTH_ID_TEST)),
        test_ids, prototypes, prototypes, background, cfg, test_ids, "id_test",
    )
    ood_ids = [k % cfg.ood_classes for k in range(cfg.ood_samples)]
    ood = _build_bank(
        SeededRng(derive_seed(cfg.seed, STREAM_SYNTH_OOD)),
        ood_ids, ood_protos, prototypes, background, cfg, [OOD_LABEL] * cfg.ood_samples, "ood",
    )
    return train, id_test, ood


# ---------------------------------------------------------------------------
# file format


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedFileError(f"file ended inside {what} ({len(data)}/{n} bytes)")
    return data


def _write_header(fh, section: int) -> None:
    fh.write(MAGIC)
    fh.write(struct.pack("<IB", VERSION, section))


def _read_header(fh) -> int:
    magic = _read_exact(fh, 4, "magic")
    if magic != MAGIC:
        raise BadMagicError(f"expected {MAGIC!r}, found {magic!r}")
    version, section = struct.unpack("<IB", _read_exact(fh, 5, "header"))
    if version != VERSION:
        raise VersionError(f"unsupported container version {version}")
    return section


def write_bank(bank: FeatureBank, path) -> None:
    with open(path, "wb") as fh:
        _write_header(fh, SECTION_BANK)
        fh.write(
            struct.pack(
                "<IIIIB",
                bank.n_samples,
                bank.n_regions,
                bank.d_embed,
                bank.n_classes,
                SPLITS.index(bank.split),
            )
        )
        fh.write(bank.labels.astype("<i4").tobytes())
        fh.write(bank.globals.astype("<f4").tobytes())
        fh.write(bank.regions.astype("<f4").tobytes())


def read_bank(path) -> FeatureBank:
    with open(path, "rb") as fh:
        section = _read_header(fh)
        if section != SECTION_BANK:
            raise InvariantError(f"section {section} is not a feature bank")
        n, r, d, n_classes, split_tag = struct.unpack(
            "<IIIIB", _read_exact(fh, 17, "bank header")
        )
        if split_tag >= len(SPLITS):
            raise InvariantError(f"unknown split tag {split_tag}")
        labels = np.frombuffer(_read_exact(fh, 4 * n, "labels"), dtype="<i4")
        globals_ = np.frombuffer(
            _read_exact(fh, 4 * n * d, "global features"), dtype="<f4"
        ).reshape(n, d)
        regions = np.frombuffer(
            _read_exact(fh, 4 * n * r * d, "region features"), dtype="<f4"
        ).reshape(n, r, d)
        trailing = fh.read(1)
        if trailing:
            raise InvariantError("trailing bytes after declared payload")
    return FeatureBank(
        labels=labels.copy(),
        globals=globals_.copy(),
        regions=regions.copy(),
        n_classes=n_classes,
        split=SPLITS[split_tag],
    )


def banks_equal(a: FeatureBank, b: FeatureBank) -> bool:
    return (
        a.split == b.split
        and a.n_classes == b.n_classes
        and np.array_equal(a.labels, b.labels)
        and np.array_equal(a.globals, b.globals)
        and np.array_equal(a.regions, b.regions)
    )


@dataclass
class Checkpoint:
    """Trained prompt plus everything needed to rebuild its encoder."""

    strategy: str
    params: np.ndarray  # (ctx_len, d_token) float64
    d_embed: int
    n_classes: int
    seed: int
    tau: float
    conflict_ratio: float

    @property
    def ctx_len(self) -> int:
        return self.params.shape[0]

    @property
    def d_token(self) -> int:
        return self.params.shape[1]


def write_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "wb") as fh:
        _write_header(fh, SECTION_CHECKPOINT)
        fh.write(
            struct.pack(
                "<BIIIIQdd",
                STRATEGIES.index(ckpt.strategy),
                ckpt.ctx_len,
                ckpt.d_token,
                ckpt.d_embed,
                ckpt.n_classes,
                ckpt.seed,
                ckpt.tau,
                ckpt.conflict_ratio,
            )
        )
        fh.write(np.asarray(ckpt.params, dtype="<f8").tobytes())


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        section = _read_header(fh)
        if section != SECTION_CHECKPOINT:
            raise InvariantError(f"section {section} is not a checkpoint")
        strat, ctx_len, d_token, d_embed, n_classes, seed, tau, conflict = struct.unpack(
            "<BIIIIQdd", _read_exact(fh, 41, "checkpoint header")
        )
        if strat >= len(STRATEGIES):
            raise InvariantError(f"unknown strategy tag {strat}")
        params = np.frombuffer(
            _read_exact(fh, 8 * ctx_len * d_token, "checkpoint params"), dtype="<f8"
        ).reshape(ctx_len, d_token)
        trailing = fh.read(1)
        if trailing:
            raise InvariantError("trailing bytes after declared payload")
    if not np.all(np.isfinite(params)):
        raise InvariantError("checkpoint params contain non-finite entries")
    if not np.isfinite(tau) or tau <= 0:
        raise InvariantError(f"checkpoint tau {tau!r} invalid")
    return Checkpoint(
        strategy=STRATEGIES[strat],
        params=params.copy(),
        d_embed=d_embed,
        n_classes=n_classes,
        seed=seed,
        tau=tau,
        conflict_ratio=conflict,
    )


def load_id_and_ood_banks(data_dir) -> tuple[FeatureBank, dict[str, FeatureBank]]:
    """id_test.fbnk plus every ood*.fbnk in the directory, keyed by file stem."""
    from pathlib import Path

    base = Path(data_dir)
    id_path = base / "id_test.fbnk"
    if not id_path.exists():
        raise FileNotFoundError(f"missing {id_path}")
    id_bank = read_bank(id_path)
    ood_banks = {}
    for path in sorted(base.glob("ood*.fbnk")):
        ood_banks[path.stem] = read_bank(path)
    if not ood_banks:
        raise FileNotFoundError(f"no ood*.fbnk banks in {base}")
    return id_bank, ood_banks


def validate_train_bank(bank: FeatureBank) -> None:
    if bank.n_samples == 0:
        raise ContractViolation("training bank is empty")
    if np.any(bank.labels < 0):
        raise ContractViolation("training bank contains OOD-labeled samples")

"""SGD training loop over the prompt, with strategy selection.

Strategies:
  coop    update along G_i only (no regularizer)
  locoop  update along G_i + G_o (G_o carries the lambda factor)
  gacoop  update along align(G_i, G_o)

Plain SGD, no momentum: the alignment rule is stated on raw gradients and
momentum would mix pre- and post-projection directions. Cosine decay by
global step t (0-based): lr_t = lr * (1 + cos(pi * t / T)) / 2 with T the
total step count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .align import ConflictStats, align, record_conflict
from .config import TrainConfig
from .data_io import FeatureBank, validate_train_bank
from .errors import ContractViolation, NumericAbortError
from .metrics import id_accuracy
from .model import (
    STREAM_BATCH_BASE,
    FrozenTextEncoder,
    PromptParams,
    build_encoder,
    encode_text,
    init_prompt,
)
from .objectives import Sample, batch_terms
from .rng import SeededRng, derive_seed

__all__ = [
    "TrainConfig",
    "TrainLog",
    "EpochEntry",
    "make_batches",
    "step",
    "train",
    "learning_rate",
]


@dataclass
class EpochEntry:
    epoch: int
    l_coop: float
    l_ood: float
    train_accuracy: float
    conflict_ratio: float


@dataclass
class TrainLog:
    entries: list[EpochEntry] = field(default_factory=list)
    final_checksum: str = ""


def learning_rate(cfg: TrainConfig, step_index: int, total_steps: int) -> float:
    if cfg.lr_schedule == "constant":
        return cfg.lr
    return cfg.lr * (1.0 + math.cos(math.pi * step_index / total_steps)) / 2.0


def make_batches(
    bank: FeatureBank, batch_size: int, seed: int, epoch: int
) -> list[list[Sample]]:
    """Deterministic shuffle keyed by (seed, epoch); last partial batch kept."""
    validate_train_bank(bank)
    if batch_size < 1:
        raise ContractViolation(f"batch_size must be >= 1, got {batch_size}")
    samples = bank.to_samples()
    rng = SeededRng(derive_seed(seed, STREAM_BATCH_BASE + epoch))
    order = rng.shuffle(list(range(len(samples))))
    return [
        [samples[i] for i in order[start : start + batch_size]]
        for start in range(0, len(order), batch_size)
    ]


@dataclass
class StepResult:
    params: PromptParams
    l_coop: float
    l_ood: float
    n_selected: int


def step(
    p: PromptParams,
    batch: list[Sample],
    cfg: TrainConfig,
    enc: FrozenTextEncoder,
    lr_t: float,
    stats: ConflictStats,
) -> StepResult:
    """One SGD step; returns new params, never mutates the input."""
    need_ood = cfg.strategy in ("locoop", "gacoop")
    k_rank = cfg.effective_k_rank(enc.n_classes)
    terms = batch_terms(batch, p, enc, k_rank=k_rank, need_ood=need_ood)
    g_i = terms.grad_ce

    if need_ood:
        raw = terms.grad_ood_raw
        g_o = raw if cfg.raw_ood_gradient else cfg.lam * raw
        record_conflict(stats, g_i, g_o)
        if not np.any(g_o):
            # exactly-zero regularizer gradient: both strategies reduce to G_i
            g = g_i
        elif cfg.strategy == "locoop":
            g = g_i + g_o
        else:
            g = align(g_i, g_o)
            if cfg.add_ood_gradient:
                # ablation: symmetric projection, adds G_o's non-conflicting part
                g = g + align(g_o, g_i)
    else:
        g = g_i

    if not np.all(np.isfinite(g)):
        raise NumericAbortError(
            f"non-finite update direction (l_coop={terms.l_coop!r}, "
            f"l_ood={terms.l_ood!r}); aborting without clipping"
        )
    new_params = PromptParams(ctx=p.ctx - lr_t * g.reshape(p.ctx.shape))
    return StepResult(
        params=new_params,
        l_coop=terms.l_coop,
        l_ood=terms.l_ood,
        n_selected=terms.n_selected,
    )


def _train_accuracy(samples: list[Sample], p: PromptParams, enc: FrozenTextEncoder) -> float:
    return id_accuracy(samples, encode_text(p, enc), enc.tau)


def train(
    cfg: TrainConfig, bank: FeatureBank, enc: FrozenTextEncoder | None = None
) -> tuple[PromptParams, TrainLog, ConflictStats]:
    """Full run: epochs x batches SGD steps, bitwise reproducible from (cfg, bank)."""
    cfg.validate()
    validate_train_bank(bank)
    if cfg.d_embed != bank.d_embed:
        raise ContractViolation(
            f"config d_embed {cfg.d_embed} does not match bank {bank.d_embed}"
        )
    if enc is None:
        enc = build_encoder(
            cfg.seed, bank.n_classes, bank.d_embed, cfg.d_token, cfg.ctx_len, cfg.tau
        )
    p = init_prompt(cfg.seed, cfg.ctx_len, cfg.d_token, cfg.ctx_init)

    batches_per_epoch = math.ceil(bank.n_samples / cfg.batch_size)
    total_steps = cfg.epochs * batches_per_epoch
    stats = ConflictStats()
    log = TrainLog()
    t = 0
    for epoch in range(cfg.epochs):
        conflicts_before = stats.steps_conflicting
        steps_before = stats.steps_total
        l_coop_sum = 0.0
        l_ood_sum = 0.0
        batches = make_batches(bank, cfg.batch_size, cfg.seed, epoch)
        for batch in batches:
            lr_t = learning_rate(cfg, t, total_steps)
            result = step(p, batch, cfg, enc, lr_t, stats)
            p = result.params
            l_coop_sum += result.l_coop
            l_ood_sum += result.l_ood
            t += 1
        epoch_steps = stats.steps_total - steps_before
        ratio = (
            (stats.steps_conflicting - conflicts_before) / epoch_steps if epoch_steps else 0.0
        )
        log.entries.append(
            EpochEntry(
                epoch=epoch,
                l_coop=l_coop_sum / len(batches),
                l_ood=l_ood_sum / len(batches),
                train_accuracy=_train_accuracy(bank.to_samples(), p, enc),
                conflict_ratio=ratio,
            )
        )
    log.final_checksum = p.checksum()
    return p, log, stats

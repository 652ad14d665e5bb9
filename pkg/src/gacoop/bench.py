"""End-to-end pipeline cells: generate -> train -> evaluate.

A bench run executes one cell per (strategy, seed index). All strategies in
one cell share the same derived seed, hence the same data and the same
encoder/prompt initialization, so the comparison isolates the update rule.
Cell seeds are derive_seed(master, BENCH_CELL_STREAM + i) for seed index i.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .config import SynthConfig, TrainConfig
from .data_io import generate_synthetic
from .errors import ConfigError
from .metrics import EvalReport, evaluate
from .model import build_encoder
from .rng import derive_seed
from .trainer import TrainLog, train

BENCH_CELL_STREAM = 500_000

SWEEP_PARAMS = ("lambda", "k_rank", "tau", "beta")


def run_cell(
    train_cfg: TrainConfig, synth_cfg: SynthConfig
) -> tuple[EvalReport, TrainLog]:
    """One full generate/train/evaluate cycle on the synthetic benchmark."""
    if train_cfg.seed != synth_cfg.seed:
        raise ConfigError("train and synthetic seeds must agree for one cell")
    train_bank, id_test, ood = generate_synthetic(synth_cfg)
    enc = build_encoder(
        train_cfg.seed,
        train_bank.n_classes,
        train_bank.d_embed,
        train_cfg.d_token,
        train_cfg.ctx_len,
        train_cfg.tau,
    )
    params, log, stats = train(train_cfg, train_bank, enc)
    report = evaluate(
        params,
        enc,
        id_test,
        {"ood_synthetic": ood},
        train_cfg.tau,
        strategy=train_cfg.strategy,
        seed=train_cfg.seed,
        conflict_ratio=stats.conflict_ratio,
    )
    return report, log


def run_bench(
    train_cfg: TrainConfig,
    synth_cfg: SynthConfig,
    strategies: tuple[str, ...],
    n_seeds: int,
    master_seed: int | None = None,
) -> list[EvalReport]:
    """Reports for every (strategy, seed index) cell, in deterministic order."""
    master = train_cfg.seed if master_seed is None else master_seed
    reports = []
    for strategy in strategies:
        for i in range(n_seeds):
            cell_seed = derive_seed(master, BENCH_CELL_STREAM + i)
            t_cfg = replace(train_cfg, strategy=strategy, seed=cell_seed)
            s_cfg = replace(synth_cfg, seed=cell_seed)
            report, _ = run_cell(t_cfg, s_cfg)
            reports.append(report)
    return reports


def summarize(reports: list[EvalReport]) -> list[dict]:
    """Mean metrics per strategy over seeds (from the per-report averages)."""
    by_strategy: dict[str, list[EvalReport]] = {}
    for r in reports:
        by_strategy.setdefault(r.strategy, []).append(r)
    rows = []
    for strategy, rs in by_strategy.items():
        rows.append(
            {
                "strategy": strategy,
                "fpr95": float(np.mean([r.average_fpr95 for r in rs])),
                "auroc": float(np.mean([r.average_auroc for r in rs])),
                "id_acc": float(np.mean([r.id_accuracy for r in rs])),
                "conflict_ratio": float(np.mean([r.conflict_ratio for r in rs])),
                "n_seeds": len(rs),
            }
        )
    return rows


def apply_sweep_value(
    train_cfg: TrainConfig, synth_cfg: SynthConfig, param: str, value: float
) -> tuple[TrainConfig, SynthConfig]:
    if param == "lambda":
        return replace(train_cfg, lam=float(value)), synth_cfg
    if param == "k_rank":
        return replace(train_cfg, k_rank=int(value)), synth_cfg
    if param == "tau":
        return replace(train_cfg, tau=float(value)), synth_cfg
    if param == "beta":
        return train_cfg, replace(synth_cfg, beta=float(value))
    raise ConfigError(f"sweep param must be one of {SWEEP_PARAMS}, got {param!r}")

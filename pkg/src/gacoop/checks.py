"""Verification suites: finite-difference gradient checks and the alignment
geometry properties. Shared by the `grad-check` CLI command and the tests.

The finite-difference oracle evaluates the actual scalar losses through the
public forward path (combined_loss per sample), never through the analytic
gradient code, so the two routes stay independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .align import align
from .model import FrozenTextEncoder, PromptParams, build_encoder, encode_text
from .objectives import (
    Sample,
    combined_loss,
    grad_ce,
    grad_ood,
    rank_margin,
    region_probabilities,
    select_ood_regions,
)
from .rng import SeededRng, derive_seed


def finite_difference(loss_fn, x0: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central differences: (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate."""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xp[i] += h
        xm = x0.copy()
        xm[i] -= h
        grad[i] = (loss_fn(xp) - loss_fn(xm)) / (2.0 * h)
    return grad


@dataclass
class GradCheckInstance:
    enc: FrozenTextEncoder
    prompt: PromptParams
    batch: list[Sample]
    lam: float
    k_rank: int


def _random_unit_rows(rng: SeededRng, n: int, d: int) -> np.ndarray:
    return np.stack([rng.unit_vector(d) for _ in range(n)])


def draw_instance(
    seed: int,
    n_classes: int = 3,
    ctx_len: int = 2,
    d_token: int = 4,
    d_embed: int = 6,
    n_regions: int = 2,
    batch_size: int = 2,
    tau: float = 0.25,
    lam: float = 0.7,
    margin: float = 1e-3,
    max_redraws: int = 200,
) -> GradCheckInstance:
    """Random small instance whose region ranks sit clear of flip boundaries.

    Redraws until every region's ground-truth rank margin is >= `margin` and
    at least one region is selected (so the regularizer gradient is live).
    """
    k_rank = 1
    for attempt in range(max_redraws):
        sub = derive_seed(seed, attempt)
        enc = build_encoder(sub, n_classes, d_embed, d_token, ctx_len, tau)
        rng = SeededRng(derive_seed(sub, 7000))
        ctx = rng.normal(0.0, 0.5, n=ctx_len * d_token).reshape(ctx_len, d_token)
        prompt = PromptParams(ctx=ctx)
        batch = []
        for _ in range(batch_size):
            label = rng.next_u64() % n_classes
            batch.append(
                Sample(
                    global_feature=rng.unit_vector(d_embed),
                    region_features=_random_unit_rows(rng, n_regions, d_embed),
                    label=int(label),
                )
            )
        g = encode_text(prompt, enc)
        margins = []
        n_selected = 0
        for s in batch:
            probs = region_probabilities(s, g, tau)
            for row in probs:
                margins.append(rank_margin(row, s.label))
            n_selected += len(select_ood_regions(probs, s.label, k_rank).selected)
        if min(margins) >= margin and n_selected > 0:
            return GradCheckInstance(enc=enc, prompt=prompt, batch=batch, lam=lam, k_rank=k_rank)
    raise RuntimeError(f"no well-margined instance found after {max_redraws} redraws")


def _loss_parts(inst: GradCheckInstance, ctx_flat: np.ndarray) -> tuple[float, float]:
    """(mean CE, lam * mean region-entropy loss) at the given prompt."""
    p = PromptParams(ctx=ctx_flat.reshape(inst.prompt.ctx.shape))
    g = encode_text(p, inst.enc)
    ce = 0.0
    ood = 0.0
    for s in inst.batch:
        breakdown = combined_loss(s, g, inst.enc.tau, inst.lam, inst.k_rank)
        ce += breakdown.l_coop
        ood += breakdown.l_ood
    n = len(inst.batch)
    return ce / n, inst.lam * ood / n


def _rel_err(analytic: np.ndarray, fd: np.ndarray) -> float:
    scale = max(float(np.abs(analytic).max()), 1e-10)
    return float(np.abs(analytic - fd).max()) / scale


@dataclass
class SuiteReport:
    name: str
    trials: int
    failures: list[str] = field(default_factory=list)
    worst: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures


def run_gradient_check(
    trials: int = 100, seed: int = 2024, h: float = 1e-4, tol: float = 1e-4
) -> SuiteReport:
    """Analytic grad_ce / grad_ood vs central finite differences."""
    report = SuiteReport(name="gradient-fd", trials=trials)
    for trial in range(trials):
        inst = draw_instance(derive_seed(seed, trial))
        x0 = inst.prompt.flat()
        ga_ce = grad_ce(inst.batch, inst.prompt, inst.enc)
        ga_ood = grad_ood(inst.batch, inst.prompt, inst.enc, inst.lam, inst.k_rank)
        fd_ce = finite_difference(lambda x: _loss_parts(inst, x)[0], x0, h)
        fd_ood = finite_difference(lambda x: _loss_parts(inst, x)[1], x0, h)
        for label, analytic, fd in (("ce", ga_ce, fd_ce), ("ood", ga_ood, fd_ood)):
            err = _rel_err(analytic, fd)
            report.worst = max(report.worst, err)
            if err >= tol:
                report.failures.append(f"trial {trial}: {label} rel err {err:.3e}")
    return report


def run_align_check(
    pairs: int = 10000, dims: tuple[int, ...] = (2, 16, 512, 4096), seed: int = 99
) -> SuiteReport:
    """Geometry of the alignment rule on random gradient pairs."""
    report = SuiteReport(name="align-geometry", trials=pairs)
    rng = SeededRng(derive_seed(seed, 0))
    per_dim = max(1, pairs // len(dims))
    for d in dims:
        for k in range(per_dim):
            g_i = rng.normal(n=d)
            if k % 5 == 4:  # force the obtuse branch on a fifth of the pairs
                g_o = -g_i + 0.1 * rng.normal(n=d)
            elif k % 7 == 6:  # degenerate regularizer
                g_o = np.zeros(d)
            else:
                g_o = rng.normal(n=d)
            out = align(g_i, g_o)
            norm_i = float(np.linalg.norm(g_i))
            norm_o = float(np.linalg.norm(g_o))
            tag = f"dim {d} pair {k}"

            d_io = float(np.dot(g_i, g_o))
            d_out = float(np.dot(out, g_o))
            if d_out < -1e-9 * norm_i * norm_o:
                report.failures.append(f"{tag}: safety dot {d_out:.3e}")
            if float(np.linalg.norm(out)) > norm_i + 1e-12:
                report.failures.append(f"{tag}: norm grew")
            if (d_io >= 0 or norm_o < 1e-12) and out is not g_i:
                report.failures.append(f"{tag}: acute/degenerate branch not identity")
            again = align(out, g_o)
            if np.abs(again - out).max() > 1e-12 * (1.0 + np.abs(out).max()):
                report.failures.append(f"{tag}: not idempotent")
            removed = g_i - out
            if norm_o >= 1e-12 and float(np.linalg.norm(removed)) > 0:
                cross = removed - (float(np.dot(removed, g_o)) / (norm_o * norm_o)) * g_o
                if np.abs(cross).max() > 1e-9:
                    report.failures.append(f"{tag}: removed part not parallel to G_o")
                if float(np.dot(removed, g_o)) > 1e-9 * norm_i * norm_o:
                    report.failures.append(f"{tag}: removed part points along +G_o")
            a = float(np.exp(rng.uniform(-3.0, 3.0)))
            b = float(np.exp(rng.uniform(-3.0, 3.0)))
            scaled = align(a * g_i, b * g_o)
            diff = np.abs(scaled - a * out).max()
            if diff > 1e-9 * a * (1.0 + np.abs(g_i).max()):
                report.failures.append(f"{tag}: scale covariance off by {diff:.3e}")
    return report

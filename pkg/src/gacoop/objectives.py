"""Training losses and their analytic prompt-space gradients.

Three pieces: cross-entropy over the in-distribution classes, an entropy
regularizer that pushes class-ambiguous image regions toward the uniform
distribution, and the weighted combination of the two. The gradients G_i
(classification) and G_o (regularization, carrying the lambda factor) are
what the alignment rule operates on.

Region selection treats a region as ID-irrelevant when the ground-truth
class ranks below a threshold in that region's class distribution. The rank
operator is piecewise constant, so gradients treat the selection as fixed
within a step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .model import (
    FrozenTextEncoder,
    PromptParams,
    TextFeatures,
    class_logits,
    class_logits_rows,
    encode_text,
    encode_text_jacobian_transpose_apply,
)
from .numerics import entropy_rows, log_softmax_rows, softmax

OOD_LABEL = -1


@dataclass
class Sample:
    """One pre-encoded image: a global unit feature plus R regional unit features."""

    global_feature: np.ndarray  # (d_embed,)
    region_features: np.ndarray  # (R, d_embed), R may be 0
    label: int  # class index, or OOD_LABEL

    def __post_init__(self):
        self.global_feature = np.asarray(self.global_feature, dtype=np.float64)
        self.region_features = np.asarray(self.region_features, dtype=np.float64)
        if self.region_features.ndim == 1 and self.region_features.size == 0:
            self.region_features = self.region_features.reshape(0, self.global_feature.shape[0])

    @property
    def n_regions(self) -> int:
        return self.region_features.shape[0]

    @property
    def is_id(self) -> bool:
        return self.label != OOD_LABEL


@dataclass(frozen=True)
class RegionSelection:
    """Which regions were deemed ID-irrelevant, and the ground-truth rank per region."""

    selected: tuple[int, ...]  # ascending region indices with rank > k_rank
    ranks: tuple[int, ...]  # rank of the ground-truth class per region (1 = top)


@dataclass(frozen=True)
class LossBreakdown:
    l_coop: float
    l_ood: float
    l_total: float
    n_selected: int


def id_probability(f, g: TextFeatures, tau: float) -> np.ndarray:
    """Class probabilities of one unit image feature (temperature-scaled softmax)."""
    return softmax(class_logits(f, g, tau))


def ce_loss(probs, label: int) -> float:
    """-ln probs[label]. Prefer ce_loss_from_logits in any optimization path."""
    p = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < p.shape[0]:
        raise ContractViolation(f"label {label} out of range for {p.shape[0]} classes")
    if abs(float(p.sum()) - 1.0) > 1e-9 or np.any(p < 0):
        raise ContractViolation("probs is not a probability vector")
    with np.errstate(divide="ignore"):
        return float(-np.log(p[label]))


def ce_loss_from_logits(logits, label: int) -> float:
    """Cross-entropy via log-softmax; never takes ln of a softmax output."""
    z = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < z.shape[0]:
        raise ContractViolation(f"label {label} out of range for {z.shape[0]} classes")
    shifted = z - z.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[label])


def region_probabilities(s: Sample, g: TextFeatures, tau: float) -> np.ndarray:
    """Per-region class probabilities, one row per region. Requires R >= 1."""
    if s.n_regions < 1:
        raise ContractViolation("sample has no regions")
    logits = class_logits_rows(s.region_features, g, tau)
    logp = log_softmax_rows(logits)
    return np.exp(logp)


def rank_of_label(probs_row: np.ndarray, label: int) -> int:
    """Descending-probability rank of `label` (1 = most probable).

    Ties rank the lower class index first, so the result is deterministic.
    """
    p = np.asarray(probs_row, dtype=np.float64)
    p_label = p[label]
    better = int((p > p_label).sum())
    tied_before = int((p[:label] == p_label).sum())
    return 1 + better + tied_before


def rank_margin(probs_row: np.ndarray, label: int) -> float:
    """Smallest |p_k - p_label| over k != label; a rank-flip distance."""
    p = np.asarray(probs_row, dtype=np.float64)
    diffs = np.abs(np.delete(p, label) - p[label])
    return float(diffs.min()) if diffs.size else np.inf


def select_ood_regions(region_probs, label: int, k_rank: int) -> RegionSelection:
    """Regions whose ground-truth rank exceeds k_rank are ID-irrelevant."""
    probs = np.atleast_2d(np.asarray(region_probs, dtype=np.float64))
    if not 0 <= label < probs.shape[1]:
        raise ContractViolation(f"label {label} out of range for {probs.shape[1]} classes")
    ranks = tuple(rank_of_label(row, label) for row in probs)
    selected = tuple(j for j, r in enumerate(ranks) if r > k_rank)
    return RegionSelection(selected=selected, ranks=ranks)


def ood_reg_loss(region_probs, sel: RegionSelection) -> float:
    """Mean of -entropy over the selected regions; 0 when nothing is selected."""
    if not sel.selected:
        return 0.0
    probs = np.atleast_2d(np.asarray(region_probs, dtype=np.float64))
    ents = entropy_rows(probs[list(sel.selected)])
    return float(-ents.mean())


def combined_loss(
    s: Sample, g: TextFeatures, tau: float, lam: float, k_rank: int
) -> LossBreakdown:
    """Cross-entropy plus lambda times the region-entropy regularizer."""
    if not s.is_id:
        raise ContractViolation("combined_loss is defined on ID samples only")
    logits = class_logits(s.global_feature, g, tau)
    l_coop = ce_loss_from_logits(logits, s.label)
    if s.n_regions == 0:
        l_ood, n_sel = 0.0, 0
    else:
        probs = region_probabilities(s, g, tau)
        sel = select_ood_regions(probs, s.label, k_rank)
        l_ood = ood_reg_loss(probs, sel)
        n_sel = len(sel.selected)
    return LossBreakdown(
        l_coop=l_coop, l_ood=l_ood, l_total=l_coop + lam * l_ood, n_selected=n_sel
    )


@dataclass
class BatchTerms:
    """Everything one forward/backward pass over a batch produces."""

    grad_ce: np.ndarray  # G_i, flat over ctx
    grad_ood_raw: np.ndarray | None  # d(mean L_ood)/d ctx, before the lambda factor
    l_coop: float  # batch mean
    l_ood: float  # batch mean (0 contributions for empty selections)
    n_selected: int
    n_regions: int


def _validate_batch(batch: list[Sample], d_embed: int, n_classes: int) -> None:
    if not batch:
        raise ContractViolation("batch is empty")
    for i, s in enumerate(batch):
        if not s.is_id:
            raise ContractViolation(f"sample {i} is OOD-labeled; training uses ID data only")
        if not 0 <= s.label < n_classes:
            raise ContractViolation(f"sample {i} label {s.label} out of range")
        if s.global_feature.shape[0] != d_embed:
            raise ContractViolation(f"sample {i} feature dim {s.global_feature.shape[0]}")


def batch_terms(
    batch: list[Sample],
    p: PromptParams,
    enc: FrozenTextEncoder,
    k_rank: int,
    need_ood: bool,
) -> BatchTerms:
    """Fused batch forward/backward; grad_ce and grad_ood share this one path.

    Per-sample work is accumulated in ascending sample-index order (fixed-order
    reduction contract). The selection is treated as a constant: no gradient
    flows through the rank operator.
    """
    _validate_batch(batch, enc.d_embed, enc.n_classes)
    tau = enc.tau
    g = encode_text(p, enc)
    n = len(batch)

    feats = np.stack([s.global_feature for s in batch])
    logits = class_logits_rows(feats, g, tau)
    logp = log_softmax_rows(logits)
    probs = np.exp(logp)
    labels = np.array([s.label for s in batch])
    rows = np.arange(n)
    l_coop = float(-logp[rows, labels].mean())

    dz = probs.copy()
    dz[rows, labels] -= 1.0
    upstream_ce = (dz.T @ feats) / tau

    grad_ce = encode_text_jacobian_transpose_apply(enc, p, upstream_ce) / n

    grad_ood_raw = None
    l_ood_sum = 0.0
    n_selected = 0
    n_regions = 0
    if need_ood:
        upstream_ood = np.zeros((enc.n_classes, enc.d_embed))
        any_selected = False
        for s in batch:
            n_regions += s.n_regions
            if s.n_regions == 0:
                continue
            r_logits = class_logits_rows(s.region_features, g, tau)
            r_logp = log_softmax_rows(r_logits)
            r_probs = np.exp(r_logp)
            sel = select_ood_regions(r_probs, s.label, k_rank)
            if not sel.selected:
                continue
            any_selected = True
            idx = list(sel.selected)
            n_selected += len(idx)
            plogp = np.where(r_probs[idx] > 0, r_probs[idx] * r_logp[idx], 0.0)
            ents = -plogp.sum(axis=1)
            l_ood_sum += float(-ents.mean())
            # d(-H)/dz per selected region, averaged over the selection
            coeff = (plogp + r_probs[idx] * ents[:, None]) / len(idx)
            upstream_ood += coeff.T @ (s.region_features[idx] / tau)
        if any_selected:
            grad_ood_raw = encode_text_jacobian_transpose_apply(enc, p, upstream_ood) / n
        else:
            grad_ood_raw = np.zeros(p.ctx_len * p.d_token)

    return BatchTerms(
        grad_ce=grad_ce,
        grad_ood_raw=grad_ood_raw,
        l_coop=l_coop,
        l_ood=l_ood_sum / n,
        n_selected=n_selected,
        n_regions=n_regions,
    )


def grad_ce(batch: list[Sample], p: PromptParams, enc: FrozenTextEncoder) -> np.ndarray:
    """G_i: gradient of the batch-mean cross-entropy w.r.t. the flat ctx."""
    return batch_terms(batch, p, enc, k_rank=0, need_ood=False).grad_ce


def grad_ood(
    batch: list[Sample],
    p: PromptParams,
    enc: FrozenTextEncoder,
    lam: float,
    k_rank: int,
    raw: bool = False,
) -> np.ndarray:
    """G_o: lambda times the gradient of the batch-mean region-entropy loss.

    With raw=True the lambda factor is dropped (ablation variant); by default
    G_o is exactly the gradient of the lambda-weighted addend of the combined
    loss. lam == 0 returns an exact zero vector without touching the regions.
    """
    if lam < 0:
        raise ContractViolation(f"lambda must be non-negative, got {lam}")
    if not batch:
        raise ContractViolation("batch is empty")
    d = p.ctx_len * p.d_token
    if lam == 0.0 and not raw:
        _validate_batch(batch, enc.d_embed, enc.n_classes)
        return np.zeros(d)
    terms = batch_terms(batch, p, enc, k_rank=k_rank, need_ood=True)
    return terms.grad_ood_raw if raw else lam * terms.grad_ood_raw

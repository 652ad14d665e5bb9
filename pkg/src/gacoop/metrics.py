"""OOD scoring and the three evaluation metrics: FPR95, AUROC, ID accuracy.

The ID-confidence score is the maximum class probability of the
temperature-scaled similarity softmax (global feature only). AUROC is the
Mann-Whitney statistic with ties counted as half wins, computed by midrank
sorting; the result is exactly the brute-force pairwise count because rank
sums and half-integer win counts are both exact in float64 at these sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .model import FrozenTextEncoder, PromptParams, TextFeatures, class_logits_rows, encode_text
from .numerics import log_softmax_rows, softmax
from .objectives import Sample, id_probability


@dataclass(frozen=True)
class ScoredSample:
    score: float  # higher = more ID-like
    is_id: bool
    predicted_class: int = -1
    true_class: int = -1


@dataclass
class DatasetMetrics:
    fpr95: float
    auroc: float


@dataclass
class EvalReport:
    strategy: str
    seed: int
    per_dataset: dict[str, DatasetMetrics]
    id_accuracy: float
    conflict_ratio: float

    @property
    def average_fpr95(self) -> float:
        return float(np.mean([m.fpr95 for m in self.per_dataset.values()]))

    @property
    def average_auroc(self) -> float:
        return float(np.mean([m.auroc for m in self.per_dataset.values()]))


def mcm_score(f, g: TextFeatures, tau: float) -> float:
    """Max class probability of one unit feature."""
    return float(id_probability(f, g, tau).max())


def mcm_scores_rows(feats: np.ndarray, g: TextFeatures, tau: float) -> np.ndarray:
    logits = class_logits_rows(feats, g, tau)
    return np.exp(log_softmax_rows(logits)).max(axis=1)


def _as_scores(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ContractViolation(f"{name} scores are empty")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} scores contain non-finite values")
    return arr


def auroc(id_scores, ood_scores) -> float:
    """P(random ID score > random OOD score), ties half-weighted (midranks)."""
    ids = _as_scores(id_scores, "ID")
    oods = _as_scores(ood_scores, "OOD")
    n1, n2 = ids.size, oods.size
    combined = np.concatenate([ids, oods])
    order = np.argsort(combined, kind="stable")
    ranks = np.empty(combined.size)
    sorted_vals = combined[order]
    i = 0
    while i < combined.size:
        j = i
        while j + 1 < combined.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0  # 1-based midrank
        i = j + 1
    u = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n2))


def auroc_pairwise(id_scores, ood_scores) -> float:
    """Brute-force oracle: count wins and half-ties over all pairs."""
    ids = _as_scores(id_scores, "ID")
    oods = _as_scores(ood_scores, "OOD")
    wins = (ids[:, None] > oods[None, :]).sum()
    ties = (ids[:, None] == oods[None, :]).sum()
    return float((wins + 0.5 * ties) / (ids.size * oods.size))


def fpr_at_tpr(id_scores, ood_scores, tpr_target: float = 0.95) -> float:
    """OOD fraction scoring above the largest threshold keeping ID TPR >= target.

    Thresholds are drawn from the observed ID scores (>= comparisons), so the
    result is a deterministic finite-sample quantity.
    """
    ids = _as_scores(id_scores, "ID")
    oods = _as_scores(ood_scores, "OOD")
    if not 0.0 < tpr_target <= 1.0:
        raise ContractViolation(f"tpr_target must be in (0, 1], got {tpr_target}")
    candidates = np.unique(ids)[::-1]  # descending distinct ID scores
    n = ids.size
    threshold = None
    for theta in candidates:
        if (ids >= theta).sum() / n >= tpr_target:
            threshold = theta
            break
    assert threshold is not None  # theta = min(ids) always reaches TPR 1
    return float((oods >= threshold).sum() / oods.size)


def id_accuracy(samples: list[Sample], g: TextFeatures, tau: float) -> float:
    """Fraction of ID samples whose argmax class matches the label.

    Argmax ties resolve to the lowest class index.
    """
    if not samples:
        raise ContractViolation("no samples to score")
    feats = np.stack([s.global_feature for s in samples])
    labels = np.array([s.label for s in samples])
    if np.any(labels < 0):
        raise ContractViolation("id_accuracy requires ID-labeled samples")
    logits = class_logits_rows(feats, g, tau)
    predicted = logits.argmax(axis=1)
    return float((predicted == labels).mean())


def scored_samples(bank, p: PromptParams, enc: FrozenTextEncoder, tau: float) -> list[ScoredSample]:
    """MCM-score every sample in a bank, keeping predicted/true classes."""
    g = encode_text(p, enc)
    samples = bank.to_samples()
    feats = np.stack([s.global_feature for s in samples])
    logits = class_logits_rows(feats, g, tau)
    scores = np.exp(log_softmax_rows(logits)).max(axis=1)
    predicted = logits.argmax(axis=1)
    return [
        ScoredSample(
            score=float(scores[i]),
            is_id=s.label >= 0,
            predicted_class=int(predicted[i]),
            true_class=s.label,
        )
        for i, s in enumerate(samples)
    ]


def evaluate(
    p: PromptParams,
    enc: FrozenTextEncoder,
    id_test,
    ood_banks: dict,
    tau: float,
    strategy: str = "",
    seed: int = 0,
    conflict_ratio: float = 0.0,
) -> EvalReport:
    """Score every bank with the MCM score and assemble the report."""
    if id_test.n_samples == 0:
        raise ContractViolation("empty ID test bank")
    g = encode_text(p, enc)
    id_samples = id_test.to_samples()
    id_feats = np.stack([s.global_feature for s in id_samples])
    id_scores = mcm_scores_rows(id_feats, g, tau)
    per_dataset = {}
    for name in sorted(ood_banks):
        bank = ood_banks[name]
        if bank.n_samples == 0:
            raise ContractViolation(f"empty OOD bank {name!r}")
        ood_feats = np.stack([s.global_feature for s in bank.to_samples()])
        ood_scores = mcm_scores_rows(ood_feats, g, tau)
        per_dataset[name] = DatasetMetrics(
            fpr95=fpr_at_tpr(id_scores, ood_scores),
            auroc=auroc(id_scores, ood_scores),
        )
    return EvalReport(
        strategy=strategy,
        seed=seed,
        per_dataset=per_dataset,
        id_accuracy=id_accuracy(id_samples, g, tau),
        conflict_ratio=conflict_ratio,
    )

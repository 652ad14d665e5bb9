"""Dense float64 vector/matrix primitives and stable scalar kernels.

All math runs in 64-bit floats. Reductions (dot, matvec, sums) use numpy,
whose association is fixed for a given platform and build: repeated runs on
identical inputs produce identical bits, which is the reproducibility
contract the rest of the library relies on.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolation, DegenerateVectorError, DimensionMismatchError

#: Norms below this are treated as degenerate (documented constant).
EPS_NORM = 1e-12


def as_vector(v, name: str = "vector") -> np.ndarray:
    """Validate and return a finite 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractViolation(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ContractViolation(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains non-finite entries")
    return arr


def softmax(logits) -> np.ndarray:
    """Exp-normalize with max-shift; output sums to 1 within 1e-12."""
    z = as_vector(logits, "logits")
    e = np.exp(z - z.max())
    return e / e.sum()


def log_softmax(logits) -> np.ndarray:
    z = as_vector(logits, "logits")
    shifted = z - z.max()
    return shifted - np.log(np.exp(shifted).sum())


def entropy(p) -> float:
    """Shannon entropy in nats with the 0*ln(0) = 0 convention.

    Requires a probability vector: entries >= 0, sum within 1e-9 of 1.
    """
    q = as_vector(p, "probabilities")
    if np.any(q < 0):
        raise ContractViolation("probabilities must be non-negative")
    total = float(q.sum())
    if abs(total - 1.0) > 1e-9:
        raise ContractViolation(f"probabilities sum to {total!r}, expected 1 within 1e-9")
    nz = q[q > 0]
    return float(-(nz * np.log(nz)).sum())


def l2_normalize(v) -> np.ndarray:
    arr = as_vector(v)
    norm = float(np.sqrt(np.dot(arr, arr)))
    if norm <= EPS_NORM:
        raise DegenerateVectorError(f"norm {norm!r} below {EPS_NORM}")
    return arr / norm


def dot(a, b) -> float:
    x = as_vector(a, "a")
    y = as_vector(b, "b")
    if x.shape != y.shape:
        raise DimensionMismatchError(f"dot: {x.shape} vs {y.shape}")
    return float(np.dot(x, y))


def matvec(m, v) -> np.ndarray:
    mat = np.asarray(m, dtype=np.float64)
    x = as_vector(v, "v")
    if mat.ndim != 2:
        raise DimensionMismatchError(f"matvec: matrix must be 2-D, got {mat.shape}")
    if mat.shape[1] != x.shape[0]:
        raise DimensionMismatchError(f"matvec: {mat.shape} vs {x.shape}")
    return mat @ x


def entropy_rows(p: np.ndarray) -> np.ndarray:
    """Row-wise entropy of a matrix of probability rows (no contract checks)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def log_softmax_rows(z: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax (max-shift per row)."""
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

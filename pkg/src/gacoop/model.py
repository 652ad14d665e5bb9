"""Frozen surrogate encoder and the learnable prompt.

The text side of the model is a single frozen linear projection: the M
learnable context token vectors are concatenated with a frozen per-class
embedding, projected by a fixed matrix W, and L2-normalized. Only the
context vectors ever receive gradient. Image features are taken as given
from a feature bank, so no image encoder exists here.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, DegenerateVectorError, DimensionMismatchError
from .numerics import EPS_NORM
from .rng import SeededRng, derive_seed

# Sub-stream ids hung off a master seed (see rng module for derive_seed).
STREAM_W = 0
STREAM_CLASS_EMB = 1
STREAM_CTX = 2
STREAM_BATCH_BASE = 3  # stream for epoch e is STREAM_BATCH_BASE + e


@dataclass
class PromptParams:
    """The only trainable state: M context token vectors of d_token floats."""

    ctx: np.ndarray  # (M, d_token) float64

    def __post_init__(self):
        self.ctx = np.asarray(self.ctx, dtype=np.float64)
        if self.ctx.ndim != 2:
            raise ContractViolation(f"ctx must be (M, d_token), got {self.ctx.shape}")
        if not np.all(np.isfinite(self.ctx)):
            raise ContractViolation("ctx contains non-finite entries")

    @property
    def ctx_len(self) -> int:
        return self.ctx.shape[0]

    @property
    def d_token(self) -> int:
        return self.ctx.shape[1]

    def flat(self) -> np.ndarray:
        return self.ctx.reshape(-1)

    def checksum(self) -> str:
        """First 16 hex digits of sha256 over the little-endian float64 bytes."""
        return hashlib.sha256(self.ctx.astype("<f8").tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class FrozenTextEncoder:
    """Fixed projection W, per-class embeddings, and temperature. Never trained."""

    class_embeddings: np.ndarray  # (N, d_token)
    w: np.ndarray  # (d_embed, (M+1) * d_token)
    tau: float
    ctx_len: int

    def __post_init__(self):
        for name in ("class_embeddings", "w"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.tau <= 0:
            raise ContractViolation(f"tau must be positive, got {self.tau}")
        n, d_token = self.class_embeddings.shape
        if self.w.shape[1] != (self.ctx_len + 1) * d_token:
            raise DimensionMismatchError(
                f"w has {self.w.shape[1]} input columns, expected "
                f"({self.ctx_len}+1)*{d_token}"
            )

    @property
    def n_classes(self) -> int:
        return self.class_embeddings.shape[0]

    @property
    def d_token(self) -> int:
        return self.class_embeddings.shape[1]

    @property
    def d_embed(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class TextFeatures:
    """Per-class unit text features."""

    g: np.ndarray  # (N, d_embed), unit rows

    def __post_init__(self):
        arr = np.asarray(self.g, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "g", arr)

    @property
    def n_classes(self) -> int:
        return self.g.shape[0]


def _check_dims(p: PromptParams, enc: FrozenTextEncoder) -> None:
    if p.ctx_len != enc.ctx_len or p.d_token != enc.d_token:
        raise DimensionMismatchError(
            f"prompt ({p.ctx_len}, {p.d_token}) does not match encoder "
            f"({enc.ctx_len}, {enc.d_token})"
        )


def _encode_raw(p: PromptParams, enc: FrozenTextEncoder) -> np.ndarray:
    """Pre-normalization features, one row per class."""
    _check_dims(p, enc)
    ctx_flat = p.flat()
    tokens = np.concatenate(
        [np.tile(ctx_flat, (enc.n_classes, 1)), enc.class_embeddings], axis=1
    )
    return tokens @ enc.w.T


def encode_text(p: PromptParams, enc: FrozenTextEncoder) -> TextFeatures:
    """Unit text feature per class: l2_normalize(W @ concat(ctx, class_embedding))."""
    pre = _encode_raw(p, enc)
    norms = np.sqrt((pre * pre).sum(axis=1))
    if np.any(norms <= EPS_NORM):
        bad = int(np.argmin(norms))
        raise DegenerateVectorError(
            f"pre-normalization feature for class {bad} has norm {norms[bad]!r}"
        )
    return TextFeatures(g=pre / norms[:, None])


def class_logits(f, g: TextFeatures, tau: float) -> np.ndarray:
    """Temperature-scaled cosine similarities of one unit image feature to each class."""
    feat = np.asarray(f, dtype=np.float64)
    if tau <= 0:
        raise ContractViolation(f"tau must be positive, got {tau}")
    norm = float(np.sqrt(np.dot(feat, feat)))
    if abs(norm - 1.0) > 1e-6:
        raise ContractViolation(f"feature norm {norm!r} not unit within 1e-6")
    if feat.shape[0] != g.g.shape[1]:
        raise DimensionMismatchError(f"feature dim {feat.shape[0]} vs {g.g.shape[1]}")
    sims = g.g @ feat
    if np.abs(sims).max() > 1.0 + 1e-9:
        raise ContractViolation("cosine similarity out of [-1, 1]; inputs not unit")
    return sims / tau


def class_logits_rows(feats: np.ndarray, g: TextFeatures, tau: float) -> np.ndarray:
    """class_logits over a stack of unit feature rows; returns (n, N)."""
    feats = np.asarray(feats, dtype=np.float64)
    if tau <= 0:
        raise ContractViolation(f"tau must be positive, got {tau}")
    if feats.shape[1] != g.g.shape[1]:
        raise DimensionMismatchError(f"feature dim {feats.shape[1]} vs {g.g.shape[1]}")
    norms = np.sqrt((feats * feats).sum(axis=1))
    if np.abs(norms - 1.0).max() > 1e-6:
        raise ContractViolation("feature rows not unit within 1e-6")
    return (feats @ g.g.T) / tau


def encode_text_jacobian_transpose_apply(
    enc: FrozenTextEncoder, p: PromptParams, upstream: np.ndarray
) -> np.ndarray:
    """Pull per-class gradients w.r.t. the text features back to the ctx block.

    upstream is (N, d_embed), dL/dg_n per class. The normalization Jacobian
    transpose is (I - g g^T) / ||pre||; W and the class embeddings are frozen
    so only the first M*d_token token coordinates accumulate. Returns a flat
    gradient of length M*d_token.
    """
    up = np.asarray(upstream, dtype=np.float64)
    if up.shape != (enc.n_classes, enc.d_embed):
        raise DimensionMismatchError(
            f"upstream shape {up.shape}, expected {(enc.n_classes, enc.d_embed)}"
        )
    if not np.all(np.isfinite(up)):
        raise ContractViolation("upstream contains non-finite entries")
    pre = _encode_raw(p, enc)
    norms = np.sqrt((pre * pre).sum(axis=1))
    g_hat = pre / norms[:, None]
    radial = (up * g_hat).sum(axis=1)
    v = (up - radial[:, None] * g_hat) / norms[:, None]
    d_ctx = p.ctx_len * p.d_token
    return (v @ enc.w[:, :d_ctx]).sum(axis=0)


def build_encoder(
    seed: int,
    n_classes: int,
    d_embed: int,
    d_token: int,
    ctx_len: int,
    tau: float,
) -> FrozenTextEncoder:
    """Deterministic frozen encoder from a master seed.

    W entries ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) with
    fan_in = (ctx_len+1)*d_token, drawn row-major from stream STREAM_W;
    class embeddings are unit-normalized Gaussian vectors drawn one class at
    a time from stream STREAM_CLASS_EMB.
    """
    fan_in = (ctx_len + 1) * d_token
    bound = 1.0 / np.sqrt(fan_in)
    w_rng = SeededRng(derive_seed(seed, STREAM_W))
    w = w_rng.uniform(-bound, bound, n=d_embed * fan_in).reshape(d_embed, fan_in)
    emb_rng = SeededRng(derive_seed(seed, STREAM_CLASS_EMB))
    emb = np.stack([emb_rng.unit_vector(d_token) for _ in range(n_classes)])
    return FrozenTextEncoder(class_embeddings=emb, w=w, tau=tau, ctx_len=ctx_len)


def init_prompt(
    seed: int, ctx_len: int, d_token: int, init: str = "gauss"
) -> PromptParams:
    """Context vectors ~ N(0, 0.02) from stream STREAM_CTX, or all zeros."""
    if init == "zeros":
        return PromptParams(ctx=np.zeros((ctx_len, d_token)))
    if init != "gauss":
        raise ContractViolation(f"unknown prompt init {init!r}")
    rng = SeededRng(derive_seed(seed, STREAM_CTX))
    ctx = rng.normal(0.0, 0.02, n=ctx_len * d_token).reshape(ctx_len, d_token)
    return PromptParams(ctx=ctx)

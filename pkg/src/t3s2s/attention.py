"""Cross-attention with dense tuning of logits and characteristics prominence.

One layer computes, per head::

    logits = Q K^T / sqrt(d_h)          (Q from image features, K/V from text)
    logits -> dense_tune (optional, pre-softmax)
    A = softmax(logits);  F = A V
    H = masks of keywords found in each channel's TopK |V|
    F_hat = F * (1 + beta * H)

and returns ``X + concat(F_hat)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, DimensionMismatch, MaskLengthMismatch, NonFiniteInput
from .prompt import KeywordIndices
from .sketch import PyramidLevel

DENSE_PLACEMENTS = frozenset({"down_2", "mid_0"})


@dataclass(frozen=True)
class LayerConfig:
    index: int
    placement: str
    h: int
    w: int
    d_m: int
    heads: int = 2
    dense_tuning: bool | None = None
    weight_seed: int = 0

    def __post_init__(self):
        if self.h < 1 or self.w < 1:
            raise ConfigError(f"layer {self.placement}: spatial dims must be positive")
        if self.heads < 1 or self.d_m % self.heads:
            raise ConfigError(
                f"layer {self.placement}: d_m={self.d_m} not divisible by heads={self.heads}"
            )
        if self.dense_tuning is None:
            object.__setattr__(self, "dense_tuning", self.placement in DENSE_PLACEMENTS)

    @property
    def b(self) -> int:
        return self.h * self.w

    @property
    def d_h(self) -> int:
        return self.d_m // self.heads


@dataclass(frozen=True)
class ProjectionWeights:
    """Full ``W_Q (d_x x d_m)``, ``W_K, W_V (d x d_m)``; head ``h`` owns columns ``h*d_h:(h+1)*d_h``."""

    W_Q: np.ndarray
    W_K: np.ndarray
    W_V: np.ndarray
    heads: int

    @classmethod
    def from_seed(cls, seed: int, d_x: int, d: int, d_m: int, heads: int) -> ProjectionWeights:
        rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, d_x, d, d_m]))
        W_Q = rng.standard_normal((d_x, d_m)) / math.sqrt(d_x)
        W_K = rng.standard_normal((d, d_m))
        W_V = rng.standard_normal((d, d_m))
        for W in (W_Q, W_K, W_V):
            W.setflags(write=False)
        return cls(W_Q, W_K, W_V, heads)

    def head(self, h: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        d_h = self.W_Q.shape[1] // self.heads
        sl = slice(h * d_h, (h + 1) * d_h)
        return self.W_Q[:, sl], self.W_K[:, sl], self.W_V[:, sl]


@dataclass(frozen=True)
class DenseTuneParams:
    strength: float = 2.5
    gamma: float = 2.0
    tau: float = 1.0

    def __post_init__(self):
        if self.strength < 0 or self.gamma <= 0 or not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"invalid dense-tune parameters {self}")

    @property
    def sigma(self) -> float:
        return self.strength * self.tau ** self.gamma


def _check_finite(name: str, a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput(f"{name} contains non-finite values")


def project(X: np.ndarray, S: np.ndarray, weights: ProjectionWeights):
    """Per-head ``(Q, K, V)`` lists: ``Q = X W_Q``, ``K = S W_K``, ``V = S W_V``."""
    X = np.asarray(X, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != weights.W_Q.shape[0]:
        raise DimensionMismatch(f"features {X.shape} vs W_Q {weights.W_Q.shape}")
    if S.ndim != 2 or S.shape[1] != weights.W_K.shape[0]:
        raise DimensionMismatch(f"embeddings {S.shape} vs W_K {weights.W_K.shape}")
    _check_finite("features", X)
    _check_finite("embeddings", S)
    Qs, Ks, Vs = [], [], []
    for h in range(weights.heads):
        wq, wk, wv = weights.head(h)
        Qs.append(X @ wq)
        Ks.append(S @ wk)
        Vs.append(S @ wv)
    return Qs, Ks, Vs


def attention_logits(Q: np.ndarray, K: np.ndarray, d_h: int | None = None) -> np.ndarray:
    if Q.shape[1] != K.shape[1]:
        raise DimensionMismatch(f"Q {Q.shape} and K {K.shape} inner dims differ")
    d_h = Q.shape[1] if d_h is None else d_h
    return (Q @ K.T) / math.sqrt(d_h)


def dense_tune(
    logits: np.ndarray,
    level: PyramidLevel | Mapping[int, np.ndarray],
    q: KeywordIndices,
    params: DenseTuneParams,
) -> np.ndarray:
    """Raise keyword logits inside their sketch region and lower them outside.

    For keyword column ``t`` with mask ``M`` covering area ratio ``a``, the
    column is interpolated toward its own max (in-mask) or min (out-of-mask)
    with weight ``min(sigma(tau) * (1 - a), 1)``. Small instances get the
    strongest pull; the result never leaves the column's original range.
    """
    masks = level.masks if isinstance(level, PyramidLevel) else level
    b = logits.shape[0]
    if not len(q):
        return np.array(logits, dtype=np.float64)
    stacked = []
    coef = []
    sigma = params.sigma
    for inst in q.ids:
        m = np.asarray(masks[inst], dtype=np.uint8)
        if m.shape != (b,):
            raise MaskLengthMismatch(f"mask for instance {inst} has length {m.size}, b={b}")
        stacked.append(m)
        w = 1.0 - int(m.sum()) / b
        coef.append(min(sigma * w, 1.0))
    return kernels.dense_tune(logits, np.asarray(q.q), np.stack(stacked), np.asarray(coef))


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def attend(A: np.ndarray, V: np.ndarray) -> np.ndarray:
    if A.shape[1] != V.shape[0]:
        raise DimensionMismatch(f"A {A.shape} and V {V.shape} do not chain")
    return A @ V


def topk_value_indices(V: np.ndarray, K: int, i_end: int) -> np.ndarray:
    """TopK token rows of ``|V|`` per channel over the word tokens ``1..i_end-1``."""
    return kernels.topk_indices(V, K, i_end)


def keyword_slots(q: KeywordIndices, n: int) -> np.ndarray:
    slot = np.full(n, -1, dtype=np.int64)
    for k, t in enumerate(q.q):
        slot[t] = k
    return slot


def characteristics_mask(
    Y: np.ndarray,
    q: KeywordIndices,
    level: PyramidLevel | Mapping[int, np.ndarray],
    n: int,
) -> np.ndarray:
    """Enhancement mask ``H`` (``b x channels``) from the TopK sets ``Y``."""
    masks = level.masks if isinstance(level, PyramidLevel) else level
    if len(q):
        stacked = np.stack([np.asarray(masks[i], dtype=np.uint8) for i in q.ids])
        if len({m.shape for m in stacked}) != 1:
            raise MaskLengthMismatch("instance masks differ in length")
    else:
        b = len(next(iter(masks.values()))) if masks else 0
        return np.zeros((b, Y.shape[0]), dtype=np.int32)
    return kernels.characteristics_mask(Y, keyword_slots(q, n), stacked)


def prominence(F: np.ndarray, H: np.ndarray, beta: float) -> np.ndarray:
    if beta < 0:
        raise ConfigError("beta must be non-negative")
    return kernels.prominence(F, H, beta)


def amplify_value_topk(V: np.ndarray, K: int, factor: float, i_end: int) -> np.ndarray:
    """Multiply each channel's ``K`` largest-magnitude word entries by ``factor``."""
    if not math.isfinite(factor):
        raise ConfigError("factor must be finite")
    Y = kernels.topk_indices(V, K, i_end)
    out = np.array(V, dtype=np.float64)
    if K == 0:
        return out
    cols = np.broadcast_to(np.arange(V.shape[1])[:, None], Y.shape)
    out[Y, cols] = out[Y, cols] * factor
    return out


@dataclass
class LayerResult:
    attention: list[np.ndarray]  # per head, b x n
    topk: list[np.ndarray]  # per head, d_h x K (empty when prominence is off)
    enhancement: list[np.ndarray]  # per head, b x d_h
    features: np.ndarray  # F before prominence, b x d_m
    enhanced: np.ndarray  # F_hat, b x d_m
    output: np.ndarray  # X + F_hat
    extra: dict = field(default_factory=dict)


def layer_forward(
    cfg: LayerConfig,
    X: np.ndarray,
    S: np.ndarray,
    level: PyramidLevel | None,
    q: KeywordIndices,
    i_end: int,
    tau: float = 1.0,
    cp: tuple[int, float] | None = (2, 1.0),
    dt: DenseTuneParams | None = None,
    weights: ProjectionWeights | None = None,
    amplify: tuple[int, float] | None = None,
) -> LayerResult:
    """Run one cross-attention layer with the enabled tunings.

    ``cp`` is ``(K, beta)`` or None to disable prominence. ``dt`` is applied
    only when ``cfg.dense_tuning`` is set; its ``tau`` is replaced by the
    ``tau`` argument. ``amplify = (K, factor)`` scales TopK value entries
    before attending, the diagnostic used by the value probe.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (cfg.b, cfg.d_m):
        raise DimensionMismatch(f"features {X.shape} != ({cfg.b}, {cfg.d_m})")
    if weights is None:
        weights = ProjectionWeights.from_seed(cfg.weight_seed, cfg.d_m, S.shape[1], cfg.d_m, cfg.heads)
    use_dt = bool(cfg.dense_tuning) and dt is not None and len(q) > 0
    if use_dt:
        dt = DenseTuneParams(dt.strength, dt.gamma, tau)
    n = S.shape[0]
    Qs, Ks, Vs = project(X, S, weights)
    attn, topk, enh, Fs, Fhats = [], [], [], [], []
    for Q, K_, V in zip(Qs, Ks, Vs):
        logits = attention_logits(Q, K_, cfg.d_h)
        if use_dt:
            logits = dense_tune(logits, level, q, dt)
        A = softmax_rows(logits)
        if amplify is not None:
            V = amplify_value_topk(V, amplify[0], amplify[1], i_end)
        F = attend(A, V)
        if cp is not None and level is not None:
            K, beta = cp
            Y = topk_value_indices(V, K, i_end)
            H = characteristics_mask(Y, q, level, n)
            Fhat = prominence(F, H, beta)
        else:
            Y = np.zeros((cfg.d_h, 0), dtype=np.int64)
            H = np.zeros(F.shape, dtype=np.int32)
            Fhat = F
        attn.append(A)
        topk.append(Y)
        enh.append(H)
        Fs.append(F)
        Fhats.append(Fhat)
    F = np.concatenate(Fs, axis=1)
    Fhat = np.concatenate(Fhats, axis=1)
    return LayerResult(attn, topk, enh, F, Fhat, X + Fhat)


def default_layer_stack(seed: int = 0, heads: int = 2) -> list[LayerConfig]:
    spec: Sequence[tuple[str, int, int]] = (
        ("down_0", 32, 64),
        ("down_2", 16, 128),
        ("mid_0", 8, 128),
        ("up_1", 16, 128),
        ("up_0", 32, 64),
    )
    return [
        LayerConfig(index=m, placement=name, h=r, w=r, d_m=d, heads=heads, weight_seed=seed * 1000 + m)
        for m, (name, r, d) in enumerate(spec)
    ]

"""Hot per-channel kernels with backend selection at import.

The Cython extension ``t3s2s._ckernels`` is used when it was built;
otherwise the numpy implementations in ``t3s2s._pykernels`` run. Set
``T3S2S_PURE=1`` to force the numpy path. Both backends return
bit-identical results, which the test-suite checks.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels
from .errors import DimensionMismatch, KTooLarge, MaskLengthMismatch

python_backend = _pykernels
try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("T3S2S_PURE") != "1":
    _impl = compiled_backend
    BACKEND = "cython"
else:
    _impl = python_backend
    BACKEND = "python"


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def topk_indices(V: np.ndarray, K: int, i_end: int, backend=None) -> np.ndarray:
    """Per channel, the ``K`` rows in ``[1, i_end)`` with the largest ``|V|``.

    Returns a ``(channels, K)`` int64 array ordered by descending magnitude;
    equal magnitudes keep the lower row first.
    """
    V = _f64(V)
    if V.ndim != 2:
        raise DimensionMismatch("value matrix must be 2-D")
    if not 1 <= i_end <= V.shape[0]:
        raise DimensionMismatch(f"i_end={i_end} out of range for {V.shape[0]} rows")
    if K < 0 or K > i_end - 1:
        raise KTooLarge(f"K={K} outside [0, {i_end - 1}]")
    if K == 0:
        return np.zeros((V.shape[1], 0), dtype=np.int64)
    return (backend or _impl).topk_indices(V, K, i_end)


def characteristics_mask(
    Y: np.ndarray, slot: np.ndarray, masks: np.ndarray, backend=None
) -> np.ndarray:
    """Sum the masks of every keyword found in each channel's TopK set.

    ``slot[t]`` is the row of ``masks`` for token ``t`` or -1 for tokens that
    are not keywords. Returns ``(b, channels)`` int32.
    """
    Y = np.ascontiguousarray(Y, dtype=np.int64)
    slot = np.ascontiguousarray(slot, dtype=np.int64)
    masks = np.ascontiguousarray(masks, dtype=np.uint8)
    if masks.ndim != 2:
        raise MaskLengthMismatch("masks must be (instances, b)")
    if Y.size and (Y.min() < 0 or Y.max() >= slot.shape[0]):
        raise DimensionMismatch("TopK index outside the token range")
    if slot.size and slot.max() >= masks.shape[0]:
        raise MaskLengthMismatch("slot refers to a missing mask row")
    return (backend or _impl).characteristics_mask(Y, slot, masks)


def prominence(F: np.ndarray, H: np.ndarray, beta: float, backend=None) -> np.ndarray:
    F = _f64(F)
    H = np.ascontiguousarray(H, dtype=np.int32)
    if F.shape != H.shape:
        raise DimensionMismatch(f"feature map {F.shape} vs mask {H.shape}")
    return (backend or _impl).prominence(F, H, float(beta))


def dense_tune(
    logits: np.ndarray, cols: np.ndarray, masks: np.ndarray, coef: np.ndarray, backend=None
) -> np.ndarray:
    """Pull each listed column toward its max inside the mask and its min outside.

    ``coef[k]`` in ``[0, 1]`` is the interpolation weight for column
    ``cols[k]``; other columns are returned unchanged.
    """
    logits = _f64(logits)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    if cols.size == 0:
        return logits.copy()
    masks = np.ascontiguousarray(masks, dtype=np.uint8).reshape(len(cols), -1)
    coef = _f64(coef)
    if masks.shape[1] != logits.shape[0]:
        raise MaskLengthMismatch(f"mask length {masks.shape[1]} != b={logits.shape[0]}")
    if cols.size and (cols.min() < 0 or cols.max() >= logits.shape[1]):
        raise DimensionMismatch("dense-tune column outside the token range")
    return (backend or _impl).dense_tune(logits, cols, masks, coef)

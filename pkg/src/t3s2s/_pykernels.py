"""Pure-numpy kernels. Reference path, and the fallback when the extension is absent.

Array contracts are identical to ``_ckernels``; the wrappers in
``t3s2s.kernels`` validate inputs before calling either.
"""
import numpy as np


def topk_indices(V, K, i_end):
    # stable sort on -|v| keeps the lower index first among equal magnitudes
    mag = np.abs(V[1:i_end])
    order = np.argsort(-mag, axis=0, kind="stable")[:K]
    return np.ascontiguousarray(order.T + 1, dtype=np.int64)


def characteristics_mask(Y, slot, masks):
    dh = Y.shape[0]
    counts = np.zeros((dh, masks.shape[0]), dtype=np.int64)
    hits = slot[Y]
    rows, cols = np.nonzero(hits >= 0)
    np.add.at(counts, (rows, hits[rows, cols]), 1)
    return np.ascontiguousarray(masks.T.astype(np.int64) @ counts.T, dtype=np.int32)


def prominence(F, H, beta):
    return F * (1.0 + beta * H)


def dense_tune(logits, cols, masks, coef):
    out = logits.copy()
    for k in range(cols.shape[0]):
        c = coef[k]
        if c == 0.0:
            continue
        t = cols[k]
        col = logits[:, t]
        hi = col.max()
        lo = col.min()
        delta = np.where(masks[k] != 0, hi - col, -(col - lo))
        # clip absorbs the last-ulp rounding of col + c * delta
        out[:, t] = np.clip(col + c * delta, lo, hi)
    return out

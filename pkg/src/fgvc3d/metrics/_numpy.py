"""NumPy fallback kernels, used when the compiled extension is unavailable.

Inputs arrive preprocessed (simplex-mapped or mean-centered) from the
package front end. Each output row is computed with vectorized per-element
operations followed by a single axis reduction, so a 1x1 call reproduces the
batched result bit-for-bit.
"""

from __future__ import annotations

import numpy as np


def pairwise(kind, eps, A, B, out):
    from . import MetricKind

    n, d = A.shape
    if kind is MetricKind.EUCLIDEAN:
        for i in range(n):
            diff = B - A[i]
            out[i] = np.sqrt((diff * diff).sum(axis=1))
    elif kind is MetricKind.GOWER:
        for i in range(n):
            out[i] = np.abs(B - A[i]).sum(axis=1) / d
    elif kind is MetricKind.DICE:
        sb = (B * B).sum(axis=1)
        for i in range(n):
            a = A[i]
            sa = (a * a).sum()
            den = sa + sb
            val = 1.0 - 2.0 * (B * a).sum(axis=1) / np.where(den == 0.0, 1.0, den)
            out[i] = np.where(den == 0.0, 0.0, np.maximum(val, 0.0))
    elif kind is MetricKind.PEARSON:
        # rows are pre-centered and guaranteed non-constant
        sb = (B * B).sum(axis=1)
        for i in range(n):
            a = A[i]
            sa = (a * a).sum()
            out[i] = np.maximum(1.0 - (B * a).sum(axis=1) / np.sqrt(sa * sb), 0.0)
    elif kind is MetricKind.MOTYKA:
        for i in range(n):
            a = A[i]
            out[i] = np.maximum(B, a).sum(axis=1) / (B + a).sum(axis=1)
    elif kind is MetricKind.SORENSEN:
        for i in range(n):
            a = A[i]
            out[i] = np.abs(a - B).sum(axis=1) / (B + a).sum(axis=1)
    elif kind is MetricKind.NEYMAN:
        for i in range(n):
            a = A[i]
            diff = a - B
            out[i] = (diff * diff / (a + eps)).sum(axis=1)
    elif kind is MetricKind.BHATTACHARYYA:
        for i in range(n):
            s = np.sqrt(B * A[i]).sum(axis=1)
            out[i] = np.maximum(-np.log(s + d * eps), 0.0)
    elif kind is MetricKind.KL_DIVERGENCE:
        for i in range(n):
            a = A[i]
            out[i] = np.maximum((a * np.log(a / B)).sum(axis=1), 0.0)
    else:  # pragma: no cover
        raise AssertionError(f"unhandled metric kind {kind}")

"""Distance functions for embedding vectors.

Definitions (p, q of equal dimension D, smoothing constant eps):

    euclidean      sqrt(sum_i (p_i - q_i)^2)
    gower          (1/D) * sum_i |p_i - q_i|
    dice           1 - 2*sum_i p_i*q_i / (sum_i p_i^2 + sum_i q_i^2)
    pearson        1 - corr(p, q)
    sorensen       sum_i |p_i - q_i| / sum_i (p_i + q_i)
    motyka         sum_i max(p_i, q_i) / sum_i (p_i + q_i)
    neyman         sum_i (p_i - q_i)^2 / (p_i + eps)
    bhattacharyya  -ln(sum_i (sqrt(p_i*q_i) + eps))
    kl_divergence  sum_i p_i * ln(p_i / q_i)

The last five are defined on probability-like vectors; since embeddings may
be negative, those metrics first map each vector to the simplex (shift by
``-min(v) + eps``, then divide by the sum). Results are clamped at zero so
floating-point round-off never produces a negative distance. ``motyka`` of a
vector with itself is 0.5 by construction, not 0; ``kl_divergence`` and
``neyman`` are asymmetric.

Two interchangeable kernel backends exist: a compiled extension
(``fgvc3d.metrics._kernels``) and a NumPy fallback, selected at import time
(``FGVC_METRICS_BACKEND=numpy|cython`` overrides). Within one backend,
``pairwise`` entry (i, j) is bit-identical to ``distance`` on the same rows;
across backends and against a straight-loop reference the kernels reassociate
sums, so agreement is guaranteed to 1e-6 relative (plus 1e-9 absolute), the
declared contract.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import ValidationError

try:
    from . import _kernels as _cython_kernels
except ImportError:  # extension not built; pure NumPy still works
    _cython_kernels = None

from . import _numpy as _numpy_kernels


class ZeroVarianceError(ValidationError):
    """Pearson distance is undefined for constant vectors."""


class MetricKind(str, Enum):
    EUCLIDEAN = "euclidean"
    MOTYKA = "motyka"
    GOWER = "gower"
    DICE = "dice"
    SORENSEN = "sorensen"
    PEARSON = "pearson"
    NEYMAN = "neyman"
    BHATTACHARYYA = "bhattacharyya"
    KL_DIVERGENCE = "kl_divergence"


METRIC_NAMES = tuple(kind.value for kind in MetricKind)

# Keep in sync with the codes compiled into _kernels.pyx.
KIND_CODES = {kind: code for code, kind in enumerate(MetricKind)}

SIMPLEX_KINDS = frozenset(
    {
        MetricKind.MOTYKA,
        MetricKind.SORENSEN,
        MetricKind.NEYMAN,
        MetricKind.BHATTACHARYYA,
        MetricKind.KL_DIVERGENCE,
    }
)

SYMMETRIC_KINDS = frozenset(
    {
        MetricKind.EUCLIDEAN,
        MetricKind.GOWER,
        MetricKind.SORENSEN,
        MetricKind.MOTYKA,
        MetricKind.DICE,
        MetricKind.PEARSON,
        MetricKind.BHATTACHARYYA,
    }
)

_ALIASES = {"kl": MetricKind.KL_DIVERGENCE, "bahatta": MetricKind.BHATTACHARYYA}


@dataclass(frozen=True)
class Metric:
    kind: MetricKind
    epsilon: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if not self.epsilon > 0.0:
            raise ValidationError("epsilon must be positive")

    @classmethod
    def from_name(cls, name: str, epsilon: float = 1e-10) -> "Metric":
        normalized = name.strip().lower().replace("-", "_")
        if normalized in _ALIASES:
            return cls(_ALIASES[normalized], epsilon)
        try:
            return cls(MetricKind(normalized), epsilon)
        except ValueError:
            raise ValidationError(
                f"unknown metric {name!r}; choose from {', '.join(METRIC_NAMES)}"
            ) from None


def available_backends() -> tuple[str, ...]:
    return ("cython", "numpy") if _cython_kernels is not None else ("numpy",)


def default_backend() -> str:
    forced = os.environ.get("FGVC_METRICS_BACKEND")
    if forced:
        if forced not in ("cython", "numpy"):
            raise ValidationError(f"FGVC_METRICS_BACKEND must be cython or numpy")
        if forced == "cython" and _cython_kernels is None:
            raise ValidationError("cython kernels requested but not built")
        return forced
    return "cython" if _cython_kernels is not None else "numpy"


def simplex_map(vectors: np.ndarray, epsilon: float) -> np.ndarray:
    """Map each row to the probability simplex: shift by -min+eps, normalize."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    shifted = vectors - vectors.min(axis=1, keepdims=True) + epsilon
    return shifted / shifted.sum(axis=1, keepdims=True)


def _prepare(metric: Metric, X: np.ndarray, side: str) -> np.ndarray:
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    if X.ndim != 2:
        raise ValidationError(f"{side} must be a vector or matrix of vectors")
    if X.shape[1] < 1:
        raise ValidationError("vectors must have dimension >= 1")
    if metric.kind in SIMPLEX_KINDS:
        return np.ascontiguousarray(simplex_map(X, metric.epsilon))
    if metric.kind is MetricKind.PEARSON:
        centered = X - X.mean(axis=1, keepdims=True)
        sumsq = (centered * centered).sum(axis=1)
        zero = np.flatnonzero(sumsq == 0.0)
        if zero.size:
            raise ZeroVarianceError(
                f"pearson is undefined for constant vectors ({side} row {zero[0]})"
            )
        return np.ascontiguousarray(centered)
    return X


def pairwise(
    metric: Metric,
    A: np.ndarray,
    B: np.ndarray,
    *,
    jobs: int = 1,
    backend: str | None = None,
) -> np.ndarray:
    """|A| x |B| table with entry (i, j) = distance(metric, A_i, B_j).

    Deterministic for any ``jobs``: parallelism splits rows, never the inner
    reductions.
    """
    Ap = _prepare(metric, A, "A")
    Bp = _prepare(metric, B, "B")
    if Ap.shape[1] != Bp.shape[1]:
        raise ValidationError(
            f"dimension mismatch: {Ap.shape[1]} vs {Bp.shape[1]}"
        )
    out = np.empty((Ap.shape[0], Bp.shape[0]), dtype=np.float64)
    chosen = backend or default_backend()
    if chosen == "cython":
        if _cython_kernels is None:
            raise ValidationError("cython kernels requested but not built")
        _cython_kernels.pairwise(
            KIND_CODES[metric.kind], metric.epsilon, Ap, Bp, out, max(1, int(jobs))
        )
    elif chosen == "numpy":
        _numpy_kernels.pairwise(metric.kind, metric.epsilon, Ap, Bp, out)
    else:
        raise ValidationError(f"unknown metrics backend {chosen!r}")
    return out


def distance(
    metric: Metric, p, q, *, backend: str | None = None
) -> float:
    """Distance between two vectors; routed through the pairwise kernel so
    scalar and batch paths cannot disagree."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 1 or q.ndim != 1:
        raise ValidationError("distance expects 1-D vectors")
    if p.shape[0] != q.shape[0]:
        raise ValidationError(
            f"dimension mismatch: {p.shape[0]} vs {q.shape[0]}"
        )
    return float(pairwise(metric, p[None, :], q[None, :], backend=backend)[0, 0])

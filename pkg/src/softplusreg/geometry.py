"""Convex-polytope diagnostics for fitted models.

Each function counts, per query point, how many of a model's hyperplane
inequalities hold.  The counts explain the decision boundary: a positive
violation / membership count guarantees ``predict_prob(x) > p0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, ParameterError
from .model import FittedModel, _as_rows, linear_predictor, stack_q

KINDS = ("sum_violations", "stack_satisfied", "ss_satisfied")


@dataclass
class GeometryReport:
    """Per-point counts plus the thresholds that produced them.

    ``h`` has one row per expert (``h[k, j]`` is h_{j+2} for weight r_k);
    ``g[j]`` is g_{j+1}.
    """

    counts: np.ndarray
    kind: str
    p0: float
    g: np.ndarray
    h: np.ndarray


def _check_p0(p0):
    if not (0.0 < p0 < 1.0):
        raise ParameterError(f"p0 must lie in (0, 1), got {p0}")


def g_sequence(T: int) -> np.ndarray:
    """``g_1 = 1``, ``g_t = ln(1 + g_{t-1})``; entry j holds g_{j+1}."""
    g = np.empty(T)
    if T:
        g[0] = 1.0
    for j in range(1, T):
        g[j] = np.log1p(g[j - 1])
    return g


def top_threshold(r, p0: float):
    """``h_{T+1} = (1 - p0)^{-1/r} - 1``, +inf when it overflows."""
    r = np.asarray(r, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        return np.expm1(-np.log1p(-p0) / r)


def gh_recursions(T: int, r: float, p0: float):
    """Return ``(g, h)``; ``g[j] = g_{j+1}`` and ``h[j] = h_{j+2}``, j = 0..T-1.

    ``h_t = e^{h_{t+1}} - 1`` is propagated downward from ``h_{T+1}``;
    overflow yields +inf, which marks that criterion as unsatisfiable.
    """
    _check_p0(p0)
    if not r > 0:
        raise ParameterError(f"r must be positive, got {r}")
    if T < 1:
        raise ParameterError(f"T must be at least 1, got {T}")
    h = np.empty(T)
    h[T - 1] = top_threshold(r, p0)
    with np.errstate(over="ignore"):
        for j in range(T - 2, -1, -1):
            h[j] = np.expm1(h[j + 1])
    return g_sequence(T), h


def _log_expm1(a):
    """``ln(e^a - 1)`` without overflow for large ``a`` or cancellation for small."""
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return a + np.log(-np.expm1(-a))


def log_top_threshold(r, p0: float):
    """``ln h_{T+1}`` evaluated in log space; +inf only as ``r -> 0``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = -np.log1p(-p0) / r
    return _log_expm1(a)


def stack_thresholds(T: int, r: float, p0: float) -> np.ndarray:
    """``ln h_t - ln g_{t-1}`` for t = 2..T+1.

    Computed as ``ln h_t = ln(e^{h_{t+1}} - 1)`` in log space, so a threshold
    is +inf only when ``h_{t+1}`` itself exceeds the double range.
    """
    gh_recursions(T, r, p0)  # argument validation
    log_h = np.empty(T)
    log_h[T - 1] = log_top_threshold(r, p0)
    with np.errstate(over="ignore"):
        for j in range(T - 2, -1, -1):
            log_h[j] = _log_expm1(np.exp(log_h[j + 1]))
    return log_h - np.log(g_sequence(T))


def _h_table(m: FittedModel, p0):
    T = m.T
    if m.K == 0:
        return g_sequence(T), np.empty((0, T))
    rows = [gh_recursions(T, float(rk), p0)[1] for rk in m.r]
    return g_sequence(T), np.vstack(rows)


def sum_polytope_violations(x, m: FittedModel, p0: float = 0.5):
    """Number of experts with ``x'beta_k > ln[(1 - p0)^{-1/r_k} - 1]`` (T = 1)."""
    _check_p0(p0)
    if m.T != 1:
        raise DimensionError(f"sum_polytope_violations needs a T=1 model, got T={m.T}")
    x2, single = _as_rows(x, m.dim)
    thresh = log_top_threshold(m.r, p0)
    z = linear_predictor(x2, m.beta[:, 0, :])
    out = np.sum(z > thresh[:, None], axis=0)
    return int(out[0]) if single else out


def stack_criteria_satisfied(x, m: FittedModel, p0: float = 0.5):
    """Number of layers t with ``x'beta^{(t)} > ln h_t - ln g_{t-1}`` (K = 1)."""
    _check_p0(p0)
    if m.K != 1:
        raise DimensionError(f"stack_criteria_satisfied needs a K=1 model, got K={m.K}")
    x2, single = _as_rows(x, m.dim)
    thresh = stack_thresholds(m.T, float(m.r[0]), p0)
    z = linear_predictor(x2, m.beta[0])
    out = np.sum(z > thresh[:, None], axis=0)
    return int(out[0]) if single else out


def ss_union_membership(x, m: FittedModel, p0: float = 0.5):
    """Number of experts whose stack term alone pushes the rate past ``-ln(1-p0)``.

    Tested as ``e^{q_k^{(T+1)}} - 1 > h_{T+1}(r_k)``, the exponentiated form
    of the per-expert inequality.
    """
    _check_p0(p0)
    x2, single = _as_rows(x, m.dim)
    if m.K == 0:
        out = np.zeros(x2.shape[0], dtype=np.int64)
    else:
        q = stack_q(x2, m.beta)[..., -1]
        with np.errstate(over="ignore"):
            lhs = np.expm1(q)
        out = np.sum(lhs > top_threshold(m.r, p0)[:, None], axis=0)
    return int(out[0]) if single else out


def default_kind(m: FittedModel) -> str:
    return "sum_violations" if m.T == 1 else "ss_satisfied"


def geometry_counts(x, m: FittedModel, p0: float = 0.5, kind: Optional[str] = None) -> GeometryReport:
    """Evaluate one diagnostic over many points.

    ``kind`` defaults to sum violations for T = 1 models and union membership
    otherwise.
    """
    kind = kind or default_kind(m)
    fn = {
        "sum_violations": sum_polytope_violations,
        "stack_satisfied": stack_criteria_satisfied,
        "ss_satisfied": ss_union_membership,
    }.get(kind)
    if fn is None:
        raise ParameterError(f"unknown geometry kind {kind!r}; choose from {KINDS}")
    x2 = np.atleast_2d(np.asarray(x, dtype=float))
    counts = np.asarray(fn(x2, m, p0), dtype=np.int64)
    g, h = _h_table(m, p0)
    return GeometryReport(counts=counts, kind=kind, p0=p0, g=g, h=h)

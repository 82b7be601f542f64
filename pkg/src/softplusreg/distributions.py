"""Seedable random streams and the samplers used by the Gibbs chain.

Every sampler takes an explicit :class:`RngStream`; nothing here touches
global random state.  The public ``sample_*`` functions validate their
parameters strictly.  The underscore-prefixed array versions are the ones
the sampler calls in its inner loop; they accept degenerate values (zero
shapes, zero rates) that arise naturally inside the chain and define the
limiting behaviour for them.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from .errors import DegenerateWeightsError, ParameterError, SingularPrecisionError

__all__ = [
    "RngStream",
    "PGParams",
    "sample_gamma",
    "pg_mean",
    "pg_variance",
    "sample_polya_gamma",
    "sample_crt",
    "sample_truncated_poisson",
    "sample_multinomial",
    "sample_mvn_precision",
    "sample_logarithmic",
    "sample_sumlog",
    "DEFAULT_PG_TRUNCATION",
]

DEFAULT_PG_TRUNCATION = 6

_MEAN_SERIES_CUTOFF = 1e-4
_VAR_SERIES_CUTOFF = 1e-2
_VAR_EXP_FORM_CUTOFF = 20.0


class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Streams with equal ids and seeds replay the same draws for the same call
    sequence.  Different ``stream_id`` values are derived through numpy's
    ``SeedSequence`` spawn keys, giving independent PCG64 streams.

    ``counters`` collects sampler diagnostics (truncated-Poisson proposals,
    skipped Polya-Gamma residual terms, ...).
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ParameterError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(seq))
        self.counters: Counter = Counter()

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


class PGParams:
    """Parameters of a Polya-Gamma draw: shape ``a``, tilt ``c`` and the
    number of gamma terms used by the approximate sampler."""

    __slots__ = ("a", "c", "truncation")

    def __init__(self, a: float, c: float, truncation: int = DEFAULT_PG_TRUNCATION):
        if not a > 0:
            raise ParameterError(f"Polya-Gamma shape must be positive, got {a}")
        if int(truncation) < 1:
            raise ParameterError(f"truncation must be >= 1, got {truncation}")
        self.a = float(a)
        self.c = float(c)
        self.truncation = int(truncation)

    def __repr__(self):
        return f"PGParams(a={self.a}, c={self.c}, truncation={self.truncation})"


# ---------------------------------------------------------------------------
# gamma


def sample_gamma(shape, scale, rng: RngStream, size=None):
    """Draw ``Gamma(shape, scale)`` (mean ``shape * scale``).

    Exact for every positive shape, including shapes far below one.
    """
    shape = np.asarray(shape, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if np.any(~(shape > 0)) or np.any(~(scale > 0)):
        raise ParameterError("gamma shape and scale must be positive")
    out = rng.generator.standard_gamma(shape, size=size) * scale
    return float(out) if np.ndim(out) == 0 else out


def _gamma(shape, scale, rng: RngStream):
    """Array gamma draw where a zero shape or zero scale yields exactly 0."""
    return rng.generator.standard_gamma(shape) * scale


# ---------------------------------------------------------------------------
# Polya-Gamma


def pg_mean(a, c):
    """Mean of ``PG(a, c)``: ``a / (2|c|) * tanh(|c| / 2)``."""
    a_arr = np.asarray(a, dtype=float)
    if np.any(~(a_arr > 0)):
        raise ParameterError("Polya-Gamma shape must be positive")
    return _pg_mean(a_arr, c)


def _pg_mean(a, c):
    x = np.abs(np.asarray(c, dtype=float))
    small = x < _MEAN_SERIES_CUTOFF
    xs = np.where(small, 1.0, x)
    closed = np.tanh(xs / 2.0) / (2.0 * xs)
    x2 = x * x
    series = 0.25 - x2 / 48.0 + x2 * x2 / 480.0
    out = a * np.where(small, series, closed)
    return float(out) if np.ndim(out) == 0 else out


def pg_variance(a, c):
    """Variance of ``PG(a, c)``: ``a / (2|c|^3) * (sinh|c| - |c|) / (cosh|c| + 1)``."""
    a_arr = np.asarray(a, dtype=float)
    if np.any(~(a_arr > 0)):
        raise ParameterError("Polya-Gamma shape must be positive")
    return _pg_variance(a_arr, c)


def _pg_variance(a, c):
    x = np.abs(np.asarray(c, dtype=float))
    small = x < _VAR_SERIES_CUTOFF
    large = x >= _VAR_EXP_FORM_CUTOFF
    xs = np.where(small, 1.0, x)
    with np.errstate(over="ignore", invalid="ignore"):
        mid = (np.sinh(xs) - xs) / (np.cosh(xs) + 1.0)
        e1 = np.exp(-xs)
        far = (1.0 - e1 * e1 - 2.0 * xs * e1) / (1.0 + e1 * e1 + 2.0 * e1)
    closed = np.where(large, far, mid) / (2.0 * xs**3)
    x2 = x * x
    sech2 = 1.0 / np.cosh(np.where(small, x, 0.0) / 2.0) ** 2
    series = sech2 / 4.0 * (1.0 / 6.0 + x2 / 120.0 + x2**2 / 5040.0 + x2**3 / 362880.0)
    out = a * np.where(small, series, closed)
    return float(out) if np.ndim(out) == 0 else out


def _pg_denominators(c, truncation):
    k = np.arange(1, truncation, dtype=float)
    c = np.asarray(c, dtype=float)
    return 2.0 * np.pi**2 * (k - 0.5) ** 2 + (c[..., None] ** 2) / 2.0


def _polya_gamma(a, c, rng: RngStream, truncation: int = DEFAULT_PG_TRUNCATION):
    """Array Polya-Gamma sampler; entries with ``a == 0`` return 0.

    Sums ``truncation - 1`` weighted gamma terms and adds one gamma residual
    whose mean and variance make up the remainder exactly.
    """
    a, c = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(c, dtype=float))
    out = np.zeros(a.shape)
    pos = a > 0
    if not np.any(pos):
        return out
    ap = a[pos]
    cp = c[pos]
    mean_hat = np.zeros(ap.shape)
    var_hat = np.zeros(ap.shape)
    xhat = np.zeros(ap.shape)
    if truncation > 1:
        d = _pg_denominators(cp, truncation)
        g = rng.generator.standard_gamma(np.broadcast_to(ap[:, None], d.shape))
        xhat = (g / d).sum(axis=1)
        mean_hat = ap * (1.0 / d).sum(axis=1)
        var_hat = ap * (1.0 / d**2).sum(axis=1)
    mu = _pg_mean(ap, cp) - mean_hat
    s2 = _pg_variance(ap, cp) - var_hat
    ok = (mu > 0) & (s2 > 0)
    n_skip = int(ok.size - np.count_nonzero(ok))
    if n_skip:
        rng.counters["pg_residual_skipped"] += n_skip
    resid = np.zeros(ap.shape)
    if np.any(ok):
        muk, s2k = mu[ok], s2[ok]
        resid[ok] = rng.generator.standard_gamma(muk * muk / s2k) * (s2k / muk)
    out[pos] = xhat + resid
    return out


def sample_polya_gamma(p: PGParams, rng: RngStream, size=None):
    """Approximate ``PG(a, c)`` draw matching its mean and variance exactly."""
    if size is None:
        return float(_polya_gamma(p.a, p.c, rng, p.truncation))
    a = np.full(size, p.a)
    return _polya_gamma(a, p.c, rng, p.truncation)


# ---------------------------------------------------------------------------
# Chinese restaurant table


def sample_crt(n, r, rng: RngStream):
    """Number of tables occupied by ``n`` customers at concentration ``r``."""
    r_arr = np.asarray(r, dtype=float)
    n_arr = np.asarray(n)
    if np.any(~(r_arr > 0)):
        raise ParameterError("CRT concentration must be positive")
    if np.any(n_arr < 0):
        raise ParameterError("CRT customer count must be non-negative")
    out = _crt(n_arr, r_arr, rng)
    return int(out) if np.ndim(out) == 0 else out


def _crt(n, r, rng: RngStream):
    """Vectorised CRT.  The first customer always opens a table, so
    ``r == 0`` is handled as the limit ``CRT(n, 0+) = min(n, 1)``."""
    n, r = np.broadcast_arrays(np.asarray(n, dtype=np.int64), np.asarray(r, dtype=float))
    shape = n.shape
    n = n.ravel()
    r = r.ravel()
    out = (n >= 1).astype(np.int64)
    extra = np.maximum(n - 1, 0)
    total = int(extra.sum())
    if total:
        cell = np.repeat(np.arange(n.size), extra)
        starts = np.cumsum(extra) - extra
        j = np.arange(total) - np.repeat(starts, extra) + 1
        rc = r[cell]
        hits = rng.generator.random(total) < rc / (rc + j)
        out += np.bincount(cell, weights=hits, minlength=n.size).astype(np.int64)
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# zero-truncated Poisson


def sample_truncated_poisson(lam, rng: RngStream):
    """Draw from Poisson(``lam``) conditioned on the outcome being >= 1."""
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(~(lam_arr > 0)):
        raise ParameterError("truncated Poisson rate must be positive")
    out = _truncated_poisson(lam_arr, rng)
    return int(out) if np.ndim(out) == 0 else out


def _truncated_poisson(lam, rng: RngStream):
    # lam >= 1: propose from Pois(lam) and discard zeros (acceptance >= 1 - 1/e).
    # lam < 1: sequential inversion of the truncated pmf.
    lam = np.asarray(lam, dtype=float)
    shape = lam.shape
    lam = lam.ravel()
    out = np.zeros(lam.size, dtype=np.int64)
    gen = rng.generator

    pending = np.flatnonzero(lam >= 1.0)
    while pending.size:
        draw = gen.poisson(lam[pending])
        rng.counters["trpois_proposals"] += pending.size
        ok = draw > 0
        rng.counters["trpois_accepted"] += int(np.count_nonzero(ok))
        out[pending[ok]] = draw[ok]
        pending = pending[~ok]

    small = np.flatnonzero(lam < 1.0)
    if small.size:
        lam_s = lam[small]
        u = gen.random(small.size)
        k = np.ones(small.size, dtype=np.int64)
        p = lam_s / np.expm1(lam_s)
        cdf = p.copy()
        todo = u > cdf
        step = 1
        while np.any(todo):
            step += 1
            idx = np.flatnonzero(todo)
            p[idx] *= lam_s[idx] / step
            cdf[idx] += p[idx]
            k[idx] = step
            todo[idx] = (u[idx] > cdf[idx]) & (p[idx] > 0.0)
        out[small] = k
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# multinomial


def sample_multinomial(n, weights, rng: RngStream):
    """Split ``n`` into ``Mult(n, weights / sum(weights))`` counts."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise ParameterError("weights must be a vector")
    if int(n) < 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ParameterError("multinomial needs n >= 0 and finite non-negative weights")
    return _multinomial_rows(np.array([int(n)]), w[None, :], rng)[0]


def _multinomial_rows(n, weights, rng: RngStream):
    """Row-wise multinomial via conditional binomials.

    ``n`` has shape (N,), ``weights`` (N, K).  Rows with ``n > 0`` and all
    weights zero raise :class:`DegenerateWeightsError`.
    """
    n = np.asarray(n, dtype=np.int64)
    w = np.asarray(weights, dtype=float)
    counts = np.zeros(w.shape, dtype=np.int64)
    suffix = np.cumsum(w[:, ::-1], axis=1)[:, ::-1]
    if np.any((n > 0) & (suffix[:, 0] <= 0)):
        raise DegenerateWeightsError("multinomial weights are all zero for a positive count")
    remaining = n.copy()
    gen = rng.generator
    for k in range(w.shape[1]):
        live = remaining > 0
        if not np.any(live):
            break
        with np.errstate(invalid="ignore", divide="ignore"):
            p = np.where(suffix[:, k] > 0, w[:, k] / suffix[:, k], 0.0)
        p = np.clip(p, 0.0, 1.0)
        draw = np.zeros(n.shape, dtype=np.int64)
        draw[live] = gen.binomial(remaining[live], p[live])
        counts[:, k] = draw
        remaining -= draw
    return counts


# ---------------------------------------------------------------------------
# Gaussian with a precision-matrix parameterisation


def _cholesky(prec):
    try:
        return np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        pass
    if prec.ndim == 2:
        return _cholesky_jitter(prec)
    return np.stack([_cholesky_jitter(p) for p in prec])


def _cholesky_jitter(p):
    try:
        return np.linalg.cholesky(p)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-8 * float(np.mean(np.diag(p)))
    eye = np.eye(p.shape[0])
    for attempt in range(1, 4):
        try:
            return np.linalg.cholesky(p + attempt * jitter * eye)
        except np.linalg.LinAlgError:
            continue
    raise SingularPrecisionError("precision matrix is not positive definite after jitter")


def sample_mvn_precision(precision, linear, rng: RngStream):
    """Draw ``N(P^-1 b, P^-1)`` for precision ``P`` and linear term ``b``.

    Works on a single system (P: (d, d), b: (d,)) or a stack of them
    (P: (B, d, d), b: (B, d)).  Uses a Cholesky factor and triangular
    solves; the inverse is never formed.
    """
    prec = np.asarray(precision, dtype=float)
    b = np.asarray(linear, dtype=float)
    if prec.shape[-1] != prec.shape[-2] or prec.shape[:-1] != b.shape:
        raise ParameterError(f"precision {prec.shape} and linear term {b.shape} do not match")
    L = _cholesky(prec)
    z = rng.generator.standard_normal(b.shape)
    Lt = np.swapaxes(L, -1, -2)
    w = np.linalg.solve(L, b[..., None])[..., 0]
    return np.linalg.solve(Lt, (w + z)[..., None])[..., 0]


# ---------------------------------------------------------------------------
# logarithmic and sum-logarithmic


def sample_logarithmic(p, rng: RngStream, size=None):
    """Logarithmic-series draw, pmf ``-p^k / (k ln(1-p))`` for ``k >= 1``."""
    if not 0.0 < p < 1.0:
        raise ParameterError(f"logarithmic parameter must lie in (0, 1), got {p}")
    n = 1 if size is None else int(np.prod(size))
    out = _logarithmic(np.full(n, float(p)), rng)
    return int(out[0]) if size is None else out.reshape(size)


def _logarithmic(p, rng: RngStream):
    # Kemp's LK algorithm, vectorised with a rejection mask.
    p = np.asarray(p, dtype=float)
    out = np.zeros(p.size, dtype=np.int64)
    pending = np.arange(p.size)
    gen = rng.generator
    while pending.size:
        pp = p[pending]
        v = gen.random(pending.size)
        u = gen.random(pending.size)
        res = np.ones(pending.size, dtype=np.int64)
        q = -np.expm1(np.log1p(-pp) * u)
        deep = (v < pp) & (v <= q * q)
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.floor(1.0 + np.log(v) / np.log(q))
        retry = deep & (~np.isfinite(k) | (k < 1) | (v == 0.0))
        res = np.where(deep & ~retry, k, res)
        two = (v < pp) & ~deep & (v < q)
        res = np.where(two, 2, res)
        done = ~retry
        out[pending[done]] = res[done].astype(np.int64)
        pending = pending[retry]
    return out


def sample_sumlog(n: int, p: float, rng: RngStream) -> int:
    """Sum of ``n`` independent logarithmic(``p``) draws."""
    if int(n) < 1:
        raise ParameterError("SumLog needs n >= 1")
    if not 0.0 < p < 1.0:
        raise ParameterError(f"SumLog parameter must lie in (0, 1), got {p}")
    return int(_logarithmic(np.full(int(n), float(p)), rng).sum())


def _sumlog(n, p, rng: RngStream):
    """Vectorised SumLog; ``n == 0`` gives 0."""
    n = np.asarray(n, dtype=np.int64)
    p = np.broadcast_to(np.asarray(p, dtype=float), n.shape)
    flat_n = n.ravel()
    total = int(flat_n.sum())
    out = np.zeros(flat_n.size, dtype=np.int64)
    if total:
        cell = np.repeat(np.arange(flat_n.size), flat_n)
        draws = _logarithmic(p.ravel()[cell], rng)
        out = np.bincount(cell, weights=draws, minlength=flat_n.size).astype(np.int64)
    return out.reshape(n.shape)


def logarithmic_mean(p: float) -> float:
    return -p / ((1.0 - p) * math.log1p(-p))

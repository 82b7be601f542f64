"""Upward-downward Gibbs sampler for sum-stack-softplus regression.

One iteration runs, in order: the downward sweep over the gamma layers,
the latent BerPo counts and their split across experts, the upward sweep
(CRT counts, Polya-Gamma weights, coefficients, stack levels, precisions),
expert pruning, and finally the gamma-process globals and expert weights.

Softplus, sum-, stack-softplus and logistic regression are the same chain
with ``K_max`` and/or ``T`` set to one (and ``r`` pinned to 1 for
logistic), so a single code path serves every variant.

Array layout inside :class:`ChainState` (K experts, N points, T layers):

* ``theta``/``tau`` (K, N, T): layer t at index t-1; layer T+1 is ``r``.
* ``q``/``mcount`` (K, N, T+1): layer t at index t-1, ``q[..., 0] == 1``.
* ``beta``/``alpha``/``omega``: layer t at index t-2.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import distributions as dist
from ._version import __version__
from .distributions import RngStream
from .errors import DataError, NumericalError, ParameterError
from .model import (
    VARIANTS,
    Dataset,
    FittedModel,
    HyperParams,
    _bernoulli_loglik,
    softplus,
    stack_q,
)

log = logging.getLogger(__name__)

ALPHA_INIT_MAX = 1e6


@dataclass
class ChainState:
    beta: np.ndarray
    alpha: np.ndarray
    r: np.ndarray
    gamma0: float
    c0: float
    theta: np.ndarray
    tau: np.ndarray
    q: np.ndarray
    m: np.ndarray
    mcount: np.ndarray
    omega: np.ndarray
    active: np.ndarray
    ltilde: np.ndarray
    iter: int = 0

    @property
    def K(self) -> int:
        return self.r.size

    @property
    def T(self) -> int:
        return self.beta.shape[1]

    def rates(self) -> np.ndarray:
        act = self.active
        return self.r[act] @ self.q[act, :, -1]

    def layer_totals(self) -> np.ndarray:
        """``m^(t)_..`` for t = 1..T+1."""
        return self.mcount.sum(axis=(0, 1))


@dataclass
class Trace:
    """Per-iteration log-likelihood, active-expert count and layer totals."""

    T: int
    log_lik: list = field(default_factory=list)
    n_active: list = field(default_factory=list)
    m_total: list = field(default_factory=list)

    def append(self, ll, n_active, m_total):
        self.log_lik.append(float(ll))
        self.n_active.append(int(n_active))
        self.m_total.append([int(v) for v in m_total])

    def __len__(self):
        return len(self.log_lik)

    def __eq__(self, other):
        return (
            isinstance(other, Trace)
            and self.log_lik == other.log_lik
            and self.n_active == other.n_active
            and self.m_total == other.m_total
        )

    def header(self):
        return ["iter", "log_lik", "n_active"] + [f"m_total_{t}" for t in range(1, self.T + 2)]

    def rows(self):
        for i, (ll, na, mt) in enumerate(zip(self.log_lik, self.n_active, self.m_total), 1):
            yield [i, ll, na, *mt]

    def to_text(self, delimiter=",") -> str:
        lines = [delimiter.join(self.header())]
        for row in self.rows():
            lines.append(delimiter.join(repr(v) if isinstance(v, float) else str(v) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, delimiter=","):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split(delimiter)
        tr = cls(T=len(head) - 4)
        for ln in lines[1:]:
            parts = ln.split(delimiter)
            tr.append(float(parts[1]), int(parts[2]), [int(p) for p in parts[3:]])
        return tr


class ChainDiverged(NumericalError):
    """Raised when the training log-likelihood stops being finite."""

    def __init__(self, msg, trace: Trace):
        super().__init__(msg)
        self.trace = trace


# ---------------------------------------------------------------------------


def check_variant(variant: str, hp: HyperParams) -> None:
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    if variant == "sum" and hp.T != 1:
        raise ParameterError("the sum variant requires T = 1")
    if variant == "stack" and hp.K_max != 1:
        raise ParameterError("the stack variant requires K_max = 1")
    if variant in ("softplus", "logistic") and (hp.K_max != 1 or hp.T != 1):
        raise ParameterError(f"the {variant} variant requires K_max = T = 1")
    if variant == "logistic" and hp.r_fixed not in (None, 1.0):
        raise ParameterError("the logistic variant pins r to 1")


def init_state(d: Dataset, hp: HyperParams) -> ChainState:
    """Zero coefficients, equal weights ``1 / K_max``, all experts active."""
    N, P = d.x.shape
    if N == 0:
        raise DataError("cannot fit an empty dataset")
    if P < 2:
        raise DataError("dataset needs at least one covariate besides the bias")
    K, T = hp.K_max, hp.T
    beta = np.zeros((K, T, P))
    alpha = np.full((K, T, P), float(np.clip(hp.a_t / hp.b_t, hp.alpha_floor, ALPHA_INIT_MAX)))
    r0 = hp.r_fixed if hp.r_fixed is not None else 1.0 / K
    return ChainState(
        beta=beta,
        alpha=alpha,
        r=np.full(K, r0),
        gamma0=float(hp.gamma0_init),
        c0=float(hp.c0_init),
        theta=np.zeros((K, N, T)),
        tau=np.zeros((K, N, T)),
        q=stack_q(d.x, beta),
        m=np.zeros(N, dtype=np.int64),
        mcount=np.zeros((K, N, T + 1), dtype=np.int64),
        omega=np.zeros((K, N, T)),
        active=np.ones(K, dtype=bool),
        ltilde=np.zeros(K, dtype=np.int64),
    )


def sample_theta_sweep(s: ChainState, d: Dataset, hp: HyperParams, rng: RngStream) -> None:
    """Downward pass: ``tau^(t) ~ Gamma(theta^(t+1) + m^(t), 1 - e^{-q^(t+1)})``."""
    act = np.flatnonzero(s.active)
    if act.size == 0:
        return
    T = s.T
    r_col = s.r[act][:, None]
    for t in range(T, 0, -1):
        upper = r_col if t == T else s.theta[act, :, t]
        shape = upper + s.mcount[act, :, t - 1]
        scale = -np.expm1(-s.q[act, :, t])
        tau = dist._gamma(shape, scale, rng)
        s.tau[act, :, t - 1] = tau
        s.theta[act, :, t - 1] = tau / np.maximum(hp.eps_q, s.q[act, :, t - 1])


def sample_counts(s: ChainState, d: Dataset, hp: HyperParams, rng: RngStream) -> None:
    """Latent BerPo counts ``m_i`` and their multinomial split over experts."""
    act = np.flatnonzero(s.active)
    s.mcount[:, :, 0] = 0
    s.m[:] = 0
    pos = np.flatnonzero(d.y == 1)
    if pos.size == 0 or act.size == 0:
        return
    w = s.theta[act][:, pos, 0].T
    total = w.sum(axis=1)
    s.m[pos] = dist._truncated_poisson(np.maximum(total, hp.eps_q), rng)
    dead_rows = total <= 0
    if np.any(dead_rows):
        w = w.copy()
        w[dead_rows] = hp.eps_q
    split = dist._multinomial_rows(s.m[pos], w, rng)
    s.mcount[act[:, None], pos[None, :], 0] = split.T


def upward_sweep(s: ChainState, d: Dataset, hp: HyperParams, rng: RngStream) -> None:
    """Upward pass over layers 2..T+1 for every active expert."""
    act = np.flatnonzero(s.active)
    if act.size == 0:
        return
    X = d.x
    Xt = X.T
    T = s.T
    r_col = s.r[act][:, None]
    for t in range(2, T + 2):
        j = t - 2
        m_low = s.mcount[act, :, t - 2]
        th = r_col if t == T + 1 else s.theta[act, :, t - 1]
        s.mcount[act, :, t - 1] = dist._crt(m_low, np.broadcast_to(th, m_low.shape), rng)

        q_low = s.q[act, :, t - 2]
        live = q_low > 0
        log_q = np.log(np.where(live, q_low, 1.0))
        beta_t = s.beta[act, j, :]
        psi = beta_t @ Xt + log_q
        shape = np.where(live, m_low + th, 0.0)
        om = dist._polya_gamma(shape, psi, rng, hp.pg_truncation)
        s.omega[act, :, j] = om
        bracket = np.where(live, -om * log_q + (m_low - th) / 2.0, m_low)

        prec = np.matmul(Xt[None, :, :] * om[:, None, :], X)
        idx = np.arange(X.shape[1])
        prec[:, idx, idx] += s.alpha[act, j, :]
        lin = bracket @ X
        beta_new = dist.sample_mvn_precision(prec, lin, rng)
        s.beta[act, j, :] = beta_new

        with np.errstate(divide="ignore"):
            s.q[act, :, t - 1] = softplus(beta_new @ Xt + np.log(q_low))
        alpha = dist._gamma(hp.a_t + 0.5, 1.0 / (hp.b_t + 0.5 * beta_new**2), rng)
        s.alpha[act, j, :] = np.maximum(alpha, hp.alpha_floor)


def prune(s: ChainState, hp: HyperParams) -> np.ndarray:
    """Deactivate experts with no layer-1 counts at scheduled iterations.

    Returns the indices of the experts switched off.
    """
    if s.iter not in hp.prune_iters:
        return np.empty(0, dtype=np.int64)
    dead = np.flatnonzero(s.active & (s.mcount[:, :, 0].sum(axis=1) == 0))
    if dead.size:
        s.active[dead] = False
        s.theta[dead] = 0.0
        s.tau[dead] = 0.0
        s.mcount[dead] = 0
        s.omega[dead] = 0.0
        s.q[dead, :, 1:] = 0.0
        log.debug("iter %d: pruned experts %s", s.iter, dead.tolist())
    return dead


def sample_globals(s: ChainState, d: Dataset, hp: HyperParams, rng: RngStream) -> None:
    """Gamma-process mass ``gamma0``, rate ``c0`` and expert weights ``r``."""
    K = hp.K_max
    T = s.T
    l_k = s.mcount[:, :, T].sum(axis=1)
    S_k = np.where(s.active, s.q[:, :, T].sum(axis=1), 0.0)
    s.ltilde = dist._crt(l_k, np.full(K, s.gamma0 / K), rng)
    rate_g = hp.b0 + np.log1p(S_k / s.c0).sum() / K
    s.gamma0 = float(dist._gamma(hp.a0 + s.ltilde.sum(), 1.0 / rate_g, rng))
    s.c0 = float(dist._gamma(hp.e0 + s.gamma0, 1.0 / (hp.f0 + s.r.sum()), rng))
    if hp.r_fixed is None:
        s.r = dist._gamma(s.gamma0 / K + l_k, 1.0 / (s.c0 + S_k), rng)


def gibbs_iteration(s: ChainState, d: Dataset, hp: HyperParams, rng: RngStream) -> None:
    s.iter += 1
    sample_theta_sweep(s, d, hp, rng)
    sample_counts(s, d, hp, rng)
    upward_sweep(s, d, hp, rng)
    prune(s, hp)
    sample_globals(s, d, hp, rng)


def state_log_likelihood(s: ChainState, d: Dataset, hp: HyperParams) -> float:
    return _bernoulli_loglik(d.y, s.rates(), hp.eps_q)


def snapshot(s: ChainState, d: Dataset, hp: HyperParams, variant: str, ll: float,
             orientation: int = 0) -> FittedModel:
    """Freeze the active experts with a nonzero contribution into a model."""
    act = np.flatnonzero(s.active)
    contrib = s.r[act] * s.q[act, :, -1].sum(axis=1)
    keep = act[(s.r[act] > 0) & (contrib > 0)]
    return FittedModel(
        r=s.r[keep].copy(),
        beta=s.beta[keep].copy(),
        orientation=orientation,
        standardization=d.standardization,
        log_lik=float(ll),
        variant=variant,
        meta={
            "seed": hp.seed,
            "iter": s.iter,
            "hyperparams": hp.to_dict(),
            "provenance": f"softplusreg {__version__} variant={variant} seed={hp.seed} iter={s.iter}",
        },
    )


def invariant_violations(s: ChainState, d: Dataset, tol: float = 1e-10) -> list:
    """Structural checks that must hold after every full iteration."""
    out = []
    pos = d.y == 1
    if np.any(s.m[~pos] != 0):
        out.append("m_i > 0 for a negative label")
    if np.any(s.m[pos] < 1):
        out.append("m_i = 0 for a positive label")
    if not np.array_equal(s.mcount[:, :, 0].sum(axis=0), s.m):
        out.append("layer-1 counts do not sum to m_i")
    if np.any(np.diff(s.mcount, axis=2) > 0):
        out.append("a count increased across layers")
    per_expert = s.mcount.sum(axis=1)
    if np.any(np.diff(per_expert, axis=1) > 0):
        out.append("m^(t)_.k increased in t")
    totals = per_expert.sum(axis=0)
    if np.any(np.diff(totals) > 0):
        out.append("m^(t)_.. increased in t")
    if np.any(totals < pos.sum()):
        out.append("m^(t)_.. fell below the number of positives")
    if np.any(s.q[:, :, 0] != 1.0):
        out.append("q^(1) != 1")
    if np.any(s.mcount[~s.active] != 0):
        out.append("inactive expert holds counts")
    act = s.active
    if np.any(act):
        fresh = stack_q(d.x, s.beta[act])
        if not np.allclose(fresh, s.q[act], rtol=0.0, atol=tol):
            out.append("stored q differs from a fresh recursion")
    return out


@dataclass
class RunResult:
    model: FittedModel
    trace: Trace
    state: ChainState
    wall_time: float
    diagnostics: dict


def run(
    d: Dataset,
    hp: HyperParams,
    variant: str = "ss",
    callback: Optional[Callable[[ChainState, float], None]] = None,
) -> RunResult:
    """Run the chain and return the maximum-likelihood post-burn-in snapshot.

    ``callback(state, log_lik)`` is invoked after every iteration.
    """
    check_variant(variant, hp)
    if variant == "logistic" and hp.r_fixed is None:
        hp = HyperParams(**{**hp.to_dict(), "r_fixed": 1.0})
    rng = RngStream(hp.seed, 0)
    s = init_state(d, hp)
    trace = Trace(T=hp.T)
    best_ll = -np.inf
    best: Optional[FittedModel] = None
    start = time.perf_counter()
    for _ in range(hp.n_iter):
        gibbs_iteration(s, d, hp, rng)
        ll = state_log_likelihood(s, d, hp)
        trace.append(ll, s.active.sum(), s.layer_totals())
        if not np.isfinite(ll):
            raise ChainDiverged(f"non-finite log-likelihood at iteration {s.iter}", trace)
        if s.iter > hp.burn_in and ll > best_ll:
            best_ll = ll
            best = snapshot(s, d, hp, variant, ll, d.orientation)
        if callback is not None:
            callback(s, ll)
    if best is None:
        best = snapshot(s, d, hp, variant, trace.log_lik[-1], d.orientation)
    elapsed = time.perf_counter() - start
    return RunResult(best, trace, s, elapsed, dict(rng.counters))

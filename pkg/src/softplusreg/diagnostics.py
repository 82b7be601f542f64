"""Statistical self-tests for the samplers.

Each suite draws from one sampler, compares against a closed form or an
enumerated PMF, and returns a :class:`SuiteReport` whose ``passed`` flag is
the conjunction of its rows.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import distributions as dist
from .distributions import RngStream
from .errors import ParameterError

PG_GRID_A = (0.5, 1.0, 3.0, 10.0)
PG_GRID_C = (0.0, 0.1, 1.0, 4.0, 20.0)
SUITES = ("pg", "crt", "trpois", "duality")


@dataclass
class Check:
    label: str
    observed: float
    expected: float
    ok: bool
    detail: str = ""

    def line(self) -> str:
        mark = "ok  " if self.ok else "FAIL"
        return f"{mark} {self.label:<34} observed={self.observed:<14.6g} expected={self.expected:<14.6g} {self.detail}"


@dataclass
class SuiteReport:
    name: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def add(self, *args, **kw):
        self.checks.append(Check(*args, **kw))

    def text(self) -> str:
        head = f"[{self.name}] {'PASS' if self.passed else 'FAIL'} ({len(self.checks)} checks, {self.seconds:.1f}s)"
        return "\n".join([head] + [c.line() for c in self.checks]) + "\n"


def _rel(obs, exp):
    return abs(obs - exp) / abs(exp)


def pg_suite(n_draws: int = 10**6, seed: int = 0, truncation: int = 6,
             mean_tol: float = 0.01, var_tol: float = 0.03) -> SuiteReport:
    rep = SuiteReport("pg")
    rng = RngStream(seed, 0)
    for a in PG_GRID_A:
        for c in PG_GRID_C:
            draws = dist.sample_polya_gamma(dist.PGParams(a, c, truncation), rng, size=n_draws)
            mu, var = dist.pg_mean(a, c), dist.pg_variance(a, c)
            em, ev = float(draws.mean()), float(draws.var())
            rep.add(f"mean a={a} c={c}", em, mu, _rel(em, mu) < mean_tol,
                    f"rel={_rel(em, mu):.2e}")
            rep.add(f"var  a={a} c={c}", ev, var, _rel(ev, var) < var_tol,
                    f"rel={_rel(ev, var):.2e}")
            ratio = var / mu
            bound_ok = ratio <= 1 / 6 + 1e-15 and (c != 0 or math.isclose(ratio, 1 / 6, rel_tol=1e-12))
            if c != 0:
                bound_ok = bound_ok and ratio < 1 / 6
            rep.add(f"var/mean a={a} c={c}", ratio, 1 / 6, bound_ok, "<= 1/6")
            lower = a / 24 / math.cosh(abs(c) / 2) ** 2
            rep.add(f"var lower bound a={a} c={c}", var, lower, var >= lower * (1 - 1e-12), ">= a/24 sech^2")
    for a in (1.0, 3.0):
        c = 100.0
        draws = dist.sample_polya_gamma(dist.PGParams(a, c, truncation), rng, size=n_draws)
        val = c * float(draws.mean())
        rep.add(f"|c|*mean a={a} c={c}", val, a / 2, _rel(val, a / 2) < 0.01, "-> a/2")
    return rep


def crt_mean(n: int, r: float) -> float:
    return float(sum(r / (r + i) for i in range(n)))


def crt_suite(n_draws: int = 10**5, seed: int = 0) -> SuiteReport:
    rep = SuiteReport("crt")
    rng = RngStream(seed, 1)
    for n in (0, 1, 5, 20, 100):
        for r in (0.5, 2.0, 10.0):
            draws = dist.sample_crt(np.full(n_draws, n), r, rng)
            em, mu = float(draws.mean()), crt_mean(n, r)
            ok_range = bool(np.all(draws <= n) and (np.all(draws >= 1) if n else np.all(draws == 0)))
            ok = ok_range and (em == mu if n <= 1 else _rel(em, mu) < 0.01)
            rep.add(f"mean n={n} r={r}", em, mu, ok, "" if ok_range else "range violated")
    return rep


def truncated_poisson_mean(lam: float) -> float:
    return lam / -math.expm1(-lam)


def trpois_suite(n_draws: int = 10**6, seed: int = 0) -> SuiteReport:
    rep = SuiteReport("trpois")
    rng = RngStream(seed, 2)
    for lam in (1e-6, 0.1, 0.5, 0.999, 1.0, 2.0, 5.0, 50.0):
        draws = dist.sample_truncated_poisson(np.full(n_draws, lam), rng)
        em, mu = float(draws.mean()), truncated_poisson_mean(lam)
        ok = bool(np.all(draws >= 1)) and _rel(em, mu) < 0.01
        rep.add(f"mean lambda={lam}", em, mu, ok)
    tiny = dist.sample_truncated_poisson(np.full(n_draws, 1e-6), rng)
    p1 = float(np.mean(tiny == 1))
    rep.add("P(m=1) lambda=1e-6", p1, 1.0, p1 >= 1 - 1e-5)
    probe = RngStream(seed, 3)
    dist.sample_truncated_poisson(np.full(n_draws, 1.0), probe)
    acc = probe.counters["trpois_accepted"] / probe.counters["trpois_proposals"]
    target = -math.expm1(-1.0)
    se = math.sqrt(target * (1 - target) / probe.counters["trpois_proposals"])
    rep.add("acceptance lambda=1", acc, target, abs(acc - target) < 4 * se, f"se={se:.1e}")
    return rep


def stirling1_unsigned(n_max: int):
    """Table ``s[n][k] = |s(n, k)|`` as exact integers."""
    s = [[0] * (n_max + 1) for _ in range(n_max + 1)]
    s[0][0] = 1
    for n in range(1, n_max + 1):
        for k in range(1, n + 1):
            s[n][k] = s[n - 1][k - 1] + (n - 1) * s[n - 1][k]
    return s


def nb_crt_joint_pmf(r: float, q: float, m_max: int) -> np.ndarray:
    """``P(m, l) = |s(m,l)| r^l q^m (1-q)^r / m!`` for ``0 <= l <= m <= m_max``."""
    s = stirling1_unsigned(m_max)
    pmf = np.zeros((m_max + 1, m_max + 1))
    log_base = r * math.log1p(-q)
    for m in range(m_max + 1):
        for l in range(m + 1):
            if s[m][l]:
                pmf[m, l] = math.exp(
                    math.log(s[m][l]) + l * math.log(r) + m * math.log(q) + log_base - math.lgamma(m + 1)
                )
    return pmf


def _binned(m, l, m_max):
    keep = m <= m_max
    counts = np.zeros((m_max + 1, m_max + 1))
    np.add.at(counts, (m[keep], l[keep]), 1)
    return counts, int(np.count_nonzero(~keep))


def duality_suite(n_draws: int = 10**5, seed: int = 0, r: float = 2.0, q: float = 0.7,
                  m_max: int = 30, alpha: float = 0.01) -> SuiteReport:
    """NB-then-CRT against Poisson-then-SumLog, both against the exact joint.

    Cells with ``m > m_max`` form one tail cell; cells with expected count
    below 5 are pooled with it.
    """
    rep = SuiteReport("duality")
    rng = RngStream(seed, 4)
    gen = rng.generator
    m_a = gen.negative_binomial(r, 1.0 - q, n_draws)
    l_a = dist.sample_crt(m_a, r, rng)
    l_b = gen.poisson(-r * math.log1p(-q), n_draws)
    m_b = dist._sumlog(l_b, q, rng)

    pmf = nb_crt_joint_pmf(r, q, m_max)
    expected = pmf * n_draws
    big = expected >= 5.0
    exp_cells = np.append(expected[big], n_draws - expected[big].sum())

    hists = {}
    for name, m, l in (("nb->crt", m_a, l_a), ("pois->sumlog", m_b, l_b)):
        counts, tail = _binned(m, l, m_max)
        obs = np.append(counts[big], counts[~big].sum() + tail)
        hists[name] = obs
        stat, p = stats.chisquare(obs, exp_cells)
        rep.add(f"chi2 {name} vs exact", float(p), alpha, p > alpha,
                f"stat={stat:.1f} df={obs.size - 1}")
    _, p2, dof, _ = stats.chi2_contingency(np.vstack([hists["nb->crt"], hists["pois->sumlog"]]))
    rep.add("chi2 two-sample", float(p2), alpha, p2 > alpha, f"df={dof}")
    return rep


def run_suite(name: str, **kw) -> SuiteReport:
    fn = {"pg": pg_suite, "crt": crt_suite, "trpois": trpois_suite, "duality": duality_suite}.get(name)
    if fn is None:
        raise ParameterError(f"unknown suite {name!r}; choose from {SUITES}")
    t0 = time.perf_counter()
    rep = fn(**kw)
    rep.seconds = time.perf_counter() - t0
    return rep

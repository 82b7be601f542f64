import math

import mpmath as mp
import numpy as np
import pytest
from helpers import random_model, random_points
from hypothesis import given, settings
from hypothesis import strategies as st

from softplusreg.errors import DimensionError, ParameterError
from softplusreg.geometry import (
    geometry_counts,
    gh_recursions,
    ss_union_membership,
    stack_criteria_satisfied,
    stack_thresholds,
    sum_polytope_violations,
)
from softplusreg.model import FittedModel, predict_prob, rate


def one_expert(r, betas):
    betas = np.asarray(betas, dtype=float)
    return FittedModel(np.array([r]), betas[None, :, :])


def brute_thresholds(T, r, p0):
    """Independent 50-digit re-derivation of ln h_t - ln g_{t-1}."""
    with mp.workdps(50):
        g = [mp.mpf(1)]
        for _ in range(T - 1):
            g.append(mp.log(1 + g[-1]))
        h = [(1 - mp.mpf(p0)) ** (-1 / mp.mpf(r)) - 1]
        for _ in range(T - 1):
            # past 1e4 the next level is far outside double range anyway
            h.insert(0, mp.inf if h[0] > 1e4 else mp.expm1(h[0]))
        return [float(mp.log(ht) - mp.log(gt)) for ht, gt in zip(h, g)]


class TestRecursions:
    def test_logistic_boundary(self):
        g, h = gh_recursions(1, 1.0, 0.5)
        assert g.tolist() == [1.0] and h[0] == pytest.approx(1.0, rel=1e-15)
        assert stack_thresholds(1, 1.0, 0.5)[0] == pytest.approx(0.0, abs=1e-15)

    def test_g_sequence(self):
        g, _ = gh_recursions(3, 1.0, 0.5)
        assert g[1] == pytest.approx(0.6931, abs=1e-4)
        assert g[2] == pytest.approx(math.log1p(math.log(2)), rel=1e-15)
        assert g[2] == pytest.approx(0.5266, abs=1e-4)

    def test_g_monotone(self):
        g, _ = gh_recursions(30, 1.0, 0.5)
        assert g[0] == 1.0 and np.all(np.diff(g) < 0) and np.all(g > 0)

    def test_large_r(self):
        _, h = gh_recursions(3, 1e6, 0.5)
        assert 0 < h[-1] < 1e-5
        assert np.all(stack_thresholds(3, 1e6, 0.5) < -10)

    def test_overflow_is_infinite(self):
        _, h = gh_recursions(6, 0.01, 0.5)
        assert np.isinf(h[0]) and np.isfinite(h[-1])
        m = one_expert(0.01, np.full((6, 2), 50.0))
        # layers whose thresholds overflowed can never be satisfied
        n_inf = int(np.sum(np.isinf(stack_thresholds(6, 0.01, 0.5))))
        assert stack_criteria_satisfied(np.array([1.0, 1.0]), m) <= 6 - n_inf

    @pytest.mark.parametrize("p0", [0.0, 1.0, -0.1, 1.5])
    def test_invalid_p0(self, p0):
        with pytest.raises(ParameterError):
            gh_recursions(2, 1.0, p0)

    def test_invalid_r(self):
        with pytest.raises(ParameterError):
            gh_recursions(2, 0.0, 0.5)

    @settings(max_examples=200)
    @given(st.integers(1, 8), st.floats(1e-3, 1e3), st.floats(0.01, 0.99))
    def test_against_brute_force(self, T, r, p0):
        fast = stack_thresholds(T, r, p0)
        slow = brute_thresholds(T, r, p0)
        for a, b in zip(fast, slow):
            if b < 700:
                assert a == pytest.approx(b, rel=1e-9, abs=1e-9)
            else:
                # beyond exp's double range: any x'beta fails the test either way
                assert a >= 700


class TestSumPolytope:
    def test_examples(self):
        m = one_expert(1.0, [[0.0, 1.0]])
        assert sum_polytope_violations(np.array([1.0, 0.0]), m) == 0
        assert sum_polytope_violations(np.array([1.0, 0.1]), m) == 1
        assert predict_prob(np.array([1.0, 0.1]), m) > 0.5

    def test_tiny_weight_never_violates(self):
        m = one_expert(1e-300, [[100.0, 100.0]])
        assert sum_polytope_violations(np.array([1.0, 10.0]), m) == 0

    def test_requires_t1(self):
        with pytest.raises(DimensionError):
            sum_polytope_violations(np.array([1.0, 0.0]), one_expert(1.0, np.zeros((2, 2))))

    def test_vectorised(self):
        gen = np.random.default_rng(0)
        m = random_model(gen, K=4, T=1)
        x = random_points(gen, 50)
        rows = sum_polytope_violations(x, m)
        assert rows.tolist() == [sum_polytope_violations(xi, m) for xi in x]
        assert np.all((rows >= 0) & (rows <= 4))

    @settings(max_examples=300)
    @given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.95))
    def test_implications(self, seed, p0):
        gen = np.random.default_rng(seed)
        m = random_model(gen, T=1)
        x = random_points(gen, 20)
        v = sum_polytope_violations(x, m, p0)
        lam = rate(x, m)
        prob = predict_prob(x, m)
        assert np.all(prob[v >= 1] > p0)
        assert np.all(v[lam <= -math.log1p(-p0)] == 0)


class TestStackCriteria:
    def test_t1_is_logistic_halfspace(self):
        gen = np.random.default_rng(1)
        for _ in range(50):
            r = float(np.exp(gen.uniform(-2, 2)))
            m = one_expert(r, gen.normal(0, 2, (1, 3)))
            x = random_points(gen, 1)[0]
            expect = x @ m.beta[0, 0] > math.log((0.5) ** (-1 / r) - 1)
            assert stack_criteria_satisfied(x, m) == int(expect)

    def test_very_negative(self):
        m = one_expert(1.0, np.full((4, 2), -1e3))
        assert stack_criteria_satisfied(np.array([1.0, 1.0]), m) == 0

    def test_requires_single_expert(self):
        with pytest.raises(DimensionError):
            stack_criteria_satisfied(np.array([1.0, 0.0]), FittedModel(np.ones(2), np.zeros((2, 1, 2))))

    def test_against_brute_force(self):
        gen = np.random.default_rng(2)
        for _ in range(300):
            m = random_model(gen, K=1)
            x = random_points(gen, 1)[0]
            p0 = float(gen.uniform(0.05, 0.95))
            thr = brute_thresholds(m.T, float(m.r[0]), p0)
            z = m.beta[0] @ x
            expect = sum(1 for zt, th in zip(z, thr) if zt > th)
            assert stack_criteria_satisfied(x, m, p0) == expect


class TestUnion:
    def test_deep_negative(self):
        m = FittedModel(np.ones(3), np.full((3, 2, 3), -50.0))
        assert ss_union_membership(np.array([1.0, 1.0, 1.0]), m) == 0

    def test_single_expert_form(self):
        gen = np.random.default_rng(3)
        for _ in range(300):
            m = random_model(gen, K=1)
            x = random_points(gen, 1)[0]
            lam = rate(x, m)
            margin = lam - math.log(2)
            if abs(margin) < 1e-9:
                continue
            assert ss_union_membership(x, m) == int(margin > 0)

    @settings(max_examples=300)
    @given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.95))
    def test_implication_and_complement(self, seed, p0):
        gen = np.random.default_rng(seed)
        m = random_model(gen)
        x = random_points(gen, 20)
        c = ss_union_membership(x, m, p0)
        prob = predict_prob(x, m)
        assert np.all(prob[c >= 1] > p0)
        assert np.all(c[prob <= p0] == 0)
        assert np.all((c >= 0) & (c <= m.K))


class TestReport:
    def test_default_kinds(self):
        gen = np.random.default_rng(4)
        m1 = random_model(gen, K=3, T=1)
        m3 = random_model(gen, K=3, T=3)
        x = random_points(gen, 10)
        rep = geometry_counts(x, m1)
        assert rep.kind == "sum_violations" and rep.counts.shape == (10,)
        assert rep.h.shape == (3, 1) and rep.g.tolist() == [1.0]
        rep = geometry_counts(x, m3)
        assert rep.kind == "ss_satisfied" and rep.h.shape == (3, 3)
        with pytest.raises(ParameterError):
            geometry_counts(x, m3, kind="volume")

    def test_stack_kind_override(self):
        gen = np.random.default_rng(5)
        m = random_model(gen, K=1, T=4)
        x = random_points(gen, 7)
        rep = geometry_counts(x, m, 0.3, kind="stack_satisfied")
        assert np.all((rep.counts >= 0) & (rep.counts <= 4)) and rep.p0 == 0.3

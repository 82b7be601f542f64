"""Random fitted models and query points for property tests."""

import numpy as np

from softplusreg.model import FittedModel


def random_model(gen, K=None, T=None, V=2):
    K = K if K is not None else int(gen.integers(1, 6))
    T = T if T is not None else int(gen.integers(1, 6))
    r = np.exp(gen.uniform(-5.0, 3.0, K))
    beta = gen.normal(0.0, 2.0, (K, T, V + 1))
    return FittedModel(r, beta)


def random_points(gen, n, V=2, scale=2.0):
    return np.hstack([np.ones((n, 1)), gen.normal(0.0, scale, (n, V))])

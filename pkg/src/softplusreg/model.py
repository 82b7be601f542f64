"""Data containers and the deterministic predictive functions.

Coefficient arrays follow one layout throughout the package: an expert's
``T`` coefficient vectors are stored as ``beta[t - 2]`` for layers
``t = 2, ..., T + 1``, so a fitted model holds ``beta`` with shape
``(K, T, V + 1)``.  Covariate rows always carry the leading bias 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError, DimensionError, ParameterError

__all__ = [
    "Standardization",
    "Dataset",
    "HyperParams",
    "FittedModel",
    "FusedModel",
    "VARIANTS",
    "softplus",
    "stack_softplus",
    "q_recursion",
    "stack_q",
    "rate",
    "predict_prob",
    "fused_prob",
    "positive_prob",
    "log_likelihood",
    "classify",
]

VARIANTS = ("softplus", "sum", "stack", "ss", "logistic")

ORIENTATION_ASIS = 0
ORIENTATION_FLIPPED = 1


@dataclass(frozen=True)
class Standardization:
    """Per-feature affine map ``z = (x - mean) / std`` for columns 1..V."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        std = np.asarray(self.std, dtype=float)
        if mean.shape != std.shape or mean.ndim != 1:
            raise DataError("standardization mean/std must be equal-length vectors")
        if np.any(~(std > 0)):
            raise DataError("standardization std must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def apply(self, features):
        features = np.asarray(features, dtype=float)
        if features.shape[-1] != self.mean.size:
            raise DimensionError(f"expected {self.mean.size} features, got {features.shape[-1]}")
        return (features - self.mean) / self.std

    def invert(self, z):
        return np.asarray(z, dtype=float) * self.std + self.mean

    def __eq__(self, other):
        if not isinstance(other, Standardization):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.std, other.std)

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float))


@dataclass
class Dataset:
    """Covariates with a bias column and binary labels."""

    x: np.ndarray
    y: np.ndarray
    standardization: Optional[Standardization] = None
    orientation: int = ORIENTATION_ASIS

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y).astype(np.int64)
        if self.x.ndim != 2:
            raise DataError("x must be a 2-D matrix")
        if self.y.shape != (self.x.shape[0],):
            raise DataError(f"y has shape {self.y.shape}, expected ({self.x.shape[0]},)")
        if self.x.shape[1] < 1 or not np.all(self.x[:, 0] == 1.0):
            raise DataError("column 0 of x must be the all-ones bias column")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise DataError("labels must be 0 or 1")
        if not np.all(np.isfinite(self.x)):
            raise DataError("covariates must be finite")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def v(self) -> int:
        return self.x.shape[1] - 1

    @classmethod
    def from_features(cls, features, y, standardization=None, orientation=ORIENTATION_ASIS):
        features = np.asarray(features, dtype=float)
        if features.ndim == 1:
            features = features[:, None]
        if standardization is not None:
            features = standardization.apply(features)
        x = np.hstack([np.ones((features.shape[0], 1)), features])
        return cls(x, y, standardization, orientation)


@dataclass
class HyperParams:
    """Prior constants and the sampler schedule.

    ``prune_iters=None`` means every 50th iteration starting at 525 and
    stopping before ``n_iter``, i.e. {525, 575, ..., 4975} for 5000
    iterations.
    """

    K_max: int = 20
    T: int = 1
    a0: float = 0.01
    b0: float = 0.01
    e0: float = 1.0
    f0: float = 1.0
    a_t: float = 1e-6
    b_t: float = 1e-6
    n_iter: int = 5000
    burn_frac: float = 0.5
    prune_iters: Optional[frozenset] = None
    pg_truncation: int = 6
    eps_q: float = 1e-6
    alpha_floor: float = 1e-3
    seed: int = 0
    gamma0_init: float = 1.0
    c0_init: float = 1.0
    r_fixed: Optional[float] = None

    def __post_init__(self):
        for name in ("K_max", "T", "n_iter", "pg_truncation"):
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} must be a positive integer")
        for name in ("a0", "b0", "e0", "f0", "a_t", "b_t", "eps_q", "alpha_floor",
                     "gamma0_init", "c0_init"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if not 0.0 < self.burn_frac < 1.0:
            raise ParameterError("burn_frac must lie in (0, 1)")
        if self.r_fixed is not None and not self.r_fixed > 0:
            raise ParameterError("r_fixed must be positive")
        if self.prune_iters is None:
            self.prune_iters = frozenset(range(525, self.n_iter, 50))
        else:
            self.prune_iters = frozenset(int(i) for i in self.prune_iters)

    @property
    def burn_in(self) -> int:
        return int(math.floor(self.n_iter * self.burn_frac))

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["prune_iters"] = sorted(self.prune_iters)
        return d

    @classmethod
    def for_variant(cls, variant: str, **kwargs) -> "HyperParams":
        """Hyperparameters with ``K_max``/``T``/``r_fixed`` forced by the variant."""
        if variant not in VARIANTS:
            raise ParameterError(f"unknown variant {variant!r}; choose from {VARIANTS}")
        if variant in ("softplus", "logistic"):
            kwargs["K_max"] = 1
            kwargs["T"] = 1
        elif variant == "sum":
            kwargs["T"] = 1
        elif variant == "stack":
            kwargs["K_max"] = 1
        if variant == "logistic":
            kwargs["r_fixed"] = 1.0
        return cls(**kwargs)


@dataclass
class FittedModel:
    """Point estimate ``{r_k, beta_k^(2:T+1)}`` for one labeling orientation."""

    r: np.ndarray
    beta: np.ndarray
    orientation: int = ORIENTATION_ASIS
    standardization: Optional[Standardization] = None
    log_lik: float = float("nan")
    variant: str = "ss"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float).reshape(-1)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.ndim != 3 or self.beta.shape[0] != self.r.size:
            raise DimensionError(
                f"beta must have shape (K, T, V+1) with K={self.r.size}, got {self.beta.shape}"
            )
        if np.any(~(self.r > 0)):
            raise ParameterError("expert weights must be positive")

    @property
    def K(self) -> int:
        return self.r.size

    @property
    def T(self) -> int:
        return self.beta.shape[1]

    @property
    def dim(self) -> int:
        """Length of a covariate row, V + 1."""
        return self.beta.shape[2]

    @property
    def experts(self):
        return [{"r": float(rk), "beta": bk} for rk, bk in zip(self.r, self.beta)]


@dataclass
class FusedModel:
    """Two fitted models trained under opposite labelings."""

    model_pos: FittedModel
    model_neg: FittedModel

    def __post_init__(self):
        if self.model_pos.orientation == self.model_neg.orientation:
            raise ParameterError("fused models must have opposite orientations")
        if self.model_pos.standardization != self.model_neg.standardization:
            raise ParameterError("fused models must share the same standardization")
        if self.model_pos.dim != self.model_neg.dim:
            raise DimensionError("fused models disagree on covariate dimension")

    @property
    def standardization(self):
        return self.model_pos.standardization

    @property
    def dim(self) -> int:
        return self.model_pos.dim


# ---------------------------------------------------------------------------


def softplus(z):
    """``ln(1 + e^z)`` without overflow."""
    z = np.asarray(z, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    out = np.where(np.isneginf(z), 0.0, out)
    return float(out) if out.ndim == 0 else out


def _as_rows(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[-1] != dim:
        raise DimensionError(f"covariate rows have length {x2.shape[-1]}, model expects {dim}")
    return x2, single


def linear_predictor(x, b):
    """``z[k, n] = sum_p b[k, p] * x[n, p]`` with a fixed summation order.

    Accumulating column by column makes every entry independent of how many
    rows are evaluated together, so chunked predictions are bit-identical to
    whole-array ones (a BLAS product does not guarantee that).
    """
    z = np.zeros((b.shape[0], x.shape[0]))
    for p in range(x.shape[1]):
        z += b[:, p, None] * x[None, :, p]
    return z


def stack_q(x, beta):
    """All stack levels for every expert.

    ``x``: (N, V+1); ``beta``: (K, T, V+1).  Returns ``q`` with shape
    (K, N, T+1) where ``q[..., 0] == 1`` and ``q[..., t]`` is layer t+1.
    A zero level stays zero at every higher level.
    """
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    K, T, _ = beta.shape
    q = np.empty((K, x.shape[0], T + 1))
    q[..., 0] = 1.0
    with np.errstate(divide="ignore"):
        for j in range(T):
            logq = np.log(q[..., j])
            q[..., j + 1] = softplus(linear_predictor(x, beta[:, j, :]) + logq)
    return q


def q_recursion(x, betas):
    """Stack levels ``q[1..T+1]`` for one covariate vector.

    ``betas`` holds the T coefficient vectors for layers 2..T+1.  Returns a
    length T+1 array whose first entry is 1.
    """
    betas = np.asarray(betas, dtype=float)
    if betas.ndim == 1:
        betas = betas[None, :]
    x = np.asarray(x, dtype=float)
    if x.shape != (betas.shape[1],):
        raise DimensionError(f"x has shape {x.shape}, betas expect ({betas.shape[1]},)")
    return stack_q(x[None, :], betas[None, :, :])[0, 0]


def stack_softplus(*z):
    """Literal nested form ``ln(1 + e^{z_t} ln(1 + ... ln(1 + e^{z_1})))``.

    Evaluated directly from the nesting rather than through ``q_recursion``.
    """
    inner = np.log1p(np.exp(np.asarray(z[0], dtype=float)))
    for zt in z[1:]:
        inner = np.log1p(np.exp(np.asarray(zt, dtype=float)) * inner)
    return inner


def _rate_rows(x, m: FittedModel):
    if m.K == 0:
        return np.zeros(x.shape[0])
    q = stack_q(x, m.beta)[..., -1]
    lam = np.zeros(x.shape[0])
    for rk, qk in zip(m.r, q):
        lam += rk * qk
    return lam


def rate(x, m: FittedModel):
    """BerPo rate ``sum_k r_k * q_k^(T+1)(x)``."""
    x2, single = _as_rows(x, m.dim)
    out = _rate_rows(x2, m)
    return float(out[0]) if single else out


def predict_prob(x, m: FittedModel):
    """``P(y = 1 | x) = 1 - exp(-rate)``."""
    x2, single = _as_rows(x, m.dim)
    out = -np.expm1(-_rate_rows(x2, m))
    return float(out[0]) if single else out


def _fuse(lam1, lam2):
    return (-np.expm1(-lam1) + np.exp(-lam2)) / 2.0


def fused_prob(x, fm: FusedModel):
    """Average of the two orientations: ``(1 - e^{-l1} + e^{-l2}) / 2``."""
    x2, single = _as_rows(x, fm.dim)
    out = _fuse(_rate_rows(x2, fm.model_pos), _rate_rows(x2, fm.model_neg))
    return float(out[0]) if single else out


def positive_prob(x, m):
    """``P(y = 1)`` in the original class coding.

    Accepts a ``FusedModel`` or a single ``FittedModel``; a model trained on
    flipped labels returns ``e^{-rate}``.
    """
    if isinstance(m, FusedModel):
        return fused_prob(x, m)
    p = predict_prob(x, m)
    if m.orientation == ORIENTATION_FLIPPED:
        x2, single = _as_rows(x, m.dim)
        p = np.exp(-_rate_rows(x2, m))
        return float(p[0]) if single else p
    return p


def classify(prob, p0: float = 0.5):
    """Hard labels; a probability equal to ``p0`` maps to 0."""
    return (np.asarray(prob) > p0).astype(np.int64)


def _bernoulli_loglik(y, lam, eps):
    y = np.asarray(y)
    lam = np.asarray(lam, dtype=float)
    pos = np.log(-np.expm1(-np.maximum(lam, eps)))
    return float(np.sum(np.where(y == 1, pos, -lam)))


def log_likelihood(d: Dataset, m: FittedModel, eps: float = 1e-6) -> float:
    """Training log-likelihood of the marginal Bernoulli model."""
    if d.x.shape[1] != m.dim:
        raise DimensionError(f"dataset has {d.x.shape[1]} columns, model expects {m.dim}")
    return _bernoulli_loglik(d.y, _rate_rows(d.x, m), eps)

"""Train/test runs over predefined benchmark splits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import data, gibbs
from .model import FittedModel, FusedModel, HyperParams, classify, positive_prob

# Reference mean and standard deviation of the test error (%) over ten splits.
REFERENCE_ERRORS = {
    ("ss", 5, "banana"): (11.89, 0.61),
    ("ss", 5, "titanic"): (22.29, 0.80),
    ("ss", 5, "image"): (2.73, 0.53),
    ("ss", 5, "waveform"): (11.69, 0.69),
    ("sum", 1, "titanic"): (22.48, 0.25),
}

WEIGHT_CUTOFF = 1e-3


def significant_experts(m: FittedModel, cutoff: float = WEIGHT_CUTOFF) -> int:
    return int(np.sum(m.r > cutoff))


@dataclass
class SplitResult:
    split: int
    test_error: float
    experts: dict
    wall_time: float


@dataclass
class BenchmarkResult:
    name: str
    variant: str
    T: int
    splits: list = field(default_factory=list)

    @property
    def errors(self):
        return [s.test_error for s in self.splits]

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.errors))

    @property
    def std_error(self) -> float:
        return float(np.std(self.errors, ddof=1)) if len(self.splits) > 1 else 0.0


def fit_both(train, hp: HyperParams, variant: str):
    """Fit the as-is and flipped orientations; returns the fused model and the two run results."""
    res_pos = gibbs.run(train, hp, variant)
    res_neg = gibbs.run(data.flip_labels(train), hp, variant)
    return FusedModel(res_pos.model, res_neg.model), res_pos, res_neg


def error_rate(model, test, p0: float = 0.5) -> float:
    """Misclassification rate in percent."""
    pred = classify(positive_prob(test.x, model), p0)
    return 100.0 * float(np.mean(pred != test.y))


def run_benchmark(
    name: str,
    variant: str = "ss",
    T: int = 5,
    splits: Sequence[int] = (1, 2, 3),
    n_iter: int = 5000,
    K_max: int = 20,
    seed: int = 0,
    data_dir: Optional[str] = None,
    log=None,
) -> BenchmarkResult:
    out = BenchmarkResult(name, variant, T)
    for split in splits:
        table, spec = data.load_benchmark(name, split, data_dir)
        train, test = data.load_partition(table, spec)
        hp = HyperParams.for_variant(variant, K_max=K_max, T=T, n_iter=n_iter, seed=seed)
        fused, rp, rn = fit_both(train, hp, variant)
        err = error_rate(fused, test)
        experts = {"asis": significant_experts(rp.model), "flipped": significant_experts(rn.model)}
        out.splits.append(SplitResult(split, err, experts, rp.wall_time + rn.wall_time))
        if log is not None:
            log(f"{name} split {split}: test error {err:.2f}% experts {experts} "
                f"({rp.wall_time + rn.wall_time:.0f}s)")
    return out

"""Marginal random-effects model: studies, weights, pooling and I^2.

Each study contributes an estimate ``y_i`` with known standard error
``s_i``; marginally ``y_i ~ N(mu, s_i^2 + tau^2)``.  The study-level
effects are integrated out and never represented.

The array helpers (``*_arr``) broadcast over leading axes, with studies on
the last axis, and are what the estimators and the simulation use.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ContractError, DomainError

__all__ = [
    "Study",
    "Dataset",
    "PooledSummary",
    "weights",
    "pooled_estimate",
    "pooled_se",
    "pool",
    "i_squared",
    "tau2_from_i2",
    "typical_variance",
]


@dataclass(frozen=True)
class Study:
    label: str
    estimate: float
    stderr: float

    def __post_init__(self):
        if not math.isfinite(self.estimate):
            raise DomainError(f"study {self.label!r}: estimate must be finite")
        if not (math.isfinite(self.stderr) and self.stderr > 0.0):
            raise DomainError(f"study {self.label!r}: stderr must be positive and finite")


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of studies."""

    studies: tuple

    def __post_init__(self):
        object.__setattr__(self, "studies", tuple(self.studies))
        if not self.studies:
            raise DomainError("a dataset needs at least one study")

    @classmethod
    def from_arrays(cls, estimates, stderrs, labels=None):
        estimates = [float(v) for v in estimates]
        stderrs = [float(v) for v in stderrs]
        if len(estimates) != len(stderrs):
            raise ContractError("estimates and stderrs differ in length")
        if labels is None:
            labels = [f"study {i + 1}" for i in range(len(estimates))]
        return cls(tuple(Study(str(lab), y, s)
                         for lab, y, s in zip(labels, estimates, stderrs)))

    @property
    def k(self):
        return len(self.studies)

    @property
    def y(self):
        return np.array([s.estimate for s in self.studies])

    @property
    def s(self):
        return np.array([s.stderr for s in self.studies])

    @property
    def v(self):
        """Within-study variances ``s_i^2``."""
        return self.s ** 2

    @property
    def labels(self):
        return [s.label for s in self.studies]

    def __len__(self):
        return self.k


@dataclass(frozen=True)
class PooledSummary:
    mu_hat: float
    sigma_mu_hat: float
    weights: tuple
    tau2: float


# ---------------------------------------------------------------------------
# array kernels

def weights_arr(v, tau2):
    return 1.0 / (np.asarray(v) + np.asarray(tau2)[..., None])


def pooled_estimate_arr(y, w):
    return np.sum(w * y, axis=-1) / np.sum(w, axis=-1)


def pooled_se_arr(w):
    return 1.0 / np.sqrt(np.sum(w, axis=-1))


def typical_variance(v):
    """Arithmetic mean of the within-study variances."""
    return np.mean(np.asarray(v, dtype=float), axis=-1)


# ---------------------------------------------------------------------------
# dataset-level operations

def _check_tau2(tau2):
    if not (tau2 >= 0.0 and math.isfinite(tau2)):
        raise DomainError("tau2 must be a finite non-negative number")


def weights(d, tau2):
    """Inverse-variance weights ``1 / (s_i^2 + tau2)``."""
    _check_tau2(tau2)
    return weights_arr(d.v, float(tau2))


def pooled_estimate(d, w):
    w = np.asarray(w, dtype=float)
    if w.shape != (d.k,):
        raise ContractError(f"expected {d.k} weights, got shape {w.shape}")
    if not np.all(w > 0.0):
        raise ContractError("weights must be positive")
    return float(pooled_estimate_arr(d.y, w))


def pooled_se(w):
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ContractError("weights must be a non-empty sequence")
    if not np.all(w > 0.0):
        raise ContractError("weights must be positive")
    return float(pooled_se_arr(w))


def pool(d, tau2):
    """Pooled estimate and its standard error conditional on ``tau2``."""
    w = weights(d, tau2)
    return PooledSummary(
        mu_hat=pooled_estimate(d, w),
        sigma_mu_hat=pooled_se(w),
        weights=tuple(float(x) for x in w),
        tau2=float(tau2),
    )


def i_squared(tau2, d):
    """Relative heterogeneity ``tau2 / (tau2 + mean(s_i^2))``."""
    _check_tau2(tau2)
    return float(tau2 / (tau2 + typical_variance(d.v)))


def tau2_from_i2(i2, d):
    """Heterogeneity variance giving relative heterogeneity ``i2`` for ``d``."""
    if not 0.0 <= i2 < 1.0:
        raise DomainError("i2 must lie in [0, 1)")
    return float(typical_variance(d.v) * i2 / (1.0 - i2))

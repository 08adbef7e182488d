"""Confidence intervals for the overall effect.

Three intervals share the centre ``mu_hat``:

* NORMAL  ``mu_hat +/- z_{1-a/2} * se``
* HKSJ    ``mu_hat +/- t_{k-1;1-a/2} * sqrt(q) * se``
* MKH     as HKSJ with ``q`` replaced by ``max(1, q)``

where ``q = Q(tau2_hat) / (k - 1)`` uses the same weights as the pooled
estimate.
"""

from dataclasses import asdict, dataclass
from enum import Enum
import math

import numpy as np

from .errors import DomainError, InsufficientDataError
from .heterogeneity import Estimator, estimate_tau2, estimate_tau2_arr, q_arr
from .model import i_squared, pool, pooled_estimate_arr, pooled_se_arr, typical_variance, weights_arr
from .stats_kernel import std_normal_quantile, student_t_quantile

__all__ = [
    "Method",
    "ConfidenceInterval",
    "AnalysisResult",
    "q_factor",
    "q_star",
    "ci_normal",
    "ci_hksj",
    "ci_mkh",
    "analyze",
    "analyze_batch",
]


class Method(str, Enum):
    NORMAL = "NORMAL"
    HKSJ = "HKSJ"
    MKH = "MKH"


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    method: Method
    alpha: float

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def length(self):
        return self.upper - self.lower

    def contains(self, value):
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class AnalysisResult:
    k: int
    estimator: Estimator
    alpha: float
    tau2_hat: float
    i2_hat: float
    mu_hat: float
    sigma_mu_hat: float
    weights: tuple
    q: float
    q_star: float
    normal: ConfidenceInterval
    hksj: ConfidenceInterval
    mkh: ConfidenceInterval

    @property
    def intervals(self):
        return {Method.NORMAL: self.normal, Method.HKSJ: self.hksj, Method.MKH: self.mkh}

    def as_flat_dict(self):
        """Flat key/value view used by the structured report."""
        out = {
            "k": self.k,
            "estimator": self.estimator.value,
            "alpha": self.alpha,
            "tau2_hat": self.tau2_hat,
            "i2_hat": self.i2_hat,
            "mu_hat": self.mu_hat,
            "sigma_mu_hat": self.sigma_mu_hat,
            "q": self.q,
            "q_star": self.q_star,
        }
        for ci in (self.normal, self.hksj, self.mkh):
            name = ci.method.value.lower()
            out[f"{name}_lower"] = ci.lower
            out[f"{name}_upper"] = ci.upper
        return out


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie strictly inside (0, 1)")


def _check_k(k):
    if k < 2:
        raise InsufficientDataError(f"need at least 2 studies, got k={k}")


def q_factor(d, tau2_hat):
    """Scaled quadratic form ``Q(tau2_hat) / (k - 1)``."""
    _check_k(d.k)
    if not tau2_hat >= 0.0:
        raise DomainError("tau2_hat must be non-negative")
    return float(q_arr(d.y, d.v, float(tau2_hat))) / (d.k - 1)


def q_star(q):
    if not q >= 0.0:
        raise DomainError("q must be non-negative")
    return max(1.0, float(q))


def ci_normal(mu_hat, sigma_mu_hat, alpha=0.05):
    _check_alpha(alpha)
    half = sigma_mu_hat * std_normal_quantile(1.0 - alpha / 2.0)
    return ConfidenceInterval(mu_hat - half, mu_hat + half, Method.NORMAL, alpha)


def _t_interval(mu_hat, sigma_mu_hat, factor, k, alpha, method):
    _check_k(k)
    _check_alpha(alpha)
    if not factor >= 0.0:
        raise DomainError("q must be non-negative")
    half = math.sqrt(factor) * sigma_mu_hat * student_t_quantile(1.0 - alpha / 2.0, k - 1)
    return ConfidenceInterval(mu_hat - half, mu_hat + half, method, alpha)


def ci_hksj(mu_hat, sigma_mu_hat, q, k, alpha=0.05):
    """Hartung-Knapp-Sidik-Jonkman interval; zero width when ``q == 0``."""
    return _t_interval(mu_hat, sigma_mu_hat, q, k, alpha, Method.HKSJ)


def ci_mkh(mu_hat, sigma_mu_hat, q, k, alpha=0.05):
    """Modified Knapp-Hartung interval: HKSJ with ``q`` floored at one."""
    return _t_interval(mu_hat, sigma_mu_hat, q_star(q), k, alpha, Method.MKH)


def analyze(d, estimator="DL", alpha=0.05):
    """Estimate ``tau2``, then the effect conditional on it, with all three intervals."""
    _check_k(d.k)
    _check_alpha(alpha)
    est = estimate_tau2(d, estimator)
    summary = pool(d, est.value)
    q = q_factor(d, est.value)
    mu, se = summary.mu_hat, summary.sigma_mu_hat
    return AnalysisResult(
        k=d.k,
        estimator=est.estimator,
        alpha=float(alpha),
        tau2_hat=est.value,
        i2_hat=i_squared(est.value, d),
        mu_hat=mu,
        sigma_mu_hat=se,
        weights=summary.weights,
        q=q,
        q_star=q_star(q),
        normal=ci_normal(mu, se, alpha),
        hksj=ci_hksj(mu, se, q, d.k, alpha),
        mkh=ci_mkh(mu, se, q, d.k, alpha),
    )


@dataclass
class BatchAnalysis:
    """Vectorized counterpart of :class:`AnalysisResult` (one entry per dataset)."""

    tau2_hat: np.ndarray
    converged: np.ndarray
    mu_hat: np.ndarray
    sigma_mu_hat: np.ndarray
    q: np.ndarray
    half_normal: np.ndarray
    half_hksj: np.ndarray
    half_mkh: np.ndarray
    i2_hat: np.ndarray

    def as_dict(self):
        return asdict(self)


def analyze_batch(y, v, estimator="DL", alpha=0.05):
    """Analyze many datasets of equal size at once.

    ``y`` has shape ``(n, k)``; ``v`` is broadcastable to it.  Interval
    half-widths are returned instead of endpoints; every interval is
    ``mu_hat +/- half``.
    """
    y = np.asarray(y, dtype=float)
    k = y.shape[-1]
    _check_k(k)
    _check_alpha(alpha)
    v = np.broadcast_to(np.asarray(v, dtype=float), y.shape)
    tau2, conv = estimate_tau2_arr(y, v, estimator)
    w = weights_arr(v, tau2)
    mu = pooled_estimate_arr(y, w)
    se = pooled_se_arr(w)
    q = np.sum(w * (y - mu[..., None]) ** 2, axis=-1) / (k - 1)
    z = std_normal_quantile(1.0 - alpha / 2.0)
    t = student_t_quantile(1.0 - alpha / 2.0, k - 1)
    return BatchAnalysis(
        tau2_hat=tau2,
        converged=conv,
        mu_hat=mu,
        sigma_mu_hat=se,
        q=q,
        half_normal=se * z,
        half_hksj=np.sqrt(q) * se * t,
        half_mkh=np.sqrt(np.maximum(1.0, q)) * se * t,
        i2_hat=tau2 / (tau2 + typical_variance(v)),
    )

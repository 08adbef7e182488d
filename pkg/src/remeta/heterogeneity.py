"""Between-study variance: DL, REML and PM estimators and the Q-profile interval.

All estimators have an array form (``*_arr``) taking ``y`` of shape
``(..., k)`` and variances ``v`` broadcastable to it, and a dataset form
returning a :class:`TauEstimate`.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConvergenceError, DomainError, InsufficientDataError
from .model import pooled_estimate_arr, weights_arr
from .stats_kernel import chi_square_quantile

__all__ = [
    "Estimator",
    "TauEstimate",
    "TauInterval",
    "generalized_q",
    "restricted_loglik",
    "dl_estimate",
    "reml_estimate",
    "pm_estimate",
    "estimate_tau2",
    "q_profile_ci",
]

REML_TOL = 1e-10
REML_MAX_ITER = 200
_REML_GRID = 41
_BISECT_MAX_ITER = 2000


class Estimator(str, Enum):
    DL = "DL"
    REML = "REML"
    PM = "PM"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls[str(name).strip().upper()]
        except KeyError:
            choices = ", ".join(e.value.lower() for e in cls)
            raise DomainError(f"unknown estimator {name!r} (choose from {choices})") from None


@dataclass(frozen=True)
class TauEstimate:
    value: float
    estimator: Estimator
    converged: bool = True
    iterations: int = 0


@dataclass(frozen=True)
class TauInterval:
    lower: float
    upper: float
    alpha: float


def _require_k(k):
    if k < 2:
        raise InsufficientDataError(f"need at least 2 studies, got k={k}")


def _broadcast(y, v):
    y = np.asarray(y, dtype=float)
    v = np.broadcast_to(np.asarray(v, dtype=float), y.shape)
    return y, v


# ---------------------------------------------------------------------------
# array kernels

def q_arr(y, v, tau2):
    """Generalized Q statistic ``sum w_i (y_i - mu_hat)^2`` with weights at ``tau2``.

    ``tau2`` broadcasts against the leading axes of ``y``.
    """
    w = weights_arr(v, tau2)
    mu = pooled_estimate_arr(y, w)
    return np.sum(w * (y - mu[..., None]) ** 2, axis=-1)


def dl_arr(y, v):
    y, v = _broadcast(y, v)
    k = y.shape[-1]
    a = 1.0 / v
    sa = a.sum(axis=-1)
    mu = (a * y).sum(axis=-1) / sa
    q = (a * (y - mu[..., None]) ** 2).sum(axis=-1)
    denom = sa - (a * a).sum(axis=-1) / sa
    return np.maximum(0.0, (q - (k - 1)) / denom)


def solve_q_arr(y, v, target):
    """Root of ``Q(tau2) = target`` by bisection, clamped at zero.

    Q is monotone decreasing in ``tau2``, so whenever ``Q(0) > target`` the
    bracket ``[0, B]`` with ``B`` doubled from 1 contains exactly one root.
    Bisection runs to (near) machine precision.  Returns ``(root, iterations)``.
    """
    y, v = _broadcast(y, v)
    lead = y.shape[:-1]
    target = np.broadcast_to(np.asarray(target, dtype=float), lead)
    root = np.zeros(lead)
    active = q_arr(y, v, np.zeros(lead)) > target
    if not np.any(active):
        return root, 0
    ya, va, ta = y[active], v[active], target[active]
    hi = np.ones(ta.shape)
    for _ in range(_BISECT_MAX_ITER):
        grow = q_arr(ya, va, hi) > ta
        if not np.any(grow):
            break
        hi = np.where(grow, 2.0 * hi, hi)
    lo = np.zeros_like(hi)
    n_iter = 0
    todo = np.ones(hi.shape, dtype=bool)
    while np.any(todo) and n_iter < _BISECT_MAX_ITER:
        n_iter += 1
        mid = 0.5 * (lo + hi)
        stalled = (mid <= lo) | (mid >= hi)
        above = q_arr(ya, va, mid) > ta
        lo = np.where(todo & above, mid, lo)
        hi = np.where(todo & ~above, mid, hi)
        width = hi - lo
        todo = todo & ~((width <= np.minimum(1e-10, 1e-14 * hi)) | stalled)
    root[active] = 0.5 * (lo + hi)
    return root, n_iter


def pm_arr(y, v):
    y = np.asarray(y, dtype=float)
    return solve_q_arr(y, v, y.shape[-1] - 1.0)


def restricted_loglik_arr(y, v, tau2):
    """Restricted log-likelihood up to an additive constant.

    ``tau2`` may carry extra trailing axes beyond the leading axes of ``y``
    (e.g. a grid per dataset); studies are broadcast accordingly.
    """
    y = np.asarray(y, dtype=float)
    tau2 = np.asarray(tau2, dtype=float)
    extra = tau2.ndim - (y.ndim - 1)
    yy = y.reshape(y.shape[:-1] + (1,) * extra + y.shape[-1:])
    vv = np.broadcast_to(np.asarray(v, dtype=float), y.shape)
    vv = vv.reshape(yy.shape)
    tot = vv + tau2[..., None]
    w = 1.0 / tot
    sw = w.sum(axis=-1)
    mu = (w * yy).sum(axis=-1) / sw
    resid = (w * (yy - mu[..., None]) ** 2).sum(axis=-1)
    return -0.5 * (np.log(tot).sum(axis=-1) + np.log(sw) + resid)


def reml_score_arr(y, v, tau2):
    """Derivative of :func:`restricted_loglik_arr` with respect to ``tau2``."""
    w = weights_arr(v, tau2)
    sw = w.sum(axis=-1)
    mu = (w * y).sum(axis=-1) / sw
    w2 = w * w
    return 0.5 * ((w2 * (y - mu[..., None]) ** 2).sum(axis=-1)
                  - sw + w2.sum(axis=-1) / sw)


def reml_arr(y, v, tol=REML_TOL, max_iter=REML_MAX_ITER):
    """Maximize the restricted likelihood over ``tau2 >= 0``.

    The upper end of the search range starts at ``max(v)`` and doubles until
    the objective drops.  A coarse grid of objective values over that range
    selects the bracket around the maximum, and the bracket is then bisected
    on the sign of the score.  Converged means the bracket is narrower than
    ``tol * max(v)``; bisection continues to machine precision regardless, so
    the result is equivariant under rescaling of the data.

    Returns ``(tau2, converged, iterations)``.
    """
    y, v = _broadcast(y, v)
    lead = y.shape[:-1]
    flat_y = y.reshape(-1, y.shape[-1])
    flat_v = v.reshape(-1, y.shape[-1])
    n = flat_y.shape[0]
    scale = flat_v.max(axis=-1)

    def f(t):
        return restricted_loglik_arr(flat_y, flat_v, t)

    b = scale.copy()
    fb = f(b)
    for _ in range(max_iter):
        nxt = 2.0 * b
        fn = f(nxt)
        rising = fn >= fb
        b = np.where(rising, nxt, b)
        fb = np.where(rising, fn, fb)
        if not np.any(rising):
            break
    upper = 2.0 * b

    grid = upper[:, None] * np.linspace(0.0, 1.0, _REML_GRID)[None, :]
    best = np.argmax(f(grid), axis=-1)
    rows = np.arange(n)
    lo = grid[rows, np.maximum(best - 1, 0)]
    hi = grid[rows, np.minimum(best + 1, _REML_GRID - 1)]

    # a non-positive score at zero means the maximum sits on the boundary
    boundary = (best == 0) & (reml_score_arr(flat_y, flat_v, np.zeros(n)) <= 0.0)
    todo = ~boundary
    n_iter = 0
    while np.any(todo) and n_iter < max_iter:
        n_iter += 1
        mid = 0.5 * (lo + hi)
        stalled = (mid <= lo) | (mid >= hi)
        rising = reml_score_arr(flat_y, flat_v, mid) > 0.0
        lo = np.where(todo & rising, mid, lo)
        hi = np.where(todo & ~rising, mid, hi)
        todo = todo & ~(stalled | (hi - lo <= 4.0 * np.finfo(float).eps * hi))
    est = np.where(boundary, 0.0, 0.5 * (lo + hi))
    converged = boundary | (hi - lo <= tol * scale)
    return est.reshape(lead), converged.reshape(lead), n_iter


def estimate_tau2_arr(y, v, estimator):
    """Dispatch to an array estimator; returns ``(tau2, converged)``."""
    estimator = Estimator.parse(estimator)
    if estimator is Estimator.DL:
        t = dl_arr(y, v)
        return t, np.ones(t.shape, dtype=bool)
    if estimator is Estimator.PM:
        t, _ = pm_arr(y, v)
        return t, np.ones(t.shape, dtype=bool)
    t, conv, _ = reml_arr(y, v)
    return t, conv


# ---------------------------------------------------------------------------
# dataset interface

def generalized_q(d, tau2):
    _require_k(d.k)
    if not tau2 >= 0.0:
        raise DomainError("tau2 must be non-negative")
    return float(q_arr(d.y, d.v, float(tau2)))


def restricted_loglik(d, tau2):
    _require_k(d.k)
    if not tau2 >= 0.0:
        raise DomainError("tau2 must be non-negative")
    return float(restricted_loglik_arr(d.y, d.v, float(tau2)))


def dl_estimate(d):
    """DerSimonian-Laird moment estimator, truncated at zero."""
    _require_k(d.k)
    return TauEstimate(float(dl_arr(d.y, d.v)), Estimator.DL, True, 0)


def reml_estimate(d, tol=REML_TOL, max_iter=REML_MAX_ITER):
    """Restricted maximum-likelihood estimate of ``tau2``.

    Raises
    ------
    ConvergenceError
        If the bracket has not narrowed to ``tol * max(s_i^2)`` within
        ``max_iter`` iterations; the last midpoint is attached.
    """
    _require_k(d.k)
    if not tol > 0.0:
        raise DomainError("tol must be positive")
    t, conv, n_iter = reml_arr(d.y, d.v, tol, max_iter)
    if not bool(conv):
        raise ConvergenceError(f"REML did not converge in {max_iter} iterations",
                               last=float(t), iterations=n_iter)
    return TauEstimate(float(t), Estimator.REML, True, n_iter)


def pm_estimate(d):
    """Paule-Mandel estimate: Q(tau2) = k - 1, or 0 when Q(0) <= k - 1."""
    _require_k(d.k)
    t, n_iter = pm_arr(d.y, d.v)
    return TauEstimate(float(t), Estimator.PM, True, n_iter)


def estimate_tau2(d, estimator):
    estimator = Estimator.parse(estimator)
    return {
        Estimator.DL: dl_estimate,
        Estimator.REML: reml_estimate,
        Estimator.PM: pm_estimate,
    }[estimator](d)


def q_profile_ci(d, alpha=0.05):
    """Q-profile confidence interval for ``tau2``.

    Each bound solves ``Q(tau2)`` equal to a chi-square quantile with
    ``k - 1`` degrees of freedom and is clamped at zero when ``Q(0)`` is
    already below that quantile.
    """
    _require_k(d.k)
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie strictly inside (0, 1)")
    df = d.k - 1
    lower, _ = solve_q_arr(d.y, d.v, chi_square_quantile(1.0 - alpha / 2.0, df))
    upper, _ = solve_q_arr(d.y, d.v, chi_square_quantile(alpha / 2.0, df))
    return TauInterval(float(lower), float(upper), float(alpha))

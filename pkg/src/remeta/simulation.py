"""Monte Carlo coverage study over study-size scenarios A-D.

Scenario designs (squared standard errors, base unit 1, small and large
trials differ by a factor of ten):

    A  all studies equal                       (1, ..., 1)
    B  equal studies plus one small trial      (1, ..., 1, 10)
    C  half large, half small                  (1 x ceil(k/2), 10 x floor(k/2))
    D  equal studies plus one large trial      (1, ..., 1, 0.1)

The true effect is 0.  Every replicate draws its study estimates from its
own Philox stream whose id packs the cell coordinates and the replicate
number, so a cell's result depends only on (cell, seed): not on grid
membership, chunking or the number of worker processes.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import itertools
import math

import numpy as np

from .errors import DomainError
from .heterogeneity import Estimator
from .inference import analyze_batch
from .model import typical_variance, weights_arr, pooled_estimate_arr
from .stats_kernel import stream_normals

__all__ = [
    "SCENARIOS",
    "DEFAULT_K_RANGE",
    "DEFAULT_I2",
    "ScenarioSpec",
    "SimCell",
    "EstimatorSummary",
    "CellResult",
    "scenario_variances",
    "stream_id",
    "simulate_cell",
    "run_grid",
    "mc_stderr",
    "q_at_true_tau2",
]

SCENARIOS = ("A", "B", "C", "D")
DEFAULT_K_RANGE = tuple(range(2, 12))
DEFAULT_I2 = (0.0, 0.25, 0.5, 0.75, 0.9)
DEFAULT_REPS = 10_000

# q within this distance below 1 counts as q = 1 (PM puts q on 1 by construction)
Q_ONE_TOL = 1e-8
# replicates with q below this are left out of the length ratio
Q_ZERO_TOL = 1e-12
_CHUNK = 8192


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str
    k: int

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise DomainError(f"unknown scenario {self.scenario!r}")
        if int(self.k) != self.k or self.k < 2:
            raise DomainError("k must be an integer >= 2")


@dataclass(frozen=True)
class SimCell:
    spec: ScenarioSpec
    i2: float
    estimators: tuple = (Estimator.DL,)
    alpha: float = 0.05
    reps: int = DEFAULT_REPS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "estimators",
                           tuple(Estimator.parse(e) for e in self.estimators))
        if not 0.0 <= self.i2 < 1.0:
            raise DomainError("i2 must lie in [0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie strictly inside (0, 1)")
        if self.reps < 1 or self.reps >= 2**32:
            raise DomainError("reps must lie in [1, 2**32)")
        if not self.estimators:
            raise DomainError("at least one estimator is required")


@dataclass(frozen=True)
class EstimatorSummary:
    estimator: Estimator
    n_ok: int
    n_failed: int
    coverage: dict
    mc_se: dict
    mean_len_ratio: float
    n_q_zero: int
    frac_q_lt_1: float
    frac_q_eq_1: float
    mean_q: float
    mean_tau2_hat: float


@dataclass(frozen=True)
class CellResult:
    cell: SimCell
    tau2: float
    summaries: tuple = ()
    error: str = None

    @property
    def by_estimator(self):
        return {s.estimator: s for s in self.summaries}

    @property
    def ok(self):
        return self.error is None


def scenario_variances(spec):
    """Squared standard errors for a scenario, in study order."""
    k, sc = spec.k, spec.scenario
    v = np.ones(k)
    if sc == "B":
        v[-1] = 10.0
    elif sc == "C":
        v[(k + 1) // 2:] = 10.0
    elif sc == "D":
        v[-1] = 0.1
    return v


def mc_stderr(p_hat, n):
    """Binomial Monte Carlo standard error ``sqrt(p (1 - p) / n)``."""
    if not 0.0 <= p_hat <= 1.0 or n < 1:
        raise DomainError("need 0 <= p_hat <= 1 and n >= 1")
    return math.sqrt(p_hat * (1.0 - p_hat) / n)


def stream_id(spec, i2, replicate):
    """64-bit stream id: scenario (4 bits) | k (12) | I^2 x 1e4 (16) | replicate (32)."""
    code = int(round(i2 * 10_000))
    base = (SCENARIOS.index(spec.scenario) << 60) | (spec.k << 48) | (code << 32)
    return np.uint64(base) + np.asarray(replicate, dtype=np.uint64)


def _true_tau2(v, i2):
    return float(typical_variance(v) * i2 / (1.0 - i2))


def _draw(cell, v, tau2, start, stop):
    ids = stream_id(cell.spec, cell.i2, np.arange(start, stop, dtype=np.uint64))
    z = stream_normals(cell.seed, ids, cell.spec.k)
    return z * np.sqrt(v + tau2)


def simulate_cell(cell):
    """Simulate one grid cell and aggregate per-estimator statistics."""
    v = scenario_variances(cell.spec)
    tau2 = _true_tau2(v, cell.i2)
    methods = ("NORMAL", "HKSJ", "MKH")
    acc = {e: dict(cover=dict.fromkeys(methods, 0), ratio_sum=0.0, n_q_zero=0,
                   q_lt_1=0, q_eq_1=0, q_sum=0.0, tau2_sum=0.0, failed=0)
           for e in cell.estimators}
    for start in range(0, cell.reps, _CHUNK):
        stop = min(cell.reps, start + _CHUNK)
        y = _draw(cell, v, tau2, start, stop)
        for est in cell.estimators:
            a = acc[est]
            b = analyze_batch(y, v, est, cell.alpha)
            ok = b.converged
            a["failed"] += int(np.count_nonzero(~ok))
            dev = np.abs(b.mu_hat[ok])
            a["cover"]["NORMAL"] += int(np.count_nonzero(dev <= b.half_normal[ok]))
            a["cover"]["HKSJ"] += int(np.count_nonzero(dev <= b.half_hksj[ok]))
            a["cover"]["MKH"] += int(np.count_nonzero(dev <= b.half_mkh[ok]))
            q = b.q[ok]
            pos = q >= Q_ZERO_TOL
            a["n_q_zero"] += int(np.count_nonzero(~pos))
            a["ratio_sum"] += float(np.sum(np.sqrt(np.maximum(1.0, q[pos]) / q[pos])))
            lt = q < 1.0 - Q_ONE_TOL
            a["q_lt_1"] += int(np.count_nonzero(lt))
            a["q_eq_1"] += int(np.count_nonzero(~lt & (q <= 1.0 + Q_ONE_TOL)))
            a["q_sum"] += float(np.sum(q))
            a["tau2_sum"] += float(np.sum(b.tau2_hat[ok]))

    summaries = []
    for est in cell.estimators:
        a = acc[est]
        n = cell.reps - a["failed"]
        nan = float("nan")
        cov = {m: a["cover"][m] / n if n else nan for m in methods}
        n_pos = n - a["n_q_zero"]
        summaries.append(EstimatorSummary(
            estimator=est,
            n_ok=n,
            n_failed=a["failed"],
            coverage=cov,
            mc_se={m: mc_stderr(p, n) if n else nan for m, p in cov.items()},
            mean_len_ratio=a["ratio_sum"] / n_pos if n_pos else nan,
            n_q_zero=a["n_q_zero"],
            frac_q_lt_1=a["q_lt_1"] / n if n else nan,
            frac_q_eq_1=a["q_eq_1"] / n if n else nan,
            mean_q=a["q_sum"] / n if n else nan,
            mean_tau2_hat=a["tau2_sum"] / n if n else nan,
        ))
    return CellResult(cell=cell, tau2=tau2, summaries=tuple(summaries))


def _safe_simulate(cell):
    try:
        return simulate_cell(cell)
    except Exception as exc:  # surfaced as a flagged row, never an abort
        return CellResult(cell=cell, tau2=float("nan"), error=f"{type(exc).__name__}: {exc}")


def grid_cells(scenarios=SCENARIOS, k_range=DEFAULT_K_RANGE, i2_set=DEFAULT_I2,
               estimators=tuple(Estimator), alpha=0.05, reps=DEFAULT_REPS, seed=0):
    """Grid cells in canonical (scenario, k, I^2) order."""
    scenarios = sorted(set(scenarios), key=SCENARIOS.index)
    k_range = sorted(set(int(k) for k in k_range))
    i2_set = sorted(set(float(x) for x in i2_set))
    estimators = sorted({Estimator.parse(e) for e in estimators},
                        key=list(Estimator).index)
    if not (scenarios and k_range and i2_set and estimators):
        raise DomainError("every grid axis needs at least one value")
    return [
        SimCell(ScenarioSpec(sc, k), i2, tuple(estimators), alpha, reps, seed)
        for sc, k, i2 in itertools.product(scenarios, k_range, i2_set)
    ]


def run_grid(scenarios=SCENARIOS, k_range=DEFAULT_K_RANGE, i2_set=DEFAULT_I2,
             estimators=tuple(Estimator), alpha=0.05, reps=DEFAULT_REPS, seed=0,
             workers=1):
    """Evaluate the Cartesian grid of cells.

    Output order is canonical (scenario, k, I^2; estimators in DL, REML, PM
    order within a cell) for any ``workers`` value.
    """
    cells = grid_cells(scenarios, k_range, i2_set, estimators, alpha, reps, seed)
    if workers is None or workers <= 1:
        return [_safe_simulate(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_safe_simulate, cells))


def q_at_true_tau2(spec, i2, reps, seed):
    """``q`` computed with weights at the true ``tau2`` for ``reps`` simulated datasets.

    Under the model, ``(k - 1) q`` is then exactly chi-square with ``k - 1``
    degrees of freedom.
    """
    cell = SimCell(spec, i2, (Estimator.DL,), 0.05, reps, seed)
    v = scenario_variances(spec)
    tau2 = _true_tau2(v, i2)
    out = []
    for start in range(0, reps, _CHUNK):
        y = _draw(cell, v, tau2, start, min(reps, start + _CHUNK))
        w = weights_arr(v, np.full(y.shape[0], tau2))
        mu = pooled_estimate_arr(y, w)
        out.append(np.sum(w * (y - mu[:, None]) ** 2, axis=-1) / (spec.k - 1))
    return np.concatenate(out)

"""Text renderings of analysis results and simulation tables."""

import csv
import io
import json
import math

from .errors import InsufficientDataError
from .heterogeneity import Estimator
from .stats_kernel import std_normal_quantile

SIM_COLUMNS = (
    "scenario", "k", "i2", "estimator", "reps", "seed",
    "cov_normal", "cov_hksj", "cov_mkh", "mc_se_hksj",
    "mean_len_ratio", "frac_q_lt_1", "mean_tau2_hat",
)


def fmt(x):
    """Six significant digits; integers print without a decimal point."""
    if isinstance(x, int):
        return str(x)
    if math.isnan(x):
        return "nan"
    out = f"{x:.6g}"
    return "0" if out == "-0" else out


def _prop(x):
    return "nan" if math.isnan(x) else f"{x:.4f}"


def render_table(result):
    lines = [
        f"Random-effects meta-analysis (k = {result.k}, "
        f"estimator = {result.estimator.value}, alpha = {fmt(result.alpha)})",
        "",
    ]
    for key in ("tau2_hat", "i2_hat", "mu_hat", "sigma_mu_hat", "q", "q_star"):
        lines.append(f"{key:<14}{fmt(getattr(result, key))}")
    lines.append("")
    lines.append(f"{'method':<8}{'lower':>14}{'upper':>14}")
    for ci in (result.normal, result.hksj, result.mkh):
        lines.append(f"{ci.method.value:<8}{fmt(ci.lower):>14}{fmt(ci.upper):>14}")
    return "\n".join(lines) + "\n"


def render_json(result):
    """Flat JSON object; every float rounded to six significant digits."""
    flat = {}
    for key, value in result.as_flat_dict().items():
        if isinstance(value, float):
            value = float(fmt(value))
        flat[key] = value
    return json.dumps(flat, indent=2) + "\n"


# ---------------------------------------------------------------------------
# forest

_TRACK = 41


def _track(lo, hi, lower, upper, center, mark, zero_col):
    width = _TRACK

    def col(x):
        return int(round((x - lo) / (hi - lo) * (width - 1)))

    cells = [" "] * width
    if zero_col is not None:
        cells[zero_col] = "|"
    a, b = col(lower), col(upper)
    for i in range(a, b + 1):
        cells[i] = "-"
    cells[a] = "["
    cells[b] = "]"
    cells[col(center)] = mark
    return "".join(cells)


def render_forest(dataset, result):
    """Fixed-width forest view: study rows, then NORMAL/HKSJ/MKH pooled rows.

    Study intervals are ``y_i +/- z_{1-alpha/2} s_i``.  The axis spans every
    interval and zero with a 5% margin on each side.
    """
    if dataset.k < 2:
        raise InsufficientDataError("a forest view needs k >= 2 studies")
    z = std_normal_quantile(1.0 - result.alpha / 2.0)
    rows = [(st.label, st.estimate, st.estimate - z * st.stderr,
             st.estimate + z * st.stderr, "o") for st in dataset.studies]
    pooled = [(ci.method.value, result.mu_hat, ci.lower, ci.upper, "#")
              for ci in (result.normal, result.hksj, result.mkh)]
    bounds = [0.0] + [r[2] for r in rows + pooled] + [r[3] for r in rows + pooled]
    lo, hi = min(bounds), max(bounds)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    zero_col = int(round((0.0 - lo) / (hi - lo) * (_TRACK - 1)))

    label_w = max(8, *(len(r[0]) for r in rows + pooled))
    ci_head = f"{int(round(100 * (1 - result.alpha)))}% CI"

    def interval(r):
        return f"[{fmt(r[2])}, {fmt(r[3])}]"

    ci_w = max(len(ci_head), *(len(interval(r)) for r in rows + pooled))

    def line(r):
        label, est, lower, upper, mark = r
        return (f"{label:<{label_w}}  {fmt(est):>11}  {interval(r):<{ci_w}}  "
                + _track(lo, hi, lower, upper, est, mark, zero_col))

    head = f"{'study':<{label_w}}  {'estimate':>11}  {ci_head:<{ci_w}}  "
    out = [head.rstrip(), *(line(r) for r in rows)]
    out.append("-" * (len(head) + _TRACK))
    out.extend(line(r) for r in pooled)
    axis = ["-"] * _TRACK
    axis[0] = axis[-1] = "+"
    axis[zero_col] = "+"
    out.append(" " * len(head) + "".join(axis))
    ticks = f"{fmt(lo)}"
    right = fmt(hi)
    gap = _TRACK - len(ticks) - len(right)
    out.append(" " * len(head) + ticks + " " * max(1, gap) + right)
    out.append(" " * len(head) + " " * zero_col + "0")
    out.append("")
    out.append(f"estimator {result.estimator.value}: tau2_hat = {fmt(result.tau2_hat)}, "
               f"q = {fmt(result.q)}, q* = {fmt(result.q_star)}")
    return "\n".join(ln.rstrip() for ln in out) + "\n"


# ---------------------------------------------------------------------------
# simulation table

def simulation_rows(results):
    """Flatten cell results into CSV rows in canonical order."""
    for res in results:
        cell = res.cell
        base = [cell.spec.scenario, str(cell.spec.k), f"{cell.i2:g}"]
        if not res.ok:
            for est in cell.estimators:
                yield base + [est.value, str(cell.reps), str(cell.seed)] + ["nan"] * 7
            continue
        for s in res.summaries:
            yield base + [
                s.estimator.value, str(cell.reps), str(cell.seed),
                _prop(s.coverage["NORMAL"]), _prop(s.coverage["HKSJ"]),
                _prop(s.coverage["MKH"]), fmt(s.mc_se["HKSJ"]),
                fmt(s.mean_len_ratio), _prop(s.frac_q_lt_1), fmt(s.mean_tau2_hat),
            ]


def simulation_csv(results):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SIM_COLUMNS)
    writer.writerows(simulation_rows(results))
    return buf.getvalue()


def estimator_choices():
    return [e.value.lower() for e in Estimator]

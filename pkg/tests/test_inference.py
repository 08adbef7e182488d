import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_datasets
from remeta.errors import DomainError, InsufficientDataError
from remeta.heterogeneity import Estimator
from remeta.inference import (
    Method,
    analyze,
    analyze_batch,
    ci_hksj,
    ci_mkh,
    ci_normal,
    q_factor,
    q_star,
)
from remeta.model import Dataset
from remeta.stats_kernel import std_normal_quantile, student_t_quantile


def ds(y, s):
    return Dataset.from_arrays(y, s)


def test_q_factor_examples():
    assert q_factor(ds([-1, 1], [1, 1]), 0.0) == pytest.approx(2.0)
    assert q_factor(ds([-1, 1], [1, 1]), 1.0) == pytest.approx(1.0)
    with pytest.raises(InsufficientDataError):
        q_factor(ds([1.0], [1.0]), 0.0)


def test_q_star():
    assert q_star(0.31) == 1.0
    assert q_star(1.7) == 1.7
    assert q_star(0.0) == 1.0
    with pytest.raises(DomainError):
        q_star(-0.1)


def test_ci_normal_example():
    ci = ci_normal(0.0, 1.0, 0.05)
    assert ci.lower == pytest.approx(-1.959964, abs=1e-6)
    assert ci.upper == pytest.approx(1.959964, abs=1e-6)
    assert ci.method is Method.NORMAL


def test_ci_hksj_examples():
    ci = ci_hksj(0.0, 1.0, 1.0, 2, 0.05)
    assert ci.upper == pytest.approx(12.7062, abs=1e-4)
    ci = ci_hksj(0.0, 1.0, 4.0, 2, 0.05)
    assert ci.upper == pytest.approx(2 * 12.7062, abs=1e-3)
    ci = ci_hksj(0.3, 1.0, 0.0, 5, 0.05)
    assert ci.lower == ci.upper == 0.3
    with pytest.raises(InsufficientDataError):
        ci_hksj(0.0, 1.0, 1.0, 1)


def test_ci_mkh_floors_q():
    a = ci_mkh(0.0, 1.0, 0.31, 3, 0.05)
    b = ci_hksj(0.0, 1.0, 1.0, 3, 0.05)
    assert (a.lower, a.upper) == (b.lower, b.upper)
    c = ci_mkh(0.0, 1.0, 2.5, 3, 0.05)
    d = ci_hksj(0.0, 1.0, 2.5, 3, 0.05)
    assert (c.lower, c.upper) == (d.lower, d.upper)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2])
def test_alpha_domain(alpha):
    with pytest.raises(DomainError):
        ci_normal(0.0, 1.0, alpha)


@pytest.mark.parametrize("d", random_datasets(40, seed=41))
@pytest.mark.parametrize("est", list(Estimator))
def test_interval_relations(d, est):
    r = analyze(d, est)
    z = std_normal_quantile(0.975)
    t = student_t_quantile(0.975, d.k - 1)
    for ci in r.intervals.values():
        assert ci.center == pytest.approx(r.mu_hat, abs=1e-12)
    assert r.hksj.length / r.normal.length == pytest.approx(math.sqrt(r.q) * t / z, rel=1e-12)
    assert r.mkh.length >= r.hksj.length
    assert r.mkh.length / r.hksj.length == pytest.approx(
        math.sqrt(max(1.0, r.q) / r.q) if r.q > 0 else math.inf, rel=1e-12)
    assert r.mkh.lower <= r.hksj.lower and r.hksj.upper <= r.mkh.upper
    assert r.q_star >= 1.0 and r.q_star >= r.q


@pytest.mark.parametrize("d", random_datasets(40, seed=43))
def test_pm_q_star_is_one(d):
    r = analyze(d, Estimator.PM)
    assert r.q <= 1.0 + 1e-8
    assert r.q_star == pytest.approx(1.0, abs=1e-8)


def test_analyze_symmetric_example():
    r = analyze(ds([-1, 1], [1, 1]), "DL")
    assert r.tau2_hat == pytest.approx(1.0)
    assert r.mu_hat == 0.0
    assert r.sigma_mu_hat == pytest.approx(1.0)
    assert r.q == pytest.approx(1.0)
    assert r.i2_hat == pytest.approx(0.5)
    assert r.hksj.upper == pytest.approx(12.7062, abs=1e-4)


def test_analyze_requires_two_studies():
    with pytest.raises(InsufficientDataError):
        analyze(ds([1.0], [1.0]))


def test_flat_dict_keys_are_stable():
    keys = list(analyze(ds([-1, 1, 0.5], [1, 1, 2])).as_flat_dict())
    assert keys == ["k", "estimator", "alpha", "tau2_hat", "i2_hat", "mu_hat",
                    "sigma_mu_hat", "q", "q_star", "normal_lower", "normal_upper",
                    "hksj_lower", "hksj_upper", "mkh_lower", "mkh_upper"]


@pytest.mark.parametrize("est", list(Estimator))
def test_batch_matches_scalar(est):
    data = random_datasets(25, k_choices=(5,), seed=47)
    y = np.array([d.y for d in data])
    v = np.array([d.v for d in data])
    b = analyze_batch(y, v, est)
    for i, d in enumerate(data):
        r = analyze(d, est)
        assert b.tau2_hat[i] == pytest.approx(r.tau2_hat, rel=1e-12, abs=1e-14)
        assert b.mu_hat[i] == pytest.approx(r.mu_hat, rel=1e-12, abs=1e-14)
        assert b.q[i] == pytest.approx(r.q, rel=1e-10, abs=1e-14)
        assert b.half_hksj[i] == pytest.approx(r.hksj.length / 2, rel=1e-10)
        assert b.half_mkh[i] == pytest.approx(r.mkh.length / 2, rel=1e-10)
        assert b.half_normal[i] == pytest.approx(r.normal.length / 2, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-10, 10), st.floats(0.1, 10),
       st.sampled_from(list(Estimator)))
def test_analysis_equivariance(seed, shift, c, est):
    d = random_datasets(1, seed=seed)[0]
    a = analyze(d, est)
    b = analyze(ds(c * d.y + shift, c * d.s), est)
    tol = dict(rel=1e-9, abs=1e-9 * (1 + abs(shift)))
    assert b.mu_hat == pytest.approx(c * a.mu_hat + shift, **tol)
    for ca, cb in zip(a.intervals.values(), b.intervals.values()):
        assert cb.lower == pytest.approx(c * ca.lower + shift, **tol)
        assert cb.upper == pytest.approx(c * ca.upper + shift, **tol)
    assert b.q == pytest.approx(a.q, rel=1e-9, abs=1e-12)
    assert b.i2_hat == pytest.approx(a.i2_hat, abs=1e-10)

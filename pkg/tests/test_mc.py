"""Tests for the localized stratified tuple sampler."""

from __future__ import annotations

import math

import numpy as np
import pytest

from hyperkernel.mc import (
    Estimate,
    ResolutionError,
    StratumPlan,
    integrate_ratio,
    integrate_tuples,
    plan_strata,
)
from hyperkernel.profile import KernelProfile
from hyperkernel.rng import RandomStream
from hyperkernel.space import Cantor, Circle, Torus

SEED = 91625340


def test_estimate_validation():
    est = Estimate(value=1.0, stderr=0.0, n_samples=10, seed=3)
    assert est.exact
    assert not Estimate(value=1.0, stderr=0.1, n_samples=10, seed=3).exact
    with pytest.raises(ValueError):
        Estimate(value=1.0, stderr=-0.1, n_samples=10, seed=3)
    with pytest.raises(ValueError):
        Estimate(value=math.nan, stderr=0.0, n_samples=10, seed=3)
    with pytest.raises(ValueError):
        Estimate(value=1.0, stderr=0.0, n_samples=-1, seed=3)


def test_stratum_plan_masses():
    circle = Circle()
    plan = plan_strata(circle, 0.5, 2, 0.1)
    # Ball mass 0.2, total 1: inner weight 0.04, outer 0.96.
    assert plan.ball_mass == pytest.approx(0.2)
    assert plan.inner_weight == pytest.approx(0.04)
    assert plan.outer_weight == pytest.approx(0.96)
    # Escape masses partition the outer weight.
    assert sum(plan.escape_masses) == pytest.approx(plan.outer_weight)
    # First escape at slot 0 has mass (T - F) * T = 0.8.
    assert plan.escape_masses[0] == pytest.approx(0.8)
    assert plan.escape_masses[1] == pytest.approx(0.2 * 0.8)


def test_nonpositive_stratum_radius_raises():
    cantor = Cantor(depth=4)
    with pytest.raises(ValueError):
        plan_strata(cantor, 0, 1, 0.0)
    with pytest.raises(ValueError):
        plan_strata(cantor, 0, 1, -0.2)


def test_indicator_mass_on_circle_is_exact():
    # With the indicator profile the weight vanishes off the inner stratum,
    # and inside it the weight is constant, so the estimate carries no noise:
    # mu{rho(x, .) < eps} = mu(ball of radius 2 eps) = 4 eps.
    circle = Circle()
    profile = KernelProfile("indicator")
    eps = 0.05
    est = integrate_tuples(
        circle, 0.25, 1, lambda rho: profile(rho / eps), None,
        2000, RandomStream(seed=SEED), radius=2 * eps, skip_outer=True,
    )
    assert est.value == pytest.approx(0.2, abs=0.0)
    assert est.stderr == 0.0


def test_unbiased_against_plain_mc():
    # The stratified estimator must agree with an unstratified average of
    # the same integrand within joint error bars.
    torus = Torus(dim=2)
    profile = KernelProfile("exponential")
    eps = 0.07
    k = 2
    stream = RandomStream(seed=SEED + 1)

    est = integrate_tuples(
        torus, np.array([0.3, 0.8]), k, lambda rho: profile(rho / eps), None,
        60_000, stream, radius=2 * eps * profile.localization_factor,
    )

    gen = RandomStream(seed=SEED + 2).generator()
    n = 120_000
    pts = torus.sample(n * k, gen).reshape(n, k, 2)
    anchored = np.concatenate(
        [np.broadcast_to(np.array([0.3, 0.8]), (n, 1, 2)), pts], axis=1)
    vals = profile(torus.tuple_radius(anchored) / eps)
    plain, plain_se = vals.mean(), vals.std(ddof=1) / math.sqrt(n)

    z = (est.value - plain) / math.hypot(est.stderr, plain_se)
    assert abs(z) < 4.0


def test_stderr_shrinks_like_root_n():
    torus = Torus(dim=1)
    profile = KernelProfile("gaussian")
    eps = 0.05

    def run(n: int, seed: int) -> float:
        est = integrate_tuples(
            torus, np.array([0.5]), 1, lambda rho: profile(rho / eps), None,
            n, RandomStream(seed=seed),
            radius=2 * eps * profile.localization_factor,
        )
        return est.stderr

    ratios = [run(40_000, SEED + i) / run(10_000, SEED + i) for i in range(8)]
    assert 0.4 < float(np.mean(ratios)) < 0.6


def test_ratio_of_constant_integrand_is_exactly_one():
    circle = Circle()
    profile = KernelProfile("indicator")
    eps = 0.03
    ests, den = integrate_ratio(
        circle, 0.1, 2, lambda rho: profile(rho / eps),
        [lambda pts: np.ones(pts.shape[0])],
        4000, RandomStream(seed=SEED + 3), radius=2 * eps, skip_outer=True,
    )
    assert ests[0].value == 1.0
    assert ests[0].stderr == 0.0
    assert den.value > 0


def test_shared_samples_beat_independent_ones():
    # The correlated numerator makes the ratio spread far smaller than the
    # individual spreads would suggest.
    circle = Circle()
    profile = KernelProfile("exponential")
    eps = 0.05

    def integrand(pts: np.ndarray) -> np.ndarray:
        return 1.0 + 0.01 * np.cos(2 * math.pi * pts[:, 0])

    ests, den = integrate_ratio(
        circle, 0.6, 1, lambda rho: profile(rho / eps), [integrand],
        30_000, RandomStream(seed=SEED + 4),
        radius=2 * eps * profile.localization_factor,
    )
    assert ests[0].stderr < 0.2 * (den.stderr / den.value)
    assert ests[0].value == pytest.approx(1.0, abs=0.02)


def test_resolution_error_on_vanishing_normalizer():
    circle = Circle()
    profile = KernelProfile("indicator")

    def weight(rho: np.ndarray) -> np.ndarray:
        return np.zeros(rho.shape[0])

    with pytest.raises(ResolutionError):
        integrate_ratio(
            circle, 0.1, 1, weight, [lambda pts: np.ones(pts.shape[0])],
            100, RandomStream(seed=SEED + 5), radius=0.1,
        )


def test_reproducible_across_calls():
    torus = Torus(dim=2)
    profile = KernelProfile("power", b=5.0)
    eps = 0.04

    def run() -> Estimate:
        return integrate_tuples(
            torus, np.array([0.2, 0.9]), 2,
            lambda rho: profile(rho / eps), None,
            5000, RandomStream(seed=SEED + 6),
            radius=2 * eps * profile.localization_factor,
        )

    a, b = run(), run()
    assert a.value == b.value
    assert a.stderr == b.stderr

"""Tests for diagonal sections and the exact finite-carrier calculus."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from hyperkernel import exact
from hyperkernel.profile import KernelProfile
from hyperkernel.rng import RandomStream
from hyperkernel.sections import Section, in_section, measure_section_mc
from hyperkernel.space import Cantor, Circle, FiniteCloud, PowerCircle

SEED = 55100217


def line_cloud() -> FiniteCloud:
    return FiniteCloud(points=np.array([[0.0], [1.0], [2.0]]),
                       weights=np.array([1.0, 1.0, 1.0]))


# ---------------------------------------------------------------------------
# Section membership and measure
# ---------------------------------------------------------------------------

def test_section_validation():
    with pytest.raises(ValueError):
        Section(center=0.0, radius=-0.1, order=1)
    with pytest.raises(ValueError):
        Section(center=0.0, radius=0.1, order=0)


def test_membership_is_strict():
    # On the circle with k = 1 the tuple radius of (x, y) is d(x, y) / 2,
    # so the section of radius r is the open ball of radius 2r.
    # Dyadic coordinates keep the boundary comparison exact in binary.
    circle = Circle()
    section = Section(center=0.0, radius=0.125, order=1)
    expected = {0.0625: True, 0.2499999: True, 0.25: False, 0.3: False}
    for y, want in expected.items():
        assert in_section(circle, section, np.array([y])) == want, y


def test_circle_measure_k1_exact_value():
    # mu{y : rho(x, y) < r} = 4r, the upper sandwich bound with equality.
    circle = Circle()
    est = measure_section_mc(circle, Section(center=0.3, radius=0.05, order=1),
                             4000, RandomStream(seed=SEED))
    assert est.value == pytest.approx(0.2, abs=0.0)
    assert est.stderr == 0.0


def test_circle_measure_k2_matches_geometry():
    # For k = 2 on the circle, rho(x, y1, y2) is half the diameter of the
    # smallest arc containing {x, y1, y2}; integrating the strict indicator
    # gives 12 r^2 (three orderings of two offsets in a length-4r window,
    # clipped by the pair constraint), derived by direct area accounting.
    circle = Circle()
    r = 0.04
    est = measure_section_mc(circle, Section(center=0.7, radius=r, order=2),
                             400_000, RandomStream(seed=SEED + 1))
    assert est.value == pytest.approx(12 * r * r, abs=4 * est.stderr)
    assert est.stderr > 0


def test_cantor_sections_are_product_balls():
    # On an ultrametric carrier the minimax center can sit at any tuple
    # entry, so E(x, r) is exactly B(x, r)^k.
    cantor = Cantor(depth=5)
    r = 0.2
    for k in (1, 2, 3):
        est = measure_section_mc(cantor, Section(center=3, radius=r, order=k),
                                 10, RandomStream(seed=SEED))
        assert est.value == pytest.approx(cantor.ball_measure(3, r) ** k,
                                          abs=0.0)
        assert est.stderr == 0.0


def test_sandwich_bounds_several_spaces():
    # Product balls of radius r sit inside E(x, r); E(x, r) sits inside
    # product balls of radius 2 kappa r.
    spaces = [Circle(), PowerCircle(beta=2.0), Cantor(depth=6)]
    centers = [0.45, 0.45, 9]
    stream = RandomStream(seed=SEED + 2)
    for space, x in zip(spaces, centers):
        for k in (1, 2):
            r = 0.3 * space.r_max
            est = measure_section_mc(space, Section(center=x, radius=r, order=k),
                                     60_000, stream, method="mc")
            lo = space.ball_measure(x, r) ** k
            hi = space.ball_measure(x, 2 * space.kappa * r) ** k
            slack = 4 * est.stderr + 1e-12
            assert lo - slack <= est.value <= hi + slack, \
                f"{space.kind} k={k}: {lo} <= {est.value} <= {hi}"


def test_finite_cloud_exact_measure():
    cloud = line_cloud()
    # The minimax center must itself be a carrier point, so from x = 0 the
    # anchored radii over the carrier are {0: 0, 1: 1, 2: 1} (no midpoint
    # exists between neighbors); weights are atoms of mass 1.
    est = measure_section_mc(cloud, Section(center=0, radius=0.75, order=1),
                             10, RandomStream(seed=SEED))
    assert est.value == pytest.approx(1.0, abs=0.0)
    est2 = measure_section_mc(cloud, Section(center=0, radius=1.5, order=2),
                              10, RandomStream(seed=SEED))
    assert est2.value == pytest.approx(9.0, abs=0.0)


def test_mc_agrees_with_exact_on_finite():
    cantor = Cantor(depth=7)
    section = Section(center=5, radius=0.11, order=2)
    ex = measure_section_mc(cantor, section, 10, RandomStream(seed=SEED),
                            method="exact")
    mc = measure_section_mc(cantor, section, 150_000,
                            RandomStream(seed=SEED + 3), method="mc")
    assert mc.stderr > 0
    assert abs(mc.value - ex.value) < 4 * mc.stderr


# ---------------------------------------------------------------------------
# Exact finite-carrier calculus against literal enumeration
# ---------------------------------------------------------------------------

def brute_j(space, profile, x, eps, k):
    idx = range(space.carrier_size)
    weights = space.carrier_weights
    total = 0.0
    for combo in itertools.product(idx, repeat=k):
        pts = space.carrier()[np.array((x,) + combo)]
        rho = space.tuple_radius(pts[np.newaxis, :])[0]
        w = math.prod(float(weights[i]) for i in combo)
        total += w * float(profile(np.asarray(rho / eps)))
    return total


def test_exact_j_matches_brute_force():
    cantor = Cantor(depth=3)
    profile = KernelProfile("exponential")
    for k in (1, 2):
        for eps in (0.06, 0.2, 0.7):
            fast = exact.exact_j(cantor, profile, 2, eps, k)
            slow = brute_j(cantor, profile, 2, eps, k)
            assert fast == pytest.approx(slow, rel=1e-13)


def test_exact_kernel_mean_matches_brute_force():
    cantor = Cantor(depth=3)
    profile = KernelProfile("gaussian")
    gen = np.random.default_rng(SEED)
    fvals = [gen.uniform(-1, 1, cantor.carrier_size) for _ in range(2)]
    x, eps, k = 5, 0.3, 2

    num = 0.0
    den = 0.0
    for combo in itertools.product(range(cantor.carrier_size), repeat=k):
        pts = cantor.carrier()[np.array((x,) + combo)]
        rho = cantor.tuple_radius(pts[np.newaxis, :])[0]
        phi = float(profile(np.asarray(rho / eps)))
        w = math.prod(float(cantor.carrier_weights[i]) for i in combo)
        num += w * phi * fvals[0][combo[0]] * fvals[1][combo[1]]
        den += w * phi
    fast = exact.exact_kernel_mean(cantor, profile, fvals, x, eps, k)
    assert fast == pytest.approx(num / den, rel=1e-12)


def test_exact_maximal_matches_brute_force_on_cloud():
    gen = np.random.default_rng(SEED + 1)
    cloud = FiniteCloud(points=gen.uniform(0, 1, (6, 2)),
                        weights=gen.uniform(0.5, 2.0, 6))
    fvals = [gen.uniform(-2, 2, 6), gen.uniform(-2, 2, 6)]
    x, k = 2, 2

    idx, rho, weight = exact.anchored_rho_table(cloud, x, k, exact.TERM_CAP)
    best = 0.0
    for r in np.unique(rho).tolist() + [2 * cloud.diameter]:
        mask = rho < r
        den = float(weight[mask].sum())
        if den <= 0:
            continue
        num = float((weight[mask]
                     * np.abs(fvals[0])[idx[mask, 0]]
                     * np.abs(fvals[1])[idx[mask, 1]]).sum())
        best = max(best, num / den)

    value, arg = exact.exact_multilinear_maximal(cloud, fvals, x, k)
    assert value == pytest.approx(best, rel=1e-13)
    assert arg > 0


def test_exact_section_measure_strictness():
    cloud = line_cloud()
    # rho(0, y) over the carrier is {0, 1, 1}; at r exactly 1 both far
    # points are excluded by strictness.
    assert exact.exact_section_measure(cloud, 0, 1.0, 1) == pytest.approx(1.0)
    assert exact.exact_section_measure(cloud, 0, 1.0000001, 1) == pytest.approx(3.0)


def test_enumeration_cap_raises():
    cantor = Cantor(depth=10)
    with pytest.raises(exact.EnumerationCapError):
        exact.anchored_rho_table(cantor, 0, 3, 1000)

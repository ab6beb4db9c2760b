"""Tests for function fields, norms, constants, and the kernel operators."""

from __future__ import annotations

import math

import numpy as np
import pytest

from hyperkernel import oracle
from hyperkernel.operators import (
    FunctionField,
    constants_for,
    field_from_config,
    hl_maximal,
    j_normalizer,
    lp_norm,
    mean_deviation,
    multilinear_maximal,
    phi_mean,
    phi_star,
    product_difference,
    tail_envelope_sum,
    theorem_constants,
)
from hyperkernel.profile import KernelProfile
from hyperkernel.rng import RandomStream
from hyperkernel.space import Cantor, Circle, FiniteCloud, PowerCircle, Torus

SEED = 77021455


# ---------------------------------------------------------------------------
# Function fields
# ---------------------------------------------------------------------------

def test_field_shapes_on_circle():
    circle = Circle()
    pts = np.array([0.0, 0.1, 0.25, 0.5, 0.9])

    const = FunctionField(kind="constant", p=2.0, amplitude=3.0)
    assert const.evaluate(circle, pts).tolist() == [3.0] * 5

    cos = FunctionField(kind="cosine", p=2.0, center=0.0, frequency=2.0)
    d = circle.distance(np.zeros(5), pts)
    assert cos.evaluate(circle, pts) == pytest.approx(
        np.cos(4 * math.pi * d), abs=1e-15)

    step = FunctionField(kind="step", p=1.0, center=0.0, width=0.2)
    assert step.evaluate(circle, pts).tolist() == [1.0, 1.0, 0.0, 0.0, 1.0]

    kink = FunctionField(kind="abs-kink", p=math.inf, center=0.5)
    assert kink.evaluate(circle, pts) == pytest.approx([0.5, 0.4, 0.25, 0.0, 0.4])


def test_bump_is_smooth_and_compact():
    circle = Circle()
    bump = FunctionField(kind="bump", p=2.0, center=0.5, width=0.1)
    assert bump.evaluate(circle, np.array([0.5]))[0] == pytest.approx(1.0)
    assert bump.evaluate(circle, np.array([0.6]))[0] == 0.0
    assert bump.evaluate(circle, np.array([0.6001]))[0] == 0.0
    inside = bump.evaluate(circle, np.array([0.55]))[0]
    assert 0.0 < inside < 1.0


def test_field_validation():
    with pytest.raises(ValueError):
        FunctionField(kind="wavelet", p=2.0)
    with pytest.raises(ValueError):
        FunctionField(kind="cosine", p=0.5, center=0.0, frequency=1.0)
    with pytest.raises(ValueError):
        FunctionField(kind="cosine", p=2.0, center=0.0)          # no frequency
    with pytest.raises(ValueError):
        FunctionField(kind="bump", p=2.0, center=0.0)            # no width
    with pytest.raises(ValueError):
        FunctionField(kind="constant", p=2.0, frequency=3.0)     # stray param
    with pytest.raises(ValueError):
        FunctionField(kind="step", p=2.0, width=0.1)             # no center


def test_field_config_round_trip():
    fields = [
        FunctionField(kind="constant", p=math.inf, amplitude=2.5),
        FunctionField(kind="cosine", p=2.0, center=0.3, frequency=2.0),
        FunctionField(kind="bump", p=4.0, center=np.array([0.1, 0.9]),
                      width=0.05),
    ]
    for f in fields:
        g = field_from_config(f.to_config())
        assert g.kind == f.kind and g.p == f.p and g.amplitude == f.amplitude
    with pytest.raises(ValueError):
        field_from_config({"kind": "step", "p": 1.0, "width": 0.1,
                           "center": 0.0, "sharpness": 2})


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def test_lp_norm_closed_forms():
    circle = Circle()
    const = FunctionField(kind="constant", p=3.0, amplitude=2.0)
    assert lp_norm(circle, const) == pytest.approx(2.0)        # mass 1
    cos = FunctionField(kind="cosine", p=2.0, center=0.0, frequency=1.0)
    assert lp_norm(circle, cos) == pytest.approx(math.sqrt(0.5), rel=1e-9)
    step = FunctionField(kind="step", p=2.0, center=0.3, width=0.1)
    assert lp_norm(circle, step) == pytest.approx(math.sqrt(0.2), rel=1e-12)
    kink_sup = FunctionField(kind="abs-kink", p=math.inf, center=0.0)
    assert lp_norm(circle, kink_sup) == pytest.approx(0.5)


def test_lp_norm_torus_and_power_circle():
    torus = Torus(dim=2)
    kink = FunctionField(kind="abs-kink", p=2.0,
                         center=np.array([0.0, 0.0]))
    # E[d^2] under the sup metric: integral of t^2 * 8t dt over (0, 1/2).
    assert lp_norm(torus, kink) == pytest.approx(
        math.sqrt(8 / 4 * 0.5**4), rel=1e-9)

    pc = PowerCircle(beta=2.0)
    const = FunctionField(kind="constant", p=5.0, amplitude=1.5)
    assert lp_norm(pc, const) == pytest.approx(1.5, rel=1e-12)
    step = FunctionField(kind="step", p=1.0, center=0.25, width=0.04)
    # Ball of power-distance 0.04 is an arc of half-width 0.2.
    assert lp_norm(pc, step) == pytest.approx(0.4, rel=1e-12)


def test_lp_norm_finite_is_weighted_sum():
    gen = np.random.default_rng(SEED)
    cloud = FiniteCloud(points=gen.uniform(0, 1, (5, 3)),
                        weights=gen.uniform(0.2, 2.0, 5))
    kink = FunctionField(kind="abs-kink", p=3.0, center=1)
    d = cloud.distance_matrix[1]
    want = float(np.dot(d**3, cloud.weights) ** (1 / 3))
    assert lp_norm(cloud, kink) == pytest.approx(want, rel=1e-13)
    kink_sup = FunctionField(kind="abs-kink", p=math.inf, center=1)
    assert lp_norm(cloud, kink_sup) == pytest.approx(float(d.max()))


# ---------------------------------------------------------------------------
# Explicit constants
# ---------------------------------------------------------------------------

def test_constants_circle_k1():
    c = constants_for(Circle(), 1)
    assert c.lambda0 == pytest.approx(2.5, abs=1e-15)
    assert c.C1 == pytest.approx(1 / (2.5**2 * math.log(2.5)), rel=1e-14)
    assert c.C2 == pytest.approx(2.5**2 * 4 / math.log(2.5), rel=1e-14)
    assert c.A_tilde == pytest.approx(8.0, abs=1e-12)
    assert c.C_domination == pytest.approx(
        8 * 2 / (c.C1 * math.log(2)), rel=1e-14)
    assert c.prop33_bound == pytest.approx(2.0, abs=1e-12)


def test_constants_scale_with_order_and_kappa():
    a = theorem_constants(1, 1.0, 1.0, 1.0, 1.0, 2.0)
    b = theorem_constants(2, 1.0, 1.0, 1.0, 1.0, 2.0)
    assert b.lambda0 < a.lambda0            # kth root tames the numerator
    assert b.A_tilde == a.A_tilde**2
    assert b.prop33_bound == a.prop33_bound**2

    c1 = theorem_constants(1, 1.0, 2.0, 1.0, 1.0, 2.0)
    assert c1.lambda0 > a.lambda0
    assert c1.A_tilde == 16.0               # (8 kappa)^log2 A


def test_lambda0_exceeds_one_everywhere():
    gen = np.random.default_rng(SEED + 1)
    for _ in range(300):
        k = int(gen.integers(1, 4))
        alpha = float(gen.uniform(0.05, 3.0))
        kappa = float(gen.uniform(1.0, 4.0))
        gamma = float(gen.uniform(0.05, 2.0))
        Gamma = gamma * float(gen.uniform(1.0, 5.0))
        A = 2.0**alpha * Gamma / gamma
        c = theorem_constants(k, alpha, kappa, gamma, Gamma, A)
        assert c.lambda0 > 1.0
        assert c.C1 > 0 and c.C2 > 0 and c.C1 < c.C2


def test_constants_validation():
    with pytest.raises(ValueError):
        theorem_constants(0, 1.0, 1.0, 1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        theorem_constants(1, 1.0, 0.5, 1.0, 1.0, 2.0)     # kappa < 1
    with pytest.raises(ValueError):
        theorem_constants(1, 1.0, 1.0, 2.0, 1.0, 2.0)     # gamma > Gamma
    with pytest.raises(ValueError):
        constants_for(FiniteCloud(points=np.array([[0.0], [1.0]]),
                                  weights=np.array([1.0, 1.0])), 1)


def test_product_difference_identity():
    terms, total = product_difference([2.0, 3.0], [1.0, 1.0])
    assert terms == [3.0, 2.0]
    assert total == 5.0

    gen = np.random.default_rng(SEED + 2)
    for _ in range(2000):
        k = int(gen.integers(1, 6))
        a = gen.uniform(-2, 2, k)
        b = gen.uniform(-2, 2, k)
        terms, total = product_difference(a, b)
        direct = float(np.prod(a) - np.prod(b))
        assert total == pytest.approx(direct, abs=1e-12)
        assert sum(terms) == pytest.approx(total, abs=1e-12)


# ---------------------------------------------------------------------------
# Operators against the enumeration reference
# ---------------------------------------------------------------------------

def small_cloud():
    gen = np.random.default_rng(SEED + 3)
    return FiniteCloud(points=gen.uniform(0, 1, (5, 2)),
                       weights=gen.uniform(0.5, 1.5, 5))


def test_j_normalizer_matches_reference():
    cloud = small_cloud()
    profile = KernelProfile("exponential")
    stream = RandomStream(seed=SEED)
    for eps in (0.1, 0.3):
        est = j_normalizer(cloud, profile, 1, eps, 10, stream, k=2)
        ref = oracle.exact_operator(cloud, "J", profile, None, 1, eps, 2)
        assert est.stderr == 0.0
        assert est.value == pytest.approx(ref.value, rel=1e-12)


def test_phi_mean_matches_reference():
    cloud = small_cloud()
    profile = KernelProfile("gaussian")
    stream = RandomStream(seed=SEED)
    f = FunctionField(kind="abs-kink", p=2.0, center=0)
    g = FunctionField(kind="cosine", p=2.0, center=2, frequency=1.0)
    fvals = [f.evaluate(cloud, cloud.carrier()),
             g.evaluate(cloud, cloud.carrier())]
    est = phi_mean(cloud, profile, [f, g], 3, 0.2, 10, stream)
    ref = oracle.exact_operator(cloud, "phi_mean", profile, fvals, 3, 0.2, 2)
    assert est.stderr == 0.0
    assert est.value == pytest.approx(ref.value, rel=1e-12)


def test_phi_star_matches_reference_on_grid():
    cloud = small_cloud()
    profile = KernelProfile("exponential")
    stream = RandomStream(seed=SEED)
    f = FunctionField(kind="abs-kink", p=2.0, center=1)
    fvals = [f.evaluate(cloud, cloud.carrier())]
    grid = np.array([0.05, 0.1, 0.2, 0.4, 0.8])
    est = phi_star(cloud, profile, [f], 0, grid, 10, stream)
    ref = oracle.exact_operator(cloud, "phi_star", profile, fvals, 0, grid, 1)
    assert est.value == pytest.approx(ref.value, rel=1e-12)
    assert est.arg in grid


def test_maximal_operators_match_reference():
    cloud = small_cloud()
    stream = RandomStream(seed=SEED)
    f = FunctionField(kind="abs-kink", p=2.0, center=0)
    g = FunctionField(kind="step", p=2.0, center=1, width=0.5)
    fvals = [f.evaluate(cloud, cloud.carrier()),
             g.evaluate(cloud, cloud.carrier())]

    est = multilinear_maximal(cloud, [f, g], 2, None, 10, stream)
    ref = oracle.exact_operator(cloud, "M", None, fvals, 2, None, 2)
    assert est.value == pytest.approx(ref.value, rel=1e-12)

    est1 = hl_maximal(cloud, f, 2, None, 10, stream)
    ref1 = oracle.exact_operator(cloud, "HL", None, fvals[0], 2, None, 1)
    assert est1.value == pytest.approx(ref1.value, rel=1e-12)


def test_rho_reference_agrees_with_fast_path():
    cantor = Cantor(depth=4)
    gen = np.random.default_rng(SEED + 4)
    for _ in range(20):
        tup = gen.integers(0, cantor.carrier_size, 3)
        pts = cantor.carrier()[tup]
        fast = float(cantor.tuple_radius(pts[np.newaxis, :])[0])
        slow = oracle.exact_rho(cantor, list(pts)).value
        assert fast == pytest.approx(slow, rel=1e-14)


# ---------------------------------------------------------------------------
# Operator structure on continuous carriers
# ---------------------------------------------------------------------------

def test_kernel_mean_of_cosine_on_circle():
    # Indicator kernel at scale eps averages over the ball of radius 2 eps,
    # so the mean of cos(2 pi d) at the cosine's own center integrates to
    # sin(4 pi eps) / (4 pi eps).
    circle = Circle()
    profile = KernelProfile("indicator")
    f = FunctionField(kind="cosine", p=2.0, center=0.3, frequency=1.0)
    eps = 0.05
    est = phi_mean(circle, profile, [f], 0.3, eps, 300_000,
                   RandomStream(seed=SEED + 5))
    target = math.sin(4 * math.pi * eps) / (4 * math.pi * eps)
    assert est.value == pytest.approx(target, abs=4 * est.stderr)


def test_multilinearity_in_amplitude():
    # Scaling one slot scales the mean exactly (shared samples make the
    # check deterministic, not merely statistical).
    circle = Circle()
    profile = KernelProfile("exponential")
    stream = RandomStream(seed=SEED + 6)
    f1 = FunctionField(kind="cosine", p=2.0, center=0.2, frequency=1.0)
    f2 = FunctionField(kind="step", p=2.0, center=0.2, width=0.3)
    f2_scaled = FunctionField(kind="step", p=2.0, center=0.2, width=0.3,
                              amplitude=-2.5)
    base = phi_mean(circle, profile, [f1, f2], 0.2, 0.05, 20_000, stream)
    scaled = phi_mean(circle, profile, [f1, f2_scaled], 0.2, 0.05, 20_000,
                      stream)
    assert scaled.value == pytest.approx(-2.5 * base.value, rel=1e-12)


def test_maximal_monotone_in_grid():
    # Extending the radius grid can only grow a supremum (same substream per
    # index keeps shared entries identical).
    circle = Circle()
    f = FunctionField(kind="bump", p=2.0, center=0.5, width=0.1)
    stream = RandomStream(seed=SEED + 7)
    short = multilinear_maximal(circle, [f], 0.5, np.array([0.01, 0.02]),
                                20_000, stream)
    full = multilinear_maximal(circle, [f], 0.5,
                               np.array([0.01, 0.02, 0.05, 0.1]),
                               20_000, stream)
    assert full.value >= short.value - 1e-12


def test_maximal_dominates_value_at_center():
    # At a continuity point of |f| the maximal function is at least |f(x)|
    # up to the sampling error at the smallest radius.
    circle = Circle()
    f = FunctionField(kind="cosine", p=2.0, center=0.1, frequency=1.0)
    for x in (0.1, 0.3, 0.62):
        fx = abs(float(f.evaluate(circle, np.array([x]))[0]))
        est = hl_maximal(circle, f, x, np.geomspace(1e-3, 0.25, 9), 4000,
                         RandomStream(seed=SEED + 8))
        assert est.value >= fx - 0.01


def test_mean_deviation_shrinks_with_scale():
    # At a continuity point the deviation mean must vanish as the scale
    # drops; for the kink profile the decay is linear.
    circle = Circle()
    profile = KernelProfile("indicator")
    f = FunctionField(kind="abs-kink", p=2.0, center=0.0)
    stream = RandomStream(seed=SEED + 9)
    devs = []
    for eps in (0.1, 0.01, 0.001):
        est = mean_deviation(circle, profile, [f], 0.25, eps, 50_000, stream)
        devs.append(est.value)
    assert devs[0] > devs[1] > devs[2]
    assert devs[1] == pytest.approx(0.1 * devs[0], rel=0.25)
    assert devs[2] < 0.002


def test_mean_deviation_exact_matches_mc_on_cantor():
    cantor = Cantor(depth=5)
    profile = KernelProfile("indicator")
    f = FunctionField(kind="abs-kink", p=2.0, center=0)
    ex = mean_deviation(cantor, profile, [f, f], 0, 0.15, 10,
                        RandomStream(seed=SEED), method="exact")
    mc = mean_deviation(cantor, profile, [f, f], 0, 0.15, 150_000,
                        RandomStream(seed=SEED + 10), method="mc")
    assert ex.stderr == 0.0
    assert abs(mc.value - ex.value) < 4 * mc.stderr


def test_operator_argument_errors():
    circle = Circle()
    profile = KernelProfile("indicator")
    f = FunctionField(kind="constant", p=2.0)
    with pytest.raises(ValueError):
        phi_mean(circle, profile, [f], 0.0, -0.1, 100, RandomStream(seed=SEED))
    with pytest.raises(ValueError):
        phi_mean(circle, profile, [], 0.0, 0.1, 100, RandomStream(seed=SEED))
    with pytest.raises(ValueError):
        j_normalizer(circle, profile, 0.0, 0.0, 100, RandomStream(seed=SEED),
                     k=1)
    with pytest.raises(ValueError):
        phi_mean(circle, profile, [f], 0.0, 0.1, 100, RandomStream(seed=SEED),
                 method="exact")              # no finite carrier


def test_grid_validation():
    circle = Circle()
    f = FunctionField(kind="constant", p=2.0)
    stream = RandomStream(seed=SEED)
    with pytest.raises(ValueError):
        multilinear_maximal(circle, [f], 0.0, np.array([0.2, 0.1]), 100,
                            stream)
    with pytest.raises(ValueError):
        multilinear_maximal(circle, [f], 0.0, np.array([-0.1, 0.2]), 100,
                            stream)
    with pytest.raises(ValueError):
        phi_star(circle, KernelProfile("indicator"), [f], 0.0, None, 100,
                 stream)


def test_tail_envelope_values():
    # Compact support makes the tail vanish below the support threshold;
    # the gaussian tail at matched scales is dominated by its first term.
    ind = KernelProfile("indicator")
    assert tail_envelope_sum(ind, 1, 1.0, 0.1, 1.0, 0.001) == 0.0
    gauss = KernelProfile("gaussian")
    sigma, kappa, eps = 0.1, 1.0, 0.02
    i0 = math.ceil(math.log2(sigma / (2 * kappa * eps)) - 1)
    first = math.exp(-(2.0**i0) ** 2) * 2.0**i0
    got = tail_envelope_sum(gauss, 1, 1.0, sigma, kappa, eps)
    assert first <= got < 1.1 * first

"""Tests for the kernel profile catalog and its radial moments."""

from __future__ import annotations

import math

import numpy as np
import pytest

from hyperkernel.profile import KernelProfile, ProfileError, profile_from_config

ALL = [KernelProfile("indicator"), KernelProfile("exponential"),
       KernelProfile("power", b=3.0), KernelProfile("gaussian")]


def test_pointwise_values():
    ind = KernelProfile("indicator")
    assert ind(0.5) == 1.0
    assert ind(1.0) == 0.0      # half-open support [0, 1)
    assert ind(0.0) == 1.0
    assert KernelProfile("exponential")(0.0) == 1.0
    assert KernelProfile("power", b=3.0)(1.0) == pytest.approx(0.125)
    assert KernelProfile("gaussian")(2.0) == pytest.approx(math.exp(-4.0))


def test_profiles_are_nonincreasing_on_geometric_grid():
    grid = np.geomspace(1e-4, 1e4, 1000)
    for phi in ALL:
        values = phi(grid)
        assert np.all(np.diff(values) <= 1e-15), phi.kind


def test_negative_argument_rejected():
    for phi in ALL:
        with pytest.raises(ValueError, match="nonnegative"):
            phi(-0.1)


def test_moment_closed_forms():
    assert KernelProfile("indicator").moment(2, 1.0) == pytest.approx(0.5)
    assert KernelProfile("exponential").moment(1, 1.0) == pytest.approx(1.0)
    # integral of t * (1+t)**-3 over (0, inf), by u = 1 + t: 1/1 - 1/2 = 1/2.
    assert KernelProfile("power", b=3.0).moment(2, 1.0) == pytest.approx(0.5)
    assert KernelProfile("power", b=2.0).moment(1, 1.0) == pytest.approx(1.0)
    # gaussian with q = 1: Gamma(1/2) / 2 = sqrt(pi) / 2.
    assert KernelProfile("gaussian").moment(1, 1.0) == pytest.approx(math.sqrt(math.pi) / 2)
    # non-integer q hits the lgamma path.
    assert KernelProfile("exponential").moment(2, 0.75) == pytest.approx(math.gamma(1.5))


def test_quadrature_agrees_with_closed_forms():
    cases = [(1, 1.0), (2, 1.0), (1, 0.5), (3, 0.7), (2, 2.0)]
    for phi in ALL:
        for k, alpha in cases:
            try:
                exact = phi.moment(k, alpha)
            except ProfileError:
                continue
            approx = phi.moment_quadrature(k, alpha)
            assert abs(approx - exact) <= 1e-6 * exact, (phi.kind, k, alpha)


def test_power_admissibility_boundary():
    with pytest.raises(ProfileError, match="divergent"):
        KernelProfile("power", b=1.0).moment(1, 1.0)
    with pytest.raises(ProfileError, match="divergent"):
        KernelProfile("power", b=2.0).validate(2, 1.0)
    # Exactly above the boundary is fine.
    assert KernelProfile("power", b=2.1).moment(2, 1.0) > 0


def test_constructor_validation():
    with pytest.raises(ProfileError, match="unknown profile kind"):
        KernelProfile("triangle")
    with pytest.raises(ProfileError, match="positive exponent"):
        KernelProfile("power")
    with pytest.raises(ProfileError, match="no exponent"):
        KernelProfile("gaussian", b=2.0)
    with pytest.raises(ProfileError, match="k must be"):
        KernelProfile("indicator").validate(0, 1.0)
    with pytest.raises(ProfileError, match="alpha"):
        KernelProfile("indicator").validate(1, -1.0)


def test_config_round_trip():
    for phi in ALL:
        clone = profile_from_config(phi.to_config())
        assert clone == phi
    with pytest.raises(ProfileError, match="unknown profile key"):
        profile_from_config({"kind": "power", "b": 3.0, "scale": 2.0})


def test_localization_covers_profile_tails():
    # Outside the split radius the profile must be numerically negligible
    # relative to its value at 1, so the second stratum carries low variance.
    for phi in ALL:
        tau = phi.localization_factor
        assert phi(tau) <= 2e-4 or phi.compact_support, phi.kind

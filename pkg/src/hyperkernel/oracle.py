"""Independent slow reference values by literal enumeration.

Everything here recomputes operator values from first principles with plain
Python floats, ``itertools.product`` over carriers, and explicit minimax
searches, sharing no code path with the vectorized implementations.  The
test suite treats these values as ground truth; production code should call
the fast implementations instead.

The price of independence is cost: enumeration is O(P**k) over a carrier of
P points and a candidate cap guards against accidental blowups.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .space import Space

__all__ = ["ExactValue", "exact_rho", "exact_operator"]

CANDIDATE_CAP = 4096
OPERATOR_CAP = 1_000_000

_OPERATOR_NAMES = ("J", "phi_mean", "phi_star", "M", "HL")


@dataclass(frozen=True)
class ExactValue:
    """A reference value with the enumeration size that produced it."""

    value: float
    enumeration_size: int


def _carrier_list(space: Space, cap: int):
    if not space.is_finite:
        raise ValueError(f"{space.kind}: reference values need a finite carrier")
    if space.carrier_size > cap:
        raise ValueError(
            f"carrier of {space.carrier_size} points exceeds the reference "
            f"cap of {cap}; shrink the space or raise the cap"
        )
    points = [space.carrier()[i] for i in range(space.carrier_size)]
    weights = [float(w) for w in space.carrier_weights]
    return points, weights


def _dist(space: Space, a, b) -> float:
    return float(space.distance(np.asarray([a]), np.asarray([b]))[0])


def exact_rho(space: Space, points, cap: int = CANDIDATE_CAP) -> ExactValue:
    """Minimax tuple radius by scanning every carrier point as the center."""
    candidates, _ = _carrier_list(space, cap)
    best = math.inf
    for u in candidates:
        worst = 0.0
        for p in points:
            worst = max(worst, _dist(space, p, u))
        best = min(best, worst)
    return ExactValue(value=best, enumeration_size=len(candidates))


def exact_operator(space: Space, name: str, profile, fvals, x, scale,
                   k: int, cap: int = OPERATOR_CAP) -> ExactValue:
    """A reference operator value by literal tuple enumeration.

    name:
        "J" (kernel mass), "phi_mean" (signed kernel mean), "phi_star"
        (sup of the absolute-value mean over the scales in ``scale``),
        "M" (sup over all radii of section averages of the absolute
        product), or "HL" (sup over all radii of ball averages of
        absolute values, one function).
    fvals:
        One list of per-carrier-point function values per slot (``HL``
        takes a single list).
    scale:
        The scale for "J"/"phi_mean", the scale grid for "phi_star",
        unused for the maximal operators.
    """
    if name not in _OPERATOR_NAMES:
        raise ValueError(f"unknown operator {name!r}; expected one of "
                         f"{_OPERATOR_NAMES}")
    points, weights = _carrier_list(space, cap)
    P = len(points)
    if name != "HL" and P**k > cap:
        raise ValueError(f"enumeration of {P}**{k} tuples exceeds the cap {cap}")

    if name == "HL":
        values = [abs(float(v)) for v in fvals]
        dists = sorted(set(_dist(space, x, p) for p in points))
        best = 0.0
        for d in dists:
            num = den = 0.0
            for p, w, v in zip(points, weights, values):
                if _dist(space, x, p) <= d:
                    num += w * v
                    den += w
            if den > 0:
                best = max(best, num / den)
        return ExactValue(value=best, enumeration_size=P * len(dists))

    slots = [[float(v) for v in fv] for fv in fvals] if fvals is not None else None

    def tuple_rho(combo) -> float:
        best = math.inf
        for u in points:
            worst = _dist(space, x, u)
            for i in combo:
                worst = max(worst, _dist(space, points[i], u))
            best = min(best, worst)
        return best

    if name == "M":
        rhos, nums, dens = [], [], []
        for combo in itertools.product(range(P), repeat=k):
            w = math.prod(weights[i] for i in combo)
            f = math.prod(abs(slots[j][i]) for j, i in enumerate(combo))
            rhos.append(tuple_rho(combo))
            nums.append(w * f)
            dens.append(w)
        best = 0.0
        for r in sorted(set(rhos)) + [2.0 * space.diameter]:
            num = sum(nu for rho, nu in zip(rhos, nums) if rho < r)
            den = sum(de for rho, de in zip(rhos, dens) if rho < r)
            if den > 0:
                best = max(best, num / den)
        return ExactValue(value=best, enumeration_size=P**k)

    def mass_and_mean(eps: float, absolute: bool):
        num = den = 0.0
        for combo in itertools.product(range(P), repeat=k):
            w = math.prod(weights[i] for i in combo)
            phi = float(profile(tuple_rho(combo) / eps))
            den += w * phi
            if slots is not None:
                f = math.prod(abs(slots[j][i]) if absolute else slots[j][i]
                              for j, i in enumerate(combo))
                num += w * phi * f
        return num, den

    if name == "J":
        _, den = mass_and_mean(float(scale), False)
        return ExactValue(value=den, enumeration_size=P**k)
    if name == "phi_mean":
        num, den = mass_and_mean(float(scale), False)
        if den <= 0:
            raise ValueError(f"zero kernel mass at scale {scale}")
        return ExactValue(value=num / den, enumeration_size=P**k)
    # phi_star
    best = -math.inf
    count = 0
    for eps in scale:
        num, den = mass_and_mean(float(eps), True)
        count += P**k
        if den > 0:
            best = max(best, num / den)
    if best == -math.inf:
        raise ValueError("no scale in the grid carries kernel mass")
    return ExactValue(value=best, enumeration_size=count)

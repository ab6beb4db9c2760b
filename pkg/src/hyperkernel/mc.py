"""Localized, stratified Monte Carlo for integrals over tuple space.

Every operator in this package reduces to integrals of the form

    I = integral over X^k of  w(rho(x, y_1, ..., y_k)) * g(y_1, ..., y_k)  dmu^k

for a fixed center x, a radial weight w built from a kernel profile, and a
product integrand g.  Uniform sampling of X^k is hopeless at small scales
(the weight lives on a vanishing fraction of tuple space), so the sampler
splits X^k into two exhaustive strata around the product ball B(x, R)^k:

* stratum 1: every coordinate lands in B(x, R); mass F**k with
  F = mu(B(x, R)), sampled coordinate-wise from the conditional law;
* stratum 2: some coordinate escapes; mass T**k - F**k with T the total
  mass, sampled by picking the first escaping coordinate index j with its
  exact probability F**j * (T - F) * T**(k-1-j), drawing coordinates before
  j inside the ball, coordinate j outside, and the rest unconditioned.

The two strata partition X^k, so the combined estimator is unbiased at
every scale; R only tunes variance.  With R = 2 * kappa * eps the weight
vanishes identically on stratum 2 for compactly supported profiles, because
a coordinate at distance >= 2*kappa*eps forces rho >= eps.

Ratios (kernel means) reuse one sample set for numerator and denominator,
so constant integrands normalize to exactly 1 with exactly zero spread,
and the reported uncertainty follows the delta method with the shared-
sample covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import RandomStream
from .space import Space

__all__ = ["Estimate", "ResolutionError", "StratumPlan", "plan_strata",
           "integrate_tuples", "integrate_ratio"]


class ResolutionError(RuntimeError):
    """An estimate too degenerate to use: zero denominator or empty region.

    Raised instead of returning garbage when a normalizer is statistically
    indistinguishable from zero or a requested region carries no measure;
    callers should raise the sample count or the scale.
    """


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo (or exact) value with its uncertainty and provenance.

    ``stderr`` is the standard error of ``value`` (stratified formula when
    several strata contribute; exactly 0.0 for enumeration results).  ``arg``
    carries the maximizing grid entry for sup-type operators and is None
    elsewhere.
    """

    value: float
    stderr: float
    n_samples: int
    seed: int
    arg: float | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"estimate value must be finite, got {self.value}")
        if self.stderr < 0 or not math.isfinite(self.stderr):
            raise ValueError(f"stderr must be finite and nonnegative, got {self.stderr}")
        if self.n_samples < 0:
            raise ValueError(f"n_samples must be nonnegative, got {self.n_samples}")

    @property
    def exact(self) -> bool:
        return self.stderr == 0.0


@dataclass(frozen=True)
class StratumPlan:
    """The exact two-stratum split of X^k around one product ball."""

    radius: float
    ball_mass: float
    total_mass: float
    k: int

    @property
    def inner_weight(self) -> float:
        return self.ball_mass**self.k

    @property
    def outer_weight(self) -> float:
        return self.total_mass**self.k - self.ball_mass**self.k

    @property
    def escape_masses(self) -> np.ndarray:
        """Mass of {first escaping coordinate = j} for j = 0, ..., k-1."""
        F, T, k = self.ball_mass, self.total_mass, self.k
        return np.array([F**j * (T - F) * T ** (k - 1 - j) for j in range(k)])


def plan_strata(space: Space, x, k: int, radius: float) -> StratumPlan:
    """Split X^k around B(x, radius)^k; the split is exact by construction."""
    if k < 1:
        raise ValueError(f"tuple order k must be >= 1, got {k}")
    if radius <= 0:
        raise ValueError(f"stratum radius must be positive, got {radius}")
    F = space.ball_measure(x, radius)
    if F <= 0:
        raise ResolutionError(
            f"{space.kind}: ball of radius {radius} at the center carries no "
            "measure; increase the scale"
        )
    return StratumPlan(radius=radius, ball_mass=F, total_mass=space.total_mass, k=k)


def _sample_inner(space: Space, x, plan: StratumPlan, n: int, gen) -> np.ndarray:
    cols = [space.sample_ball(x, plan.radius, n, gen) for _ in range(plan.k)]
    return np.stack([np.asarray(c) for c in cols], axis=1)


def _sample_outer(space: Space, x, plan: StratumPlan, n: int, gen) -> np.ndarray:
    masses = plan.escape_masses
    first = gen.choice(plan.k, size=n, p=masses / masses.sum())
    cols = []
    for j in range(plan.k):
        before = first > j          # still inside the ball at coordinate j
        at = first == j
        after = first < j
        # Draw per group; scatter through boolean masks keeps shapes general.
        parts = {}
        if before.any():
            parts["before"] = space.sample_ball(x, plan.radius, int(before.sum()), gen)
        if at.any():
            parts["at"] = space.sample_ball_complement(x, plan.radius, int(at.sum()), gen)
        if after.any():
            parts["after"] = space.sample(int(after.sum()), gen)
        sample_shape = np.shape(next(iter(parts.values())))[1:]
        col = np.empty((n, *sample_shape),
                       dtype=np.result_type(*[np.asarray(v).dtype for v in parts.values()]))
        if before.any():
            col[before] = parts["before"]
        if at.any():
            col[at] = parts["at"]
        if after.any():
            col[after] = parts["after"]
        cols.append(col)
    return np.stack(cols, axis=1)


def _stratum_values(space: Space, x, pts: np.ndarray, weight_fn, integrands):
    """Evaluate w(rho) times each integrand on a batch of tuples.

    Integrands are whole-tuple callables mapping the (n, k, ...) batch to
    (n,) values, or None for the bare weight.
    """
    x_arr = np.asarray(x)
    anchored = np.concatenate(
        [np.broadcast_to(x_arr, (pts.shape[0], 1, *x_arr.shape)), pts], axis=1)
    rho = np.asarray(space.tuple_radius(anchored), dtype=np.float64)
    w = weight_fn(rho)
    return [w if g is None else w * np.asarray(g(pts), dtype=np.float64)
            for g in integrands]


def integrate_tuples(space: Space, x, k: int, weight_fn, integrand,
                     n: int, stream: RandomStream, *, radius: float,
                     skip_outer: bool = False) -> Estimate:
    """Unbiased estimate of the weighted tuple integral around one center.

    Parameters
    ----------
    weight_fn:
        Vectorized map from rho values to weights (profile composed with
        the scale).
    integrand:
        None for the bare weight, or a callable mapping the (n, k, ...)
        tuple batch to (n,) values.
    radius:
        Stratum split radius (2 * kappa * eps * localization factor).
    skip_outer:
        When the weight provably vanishes off the inner stratum (compactly
        supported profiles), the outer stratum is skipped as exact zero.
    """
    ests, _ = integrate_ratio(space, x, k, weight_fn, [integrand], n, stream,
                              radius=radius, skip_outer=skip_outer,
                              denominator=False)
    return ests[0]


def integrate_ratio(space: Space, x, k: int, weight_fn, integrands,
                    n: int, stream: RandomStream, *, radius: float,
                    skip_outer: bool = False, denominator: bool = True):
    """Shared-sample estimates of tuple integrals and their common divisor.

    Returns (estimates, divisor): one Estimate per entry of ``integrands``,
    each the ratio of its weighted integral to the bare-weight integral when
    ``denominator`` is true (delta-method stderr with the shared-sample
    covariance), or the raw integral when false; and the bare-weight
    Estimate itself (None when unused).
    """
    if n < 2:
        raise ValueError(f"need n >= 2 samples, got {n}")
    plan = plan_strata(space, x, k, radius)
    gens = [stream.substream(1).generator(), stream.substream(2).generator()]
    weights = [plan.inner_weight, plan.outer_weight]
    counts = [n, max(2, n // 4)]
    use_outer = plan.outer_weight > 0 and not skip_outer

    num_means = [np.zeros(2) for _ in integrands]
    num_vars = [np.zeros(2) for _ in integrands]
    den_means, den_vars = np.zeros(2), np.zeros(2)
    covs = [np.zeros(2) for _ in integrands]
    total_n = 0
    for s in (0, 1):
        if s == 1 and not use_outer:
            break
        if weights[s] <= 0:
            continue
        pts = _sample_inner(space, x, plan, counts[s], gens[s]) if s == 0 \
            else _sample_outer(space, x, plan, counts[s], gens[s])
        values = _stratum_values(space, x, pts, weight_fn,
                                 [None] + list(integrands))
        den_vals = values[0]
        den_means[s] = den_vals.mean()
        den_centered = den_vals - den_means[s]
        dof = counts[s] - 1
        den_vars[s] = float(np.dot(den_centered, den_centered)) / dof
        for i, vals in enumerate(values[1:]):
            num_means[i][s] = vals.mean()
            centered = vals - num_means[i][s]
            # One dot-product algorithm for all second moments, so identical
            # numerator and denominator samples cancel bitwise in the delta
            # variance (constant ratios report exactly zero spread).
            num_vars[i][s] = float(np.dot(centered, centered)) / dof
            covs[i][s] = float(np.dot(centered, den_centered)) / dof
        total_n += counts[s]

    w = np.array(weights)
    ns = np.array(counts, dtype=np.float64)
    den_value = float(np.dot(w, den_means))
    den_se = float(math.sqrt(np.dot(w**2, den_vars / ns)))
    den_est = Estimate(value=den_value, stderr=den_se, n_samples=total_n,
                       seed=stream.seed)

    results = []
    for i in range(len(integrands)):
        num_value = float(np.dot(w, num_means[i]))
        if not denominator:
            se = float(math.sqrt(np.dot(w**2, num_vars[i] / ns)))
            results.append(Estimate(value=num_value, stderr=se,
                                    n_samples=total_n, seed=stream.seed))
            continue
        if den_value <= 3.0 * den_se:
            raise ResolutionError(
                f"normalizer {den_value:.3e} indistinguishable from zero "
                f"(stderr {den_se:.3e}); raise the sample count or the scale"
            )
        ratio = num_value / den_value
        # Delta method: var(N/D) ~ (varN - 2 R covND + R^2 varD) / D^2,
        # accumulated per stratum with the shared samples.
        per_stratum = num_vars[i] - 2.0 * ratio * covs[i] + ratio**2 * den_vars
        per_stratum = np.maximum(per_stratum, 0.0)
        se = float(math.sqrt(np.dot(w**2, per_stratum / ns)) / abs(den_value))
        results.append(Estimate(value=ratio, stderr=se, n_samples=total_n,
                                seed=stream.seed))
    return results, (den_est if denominator else None)

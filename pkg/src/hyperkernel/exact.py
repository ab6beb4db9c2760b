"""Exact operator evaluation on finite carriers.

Finite clouds are handled by literal vectorized enumeration of all k-tuples
(capped, never silently sampled).  The binary-word carrier gets closed-form
cylinder calculus instead: around a fixed center the anchored minimax radius
is the largest coordinate distance, distances only depend on common prefix
lengths, and balls are nested cylinders, so every integral collapses to a
sum over the depth.  That keeps deep carriers (2**17 leaves and beyond)
exactly evaluable where tuple enumeration would be astronomically large.

All functions take the integrand values as arrays over the carrier, one per
tuple slot; adapting named function fields to arrays is the caller's job.
"""

from __future__ import annotations

import math

import numpy as np

from .space import Cantor, Space

__all__ = [
    "TERM_CAP",
    "EnumerationCapError",
    "anchored_rho_table",
    "exact_j",
    "exact_kernel_mean",
    "exact_mean_deviation",
    "exact_phi_star",
    "exact_section_measure",
    "exact_multilinear_maximal",
    "exact_hl_maximal",
    "exhaustive_scale_grid",
]

TERM_CAP = 1_000_000


class EnumerationCapError(ValueError):
    """The exact enumeration would exceed the configured term cap."""


def _require_finite(space: Space) -> None:
    if not space.is_finite:
        raise ValueError(f"{space.kind}: exact evaluation needs a finite carrier")


def _check_cap(space: Space, k: int, term_cap: int) -> int:
    count = space.carrier_size**k
    if count > term_cap:
        raise EnumerationCapError(
            f"enumerating {space.carrier_size}**{k} = {count} tuples exceeds "
            f"the cap of {term_cap}; raise term_cap explicitly to override"
        )
    return count


# ---------------------------------------------------------------------------
# Literal tuple enumeration (any finite carrier under the cap)
# ---------------------------------------------------------------------------

def anchored_rho_table(space: Space, x: int, k: int,
                       term_cap: int = TERM_CAP):
    """All k-tuples with their anchored radius and product weight.

    Returns (idx, rho, weight): tuple index rows of shape (P**k, k), the
    exact minimax radius of (x, tuple) per row, and the product point mass
    per row.
    """
    _require_finite(space)
    count = _check_cap(space, k, term_cap)
    P = space.carrier_size
    idx = np.indices((P,) * k).reshape(k, -1).T.astype(np.int64)
    anchored = np.concatenate(
        [np.full((count, 1), int(x), dtype=np.int64), idx], axis=1)
    rho = space.tuple_radius(anchored)
    weight = np.prod(space.carrier_weights[idx], axis=1)
    return idx, rho, weight


def _tuple_products(fvals: list[np.ndarray], idx: np.ndarray) -> np.ndarray:
    out = np.ones(idx.shape[0])
    for i, f in enumerate(fvals):
        out *= np.asarray(f, dtype=np.float64)[idx[:, i]]
    return out


def _cantor_level_masses(space: Cantor, k: int) -> np.ndarray:
    """Mass of {anchored radius = 2**-l} for l = 0..m-1, then the 0 atom.

    The anchored radius around x is max_i d(x, y_i), and all y_i lie in the
    length-l cylinder around x with probability 2**(-l*k).
    """
    m = space.depth
    levels = np.arange(m + 1, dtype=np.float64)
    cyl = 2.0 ** (-levels * k)                 # P(all in cylinder of length l)
    return np.append(cyl[:-1] - cyl[1:], cyl[-1])


def _cantor_cylinder_sums(space: Cantor, x: int, values: np.ndarray) -> np.ndarray:
    """integral of values over the nested cylinders around x, lengths 0..m."""
    m = space.depth
    atom = 2.0 ** (-m)
    sums = np.empty(m + 1)
    v = np.asarray(values, dtype=np.float64)
    for c in range(m + 1):
        free = m - c
        prefix = (int(x) >> free) << free
        sums[c] = v[prefix:prefix + (1 << free)].sum() * atom
    return sums


def exact_j(space: Space, profile, x, eps: float, k: int,
            term_cap: int = TERM_CAP) -> float:
    """Exact normalizer J(x, eps) on a finite carrier."""
    _require_finite(space)
    if eps <= 0:
        raise ValueError(f"scale must be positive, got {eps}")
    if isinstance(space, Cantor):
        masses = _cantor_level_masses(space, k)
        radii = np.append(2.0 ** (-np.arange(space.depth, dtype=np.float64)), 0.0)
        return float(np.dot(profile(radii / eps), masses))
    _, rho, weight = anchored_rho_table(space, x, k, term_cap)
    return float(np.dot(profile(rho / eps), weight))


def exact_kernel_mean(space: Space, profile, fvals: list[np.ndarray], x,
                      eps: float, k: int, term_cap: int = TERM_CAP) -> float:
    """Exact kernel mean: weighted tuple average of the product integrand.

    On the binary carrier the numerator telescopes over cylinder levels:
    tuples with anchored radius exactly 2**-l are those inside the level-l
    cylinder in every slot minus those inside level l+1 in every slot, so
    the product integrand contributes the difference of per-slot cylinder
    integrals.
    """
    _require_finite(space)
    if len(fvals) != k:
        raise ValueError(f"need {k} integrand arrays, got {len(fvals)}")
    if isinstance(space, Cantor):
        m = space.depth
        per_slot = np.stack([_cantor_cylinder_sums(space, x, f) for f in fvals])
        prods = np.prod(per_slot, axis=0)       # over levels 0..m
        radii = np.append(2.0 ** (-np.arange(m, dtype=np.float64)), 0.0)
        shell = np.append(prods[:-1] - prods[1:], prods[-1])
        numerator = float(np.dot(profile(radii / eps), shell))
        denominator = exact_j(space, profile, x, eps, k)
    else:
        idx, rho, weight = anchored_rho_table(space, x, k, term_cap)
        w = profile(rho / eps) * weight
        numerator = float(np.dot(w, _tuple_products(fvals, idx)))
        denominator = float(np.dot(profile(rho / eps), weight))
    if denominator <= 0:
        raise ValueError(f"zero normalizer at eps={eps}")
    return numerator / denominator


def exact_mean_deviation(space: Space, profile, fvals: list[np.ndarray], x,
                         eps: float, k: int, center_value: float,
                         term_cap: int = TERM_CAP) -> float:
    """Exact kernel mean of |prod f_i(y_i) - center_value|.

    The absolute difference does not factor over slots, so this always
    enumerates tuples literally; deep binary carriers above the cap must
    fall back to sampling.
    """
    _require_finite(space)
    if len(fvals) != k:
        raise ValueError(f"need {k} integrand arrays, got {len(fvals)}")
    idx, rho, weight = anchored_rho_table(space, x, k, term_cap)
    w = profile(rho / eps) * weight
    deviation = np.abs(_tuple_products(fvals, idx) - center_value)
    denominator = float(np.dot(profile(rho / eps), weight))
    if denominator <= 0:
        raise ValueError(f"zero normalizer at eps={eps}")
    return float(np.dot(w, deviation)) / denominator


def exhaustive_scale_grid(space: Space, x, k: int,
                          term_cap: int = TERM_CAP) -> np.ndarray:
    """Every scale at which an indicator-weighted operator can change.

    The sets {rho < eps} change only when eps crosses an attained anchored
    radius, so the distinct positive radii, plus one value beyond the
    largest, index every distinct operator value.
    """
    _require_finite(space)
    if isinstance(space, Cantor):
        values = 2.0 ** (-np.arange(space.depth, dtype=np.float64))
    else:
        _, rho, _ = anchored_rho_table(space, x, k, term_cap)
        values = np.unique(rho)
        values = values[values > 0]
    return np.append(np.sort(values), 2.0 * space.diameter)


def exact_phi_star(space: Space, profile, fvals: list[np.ndarray], x, k: int,
                   eps_grid=None, term_cap: int = TERM_CAP):
    """Exact sup over a scale grid of the kernel mean of |f|.

    Returns (value, argmax scale).  With no grid given, the exhaustive grid
    of attainable radii is used, which realizes the true supremum for the
    indicator profile (the operator is piecewise constant between attained
    radii).  Ties resolve to the smallest scale.
    """
    abs_fvals = [np.abs(np.asarray(f, dtype=np.float64)) for f in fvals]
    if isinstance(space, Cantor):
        # The telescoped mean is O(depth) per scale and the exhaustive grid
        # has only depth+1 entries, so the plain scan stays cheap.
        if eps_grid is None:
            eps_grid = exhaustive_scale_grid(space, x, k, term_cap)
        best, best_eps = -math.inf, None
        for eps in np.asarray(eps_grid, dtype=np.float64):
            value = exact_kernel_mean(space, profile, abs_fvals, x,
                                      float(eps), k, term_cap)
            if value > best:
                best, best_eps = value, float(eps)
        return best, best_eps

    idx, rho, weight = anchored_rho_table(space, x, k, term_cap)
    numer = weight * _tuple_products(abs_fvals, idx)
    if eps_grid is None and profile.kind == "indicator":
        # Indicator means are prefix-sum ratios over the nested sets
        # {rho < eps}; scanning the group boundaries is the full supremum.
        return _prefix_argmax(rho, numer, weight, 2.0 * space.diameter)
    if eps_grid is None:
        scales = np.unique(rho)
        scales = np.append(scales[scales > 0], 2.0 * space.diameter)
    else:
        scales = np.asarray(eps_grid, dtype=np.float64)
    best, best_eps = -math.inf, None
    chunk = max(1, 8_000_000 // max(rho.size, 1))
    for lo in range(0, scales.size, chunk):
        block = scales[lo:lo + chunk]
        phi_block = profile(rho[None, :] / block[:, None])
        dens = phi_block @ weight
        if np.any(dens <= 0):
            bad = float(block[np.argmax(dens <= 0)])
            raise ValueError(f"zero normalizer at eps={bad}")
        means = (phi_block @ numer) / dens
        j = int(np.argmax(means))
        if means[j] > best:
            best, best_eps = float(means[j]), float(block[j])
    return best, best_eps


def exact_section_measure(space: Space, x, r: float, k: int,
                          term_cap: int = TERM_CAP) -> float:
    """Exact mu^k(E(x, r)) on a finite carrier (strict radius comparison)."""
    _require_finite(space)
    if r <= 0:
        return 0.0
    if isinstance(space, Cantor):
        return space.ball_measure(x, r) ** k
    _, rho, weight = anchored_rho_table(space, x, k, term_cap)
    return float(weight[rho < r].sum())


def _prefix_argmax(sort_keys: np.ndarray, numer: np.ndarray,
                   denom: np.ndarray, top_scale: float):
    """Max over the nested sets {key < r} of prefix-sum ratios.

    The sets grow only at distinct key values; each group boundary yields
    one candidate ratio, and the scale reported for a winning prefix is the
    next distinct key (the smallest r realizing that set), with a scale
    beyond the largest key for the full set.
    """
    order = np.argsort(sort_keys, kind="stable")
    keys = sort_keys[order]
    cn = np.cumsum(numer[order])
    cd = np.cumsum(denom[order])
    boundaries = np.flatnonzero(np.diff(keys) > 0)
    cuts = np.append(boundaries, keys.size - 1)
    scales = np.append(keys[boundaries + 1], top_scale)
    ratios = cn[cuts] / cd[cuts]
    i = int(np.argmax(ratios))
    return float(ratios[i]), float(scales[i])


def exact_multilinear_maximal(space: Space, fvals: list[np.ndarray], x, k: int,
                              term_cap: int = TERM_CAP):
    """Exact sup over all radii of the section average of prod |f_i|.

    Returns (value, argmax radius).  The supremum over continuous r is
    attained because only finitely many sections exist.
    """
    _require_finite(space)
    if len(fvals) != k:
        raise ValueError(f"need {k} integrand arrays, got {len(fvals)}")
    abs_fvals = [np.abs(np.asarray(f, dtype=np.float64)) for f in fvals]
    if isinstance(space, Cantor):
        per_slot = np.stack([_cantor_cylinder_sums(space, x, f) for f in abs_fvals])
        prods = np.prod(per_slot, axis=0)
        sizes = 2.0 ** (-np.arange(space.depth + 1, dtype=np.float64) * k)
        ratios = prods / sizes
        # The length-c cylinder is the ball of any radius in (2**-c, 2**-(c-1)];
        # report the largest realizing radius (length 0 means everything).
        radii = np.append([2.0 * space.diameter],
                          2.0 ** (-np.arange(space.depth, dtype=np.float64)))
        i = int(np.argmax(ratios))
        return float(ratios[i]), float(radii[i])
    idx, rho, weight = anchored_rho_table(space, x, k, term_cap)
    numer = _tuple_products(abs_fvals, idx) * weight
    return _prefix_argmax(rho, numer, weight, 2.0 * space.diameter)


def exact_hl_maximal(space: Space, fvals: np.ndarray, x,
                     term_cap: int = TERM_CAP):
    """Exact sup over all radii of the ball average of |f|.

    Returns (value, argmax radius); the k = 1 multilinear maximal over balls
    instead of sections.
    """
    _require_finite(space)
    v = np.abs(np.asarray(fvals, dtype=np.float64))
    if isinstance(space, Cantor):
        sums = _cantor_cylinder_sums(space, x, v)
        sizes = 2.0 ** (-np.arange(space.depth + 1, dtype=np.float64))
        radii = np.append([2.0 * space.diameter],
                          2.0 ** (-np.arange(space.depth, dtype=np.float64)))
        i = int(np.argmax(sums / sizes))
        return float((sums / sizes)[i]), float(radii[i])
    d = space.distance(np.full(space.carrier_size, int(x), dtype=np.int64),
                       space.carrier())
    w = space.carrier_weights
    return _prefix_argmax(np.asarray(d), v * w, w, 2.0 * space.diameter)

"""Minimax one-center radius of point tuples, the hypermetric rho.

For a tuple (x_0, ..., x_k) on a space X,

    rho(x_0, ..., x_k) = inf over u in X of max_i d(x_i, u),

the radius of the smallest ball (centered anywhere in X itself) covering
the tuple.  Every built-in carrier admits an exact solver:

* circle: half the length of the smallest covering arc, found from the
  largest gap between cyclically sorted points;
* torus with the sup metric: the coordinate-wise circle solution, maximized
  over coordinates;
* power circle: the circle solution pushed through the power map;
* cantor: the tuple diameter (on an ultrametric the minimax radius equals
  the diameter, attained from any point of the tuple);
* finite cloud: exhaustive minimum over the carrier.

Tuples are plain arrays of points, one point per entry, in whatever point
encoding the space uses.  A separate helper computes the plain Euclidean
distance of a real vector to the diagonal line {(z, ..., z)}; it is a
different normalization of the same idea (on the line with two points it
gives |x - y| / sqrt(2) where rho gives |x - y| / 2) and is never used as
a substitute for rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .space import Space

__all__ = [
    "rho",
    "rho_batch",
    "rho_bruteforce",
    "euclidean_diagonal_distance",
    "smallest_enclosing_ball",
    "RefinedValue",
    "minimax_center_grid",
]


def _tuple_array(space: Space, points) -> np.ndarray:
    pts = np.asarray(points)
    if pts.ndim == 0 or pts.shape[0] < 2:
        raise ValueError(f"a tuple needs at least 2 points, got shape {pts.shape}")
    return pts


def rho(space: Space, points) -> float:
    """Exact minimax radius of one tuple of points on the given space.

    Parameters
    ----------
    space:
        Any built-in carrier.  Finite carriers without a dedicated solver
        fall back to exhaustive minimization, which is still exact.
    points:
        Array of k+1 >= 2 points in the space's point encoding (scalars,
        coordinate rows, or integer words).
    """
    pts = _tuple_array(space, points)
    try:
        return float(space.tuple_radius(pts[None, ...])[0])
    except NotImplementedError:
        pass
    if space.is_finite:
        return rho_bruteforce(space, pts, space.carrier())
    raise NotImplementedError(
        f"{space.kind}: no exact minimax solver; use rho_bruteforce with an "
        "explicit candidate set (the result is then an upper bound, exact "
        "when the candidates exhaust the carrier)"
    )


def rho_batch(space: Space, tuples) -> np.ndarray:
    """Exact minimax radii for a batch of tuples (first axis indexes tuples)."""
    batch = np.asarray(tuples)
    if batch.ndim < 2 or batch.shape[1] < 2:
        raise ValueError(f"expected (batch, k+1, ...) tuples, got shape {batch.shape}")
    return np.asarray(space.tuple_radius(batch), dtype=np.float64)


def rho_bruteforce(space: Space, points, candidates) -> float:
    """Minimum over an explicit candidate set of the covering radius.

    Always an upper bound on rho; exact when the candidates are the whole
    carrier.  The candidate axis may be large, the tuple axis is small, so
    the loop runs over tuple entries with vectorized distances.
    """
    pts = _tuple_array(space, points)
    cand = np.asarray(candidates)
    if cand.shape[0] == 0:
        raise ValueError("the candidate set must be nonempty")
    worst = None
    for i in range(pts.shape[0]):
        xi = np.broadcast_to(pts[i], cand.shape) if cand.ndim == pts[i].ndim + 1 \
            else np.full(cand.shape[0], pts[i])
        d = np.asarray(space.distance(xi, cand), dtype=np.float64)
        worst = d if worst is None else np.maximum(worst, d)
    return float(worst.min())


def euclidean_diagonal_distance(values) -> float:
    """Euclidean distance from a real vector to the diagonal {(z, ..., z)}.

    The projection of (x_1, ..., x_m) onto the diagonal is the mean, so the
    distance is the norm of the centered vector.  With m = 2 this equals
    |x - y| / sqrt(2).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 2:
        raise ValueError(f"expected a flat vector of length >= 2, got shape {v.shape}")
    return float(np.linalg.norm(v - v.mean()))


# ---------------------------------------------------------------------------
# Ambient Euclidean solvers (used when points live in R^n rather than on one
# of the carriers; rho over R^n is the smallest enclosing ball radius)
# ---------------------------------------------------------------------------

def _ball_with_boundary(boundary: list[np.ndarray]):
    """Smallest ball with every point of ``boundary`` on its sphere.

    The center lies in the affine hull of the boundary points; solving the
    equal-distance conditions there gives a small symmetric system.  Returns
    None when the points are affinely dependent (a strictly smaller subset
    already determines the ball).
    """
    p0 = boundary[0]
    if len(boundary) == 1:
        return p0, 0.0
    A = np.stack([p - p0 for p in boundary[1:]])
    G = A @ A.T
    rhs = 0.5 * np.einsum("ij,ij->i", A, A)
    try:
        t = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        return None
    center = p0 + A.T @ t
    return center, float(np.linalg.norm(center - p0))


def _covers(ball, p: np.ndarray, slack: float) -> bool:
    center, radius = ball
    return float(np.linalg.norm(p - center)) <= radius * (1.0 + slack) + slack


def smallest_enclosing_ball(points, seed: int = 0):
    """Exact smallest enclosing ball of a small point set in R^n.

    Classic randomized recursion: strip points one at a time; whenever a
    stripped point falls outside the ball of the rest, it must lie on the
    boundary of the true ball, so recurse with it pinned.  Intended for the
    small tuples this package works with (tens of points, dimension <= 3).

    Returns
    -------
    (center, radius):
        center as a float array, radius as a float.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] < 1:
        raise ValueError("need at least one point")
    order = np.random.Generator(np.random.Philox(seed)).permutation(pts.shape[0])
    shuffled = [pts[i] for i in order]

    def solve(i: int, boundary: list[np.ndarray]):
        if i == len(shuffled) or len(boundary) == pts.shape[1] + 1:
            ball = _ball_with_boundary(boundary) if boundary else (pts[0], 0.0)
            if ball is not None:
                return ball
            return _ball_with_boundary(boundary[:-1])
        ball = solve(i + 1, boundary)
        if ball is not None and _covers(ball, shuffled[i], 1e-12):
            return ball
        return solve(i + 1, boundary + [shuffled[i]])

    center, radius = solve(0, [])
    return center, radius


@dataclass(frozen=True)
class RefinedValue:
    """A minimax radius from grid refinement, with its resolution bound.

    ``value`` is an upper bound on the true radius (it is attained by an
    actual center candidate) and the true radius exceeds ``value - error``
    because the objective is 1-Lipschitz in the center and the final grid
    covers the search box at spacing ``error``.
    """

    value: float
    error: float


def minimax_center_grid(points, lower, upper, *, resolution: int = 17,
                        rounds: int = 10) -> RefinedValue:
    """Generic fallback solver: multiscale grid search in an ambient box.

    Searches the axis-aligned box [lower, upper] with a uniform grid of
    ``resolution`` points per axis, then shrinks the box to the cells whose
    value could still contain the minimizer and repeats.  Because the
    objective max_i |x_i - u| is 1-Lipschitz in u, the true minimizer always
    lies within half a grid diagonal of some grid point whose value is at
    most (grid minimum + grid diagonal), so the sublevel box, inflated by
    one spacing, provably retains it.  The reported error, half the final
    grid diagonal, therefore bounds value - true minimum.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    lo = np.asarray(lower, dtype=np.float64).copy()
    hi = np.asarray(upper, dtype=np.float64).copy()
    if lo.shape != (pts.shape[1],) or hi.shape != (pts.shape[1],) or np.any(lo >= hi):
        raise ValueError("lower and upper must bound a nonempty box matching the dim")
    if resolution < 3 or rounds < 1:
        raise ValueError("need resolution >= 3 and rounds >= 1")
    best = math.inf
    diag = float(np.linalg.norm(hi - lo))
    for _ in range(rounds):
        axes = [np.linspace(lo[c], hi[c], resolution) for c in range(lo.size)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
        d = np.linalg.norm(mesh[:, None, :] - pts[None, :, :], axis=-1).max(axis=1)
        v_min = float(d.min())
        best = min(best, v_min)
        step = (hi - lo) / (resolution - 1)
        diag = float(np.linalg.norm(step))
        keep = mesh[d <= v_min + diag]
        lo = np.maximum(lo, keep.min(axis=0) - step)
        hi = np.minimum(hi, keep.max(axis=0) + step)
    return RefinedValue(value=best, error=diag / 2.0)

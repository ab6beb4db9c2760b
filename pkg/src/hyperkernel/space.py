"""Quasi-metric measure spaces with closed-form ball geometry.

Five concrete carriers are provided:

``circle``
    [0, L) with the wrap-around metric and Lebesgue measure.
``torus``
    [0, L)^n with the coordinate-wise maximum of wrap-around metrics.
``power-circle``
    The circle with the metric raised to a power beta >= 1.  This is a
    genuine quasi-metric (triangle constant 2**(beta-1)) and the standard
    way to exercise kappa > 1 code paths.
``cantor``
    Binary words of a fixed length with the 2**(-common-prefix) ultrametric
    and uniform weights.
``finite-cloud``
    Weighted points in R^n with the Euclidean metric; constants are
    measured, not declared.

Every space exposes the same surface: the metric, closed-form ball
measures, measure-distributed sampling, ball-conditioned sampling (the
workhorse of the localized Monte Carlo engine), the minimax tuple radius
used by the hypermetric solvers, and the declared geometric constants
(triangle constant kappa, measure-doubling constant, and optional
power-law bounds gamma * r**alpha <= mu(B(x, r)) <= Gamma * r**alpha).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .rng import RandomStream

__all__ = [
    "AhlforsBounds",
    "Space",
    "Circle",
    "PowerCircle",
    "Torus",
    "Cantor",
    "FiniteCloud",
    "QuasimetricReport",
    "space_from_config",
    "validate_quasimetric",
    "estimate_doubling_constant",
    "exact_cloud_doubling_constant",
    "exhaustive_doubling_radii",
]


@dataclass(frozen=True)
class AhlforsBounds:
    """Two-sided power law for ball measures on a fixed scale window.

    ``gamma * r**alpha <= mu(B(x, r)) <= Gamma * r**alpha`` for every center
    and every radius in ``(r_min, r_max]``.  On discrete carriers the lower
    end of the window is the atom scale below which the upper bound must
    fail.
    """

    alpha: float
    gamma: float
    Gamma: float

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.gamma <= self.Gamma:
            raise ValueError(
                f"need 0 < gamma <= Gamma, got gamma={self.gamma}, Gamma={self.Gamma}"
            )

    @property
    def doubling_constant(self) -> float:
        """Doubling constant implied by the power law: 2**alpha * Gamma / gamma."""
        return 2.0**self.alpha * self.Gamma / self.gamma


class Space:
    """Shared surface of all carriers.  Concrete kinds fill in the geometry."""

    kind: str = "abstract"

    def __init__(
        self,
        *,
        kappa: float,
        ahlfors: AhlforsBounds | None,
        r_max: float,
        r_min: float,
        total_mass: float,
        doubling_A: float | None = None,
    ) -> None:
        if kappa < 1.0:
            raise ValueError(f"triangle constant must satisfy kappa >= 1, got {kappa}")
        if r_max <= 0 or r_min < 0 or r_min >= r_max:
            raise ValueError(f"need 0 <= r_min < r_max, got r_min={r_min}, r_max={r_max}")
        if total_mass <= 0 or not math.isfinite(total_mass):
            raise ValueError(f"total mass must be finite and positive, got {total_mass}")
        if ahlfors is not None:
            # The declared doubling constant is bound to the power law.
            doubling_A = ahlfors.doubling_constant
        if doubling_A is not None and doubling_A <= 1.0:
            raise ValueError(f"doubling constant must exceed 1, got {doubling_A}")
        self.kappa = float(kappa)
        self.ahlfors = ahlfors
        self.r_max = float(r_max)
        self.r_min = float(r_min)
        self.total_mass = float(total_mass)
        self._doubling_A = None if doubling_A is None else float(doubling_A)

    # -- constants -------------------------------------------------------

    @property
    def doubling_A(self) -> float:
        if self._doubling_A is None:
            raise ValueError(
                f"{self.kind}: no doubling constant declared; measure one with "
                "estimate_doubling_constant or declare bounds in the config"
            )
        return self._doubling_A

    @property
    def alpha(self) -> float:
        if self.ahlfors is None:
            raise ValueError(f"{self.kind}: no power-law bounds declared")
        return self.ahlfors.alpha

    # -- geometry, implemented per kind -----------------------------------

    def distance(self, a, b):
        raise NotImplementedError

    def ball_measure(self, x, r: float) -> float:
        """Measure of the open ball {y : d(x, y) < r}.  Saturates at total mass."""
        raise NotImplementedError

    def sample(self, n: int, rng: RandomStream | np.random.Generator):
        """n independent points distributed as mu / total_mass."""
        raise NotImplementedError

    def sample_ball(self, x, r: float, n: int, rng):
        """n independent points distributed as mu conditioned on B(x, r)."""
        raise NotImplementedError

    def sample_ball_complement(self, x, r: float, n: int, rng):
        """n points from mu conditioned on {d(x, .) >= r}; error if that set is null."""
        raise NotImplementedError

    def tuple_radius(self, pts: np.ndarray) -> np.ndarray:
        """Minimax one-center radius of each row of point tuples."""
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    @property
    def is_finite(self) -> bool:
        return False

    def carrier(self) -> np.ndarray:
        raise ValueError(f"{self.kind}: the carrier is not a finite set")

    @property
    def carrier_size(self) -> int:
        raise ValueError(f"{self.kind}: the carrier is not a finite set")

    @property
    def carrier_weights(self) -> np.ndarray:
        """Point masses aligned with carrier(); finite carriers only."""
        raise ValueError(f"{self.kind}: the carrier is not a finite set")

    def to_config(self) -> dict:
        raise NotImplementedError

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"{type(self).__name__}({self.to_config()})"


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RandomStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RandomStream or numpy Generator, got {type(rng)!r}")


def _circle_positions(value, L: float) -> np.ndarray:
    pos = np.asarray(value, dtype=np.float64)
    if np.any(pos < 0) or np.any(pos >= L):
        raise ValueError(f"circle points must lie in [0, {L}), got range "
                         f"[{pos.min()}, {pos.max()}]")
    return pos


def _circle_distance(a: np.ndarray, b: np.ndarray, L: float):
    d = np.abs(a - b) % L
    return np.minimum(d, L - d)


def _circle_tuple_radius(pts: np.ndarray, L: float) -> np.ndarray:
    """Radius of the smallest covering arc, halved.

    Sort the angular positions of each row; the smallest arc containing all
    of them is the complement of the largest gap between cyclic neighbours,
    and the optimal center is that arc's midpoint.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    if pts.shape[1] == 1:
        return np.zeros(pts.shape[0])
    s = np.sort(pts, axis=1)
    inner = s[:, 1:] - s[:, :-1]
    wrap = (L - (s[:, -1] - s[:, 0]))[:, None]
    max_gap = np.max(np.concatenate([inner, wrap], axis=1), axis=1)
    return (L - max_gap) / 2.0


class Circle(Space):
    """[0, L) with the wrap-around metric and Lebesgue measure (mass L)."""

    kind = "circle"

    def __init__(self, circumference: float = 1.0, *, kappa: float = 1.0,
                 r_max: float | None = None) -> None:
        if circumference <= 0:
            raise ValueError(f"circumference must be positive, got {circumference}")
        self.L = float(circumference)
        super().__init__(
            kappa=kappa,
            ahlfors=AhlforsBounds(alpha=1.0, gamma=2.0, Gamma=2.0),
            r_max=self.L / 4.0 if r_max is None else r_max,
            r_min=0.0,
            total_mass=self.L,
        )

    def distance(self, a, b):
        return _circle_distance(_circle_positions(a, self.L),
                                _circle_positions(b, self.L), self.L)

    def ball_measure(self, x, r: float) -> float:
        if r <= 0:
            return 0.0
        return min(2.0 * r, self.L)

    def sample(self, n: int, rng):
        return _as_generator(rng).uniform(0.0, self.L, size=n)

    def sample_ball(self, x, r: float, n: int, rng):
        a = min(r, self.L / 2.0)
        u = _as_generator(rng).uniform(-a, a, size=n)
        return (x + u) % self.L

    def sample_ball_complement(self, x, r: float, n: int, rng):
        a = min(r, self.L / 2.0)
        if a >= self.L / 2.0:
            raise ValueError("the ball complement has zero measure")
        gen = _as_generator(rng)
        u = gen.uniform(a, self.L / 2.0, size=n)
        sign = gen.integers(0, 2, size=n) * 2 - 1
        return (x + sign * u) % self.L

    def tuple_radius(self, pts: np.ndarray) -> np.ndarray:
        return _circle_tuple_radius(pts, self.L)

    @property
    def diameter(self) -> float:
        return self.L / 2.0

    def to_config(self) -> dict:
        return {"kind": self.kind, "circumference": self.L}


class PowerCircle(Space):
    """The circle with the metric raised to the power beta >= 1.

    d = d_circle**beta is a quasi-metric with tight triangle constant
    2**(beta - 1); ball measures pull back through the monotone map
    t -> t**(1/beta), so mu(B(x, r)) = min(2 * r**(1/beta), 1) and the
    measure is 1/beta-regular.
    """

    kind = "power-circle"

    def __init__(self, beta: float = 2.0, *, kappa: float | None = None,
                 r_max: float | None = None) -> None:
        if beta < 1.0:
            raise ValueError(f"power must satisfy beta >= 1, got {beta}")
        self.beta = float(beta)
        super().__init__(
            kappa=2.0 ** (self.beta - 1.0) if kappa is None else kappa,
            ahlfors=AhlforsBounds(alpha=1.0 / self.beta, gamma=2.0, Gamma=2.0),
            r_max=4.0 ** (-self.beta) if r_max is None else r_max,
            r_min=0.0,
            total_mass=1.0,
        )

    def _arc_radius(self, r: float) -> float:
        # Radius of the underlying circle arc carrying the d-ball of radius r.
        return r ** (1.0 / self.beta) if r > 0 else 0.0

    def distance(self, a, b):
        return _circle_distance(_circle_positions(a, 1.0),
                                _circle_positions(b, 1.0), 1.0) ** self.beta

    def ball_measure(self, x, r: float) -> float:
        if r <= 0:
            return 0.0
        return min(2.0 * self._arc_radius(r), 1.0)

    def sample(self, n: int, rng):
        return _as_generator(rng).uniform(0.0, 1.0, size=n)

    def sample_ball(self, x, r: float, n: int, rng):
        a = min(self._arc_radius(r), 0.5)
        u = _as_generator(rng).uniform(-a, a, size=n)
        return (x + u) % 1.0

    def sample_ball_complement(self, x, r: float, n: int, rng):
        a = min(self._arc_radius(r), 0.5)
        if a >= 0.5:
            raise ValueError("the ball complement has zero measure")
        gen = _as_generator(rng)
        u = gen.uniform(a, 0.5, size=n)
        sign = gen.integers(0, 2, size=n) * 2 - 1
        return (x + sign * u) % 1.0

    def tuple_radius(self, pts: np.ndarray) -> np.ndarray:
        # The minimizing center is the same as for the plain circle because
        # t -> t**beta is increasing; only the attained value transforms.
        return _circle_tuple_radius(pts, 1.0) ** self.beta

    @property
    def diameter(self) -> float:
        return 0.5**self.beta

    def to_config(self) -> dict:
        return {"kind": self.kind, "beta": self.beta}


class Torus(Space):
    """[0, L)^n with the coordinate-wise maximum of wrap-around metrics.

    Balls are cubes, so mu(B(x, r)) = min(2r, L)**n and the minimax center
    problem decomposes coordinate by coordinate.
    """

    kind = "torus"

    def __init__(self, dim: int, circumference: float = 1.0, *,
                 kappa: float = 1.0, r_max: float | None = None) -> None:
        if dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {dim}")
        self.dim = int(dim)
        self.L = float(circumference)
        if self.L <= 0:
            raise ValueError(f"circumference must be positive, got {circumference}")
        super().__init__(
            kappa=kappa,
            ahlfors=AhlforsBounds(alpha=float(dim), gamma=2.0**dim, Gamma=2.0**dim),
            r_max=self.L / 4.0 if r_max is None else r_max,
            r_min=0.0,
            total_mass=self.L**dim,
        )

    def _positions(self, value) -> np.ndarray:
        pos = np.asarray(value, dtype=np.float64)
        if pos.shape[-1] != self.dim:
            raise ValueError(f"torus points need {self.dim} coordinates, "
                             f"got shape {pos.shape}")
        if np.any(pos < 0) or np.any(pos >= self.L):
            raise ValueError(f"torus coordinates must lie in [0, {self.L})")
        return pos

    def distance(self, a, b):
        d = _circle_distance(self._positions(a), self._positions(b), self.L)
        return np.max(d, axis=-1)

    def ball_measure(self, x, r: float) -> float:
        if r <= 0:
            return 0.0
        return min(2.0 * r, self.L) ** self.dim

    def sample(self, n: int, rng):
        return _as_generator(rng).uniform(0.0, self.L, size=(n, self.dim))

    def sample_ball(self, x, r: float, n: int, rng):
        a = min(r, self.L / 2.0)
        u = _as_generator(rng).uniform(-a, a, size=(n, self.dim))
        return (np.asarray(x, dtype=np.float64) + u) % self.L

    def sample_ball_complement(self, x, r: float, n: int, rng):
        a = min(r, self.L / 2.0)
        if a >= self.L / 2.0:
            raise ValueError("the ball complement has zero measure")
        gen = _as_generator(rng)
        x = np.asarray(x, dtype=np.float64)
        # Stratify by the first coordinate that leaves the cube: coordinate c
        # is the first with |u_c| >= a, earlier ones stay inside, later ones
        # are unconstrained.
        inside = 2.0 * a
        outside = self.L - inside
        masses = np.array([inside**c * outside * self.L ** (self.dim - 1 - c)
                           for c in range(self.dim)])
        strata = gen.choice(self.dim, size=n, p=masses / masses.sum())
        u = np.empty((n, self.dim))
        for c in range(self.dim):
            lo = strata > c
            eq = strata == c
            hi = strata < c
            u[lo, c] = gen.uniform(-a, a, size=int(lo.sum()))
            w = gen.uniform(a, self.L / 2.0, size=int(eq.sum()))
            sign = gen.integers(0, 2, size=int(eq.sum())) * 2 - 1
            u[eq, c] = sign * w
            u[hi, c] = gen.uniform(-self.L / 2.0, self.L / 2.0, size=int(hi.sum()))
        return (x + u) % self.L

    def tuple_radius(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        if pts.ndim == 2:
            pts = pts[None, :, :]
        per_coord = np.stack(
            [_circle_tuple_radius(pts[:, :, c], self.L) for c in range(self.dim)],
            axis=1,
        )
        return np.max(per_coord, axis=1)

    @property
    def diameter(self) -> float:
        return self.L / 2.0

    def to_config(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "circumference": self.L}


class Cantor(Space):
    """Binary words of length m with the 2**(-common-prefix) ultrametric.

    Points are integers in [0, 2**m); the most significant bit is the first
    symbol.  All weights are 2**(-m), so balls are dyadic cylinders and
    every ball measure is exact.
    """

    kind = "cantor"

    MAX_DEPTH = 24

    def __init__(self, depth: int, *, kappa: float = 1.0,
                 r_max: float = 0.5) -> None:
        if not 1 <= depth <= self.MAX_DEPTH:
            raise ValueError(f"depth must be in [1, {self.MAX_DEPTH}], got {depth}")
        self.depth = int(depth)
        super().__init__(
            kappa=kappa,
            ahlfors=AhlforsBounds(alpha=1.0, gamma=0.5, Gamma=1.0),
            r_max=r_max,
            r_min=2.0 ** (-self.depth),
            total_mass=1.0,
        )

    def _words(self, value) -> np.ndarray:
        w = np.asarray(value)
        if not np.issubdtype(w.dtype, np.integer):
            raise ValueError(f"cantor points are integers in [0, 2**{self.depth}), "
                             f"got dtype {w.dtype}")
        if np.any(w < 0) or np.any(w >= (1 << self.depth)):
            raise ValueError(f"cantor points must lie in [0, 2**{self.depth})")
        return w.astype(np.int64)

    def distance(self, a, b):
        x = self._words(a) ^ self._words(b)
        # The exponent returned by frexp is the bit length; exact for < 2**53.
        _, e = np.frexp(x.astype(np.float64))
        d = np.exp2(e - self.depth)
        return np.where(x == 0, 0.0, d)

    def prefix_length(self, r: float) -> int:
        """Cylinder length of the open ball of radius r (0 means everything)."""
        if r > 1.0:
            return 0
        if r <= 0:
            raise ValueError(f"radius must be positive, got {r}")
        c = math.floor(math.log2(1.0 / r)) + 1
        return max(0, min(self.depth, c))

    def ball_measure(self, x, r: float) -> float:
        if r <= 0:
            return 0.0
        return 2.0 ** (-self.prefix_length(r))

    def sample(self, n: int, rng):
        return _as_generator(rng).integers(0, 1 << self.depth, size=n, dtype=np.int64)

    def sample_ball(self, x, r: float, n: int, rng):
        c = self.prefix_length(r)
        free = self.depth - c
        prefix = (int(x) >> free) << free
        suffix = _as_generator(rng).integers(0, 1 << free, size=n, dtype=np.int64) \
            if free > 0 else np.zeros(n, dtype=np.int64)
        return prefix | suffix

    def sample_ball_complement(self, x, r: float, n: int, rng):
        c = self.prefix_length(r)
        if c == 0:
            raise ValueError("the ball complement has zero measure")
        gen = _as_generator(rng)
        x = int(x)
        # Shell l = points agreeing on exactly l leading symbols, mass 2**-(l+1).
        masses = np.array([2.0 ** (-(l + 1)) for l in range(c)])
        shells = gen.choice(c, size=n, p=masses / masses.sum())
        out = np.empty(n, dtype=np.int64)
        for l in range(c):
            idx = shells == l
            count = int(idx.sum())
            if count == 0:
                continue
            keep = self.depth - l          # bits below the preserved prefix
            prefix = (x >> keep) << keep
            flip = (1 - ((x >> (keep - 1)) & 1)) << (keep - 1)
            low = gen.integers(0, 1 << (keep - 1), size=count, dtype=np.int64) \
                if keep > 1 else np.zeros(count, dtype=np.int64)
            out[idx] = prefix | flip | low
        return out

    def tuple_radius(self, pts: np.ndarray) -> np.ndarray:
        # On an ultrametric space the minimax radius of a tuple equals its
        # diameter, and the diameter is attained from any anchor point.
        pts = np.atleast_2d(self._words(pts))
        x = pts[:, :1]
        d = self.distance(np.broadcast_to(x, pts.shape), pts)
        return np.max(d, axis=1)

    @property
    def diameter(self) -> float:
        return 1.0

    @property
    def is_finite(self) -> bool:
        return True

    def carrier(self) -> np.ndarray:
        return np.arange(1 << self.depth, dtype=np.int64)

    @property
    def carrier_size(self) -> int:
        return 1 << self.depth

    @property
    def carrier_weights(self) -> np.ndarray:
        return np.full(1 << self.depth, 2.0 ** (-self.depth))

    def to_config(self) -> dict:
        return {"kind": self.kind, "depth": self.depth}


class FiniteCloud(Space):
    """Weighted points in R^n with the Euclidean metric.

    The cloud carries no a-priori constants: the triangle constant is 1
    (the metric is genuine) and doubling or power-law bounds are either
    measured from the points or declared explicitly in the config.
    """

    kind = "finite-cloud"

    def __init__(self, points, weights=None, *, kappa: float = 1.0,
                 ahlfors: AhlforsBounds | None = None,
                 r_max: float | None = None, r_min: float = 0.0,
                 ids: list[str] | None = None) -> None:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError(f"points must form a (count, dim) array, got {pts.shape}")
        self.points = pts
        if weights is None:
            w = np.ones(pts.shape[0])
        else:
            w = np.asarray(weights, dtype=np.float64)
        if w.shape != (pts.shape[0],) or np.any(w <= 0):
            raise ValueError("weights must be positive and match the point count")
        self.weights = w
        self.ids = ids
        diff = pts[:, None, :] - pts[None, :, :]
        self.distance_matrix = np.sqrt(np.sum(diff * diff, axis=-1))
        diameter = float(self.distance_matrix.max())
        if diameter <= 0:
            raise ValueError("the cloud must contain at least two distinct points")
        super().__init__(
            kappa=kappa,
            ahlfors=ahlfors,
            r_max=diameter / 4.0 if r_max is None else r_max,
            r_min=r_min,
            total_mass=float(w.sum()),
            doubling_A=None,
        )
        self._diameter = diameter

    @classmethod
    def from_csv(cls, path, **kwargs) -> "FiniteCloud":
        """Load ``id,x1,...,xn,weight`` rows.  Column order is fixed."""
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or len(header) < 3 or header[0] != "id" \
                    or header[-1] != "weight":
                raise ValueError(f"{path}: expected header id,x1,...,xn,weight")
            dim = len(header) - 2
            expected = ["id"] + [f"x{i + 1}" for i in range(dim)] + ["weight"]
            if header != expected:
                raise ValueError(f"{path}: expected header {','.join(expected)}, "
                                 f"got {','.join(header)}")
            ids, coords, weights = [], [], []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
                ids.append(row[0])
                coords.append([float(v) for v in row[1:-1]])
                weights.append(float(row[-1]))
        return cls(coords, weights, ids=ids, **kwargs)

    @property
    def doubling_A(self) -> float:
        if self._doubling_A is None:
            # Measured lazily: the exact supremum over all centers and radii.
            self._doubling_A = exact_cloud_doubling_constant(self)
        return self._doubling_A

    def _indices(self, value) -> np.ndarray:
        idx = np.asarray(value)
        if not np.issubdtype(idx.dtype, np.integer):
            raise ValueError(f"cloud points are integer indices, got dtype {idx.dtype}")
        if np.any(idx < 0) or np.any(idx >= self.points.shape[0]):
            raise ValueError(f"cloud index out of range [0, {self.points.shape[0]})")
        return idx.astype(np.int64)

    def distance(self, a, b):
        return self.distance_matrix[self._indices(a), self._indices(b)]

    def ball_measure(self, x, r: float) -> float:
        if r <= 0:
            return 0.0
        row = self.distance_matrix[int(self._indices(x))]
        return float(self.weights[row < r].sum())

    def sample(self, n: int, rng):
        p = self.weights / self.total_mass
        return _as_generator(rng).choice(self.points.shape[0], size=n, p=p)

    def _conditional_sample(self, mask: np.ndarray, n: int, rng):
        total = float(self.weights[mask].sum())
        if total <= 0:
            raise ValueError("the requested region has zero measure")
        idx = np.flatnonzero(mask)
        p = self.weights[mask] / total
        return idx[_as_generator(rng).choice(idx.size, size=n, p=p)]

    def sample_ball(self, x, r: float, n: int, rng):
        row = self.distance_matrix[int(self._indices(x))]
        return self._conditional_sample(row < r, n, rng)

    def sample_ball_complement(self, x, r: float, n: int, rng):
        row = self.distance_matrix[int(self._indices(x))]
        return self._conditional_sample(row >= r, n, rng)

    def tuple_radius(self, pts: np.ndarray) -> np.ndarray:
        idx = np.atleast_2d(self._indices(pts))
        out = np.empty(idx.shape[0])
        # Chunked so huge sample batches do not materialize (n, m, P) at once.
        step = max(1, 4_000_000 // (idx.shape[1] * self.points.shape[0]))
        for lo in range(0, idx.shape[0], step):
            block = idx[lo:lo + step]
            d = self.distance_matrix[block]          # (b, m, P)
            out[lo:lo + step] = d.max(axis=1).min(axis=1)
        return out

    @property
    def diameter(self) -> float:
        return self._diameter

    @property
    def is_finite(self) -> bool:
        return True

    def carrier(self) -> np.ndarray:
        return np.arange(self.points.shape[0], dtype=np.int64)

    @property
    def carrier_size(self) -> int:
        return self.points.shape[0]

    @property
    def carrier_weights(self) -> np.ndarray:
        return self.weights

    def to_config(self) -> dict:
        cfg = {
            "kind": self.kind,
            "points": [list(map(float, p)) for p in self.points],
            "weights": [float(w) for w in self.weights],
        }
        if self.ahlfors is not None:
            cfg["ahlfors"] = {
                "alpha": self.ahlfors.alpha,
                "gamma": self.ahlfors.gamma,
                "Gamma": self.ahlfors.Gamma,
            }
            cfg["r_max"] = self.r_max
            cfg["r_min"] = self.r_min
        return cfg


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

_SPACE_KEYS = {
    "circle": {"kind", "circumference", "kappa", "r_max"},
    "torus": {"kind", "dim", "circumference", "kappa", "r_max"},
    "power-circle": {"kind", "beta", "kappa", "r_max"},
    "cantor": {"kind", "depth", "kappa", "r_max"},
    "finite-cloud": {"kind", "points", "weights", "csv", "kappa",
                     "ahlfors", "r_max", "r_min"},
}


def space_from_config(cfg: dict, base_dir: str | None = None) -> Space:
    """Build a space from its config dictionary.  Unknown keys are rejected."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ValueError("space config must be an object with a 'kind' key")
    kind = cfg["kind"]
    if kind not in _SPACE_KEYS:
        raise ValueError(f"unknown space kind {kind!r}; expected one of "
                         f"{sorted(_SPACE_KEYS)}")
    unknown = set(cfg) - _SPACE_KEYS[kind]
    if unknown:
        raise ValueError(f"unknown space key(s) for {kind}: {sorted(unknown)}")
    opts = {k: v for k, v in cfg.items() if k != "kind"}
    if kind == "circle":
        return Circle(**opts)
    if kind == "torus":
        if "dim" not in opts:
            raise ValueError("torus config requires 'dim'")
        return Torus(**opts)
    if kind == "power-circle":
        return PowerCircle(**opts)
    if kind == "cantor":
        if "depth" not in opts:
            raise ValueError("cantor config requires 'depth'")
        return Cantor(**opts)
    # finite cloud
    ahlfors = None
    if "ahlfors" in opts:
        block = opts.pop("ahlfors")
        extra = set(block) - {"alpha", "gamma", "Gamma"}
        if extra:
            raise ValueError(f"unknown ahlfors key(s): {sorted(extra)}")
        ahlfors = AhlforsBounds(**block)
    if "csv" in opts:
        if "points" in opts or "weights" in opts:
            raise ValueError("give either 'csv' or inline 'points', not both")
        import os

        path = opts.pop("csv")
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return FiniteCloud.from_csv(path, ahlfors=ahlfors, **opts)
    if "points" not in opts:
        raise ValueError("finite-cloud config requires 'points' or 'csv'")
    points = opts.pop("points")
    weights = opts.pop("weights", None)
    return FiniteCloud(points, weights, ahlfors=ahlfors, **opts)


# ---------------------------------------------------------------------------
# Validation and measured constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuasimetricReport:
    """Sampled evidence that the declared metric axioms hold."""

    trials: int
    max_triangle_ratio: float
    max_asymmetry: float
    zero_off_diagonal: int
    kappa_declared: float

    @property
    def passed(self) -> bool:
        return (
            self.max_asymmetry == 0.0
            and self.zero_off_diagonal == 0
            and self.max_triangle_ratio <= self.kappa_declared * (1.0 + 1e-12)
        )


def validate_quasimetric(space: Space, trials: int, rng: RandomStream) -> QuasimetricReport:
    """Check symmetry, separation, and the triangle constant on random triples."""
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    gen = _as_generator(rng)
    x = space.sample(trials, gen)
    y = space.sample(trials, gen)
    z = space.sample(trials, gen)
    dxy = np.asarray(space.distance(x, y), dtype=np.float64)
    dyx = np.asarray(space.distance(y, x), dtype=np.float64)
    dxz = np.asarray(space.distance(x, z), dtype=np.float64)
    dzy = np.asarray(space.distance(z, y), dtype=np.float64)
    asym = float(np.max(np.abs(dxy - dyx))) if trials else 0.0
    distinct = _points_differ(space, x, y)
    zeros = int(np.count_nonzero((dxy == 0.0) & distinct))
    denom = dxz + dzy
    ok = denom > 0
    ratio = float(np.max(dxy[ok] / denom[ok])) if np.any(ok) else 0.0
    return QuasimetricReport(
        trials=trials,
        max_triangle_ratio=ratio,
        max_asymmetry=asym,
        zero_off_diagonal=zeros,
        kappa_declared=space.kappa,
    )


def _points_differ(space: Space, a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim > 1:
        return np.any(a != b, axis=-1)
    return a != b


def estimate_doubling_constant(space: Space, radii, centers) -> float:
    """Largest observed mu(B(x, 2r)) / mu(B(x, r)) over the given grid."""
    radii = np.asarray(radii, dtype=np.float64)
    if radii.size == 0 or np.any(radii <= 0):
        raise ValueError("radii must be a nonempty list of positive numbers")
    worst = 0.0
    for x in centers:
        for r in radii:
            small = space.ball_measure(x, float(r))
            if small <= 0:
                raise ValueError(f"zero-measure ball at r={r}")
            worst = max(worst, space.ball_measure(x, 2.0 * float(r)) / small)
    return worst


def exhaustive_doubling_radii(cloud: FiniteCloud) -> np.ndarray:
    """Radii whose grid makes estimate_doubling_constant exact on a cloud.

    The map r -> mu(B(x, 2r)) / mu(B(x, r)) is piecewise constant with
    breakpoints at the pairwise distances and their halves; midpoints of
    consecutive breakpoints (plus one point beyond the last) therefore
    realize every attained value.
    """
    d = np.unique(cloud.distance_matrix)
    d = d[d > 0]
    cuts = np.unique(np.concatenate([d, d / 2.0]))
    mids = (cuts[:-1] + cuts[1:]) / 2.0
    first = cuts[0] / 2.0
    last = cuts[-1] * 2.0
    return np.concatenate([[first], mids, [last]])


def exact_cloud_doubling_constant(cloud: FiniteCloud) -> float:
    """True doubling constant of a finite cloud (supremum over all x, r)."""
    return estimate_doubling_constant(cloud, exhaustive_doubling_radii(cloud),
                                      cloud.carrier())

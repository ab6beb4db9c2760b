"""Sections of the diagonal tube: membership and measure.

The section at a center x with radius r and order k is

    E(x, r) = { (y_1, ..., y_k) : rho(x, y_1, ..., y_k) < r },

the set of k-tuples the center covers at minimax radius below r (strict, so
enumeration on discrete carriers is unambiguous).  Sections sandwich between
product balls,

    B(x, r)^k  is a subset of  E(x, r)  is a subset of  B(x, 2*kappa*r)^k,

which both bounds their measure through ball measures and localizes the
Monte Carlo estimator: sampling is restricted to the outer product ball,
where the membership indicator lives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact import TERM_CAP, exact_section_measure
from .mc import Estimate, integrate_tuples
from .rng import RandomStream
from .space import Space

__all__ = ["Section", "in_section", "measure_section_mc"]


@dataclass(frozen=True)
class Section:
    """One section E(x, r) of the order-k diagonal tube."""

    center: object
    radius: float
    order: int

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError(f"section radius must be positive, got {self.radius}")
        if self.order < 1:
            raise ValueError(f"section order must be >= 1, got {self.order}")


def in_section(space: Space, section: Section, points) -> bool:
    """Strict membership of one k-tuple in E(x, r)."""
    pts = np.asarray(points)
    if pts.shape[0] != section.order:
        raise ValueError(
            f"expected {section.order} points for an order-{section.order} "
            f"section, got {pts.shape[0]}"
        )
    x = np.asarray(section.center)
    anchored = np.concatenate([x[None, None, ...], pts[None, ...]], axis=1)
    rho = float(space.tuple_radius(anchored)[0])
    return rho < section.radius


def measure_section_mc(space: Space, section: Section, n: int,
                       rng: RandomStream, *, method: str = "auto",
                       term_cap: int = TERM_CAP) -> Estimate:
    """mu^k(E(x, r)): exact on finite carriers, localized MC elsewhere.

    The estimator integrates the membership indicator, so its samples live
    in B(x, 2*kappa*r)^k, outside which membership is impossible; tuples
    escaping that ball contribute an exact zero, not a sampled one.

    Parameters
    ----------
    method:
        ``auto`` picks exact enumeration on finite carriers; ``mc`` forces
        the sampler (used to test the sampler against the enumeration);
        ``exact`` demands enumeration and fails on continuous carriers.
    """
    if method not in ("auto", "mc", "exact"):
        raise ValueError(f"unknown method {method!r}")
    if method == "exact" or (method == "auto" and space.is_finite):
        value = exact_section_measure(space, section.center, section.radius,
                                      section.order, term_cap)
        return Estimate(value=value, stderr=0.0,
                        n_samples=space.carrier_size**section.order,
                        seed=rng.seed)
    radius = 2.0 * space.kappa * section.radius

    def weight(rho: np.ndarray) -> np.ndarray:
        return (rho < section.radius).astype(np.float64)

    return integrate_tuples(space, section.center, section.order, weight,
                            None, n, rng, radius=radius, skip_outer=True)

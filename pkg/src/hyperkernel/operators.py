"""Kernel means, maximal operators, and the explicit theorem constants.

The operators all average k functions against the kernel built from a
profile phi and the minimax tuple radius around a center x:

* ``j_normalizer``: J(x, eps), the integral of phi(rho/eps) over X^k, the
  mass the kernel assigns at scale eps;
* ``phi_mean``: the normalized k-linear mean, numerator and denominator
  sharing one sample set so constants reproduce exactly;
* ``phi_star``: the sup of the mean of absolute values over a scale grid;
* ``multilinear_maximal``: the sup over radii of plain section averages,
  the Hardy-Littlewood shape adapted to the diagonal tube;
* ``hl_maximal``: the classical one-function ball-average maximal operator;
* ``mean_deviation``: the kernel mean of |prod f_i(y_i) - prod f_i(x)|,
  the exact quantity whose decay expresses pointwise convergence.

On finite carriers every operator routes to exact enumeration (stderr 0)
unless the caller forces sampling; on continuous carriers, the localized
two-stratum sampler keeps estimates sharp across four decades of scale.

``theorem_constants`` evaluates the closed-form constants of the
comparability and domination bounds; ``product_difference`` is the exact
telescoping of a difference of products into slotwise terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import exact
from .mc import Estimate, ResolutionError, integrate_ratio, integrate_tuples
from .profile import KernelProfile
from .rng import RandomStream
from .space import Circle, FiniteCloud, PowerCircle, Space, Torus

__all__ = [
    "FunctionField",
    "field_from_config",
    "lp_norm",
    "TheoremConstants",
    "theorem_constants",
    "constants_for",
    "product_difference",
    "j_normalizer",
    "phi_mean",
    "phi_star",
    "multilinear_maximal",
    "hl_maximal",
    "mean_deviation",
    "tail_envelope_sum",
]

FIELD_KINDS = ("constant", "cosine", "bump", "step", "abs-kink")

_FIELD_PARAMS = {
    "constant": set(),
    "cosine": {"center", "frequency"},
    "bump": {"center", "width"},
    "step": {"center", "width"},
    "abs-kink": {"center"},
}


@dataclass(frozen=True)
class FunctionField:
    """A named test function, radial in the metric around its center.

    kind:
        constant          amplitude
        cosine            amplitude * cos(2*pi*frequency * d(y, center))
        bump              amplitude * exp(1 - 1/(1 - (d/width)**2)), d < width
        step              amplitude * [d(y, center) < width]
        abs-kink          amplitude * d(y, center)
    p:
        Integrability exponent in [1, inf] used by norm inequalities
        (math.inf allowed).
    """

    kind: str
    p: float
    amplitude: float = 1.0
    center: object = None
    frequency: float | None = None
    width: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown function kind {self.kind!r}; "
                             f"expected one of {FIELD_KINDS}")
        if not (self.p >= 1.0):
            raise ValueError(f"exponent p must be >= 1 (or inf), got {self.p}")
        needed = _FIELD_PARAMS[self.kind]
        if "center" in needed and self.center is None:
            raise ValueError(f"{self.kind} field needs a center point")
        if "frequency" in needed and (self.frequency is None or self.frequency <= 0):
            raise ValueError(f"{self.kind} field needs a positive frequency")
        if "width" in needed and (self.width is None or self.width <= 0):
            raise ValueError(f"{self.kind} field needs a positive width")
        for name in ("center", "frequency", "width"):
            if getattr(self, name) is not None and name not in needed \
                    and not (name == "center" and self.kind == "constant"):
                raise ValueError(f"{self.kind} field takes no {name}")

    def _radial(self, d: np.ndarray) -> np.ndarray:
        if self.kind == "cosine":
            return self.amplitude * np.cos(2.0 * math.pi * self.frequency * d)
        if self.kind == "bump":
            u = np.clip(d / self.width, 0.0, 1.0)
            with np.errstate(divide="ignore", over="ignore"):
                core = np.exp(1.0 - 1.0 / (1.0 - u * u))
            return self.amplitude * np.where(u < 1.0, core, 0.0)
        if self.kind == "step":
            return self.amplitude * (d < self.width).astype(np.float64)
        return self.amplitude * d          # abs-kink

    def evaluate(self, space: Space, points) -> np.ndarray:
        """Field values at an array of points of the space."""
        pts = np.asarray(points)
        if self.kind == "constant":
            n = pts.shape[0] if pts.ndim > 0 else 1
            return np.full(n, float(self.amplitude))
        center = np.broadcast_to(np.asarray(self.center), pts.shape)
        d = np.asarray(space.distance(center, pts), dtype=np.float64)
        return self._radial(d)

    def shape_profile(self):
        """The scalar radial shape g with f(y) = g(d(y, center))."""
        return self._radial

    def to_config(self) -> dict:
        cfg = {"kind": self.kind, "p": "inf" if self.p == math.inf else self.p,
               "amplitude": self.amplitude}
        if self.center is not None:
            c = np.asarray(self.center)
            cfg["center"] = c.tolist() if c.ndim else c.item()
        if self.frequency is not None:
            cfg["frequency"] = self.frequency
        if self.width is not None:
            cfg["width"] = self.width
        return cfg


def field_from_config(cfg: dict) -> FunctionField:
    """Build a field from its config dictionary.  Unknown keys are rejected."""
    if not isinstance(cfg, dict) or "kind" not in cfg or "p" not in cfg:
        raise ValueError("function config must be an object with 'kind' and 'p'")
    unknown = set(cfg) - {"kind", "p", "amplitude", "center", "frequency", "width"}
    if unknown:
        raise ValueError(f"unknown function key(s): {sorted(unknown)}")
    p = cfg["p"]
    if p == "inf":
        p = math.inf
    center = cfg.get("center")
    if isinstance(center, list):
        center = np.asarray(center, dtype=np.float64)
    return FunctionField(kind=cfg["kind"], p=float(p),
                         amplitude=float(cfg.get("amplitude", 1.0)),
                         center=center, frequency=cfg.get("frequency"),
                         width=cfg.get("width"))


# ---------------------------------------------------------------------------
# L^p norms
# ---------------------------------------------------------------------------

def _radial_density(space: Space):
    """(density, upper): mu{d(., c) in dt} = density(t) dt on (0, upper)."""
    if isinstance(space, Circle):
        return (lambda t: 2.0), space.L / 2.0
    if isinstance(space, Torus):
        n, L = space.dim, space.L
        return (lambda t: 2.0 * n * (2.0 * t) ** (n - 1)), L / 2.0
    if isinstance(space, PowerCircle):
        beta = space.beta
        return (lambda t: (2.0 / beta) * t ** (1.0 / beta - 1.0)), 0.5**beta
    raise ValueError(f"{space.kind}: no radial distance density available")


def _sup_distance(space: Space, center) -> float:
    if isinstance(space, FiniteCloud):
        row = space.distance_matrix[int(center)]
        return float(row.max())
    return space.diameter


def lp_norm(space: Space, field: FunctionField) -> float:
    """The L^p(mu) norm of a catalog field, exact where a closed form exists.

    Finite carriers sum exactly; the supremum norm is exact through the
    radial shape (every shape attains its maximum at the center or, for the
    distance kink, at a farthest point); continuous carriers integrate the
    radial shape against the exact distance density by adaptive quadrature
    to 1e-6 relative error.
    """
    p = field.p
    if p == math.inf:
        if field.kind == "constant":
            return abs(field.amplitude)
        if field.kind == "abs-kink":
            return abs(field.amplitude) * _sup_distance(space, field.center)
        return abs(field.amplitude)       # cosine, bump, step peak at d = 0
    if space.is_finite:
        vals = np.abs(field.evaluate(space, space.carrier()))
        return float(np.dot(vals**p, space.carrier_weights) ** (1.0 / p))
    if field.kind == "constant":
        return abs(field.amplitude) * space.total_mass ** (1.0 / p)
    if field.kind == "step":
        return abs(field.amplitude) * \
            space.ball_measure(field.center, field.width) ** (1.0 / p)
    density, upper = _radial_density(space)
    shape = field.shape_profile()

    def integrand(t: float) -> float:
        return abs(float(shape(np.asarray(t)))) ** p * density(t)

    value, abserr = quad(integrand, 0.0, upper, epsabs=0.0, epsrel=1e-9,
                         limit=200)
    if value > 0 and abserr > 1e-6 * value:
        raise ValueError(f"norm quadrature error {abserr} exceeds 1e-6 relative")
    return float(value ** (1.0 / p))


# ---------------------------------------------------------------------------
# Explicit constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoremConstants:
    """Closed-form constants of the comparability and domination bounds.

    ``C1`` and ``C2`` bracket J(x, r) / (r**(k*alpha) * s(phi)); ``A_tilde``
    is the doubling constant of section measures; ``C_domination`` bounds
    the sup of kernel means by the section maximal operator; and
    ``prop33_bound`` bounds the section maximal operator by the product of
    one-dimensional ball maximal operators.
    """

    lambda0: float
    C1: float
    C2: float
    A_tilde: float
    C_domination: float
    prop33_bound: float


def theorem_constants(k: int, alpha: float, kappa: float, gamma: float,
                      Gamma: float, A: float) -> TheoremConstants:
    """Evaluate the explicit constants for given geometry.

    lambda0 = (1 + Gamma**k * (2*kappa)**(k*alpha))**(1/(k*alpha)) / gamma**(1/alpha)
    C1 = 1 / (lambda0**(2*k*alpha) * ln(lambda0))
    C2 = lambda0**(2*k*alpha) * (2*kappa)**(k*alpha) * Gamma**k / ln(lambda0)
    A_tilde = (8*kappa)**(k * log2(A))
    C_domination = (8*kappa)**(k*alpha) * Gamma**k / (C1 * ln 2)
    prop33_bound = (2*kappa)**(k * log2(A))
    """
    if k < 1:
        raise ValueError(f"tuple order k must be >= 1, got {k}")
    if alpha <= 0 or gamma <= 0 or Gamma < gamma:
        raise ValueError(f"need 0 < gamma <= Gamma and alpha > 0, got "
                         f"alpha={alpha}, gamma={gamma}, Gamma={Gamma}")
    if kappa < 1:
        raise ValueError(f"triangle constant must satisfy kappa >= 1, got {kappa}")
    if A <= 1:
        raise ValueError(f"doubling constant must exceed 1, got {A}")
    ka = k * alpha
    lambda0 = (1.0 + Gamma**k * (2.0 * kappa) ** ka) ** (1.0 / ka) \
        / gamma ** (1.0 / alpha)
    log_l0 = math.log(lambda0)
    C1 = 1.0 / (lambda0 ** (2.0 * ka) * log_l0)
    C2 = lambda0 ** (2.0 * ka) * (2.0 * kappa) ** ka * Gamma**k / log_l0
    return TheoremConstants(
        lambda0=lambda0,
        C1=C1,
        C2=C2,
        A_tilde=(8.0 * kappa) ** (k * math.log2(A)),
        C_domination=(8.0 * kappa) ** ka * Gamma**k / (C1 * math.log(2.0)),
        prop33_bound=(2.0 * kappa) ** (k * math.log2(A)),
    )


def constants_for(space: Space, k: int) -> TheoremConstants:
    """Constants of a declared-geometry space (power-law bounds required)."""
    bounds = space.ahlfors
    if bounds is None:
        raise ValueError(f"{space.kind}: constants need declared power-law bounds")
    return theorem_constants(k, bounds.alpha, space.kappa, bounds.gamma,
                             bounds.Gamma, space.doubling_A)


def product_difference(a, b):
    """Telescoping of prod(a) - prod(b) into slotwise difference terms.

    terms[i] = (a_i - b_i) * prod of a_j for j > i * prod of b_l for l < i,
    and the total of the terms equals prod(a) - prod(b) identically.
    Returns (terms, total).

    Entry types are preserved: float entries give float terms with an
    exactly rounded total, while exact types (int, Fraction) keep the
    identity exact to the last digit.
    """
    av = list(a)
    bv = list(b)
    if len(av) != len(bv) or not av:
        raise ValueError(f"need two equal-length nonempty sequences, "
                         f"got lengths {len(av)} and {len(bv)}")
    terms = []
    for i in range(len(av)):
        suffix = math.prod(av[i + 1:])
        prefix = math.prod(bv[:i])
        terms.append((av[i] - bv[i]) * suffix * prefix)
    if any(isinstance(t, (float, np.floating)) for t in terms):
        return terms, math.fsum(terms)
    return terms, sum(terms)


# ---------------------------------------------------------------------------
# Operator plumbing
# ---------------------------------------------------------------------------

def _field_values(space: Space, fields, signed: bool) -> list[np.ndarray]:
    carrier = space.carrier()
    vals = [f.evaluate(space, carrier) for f in fields]
    return vals if signed else [np.abs(v) for v in vals]


def _product_integrand(space: Space, fields, signed: bool):
    def g(pts: np.ndarray) -> np.ndarray:
        out = np.ones(pts.shape[0])
        for i, f in enumerate(fields):
            v = f.evaluate(space, pts[:, i])
            out *= v if signed else np.abs(v)
        return out

    return g


def _resolve_method(space: Space, method: str) -> str:
    if method not in ("auto", "mc", "exact"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        return "exact" if space.is_finite else "mc"
    if method == "exact" and not space.is_finite:
        raise ValueError(f"{space.kind}: exact evaluation needs a finite carrier")
    return method


def _scale_weight(profile: KernelProfile, eps: float):
    def weight(rho: np.ndarray) -> np.ndarray:
        return profile(rho / eps)

    return weight


def _split_radius(space: Space, profile: KernelProfile, eps: float) -> float:
    return 2.0 * space.kappa * eps * profile.localization_factor


def j_normalizer(space: Space, profile: KernelProfile, x, eps: float, n: int,
                 rng: RandomStream, *, k: int, method: str = "auto",
                 term_cap: int = exact.TERM_CAP) -> Estimate:
    """J(x, eps): the kernel mass at scale eps around x.

    Exact on finite carriers; elsewhere a localized stratified estimate.
    A value statistically indistinguishable from zero raises instead of
    returning an unusable normalizer.
    """
    if eps <= 0:
        raise ValueError(f"scale must be positive, got {eps}")
    if _resolve_method(space, method) == "exact":
        value = exact.exact_j(space, profile, x, eps, k, term_cap)
        est = Estimate(value=value, stderr=0.0,
                       n_samples=space.carrier_size**k, seed=rng.seed)
    else:
        est = integrate_tuples(space, x, k, _scale_weight(profile, eps), None,
                               n, rng, radius=_split_radius(space, profile, eps),
                               skip_outer=profile.compact_support)
    if est.value <= 3.0 * est.stderr:
        raise ResolutionError(
            f"normalizer {est.value:.3e} indistinguishable from zero at "
            f"eps={eps} (stderr {est.stderr:.3e}); raise n or the scale"
        )
    return est


def phi_mean(space: Space, profile: KernelProfile, fields, x, eps: float,
             n: int, rng: RandomStream, *, method: str = "auto",
             signed: bool = True, term_cap: int = exact.TERM_CAP) -> Estimate:
    """The normalized k-linear kernel mean of the fields at (x, eps).

    Numerator and denominator share one sample set, so a constant product
    is reproduced exactly with zero spread, and scaling any one slot scales
    the estimate exactly.  ``signed`` false applies absolute values (the
    maximal-operator convention); the plain mean is signed.
    """
    k = len(fields)
    if k < 1:
        raise ValueError("need at least one function field")
    if eps <= 0:
        raise ValueError(f"scale must be positive, got {eps}")
    if _resolve_method(space, method) == "exact":
        fvals = _field_values(space, fields, signed)
        value = exact.exact_kernel_mean(space, profile, fvals, x, eps, k,
                                        term_cap)
        return Estimate(value=value, stderr=0.0,
                        n_samples=space.carrier_size**k, seed=rng.seed)
    ests, _ = integrate_ratio(space, x, k, _scale_weight(profile, eps),
                              [_product_integrand(space, fields, signed)],
                              n, rng, radius=_split_radius(space, profile, eps),
                              skip_outer=profile.compact_support)
    return ests[0]


def phi_star(space: Space, profile: KernelProfile, fields, x, eps_grid,
             n: int, rng: RandomStream, *, method: str = "auto",
             term_cap: int = exact.TERM_CAP) -> Estimate:
    """Sup over the scale grid of the kernel mean of absolute values.

    Scales are evaluated on index-keyed substreams, so the winning entry is
    reproducible; the reported stderr is the winner's own (a noisy max has
    upward bias of the order of the per-point stderr, which callers absorb
    in their slack).  ``arg`` records the winning scale.

    On finite carriers ``eps_grid`` may be None, which scans the exhaustive
    grid of attainable radii (the true supremum for compact profiles).
    """
    if _resolve_method(space, method) == "exact":
        grid = None if eps_grid is None else _check_grid(eps_grid)
        fvals = _field_values(space, fields, False)
        value, arg = exact.exact_phi_star(space, profile, fvals, x,
                                          len(fields), grid, term_cap)
        return Estimate(value=value, stderr=0.0,
                        n_samples=space.carrier_size ** len(fields),
                        seed=rng.seed, arg=arg)
    grid = _check_grid(eps_grid)
    best: Estimate | None = None
    failures: list[str] = []
    for i, eps in enumerate(grid):
        try:
            est = phi_mean(space, profile, fields, x, float(eps), n,
                           rng.substream(i), method="mc", signed=False)
        except ResolutionError as err:
            failures.append(f"eps={eps}: {err}")
            continue
        if best is None or est.value > best.value:
            best = Estimate(value=est.value, stderr=est.stderr,
                            n_samples=est.n_samples, seed=est.seed,
                            arg=float(eps))
    if best is None:
        raise ResolutionError("every scale failed: " + "; ".join(failures))
    return best


def multilinear_maximal(space: Space, fields, x, r_grid, n: int,
                        rng: RandomStream, *, method: str = "auto",
                        term_cap: int = exact.TERM_CAP) -> Estimate:
    """Sup over radii of the section average of the absolute product.

    On finite carriers the given grid is ignored and the true supremum over
    all radii is computed exactly (only finitely many sections exist); on
    continuous carriers the sup runs over the grid, with radii whose section
    estimate is indistinguishable from zero skipped (all skipped raises).
    """
    k = len(fields)
    if _resolve_method(space, method) == "exact":
        fvals = _field_values(space, fields, False)
        value, arg = exact.exact_multilinear_maximal(space, fvals, x, k,
                                                     term_cap)
        return Estimate(value=value, stderr=0.0,
                        n_samples=space.carrier_size**k, seed=rng.seed,
                        arg=arg)
    grid = _check_grid(r_grid)
    integrand = _product_integrand(space, fields, False)
    best: Estimate | None = None
    failures: list[str] = []
    for i, r in enumerate(grid):
        def weight(rho: np.ndarray, _r=float(r)) -> np.ndarray:
            return (rho < _r).astype(np.float64)

        try:
            ests, _ = integrate_ratio(space, x, k, weight, [integrand], n,
                                      rng.substream(i),
                                      radius=2.0 * space.kappa * float(r),
                                      skip_outer=True)
        except ResolutionError as err:
            failures.append(f"r={r}: {err}")
            continue
        est = ests[0]
        if best is None or est.value > best.value:
            best = Estimate(value=est.value, stderr=est.stderr,
                            n_samples=est.n_samples, seed=est.seed,
                            arg=float(r))
    if best is None:
        raise ResolutionError("every radius failed: " + "; ".join(failures))
    return best


def hl_maximal(space: Space, field: FunctionField, x, r_grid, n: int,
               rng: RandomStream, *, method: str = "auto",
               term_cap: int = exact.TERM_CAP) -> Estimate:
    """Sup over radii of the plain ball average of |f|.

    Ball measures are closed-form, so only the conditional mean of |f| is
    sampled per radius.  Finite carriers get the exact full supremum (the
    grid is ignored, as with the section maximal).
    """
    if _resolve_method(space, method) == "exact":
        fvals = np.abs(field.evaluate(space, space.carrier()))
        value, arg = exact.exact_hl_maximal(space, fvals, x, term_cap)
        return Estimate(value=value, stderr=0.0, n_samples=space.carrier_size,
                        seed=rng.seed, arg=arg)
    grid = _check_grid(r_grid)
    best: Estimate | None = None
    for i, r in enumerate(grid):
        if space.ball_measure(x, float(r)) <= 0:
            continue
        gen = rng.substream(i).generator()
        pts = space.sample_ball(x, float(r), n, gen)
        vals = np.abs(field.evaluate(space, pts))
        value = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(n))
        if best is None or value > best.value:
            best = Estimate(value=value, stderr=se, n_samples=n,
                            seed=rng.seed, arg=float(r))
    if best is None:
        raise ResolutionError("no radius in the grid carries measure")
    return best


def mean_deviation(space: Space, profile: KernelProfile, fields, x,
                   eps: float, n: int, rng: RandomStream, *,
                   method: str = "auto",
                   term_cap: int = exact.TERM_CAP) -> Estimate:
    """Kernel mean of |prod f_i(y_i) - prod f_i(x)| at scale eps.

    The absolute deviation does not factor over slots, so finite carriers
    above the enumeration cap fall back to sampling automatically.
    """
    k = len(fields)
    if eps <= 0:
        raise ValueError(f"scale must be positive, got {eps}")
    center_value = float(math.prod(
        float(f.evaluate(space, np.asarray([x]))[0]) for f in fields))
    resolved = _resolve_method(space, method)
    if resolved == "exact":
        try:
            fvals = _field_values(space, fields, True)
            value = exact.exact_mean_deviation(space, profile, fvals, x, eps,
                                               k, center_value, term_cap)
            return Estimate(value=value, stderr=0.0,
                            n_samples=space.carrier_size**k, seed=rng.seed)
        except exact.EnumerationCapError:
            if method == "exact":
                raise
    product = _product_integrand(space, fields, True)

    def deviation(pts: np.ndarray) -> np.ndarray:
        return np.abs(product(pts) - center_value)

    ests, _ = integrate_ratio(space, x, k, _scale_weight(profile, eps),
                              [deviation], n, rng,
                              radius=_split_radius(space, profile, eps),
                              skip_outer=profile.compact_support)
    return ests[0]


def tail_envelope_sum(profile: KernelProfile, k: int, alpha: float,
                      sigma: float, kappa: float, eps: float) -> float:
    """Dyadic tail sum bounding the off-support kernel mass.

    Sum over integer i >= log2(sigma / (2*kappa*eps)) - 1 of
    phi(2**i) * 2**(i*k*alpha).  For compactly supported profiles this is
    exactly zero once the scale drops below the support threshold; for
    decaying profiles the admissible moment makes the series converge.
    """
    if sigma <= 0 or eps <= 0:
        raise ValueError("sigma and eps must be positive")
    i0 = math.ceil(math.log2(sigma / (2.0 * kappa * eps)) - 1.0)
    total = 0.0
    i = i0
    while True:
        term = float(profile(2.0**i)) * 2.0 ** (i * k * alpha)
        total += term
        if i > i0 + 4 and (term <= 1e-16 * total or term == 0.0):
            break
        if i > i0 + 4096:
            raise ValueError("tail sum failed to converge; inadmissible profile")
        i += 1
    return total


def _check_grid(grid) -> np.ndarray:
    arr = np.asarray(grid, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"need a nonempty one-dimensional grid, got shape {arr.shape}")
    if np.any(arr <= 0):
        raise ValueError("grid entries must be positive")
    if np.any(np.diff(arr) <= 0):
        raise ValueError("grid entries must be strictly increasing")
    return arr

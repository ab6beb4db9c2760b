"""Declarative experiment runners producing tabular, qualified results.

Four experiment kinds turn the library's inequalities and limits into flat
tables with explicit uncertainty and pass/fail columns:

* ``verify``: a battery of axiom and identity checks (metric axioms against
  the declared triangle constant, measure bounds, tuple-radius sandwich,
  section inclusions, profile admissibility, kernel normalization, the
  product-difference identity), one row per check;
* ``ratios``: section measures and kernel normalizers divided by their
  power-law scale, against the two-sided corridor constants;
* ``domination``: the scale-sup kernel mean against the section maximal
  operator and the product of ball maximal functions, with both explicit
  domination constants;
* ``convergence``: kernel means against the product of point values along a
  shrinking scale grid, reporting the absolute-deviation mean whose decay
  is the convergence statement itself.

Every row is reproducible from (config, seed): row estimates draw from
substreams keyed by a stable row index, so reruns and any worker count
produce byte-identical CSV output.  Rows that fail to resolve statistically
are excluded from the table and counted in the summary instead.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import __version__
from .mc import ResolutionError
from .operators import (
    FunctionField,
    constants_for,
    field_from_config,
    hl_maximal,
    j_normalizer,
    mean_deviation,
    multilinear_maximal,
    phi_mean,
    phi_star,
    product_difference,
    tail_envelope_sum,
)
from .profile import KernelProfile, profile_from_config
from .rng import RandomStream
from .sections import Section, measure_section_mc
from .space import Space, space_from_config

__all__ = [
    "EXPERIMENT_KINDS",
    "ExperimentConfig",
    "Report",
    "config_from_dict",
    "run",
    "run_verify",
    "run_ratios",
    "run_domination",
    "run_convergence",
    "write_csv",
    "write_summary",
]

EXPERIMENT_KINDS = ("verify", "ratios", "domination", "convergence")

COLUMNS = {
    "verify": ("space", "check", "trials", "violations", "worst", "pass"),
    "ratios": ("space", "x_id", "r", "quantity", "estimate", "stderr",
               "lower_bound", "upper_bound", "pass"),
    "domination": ("space", "x_id", "phi_star", "stderr_ps", "m_sections",
                   "stderr_m", "prod_hl", "bound_c", "bound_prop33",
                   "pass_thm32", "pass_prop33"),
    "convergence": ("space", "x_id", "epsilon", "estimate", "target",
                    "abs_err", "thm41_err", "stderr"),
}

_TOP_KEYS = {"kind", "seed", "space", "k", "profile", "functions",
             "eps_grid", "r_grid", "mc_samples", "eval_points", "prefix"}
_KIND_KEYS = {
    "verify": {"kind", "seed", "space", "k", "profile", "mc_samples",
               "prefix"},
    "ratios": {"kind", "seed", "space", "k", "profile", "r_grid",
               "mc_samples", "eval_points", "prefix"},
    "domination": {"kind", "seed", "space", "k", "profile", "functions",
                   "eps_grid", "r_grid", "mc_samples", "eval_points",
                   "prefix"},
    "convergence": {"kind", "seed", "space", "k", "profile", "functions",
                    "eps_grid", "mc_samples", "eval_points", "prefix"},
}

DEFAULT_MC_SAMPLES = 100_000
DEFAULT_EVAL_POINTS = 50

# Floating dust allowed on top of statistical slack in pass checks; covers
# exact-equality cases (bounds attained) without weakening any inequality.
_DUST = 1e-12


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """A validated, fully resolved experiment description.

    Grids are stored as explicit increasing tuples (geometric range
    descriptors are resolved at parse time), so ``to_dict`` round-trips
    exactly and the configuration hash is stable.
    """

    kind: str
    space: dict
    k: int
    profile: dict
    functions: tuple
    eps_grid: tuple | None
    r_grid: tuple | None
    mc_samples: int
    eval_points: int
    seed: int | None
    prefix: str

    def build_space(self) -> Space:
        return space_from_config(self.space)

    def build_profile(self) -> KernelProfile:
        return profile_from_config(self.profile)

    def build_fields(self) -> list[FunctionField]:
        return [field_from_config(f) for f in self.functions]

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "space": self.space, "k": self.k,
               "profile": self.profile,
               "mc_samples": self.mc_samples, "prefix": self.prefix}
        if self.kind != "verify":
            out["eval_points"] = self.eval_points
        if self.functions:
            out["functions"] = list(self.functions)
        if self.eps_grid is not None:
            out["eps_grid"] = list(self.eps_grid)
        if self.r_grid is not None:
            out["r_grid"] = list(self.r_grid)
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    def sha256(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _resolve_grid(value, name: str, upper: float | None):
    """Turn a grid descriptor into an increasing tuple of positive floats.

    Accepts an explicit list or a {"min", "max", "count"} object resolved
    geometrically.  ``upper`` caps the largest entry when given.
    """
    if isinstance(value, dict):
        extra = set(value) - {"min", "max", "count"}
        if extra:
            raise ValueError(f"unknown {name} key(s): {sorted(extra)}")
        try:
            lo, hi, count = (float(value["min"]), float(value["max"]),
                             int(value["count"]))
        except KeyError as missing:
            raise ValueError(f"{name} range needs 'min', 'max', 'count'; "
                             f"missing {missing}") from None
        if not (0 < lo < hi) or count < 2:
            raise ValueError(f"{name} range needs 0 < min < max and "
                             f"count >= 2, got {value}")
        grid = np.geomspace(lo, hi, count)
    else:
        grid = np.asarray(value, dtype=np.float64)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError(f"{name} must be a nonempty list of scales")
        if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
            raise ValueError(f"{name} must be positive and strictly increasing")
    if upper is not None and grid[-1] > upper * (1 + 1e-9):
        raise ValueError(
            f"{name} reaches {grid[-1]}, beyond the largest regular scale "
            f"{upper} of the space"
        )
    return tuple(float(g) for g in grid)


def _default_grid(space: Space, kind: str):
    top = 0.45 * space.r_max
    if kind == "ratios":
        # Four decades below the largest regular scale.
        return tuple(float(g) for g in np.geomspace(top * 1e-4, top, 13))
    if kind == "convergence":
        # Halving steps, eight scales.
        return tuple(float(top / 2.0**i) for i in reversed(range(8)))
    # domination scale grid
    return tuple(float(g) for g in np.geomspace(1e-3 * space.r_max,
                                                space.r_max, 12))


def config_from_dict(cfg: dict, base_dir: str | None = None) -> ExperimentConfig:
    """Validate a raw config dictionary into an ExperimentConfig.

    Unknown keys at any level are rejected; grid descriptors are resolved;
    per-kind requirements (declared power-law bounds, exponent sums,
    admissible profile moments) are enforced here so runners can assume a
    coherent configuration.
    """
    if not isinstance(cfg, dict):
        raise ValueError("experiment config must be a JSON object")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown config key(s): {sorted(unknown)}")
    kind = cfg.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ValueError(f"unknown experiment kind {kind!r}; expected one of "
                         f"{EXPERIMENT_KINDS}")
    stray = set(cfg) - _KIND_KEYS[kind]
    if stray:
        raise ValueError(f"key(s) {sorted(stray)} do not apply to "
                         f"{kind} experiments")
    if "space" not in cfg:
        raise ValueError("config requires a 'space' descriptor")

    space_cfg = dict(cfg["space"])
    if space_cfg.get("kind") == "finite-cloud" and "csv" in space_cfg:
        path = space_cfg["csv"]
        if base_dir is not None and not os.path.isabs(path):
            space_cfg["csv"] = os.path.abspath(os.path.join(base_dir, path))
    space = space_from_config(space_cfg)

    k = cfg.get("k", 2 if kind == "verify" else None)
    if k is None:
        raise ValueError(f"{kind} config requires the tuple order 'k'")
    k = int(k)
    if k < 1:
        raise ValueError(f"tuple order k must be >= 1, got {k}")

    profile_cfg = dict(cfg.get("profile", {"kind": "indicator"}))
    profile = profile_from_config(profile_cfg)
    if space.ahlfors is not None:
        profile.validate(k, space.alpha)
    elif kind in ("ratios", "domination"):
        raise ValueError(f"{kind} experiments need declared power-law bounds "
                         f"on the space (gamma, Gamma, alpha)")

    functions = tuple(dict(f) for f in cfg.get("functions", ()))
    fields = [field_from_config(f) for f in functions]
    if kind in ("domination", "convergence"):
        if len(fields) != k:
            raise ValueError(f"{kind} needs exactly k={k} functions, "
                             f"got {len(fields)}")
    if kind == "convergence":
        inv_sum = sum(0.0 if f.p == math.inf else 1.0 / f.p for f in fields)
        if abs(inv_sum - 1.0) > 1e-9:
            raise ValueError(
                f"sum of 1/p_j = {inv_sum:.12g} != 1 for convergence"
            )

    eps_grid = None
    r_grid = None
    if kind == "convergence":
        eps_grid = (_resolve_grid(cfg["eps_grid"], "eps_grid", space.r_max)
                    if "eps_grid" in cfg else _default_grid(space, kind))
    elif kind == "domination":
        eps_grid = (_resolve_grid(cfg["eps_grid"], "eps_grid", space.r_max)
                    if "eps_grid" in cfg else _default_grid(space, kind))
        if "r_grid" in cfg:
            r_grid = _resolve_grid(cfg["r_grid"], "r_grid",
                                   2.0 * space.diameter)
    elif kind == "ratios":
        r_grid = (_resolve_grid(cfg["r_grid"], "r_grid", space.r_max)
                  if "r_grid" in cfg else _default_grid(space, kind))

    mc_samples = int(cfg.get("mc_samples", DEFAULT_MC_SAMPLES))
    if mc_samples < 16:
        raise ValueError(f"mc_samples must be at least 16, got {mc_samples}")
    eval_points = int(cfg.get("eval_points", DEFAULT_EVAL_POINTS))
    if eval_points < 1:
        raise ValueError(f"eval_points must be positive, got {eval_points}")

    seed = cfg.get("seed")
    if seed is not None:
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must fit an unsigned 64-bit value, got {seed}")

    prefix = str(cfg.get("prefix", "run"))

    return ExperimentConfig(
        kind=kind, space=space_cfg, k=k, profile=profile_cfg,
        functions=functions, eps_grid=eps_grid, r_grid=r_grid,
        mc_samples=mc_samples, eval_points=eval_points, seed=seed,
        prefix=prefix,
    )


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Report:
    """Rows plus summary for one experiment run."""

    kind: str
    columns: tuple
    rows: tuple
    summary: dict

    @property
    def passed(self) -> bool:
        return self.summary["violations"] == 0


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(report: Report) -> str:
    lines = [",".join(report.columns)]
    for row in report.rows:
        lines.append(",".join(_format_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(report: Report, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(report))


def write_summary(report: Report, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(report.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _base_summary(cfg: ExperimentConfig, seed: int, space: Space) -> dict:
    return {
        "kind": cfg.kind,
        "space": space.kind,
        "seed": seed,
        "config_sha256": cfg.sha256(),
        "code_version": __version__,
    }


# ---------------------------------------------------------------------------
# Evaluation points
# ---------------------------------------------------------------------------

def _point_key(x) -> str:
    if isinstance(x, np.ndarray):
        return ",".join(repr(float(v)) for v in x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _point_json(x):
    if isinstance(x, np.ndarray):
        return [float(v) for v in x]
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(x)


def _adversarial_points(space: Space, fields) -> list:
    """Centers of the test functions plus fixed space representatives."""
    picks = []
    for f in fields:
        c = getattr(f, "center", None)
        if c is None:
            continue
        if space.is_finite:
            if isinstance(c, (int, np.integer)) and 0 <= int(c) < space.carrier_size:
                picks.append(int(c))
        elif space.kind == "torus":
            arr = np.asarray(c, dtype=np.float64)
            if arr.shape == (space.dim,):
                picks.append(arr)
        elif np.isscalar(c) or np.asarray(c).ndim == 0:
            picks.append(float(c))
    if space.is_finite:
        picks.extend([0, space.carrier_size - 1])
    elif space.kind == "torus":
        picks.append(np.zeros(space.dim))
    else:
        picks.append(0.0)
    return picks


def _eval_points(space: Space, fields, count: int, stream: RandomStream):
    """Deterministic evaluation centers: adversarial picks then mu-random."""
    points = []
    seen = set()
    for x in _adversarial_points(space, fields):
        key = _point_key(x)
        if key not in seen:
            seen.add(key)
            points.append(x)
        if len(points) >= count:
            return points[:count]
    gen = stream.generator()
    budget = 8 * (count + 8)
    raw = space.sample(budget, gen)
    for i in range(budget):
        x = raw[i]
        if isinstance(x, np.ndarray) and x.ndim == 0:
            x = x.item()
        if isinstance(x, (np.integer,)):
            x = int(x)
        elif isinstance(x, (np.floating,)):
            x = float(x)
        key = _point_key(np.asarray(x) if isinstance(x, list) else x)
        if key in seen:
            continue
        seen.add(key)
        points.append(x)
        if len(points) >= count:
            break
    return points


# ---------------------------------------------------------------------------
# Worker plumbing
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _context(cfg_json: str):
    cfg = config_from_dict(json.loads(cfg_json))
    space = cfg.build_space()
    profile = cfg.build_profile()
    fields = cfg.build_fields()
    return cfg, space, profile, fields


def _run_tasks(task_fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [task_fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        chunk = max(1, len(tasks) // (4 * jobs))
        return list(pool.map(task_fn, tasks, chunksize=chunk))


def _resolve_seed(cfg: ExperimentConfig, seed: int | None) -> int:
    if seed is not None:
        return int(seed)
    if cfg.seed is not None:
        return int(cfg.seed)
    raise ValueError("no seed: pass one explicitly or set it in the config")


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _check_metric_axioms(space: Space, n: int, stream: RandomStream):
    gen = stream.generator()
    x, y, z = (space.sample(n, gen) for _ in range(3))
    dxy = np.asarray(space.distance(x, y), dtype=np.float64)
    dyx = np.asarray(space.distance(y, x), dtype=np.float64)
    dxz = np.asarray(space.distance(x, z), dtype=np.float64)
    dzy = np.asarray(space.distance(z, y), dtype=np.float64)

    asym = np.abs(dxy - dyx)
    yield ("symmetry", n, int(np.count_nonzero(asym > 0)), float(asym.max()))

    ax, ay = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if ax.ndim == 1:
        distinct = ax != ay
    else:
        distinct = np.any(ax != ay, axis=1)
    zeros = (dxy == 0.0) & distinct
    yield ("separation", n, int(np.count_nonzero(zeros)), 0.0)

    denom = dxz + dzy
    ok = denom > 0
    ratios = dxy[ok] / denom[ok]
    worst = float(ratios.max()) if ratios.size else 0.0
    bad = int(np.count_nonzero(ratios > space.kappa * (1 + 1e-9)))
    yield ("quasi_triangle", int(ok.sum()), bad, worst)


def _check_measure(space: Space, n: int, stream: RandomStream):
    bounds = space.ahlfors
    if bounds is None:
        return
    gen = stream.generator()
    m = max(64, n // 100)
    xs = space.sample(m, gen)
    lo_r = max(space.r_min, 1e-4 * space.r_max)
    radii = np.exp(gen.uniform(np.log(lo_r), np.log(space.r_max), m))
    ratio = np.array([
        space.ball_measure(xs[i], float(radii[i])) / radii[i] ** bounds.alpha
        for i in range(m)
    ])
    bad = int(np.count_nonzero((ratio < bounds.gamma * (1 - 1e-9))
                               | (ratio > bounds.Gamma * (1 + 1e-9))))
    worst = float(np.max(np.maximum(ratio / bounds.Gamma,
                                    bounds.gamma / ratio)))
    yield ("ball_measure_bounds", m, bad, worst)

    radii2 = np.exp(gen.uniform(np.log(lo_r), np.log(space.r_max / 2), m))
    dr = np.array([
        space.ball_measure(xs[i], 2 * float(radii2[i]))
        / space.ball_measure(xs[i], float(radii2[i]))
        for i in range(m)
    ])
    A = space.doubling_A
    yield ("doubling", m, int(np.count_nonzero(dr > A * (1 + 1e-9))),
           float(dr.max() / A))


def _check_rho(space: Space, k: int, n: int, stream: RandomStream):
    gen = stream.generator()
    m = max(256, n // 20)
    cols = [np.asarray(space.sample(m, gen)) for _ in range(k + 1)]
    tuples = np.stack(cols, axis=1)
    rho = np.asarray(space.tuple_radius(tuples), dtype=np.float64)
    diam = np.zeros(m)
    for i in range(k + 1):
        for j in range(i + 1, k + 1):
            diam = np.maximum(diam, np.asarray(
                space.distance(cols[i], cols[j]), dtype=np.float64))
    upper_bad = rho > diam * (1 + 1e-9) + _DUST
    lower_bad = rho < diam / (2 * space.kappa) * (1 - 1e-9) - _DUST
    pos = diam > 0
    worst = float(np.max(rho[pos] / diam[pos])) if np.any(pos) else 0.0
    yield ("rho_sandwich", m,
           int(np.count_nonzero(upper_bad | lower_bad)), worst)


def _check_sections(space: Space, k: int, n: int, stream: RandomStream):
    gen = stream.generator()
    per = max(64, n // 100)
    inner_bad = outer_bad = 0
    inner_n = outer_n = 0
    worst = 0.0
    for t in range(10):
        x = space.sample(1, gen)[0]
        if isinstance(x, np.integer):
            x = int(x)
        r = float(np.exp(gen.uniform(np.log(max(space.r_min / 2, 1e-4 * space.r_max)),
                                     np.log(space.r_max))))
        # Product-ball tuples must land inside the section.
        cols = [np.asarray(space.sample_ball(x, r, per, gen))
                for _ in range(k)]
        anchored = np.stack(
            [np.broadcast_to(np.asarray(x), cols[0].shape)] + cols, axis=1)
        rho = np.asarray(space.tuple_radius(anchored), dtype=np.float64)
        inner_bad += int(np.count_nonzero(rho >= r))
        inner_n += per
        worst = max(worst, float(rho.max() / r))
        # Tuples with an escaped coordinate must sit outside the section
        # (skipped when the enlarged ball already swallows the space).
        if space.ball_measure(x, 2 * space.kappa * r) >= space.total_mass:
            continue
        far = np.asarray(space.sample_ball_complement(
            x, 2 * space.kappa * r, per, gen))
        rest = [np.asarray(space.sample(per, gen)) for _ in range(k - 1)]
        anchored = np.stack(
            [np.broadcast_to(np.asarray(x), far.shape), far] + rest, axis=1)
        rho = np.asarray(space.tuple_radius(anchored), dtype=np.float64)
        outer_bad += int(np.count_nonzero(rho < r * (1 - 1e-9)))
        outer_n += per
    yield ("section_inner_inclusion", inner_n, inner_bad, worst)
    yield ("section_outer_exclusion", outer_n, outer_bad, 0.0)


def _check_profile(space: Space, k: int, profile: KernelProfile):
    ts = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, 1001)])
    vals = profile(ts)
    inc = np.diff(vals)
    yield ("profile_monotone", ts.size, int(np.count_nonzero(inc > 1e-15)),
           float(max(inc.max(), 0.0)))
    if space.ahlfors is not None:
        closed = profile.moment(k, space.alpha)
        quad = profile.moment_quadrature(k, space.alpha)
        rel = abs(closed - quad) / closed
        yield ("moment_closed_form", 1, int(rel > 1e-6), float(rel))


def _check_normalization(space: Space, k: int, profile: KernelProfile,
                         n: int, stream: RandomStream):
    ones = [FunctionField(kind="constant", p=math.inf)] * k
    bad = 0
    worst = 0.0
    scales = [0.45 * space.r_max, 0.1 * space.r_max]
    for i, eps in enumerate(scales):
        est = phi_mean(space, profile, ones, _default_center(space), eps,
                       max(1000, n // 20), stream.substream(i))
        err = abs(est.value - 1.0)
        worst = max(worst, err)
        if err > 3 * est.stderr + _DUST:
            bad += 1
    yield ("kernel_mean_of_one", len(scales), bad, worst)


def _check_product_difference(stream: RandomStream):
    gen = stream.generator()
    trials = 1000
    bad = 0
    worst = 0.0
    for _ in range(trials):
        k = int(gen.integers(1, 9))
        a = gen.uniform(-10, 10, k)
        b = gen.uniform(-10, 10, k)
        terms, total = product_difference(a, b)
        direct = float(np.prod(a) - np.prod(b))
        scale = max(1.0, abs(float(np.prod(a))), abs(float(np.prod(b))))
        err = abs(total - direct) / scale
        worst = max(worst, err)
        if err > 1e-12:
            bad += 1
    yield ("product_difference", trials, bad, worst)


def _default_center(space: Space):
    if space.is_finite:
        return 0
    if space.kind == "torus":
        return np.zeros(space.dim)
    return 0.0


def run_verify(cfg: ExperimentConfig, seed: int | None = None,
               jobs: int = 1) -> Report:
    """Run the invariant battery; one row per check."""
    seed = _resolve_seed(cfg, seed)
    space = cfg.build_space()
    profile = cfg.build_profile()
    base = RandomStream(seed=seed)
    n = cfg.mc_samples

    rows = []
    checks = []
    checks.extend(_check_metric_axioms(space, n, base.substream(1)))
    checks.extend(_check_measure(space, n, base.substream(2)))
    checks.extend(_check_rho(space, cfg.k, n, base.substream(3)))
    checks.extend(_check_sections(space, cfg.k, n, base.substream(4)))
    checks.extend(_check_profile(space, cfg.k, profile))
    checks.extend(_check_normalization(space, cfg.k, profile, n,
                                       base.substream(5)))
    checks.extend(_check_product_difference(base.substream(6)))

    for name, trials, violations, worst in checks:
        rows.append((space.kind, name, trials, violations, worst,
                     violations == 0))

    summary = _base_summary(cfg, seed, space)
    summary.update({
        "rows": len(rows),
        "violations": sum(r[3] for r in rows),
        "failed_checks": [r[1] for r in rows if not r[5]],
        "kappa_declared": space.kappa,
    })
    return Report(kind="verify", columns=COLUMNS["verify"],
                  rows=tuple(rows), summary=summary)


# ---------------------------------------------------------------------------
# ratios
# ---------------------------------------------------------------------------

def _ratio_task(args):
    cfg_json, seed, xi, ri, x_json = args
    cfg, space, profile, _ = _context(cfg_json)
    x = _decode_point(space, x_json)
    k = cfg.k
    r = cfg.r_grid[ri]
    bounds = space.ahlfors
    consts = constants_for(space, k)
    s_phi = profile.moment(k, bounds.alpha)
    scale = r ** (k * bounds.alpha)
    base = RandomStream(seed=seed)
    row_stream = base.substream(1 + xi * len(cfg.r_grid) + ri)

    out = []
    try:
        est = measure_section_mc(space, Section(center=x, radius=r, order=k),
                                 cfg.mc_samples, row_stream.substream(1))
        out.append(("section_ratio", est.value / scale, est.stderr / scale,
                    bounds.gamma**k,
                    (2 * space.kappa) ** (bounds.alpha * k) * bounds.Gamma**k))
    except ResolutionError as err:
        out.append(("section_ratio", None, str(err), None, None))
    try:
        est = j_normalizer(space, profile, x, r, cfg.mc_samples,
                           row_stream.substream(2), k=k)
        out.append(("j_ratio", est.value / (scale * s_phi),
                    est.stderr / (scale * s_phi), consts.C1, consts.C2))
    except ResolutionError as err:
        out.append(("j_ratio", None, str(err), None, None))
    return (xi, ri), out


def _decode_point(space: Space, x_json):
    if isinstance(x_json, list):
        return np.asarray(x_json, dtype=np.float64)
    if space.is_finite:
        return int(x_json)
    return float(x_json)


def run_ratios(cfg: ExperimentConfig, seed: int | None = None,
               jobs: int = 1) -> Report:
    """Power-law ratio corridor for section measures and normalizers."""
    seed = _resolve_seed(cfg, seed)
    space = cfg.build_space()
    fields = cfg.build_fields()
    base = RandomStream(seed=seed)
    xs = _eval_points(space, fields, cfg.eval_points, base.substream(0))
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)

    tasks = [(cfg_json, seed, xi, ri, _point_json(x))
             for xi, x in enumerate(xs) for ri in range(len(cfg.r_grid))]
    results = dict(_run_tasks(_ratio_task, tasks, jobs))

    rows = []
    excluded = []
    observed = {"section_ratio": [], "j_ratio": []}
    for xi in range(len(xs)):
        x_id = f"x{xi:03d}"
        for ri, r in enumerate(cfg.r_grid):
            for quantity, value, err, lo, hi in results[(xi, ri)]:
                if value is None:
                    excluded.append({"x_id": x_id, "r": r,
                                     "quantity": quantity, "reason": err})
                    continue
                slack = 3 * err + _DUST * max(1.0, hi)
                ok = (lo - slack) <= value <= (hi + slack)
                rows.append((space.kind, x_id, r, quantity, value, err,
                             lo, hi, bool(ok)))
                observed[quantity].append(value)

    summary = _base_summary(cfg, seed, space)
    summary.update({
        "rows": len(rows),
        "violations": sum(1 for r in rows if not r[8]),
        "excluded": excluded,
        "eval_points": [_point_json(x) for x in xs],
        "observed_range": {
            q: ([min(v), max(v)] if v else None)
            for q, v in observed.items()
        },
    })
    return Report(kind="ratios", columns=COLUMNS["ratios"],
                  rows=tuple(rows), summary=summary)


# ---------------------------------------------------------------------------
# domination
# ---------------------------------------------------------------------------

def _domination_task(args):
    cfg_json, seed, xi, x_json = args
    cfg, space, profile, fields = _context(cfg_json)
    x = _decode_point(space, x_json)
    k = cfg.k
    consts = constants_for(space, k)
    base = RandomStream(seed=seed)
    row = base.substream(1 + xi)
    n = cfg.mc_samples

    if space.is_finite:
        # Exhaustive scan over every attainable radius: the genuine suprema,
        # so the inequalities are tested with zero slack.
        eps_grid = None
    else:
        eps_grid = np.asarray(cfg.eps_grid)
    if cfg.r_grid is not None:
        r_grid = np.asarray(cfg.r_grid)
    elif eps_grid is not None:
        r_grid = 2 * space.kappa * eps_grid
    else:
        r_grid = None
    hl_grid = None if r_grid is None else 2 * space.kappa * r_grid

    try:
        ps = phi_star(space, profile, fields, x, eps_grid, n,
                      row.substream(1))
        ms = multilinear_maximal(space, fields, x, r_grid, n,
                                 row.substream(2))
        hls = [hl_maximal(space, f, x, hl_grid, n, row.substream(3 + i))
               for i, f in enumerate(fields)]
    except ResolutionError as err:
        return xi, ("excluded", str(err))

    prod_hl = math.prod(e.value for e in hls)
    # Linear error propagation for the product of per-slot estimates.
    se_prod = sum(
        e.stderr * math.prod(abs(o.value) for j, o in enumerate(hls) if j != i)
        for i, e in enumerate(hls)
    )
    bound_c = consts.C_domination * ms.value
    bound_p33 = consts.prop33_bound * prod_hl
    slack32 = 3 * (ps.stderr + consts.C_domination * ms.stderr)
    slack33 = 3 * (ms.stderr + consts.prop33_bound * se_prod)
    pass32 = ps.value <= bound_c + slack32 + _DUST * max(1.0, bound_c)
    pass33 = ms.value <= bound_p33 + slack33 + _DUST * max(1.0, bound_p33)
    return xi, ("row", (ps.value, ps.stderr, ms.value, ms.stderr, prod_hl,
                        bound_c, bound_p33, bool(pass32), bool(pass33)))


def run_domination(cfg: ExperimentConfig, seed: int | None = None,
                   jobs: int = 1) -> Report:
    """Maximal-operator domination with both explicit constants."""
    seed = _resolve_seed(cfg, seed)
    space = cfg.build_space()
    fields = cfg.build_fields()
    consts = constants_for(space, cfg.k)
    base = RandomStream(seed=seed)
    xs = _eval_points(space, fields, cfg.eval_points, base.substream(0))
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)

    tasks = [(cfg_json, seed, xi, _point_json(x)) for xi, x in enumerate(xs)]
    results = dict(_run_tasks(_domination_task, tasks, jobs))

    rows = []
    excluded = []
    max_ratio = 0.0
    for xi in range(len(xs)):
        x_id = f"x{xi:03d}"
        tag, payload = results[xi]
        if tag == "excluded":
            excluded.append({"x_id": x_id, "reason": payload})
            continue
        rows.append((space.kind, x_id) + payload)
        ps, _, ms = payload[0], payload[1], payload[2]
        if ms > 0:
            max_ratio = max(max_ratio, ps / ms)

    summary = _base_summary(cfg, seed, space)
    summary.update({
        "rows": len(rows),
        "violations": sum(1 for r in rows if not (r[9] and r[10])),
        "excluded": excluded,
        "eval_points": [_point_json(x) for x in xs],
        "constants": {
            "C_domination": consts.C_domination,
            "prop33_bound": consts.prop33_bound,
        },
        # Empirical sup of the scale-sup mean over the section maximal
        # operator; boundedness of this ratio is the content of the
        # domination theorem, so the observed maximum is a useful margin.
        "max_phi_star_over_m": max_ratio,
    })
    return Report(kind="domination", columns=COLUMNS["domination"],
                  rows=tuple(rows), summary=summary)


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------

def _convergence_task(args):
    cfg_json, seed, xi, ei, x_json = args
    cfg, space, profile, fields = _context(cfg_json)
    x = _decode_point(space, x_json)
    eps = cfg.eps_grid[ei]
    base = RandomStream(seed=seed)
    row = base.substream(1 + xi * len(cfg.eps_grid) + ei)
    n = cfg.mc_samples

    target = math.prod(
        float(f.evaluate(space, _singleton(space, x))[0]) for f in fields)
    try:
        est = phi_mean(space, profile, fields, x, eps, n, row.substream(1))
        dev = mean_deviation(space, profile, fields, x, eps, n,
                             row.substream(2))
    except ResolutionError as err:
        return (xi, ei), ("excluded", str(err))
    return (xi, ei), ("row", (est.value, target, abs(est.value - target),
                              dev.value, dev.stderr))


def _singleton(space: Space, x):
    if isinstance(x, np.ndarray):
        return x[np.newaxis, :]
    return np.asarray([x])


def run_convergence(cfg: ExperimentConfig, seed: int | None = None,
                    jobs: int = 1) -> Report:
    """Kernel means against point values along a shrinking scale grid.

    Rows are ordered per center from the largest scale down, so each block
    reads as one trajectory of the limit.  The summary adds the mean
    deviation per scale, a fitted log-log slope over its decreasing tail,
    and, when every function has compact support, the dyadic tail envelope
    at each scale.
    """
    seed = _resolve_seed(cfg, seed)
    space = cfg.build_space()
    profile = cfg.build_profile()
    fields = cfg.build_fields()
    base = RandomStream(seed=seed)
    xs = _eval_points(space, fields, cfg.eval_points, base.substream(0))
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)
    n_eps = len(cfg.eps_grid)

    tasks = [(cfg_json, seed, xi, ei, _point_json(x))
             for xi, x in enumerate(xs) for ei in range(n_eps)]
    results = dict(_run_tasks(_convergence_task, tasks, jobs))

    rows = []
    excluded = []
    per_eps = {ei: [] for ei in range(n_eps)}
    for xi in range(len(xs)):
        x_id = f"x{xi:03d}"
        for ei in reversed(range(n_eps)):          # largest scale first
            eps = cfg.eps_grid[ei]
            tag, payload = results[(xi, ei)]
            if tag == "excluded":
                excluded.append({"x_id": x_id, "epsilon": eps,
                                 "reason": payload})
                continue
            rows.append((space.kind, x_id, eps) + payload)
            per_eps[ei].append(payload[3])

    mean_err = {cfg.eps_grid[ei]: (float(np.mean(v)) if v else None)
                for ei, v in per_eps.items()}
    slope = _tail_slope(cfg.eps_grid, per_eps)

    summary = _base_summary(cfg, seed, space)
    summary.update({
        "rows": len(rows),
        "violations": 0,
        "excluded": excluded,
        "eval_points": [_point_json(x) for x in xs],
        "mean_thm41_err": {repr(k): v for k, v in mean_err.items()},
        "loglog_slope": slope,
    })
    if fields and all(f.kind in ("bump", "step") for f in fields):
        sigma = min(f.width for f in fields)
        alpha = space.alpha if space.ahlfors is not None else 1.0
        summary["tail_envelope"] = {
            "sigma": sigma,
            "per_epsilon": [
                {"epsilon": eps,
                 "sum": tail_envelope_sum(profile, cfg.k, alpha, sigma,
                                          space.kappa, eps)}
                for eps in cfg.eps_grid
            ],
        }
    return Report(kind="convergence", columns=COLUMNS["convergence"],
                  rows=tuple(rows), summary=summary)


def _tail_slope(eps_grid, per_eps) -> float | None:
    """Log-log slope of the mean deviation over its decreasing tail.

    The tail is the longest run of scales, ending at the smallest, along
    which the mean deviation decreases; a slope needs at least two usable
    scales with positive mean error.
    """
    means = []
    for ei in range(len(eps_grid)):
        vals = per_eps[ei]
        if vals and all(v is not None for v in vals):
            m = float(np.mean(vals))
            if m > 0:
                means.append((eps_grid[ei], m))
    means.sort()                                    # ascending scale
    if len(means) < 2:
        return None
    tail = [means[0]]
    for eps, m in means[1:]:
        if m >= tail[-1][1]:
            tail.append((eps, m))
        else:
            break
    if len(tail) < 2:
        return None
    xs = np.log([t[0] for t in tail])
    ys = np.log([t[1] for t in tail])
    return float(np.polyfit(xs, ys, 1)[0])


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

_RUNNERS = {
    "verify": run_verify,
    "ratios": run_ratios,
    "domination": run_domination,
    "convergence": run_convergence,
}


def run(cfg: ExperimentConfig, seed: int | None = None,
        jobs: int = 1) -> Report:
    """Dispatch a config to its experiment runner."""
    return _RUNNERS[cfg.kind](cfg, seed=seed, jobs=jobs)

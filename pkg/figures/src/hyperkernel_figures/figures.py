"""Render experiment CSV tables into static figures.

The input tables come from the ``hyperkernel`` command line tool and follow
one of three fixed schemas (ratios, domination, convergence).  Rendering
is a pure function of the table content: rows are sorted into canonical
order before plotting, so shuffling the input rows changes nothing.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SCHEMAS = {
    "ratios": ["space", "x_id", "r", "quantity", "estimate", "stderr",
               "lower_bound", "upper_bound", "pass"],
    "domination": ["space", "x_id", "phi_star", "stderr_ps", "m_sections",
                   "stderr_m", "prod_hl", "bound_c", "bound_prop33",
                   "pass_thm32", "pass_prop33"],
    "convergence": ["space", "x_id", "epsilon", "estimate", "target",
                    "abs_err", "thm41_err", "stderr"],
}

_TEXT_COLUMNS = {"space", "x_id", "quantity"}
_BOOL_COLUMNS = {"pass", "pass_thm32", "pass_prop33"}


class SchemaError(ValueError):
    """The input table does not match the fixed schema for its kind."""


@dataclass(frozen=True)
class FigureSpec:
    """What to read, which renderer to apply, and where to write.

    Parameters
    ----------
    csv_path:
        Input table produced by the experiment runner.
    kind:
        One of ``ratios``, ``domination``, ``convergence``.
    out_path:
        Output image; the format follows the file extension.
    dpi:
        Raster resolution for bitmap formats.
    """

    csv_path: Path
    kind: str
    out_path: Path
    dpi: int = 150

    def __post_init__(self) -> None:
        if self.kind not in SCHEMAS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected "
                              f"one of {sorted(SCHEMAS)}")


@dataclass(frozen=True)
class RenderResult:
    """What a render call drew and where it landed.

    ``series`` holds the canonically sorted numeric data behind every
    plotted element, keyed by series label, so two tables with the same
    rows in any order produce equal results.  For domination figures
    ``points_above_reference`` counts rows whose operator value exceeds
    the row's own domination bound.
    """

    out_path: Path
    rows: int
    series: dict
    points_above_reference: int = 0


def read_table(path: Path, kind: str) -> list[dict]:
    """Parse and validate one CSV table against its fixed schema."""
    if kind not in SCHEMAS:
        raise SchemaError(f"unknown figure kind {kind!r}; expected one of "
                          f"{sorted(SCHEMAS)}")
    schema = SCHEMAS[kind]
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a {kind} header")
        missing = [c for c in schema if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing} "
                              f"for kind {kind!r}")
        if header != schema:
            raise SchemaError(f"{path}: header {header} does not match the "
                              f"{kind} schema {schema}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(schema):
                raise SchemaError(f"{path}:{lineno}: expected "
                                  f"{len(schema)} cells, got {len(raw)}")
            row = {}
            for name, cell in zip(schema, raw):
                if name in _TEXT_COLUMNS:
                    row[name] = cell
                elif name in _BOOL_COLUMNS:
                    if cell not in ("true", "false"):
                        raise SchemaError(f"{path}:{lineno}: column {name} "
                                          f"must be true or false, got "
                                          f"{cell!r}")
                    row[name] = cell == "true"
                else:
                    try:
                        row[name] = float(cell)
                    except ValueError:
                        raise SchemaError(f"{path}:{lineno}: column {name} "
                                          f"is not a number: {cell!r}")
            rows.append(row)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def render(fspec: FigureSpec) -> RenderResult:
    """Render one table to one image and report what was drawn."""
    rows = read_table(fspec.csv_path, fspec.kind)
    renderer = {"ratios": _render_ratios,
                "domination": _render_domination,
                "convergence": _render_convergence}[fspec.kind]
    fig, series, above = renderer(rows)
    fspec.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(fspec.out_path, dpi=fspec.dpi)
    plt.close(fig)
    return RenderResult(out_path=fspec.out_path, rows=len(rows),
                        series=series, points_above_reference=above)


def _log_floor(values: np.ndarray) -> np.ndarray:
    """Clip zeros to a decade below the smallest positive value so exact
    results stay visible on logarithmic axes."""
    positive = values[values > 0]
    floor = float(positive.min()) / 10.0 if positive.size else 1.0
    return np.maximum(values, floor)


def _render_convergence(rows: list[dict]):
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    series: dict = {}
    by_x = defaultdict(list)
    for row in rows:
        by_x[(row["space"], row["x_id"])].append(row)
    for key in sorted(by_x):
        pts = sorted(by_x[key], key=lambda r: r["epsilon"])
        eps = np.array([p["epsilon"] for p in pts])
        err = np.array([p["abs_err"] for p in pts])
        sd = np.array([p["stderr"] for p in pts])
        label = f"{key[0]} {key[1]}"
        ax.errorbar(eps, _log_floor(err), yerr=sd, marker="o", ms=3,
                    lw=1.0, capsize=2, label=label)
        series[label] = tuple(zip(eps.tolist(), err.tolist(), sd.tolist()))

    # Dashed envelope: the theoretical rate column averaged per scale.
    by_eps = defaultdict(list)
    for row in rows:
        by_eps[row["epsilon"]].append(row["thm41_err"])
    eps = np.array(sorted(by_eps))
    envelope = np.array([float(np.mean(by_eps[e])) for e in eps])
    if np.any(envelope > 0):
        ax.plot(eps, _log_floor(envelope), "k--", lw=1.0, label="rate envelope")
        series["rate envelope"] = tuple(zip(eps.tolist(), envelope.tolist()))

    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("scale")
    ax.set_ylabel("absolute deviation from the product")
    ax.set_title("kernel mean convergence")
    ax.legend(fontsize=7, ncols=2)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return fig, series, 0


def _render_domination(rows: list[dict]):
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    series: dict = {}
    above = 0
    for row in rows:
        if row["phi_star"] > row["bound_c"]:
            above += 1
    for space in sorted({row["space"] for row in rows}):
        pts = sorted((r for r in rows if r["space"] == space),
                     key=lambda r: (r["m_sections"], r["phi_star"], r["x_id"]))
        m = np.array([p["m_sections"] for p in pts])
        ps = np.array([p["phi_star"] for p in pts])
        ax.errorbar(m, ps, xerr=[p["stderr_m"] for p in pts],
                    yerr=[p["stderr_ps"] for p in pts], fmt="o", ms=4,
                    alpha=0.8, label=space)
        series[space] = tuple(zip(m.tolist(), ps.tolist(),
                                  [p["bound_c"] for p in pts]))

    m_all = np.array([row["m_sections"] for row in rows])
    slopes = np.array([row["bound_c"] / row["m_sections"]
                       for row in rows if row["m_sections"] > 0])
    slope = float(np.median(slopes)) if slopes.size else 1.0
    span = np.array([max(m_all.min(), 1e-300), max(m_all.max(), 1e-299)])
    ax.plot(span, span, color="gray", lw=1.0, label="y = x")
    ax.plot(span, slope * span, "k--", lw=1.0, label=f"y = {slope:.3g} x")
    series["reference slope"] = (slope,)

    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sections maximal value")
    ax.set_ylabel("kernel maximal value")
    ax.set_title(f"domination scatter ({above} above the bound)")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return fig, series, above


def _render_ratios(rows: list[dict]):
    quantities = sorted({row["quantity"] for row in rows})
    fig, axes = plt.subplots(len(quantities), 1, squeeze=False,
                             figsize=(6.4, 3.2 * len(quantities)))
    series: dict = {}
    for ax, quantity in zip(axes[:, 0], quantities):
        pts = [r for r in rows if r["quantity"] == quantity]
        by_r = defaultdict(list)
        for p in pts:
            by_r[p["r"]].append(p)
        radii = np.array(sorted(by_r))
        lo_env = np.array([min(p["estimate"] - 3 * p["stderr"]
                               for p in by_r[r]) for r in radii])
        hi_env = np.array([max(p["estimate"] + 3 * p["stderr"]
                               for p in by_r[r]) for r in radii])
        mid = np.array([float(np.median([p["estimate"] for p in by_r[r]]))
                        for r in radii])
        ax.fill_between(radii, lo_env, hi_env, alpha=0.3,
                        label="3 stderr envelope")
        ax.plot(radii, mid, marker="o", ms=3, lw=1.0, label="median estimate")
        lower = min(p["lower_bound"] for p in pts)
        upper = max(p["upper_bound"] for p in pts)
        ax.axhline(lower, color="k", ls="--", lw=1.0, label="corridor")
        ax.axhline(upper, color="k", ls="--", lw=1.0)
        ax.set_xscale("log")
        ax.set_xlabel("radius")
        ax.set_ylabel(quantity)
        ax.legend(fontsize=7)
        ax.grid(True, which="both", alpha=0.3)
        series[quantity] = tuple(zip(radii.tolist(), mid.tolist(),
                                     lo_env.tolist(), hi_env.tolist()))
        series[f"{quantity} corridor"] = (lower, upper)
    axes[0, 0].set_title("normalized measures against the corridor")
    fig.tight_layout()
    return fig, series, 0

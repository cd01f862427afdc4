"""CSV tables and SVG figures for analysis bundles.

Heatmaps are drawn one rectangle per cell, each tagged ``cell-<i>-<j>``,
so a cell's color can be traced back to the matrix entry it encodes.
Output bytes are reproducible: SVG ids are salted with a fixed string and
no creation date is written.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import colormaps
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.cm import ScalarMappable
from matplotlib.colors import Normalize
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

from .errors import ComparisonError, FormatError
from .geometry import CompressionCurves, SymMatrixReport, VariabilitySummary

SEQUENTIAL_CMAP = "viridis"
DIVERGING_CMAP = "bwr"
CMAP_LEVELS = 256

SVG_RC = {"svg.hashsalt": "hsigeo", "svg.fonttype": "path", "path.simplify": False}

TITLES = {
    "distance": "Class mean distances",
    "angle_degrees": "Class mean angles (degrees)",
    "margin": "Maximum margins",
    "delta": "Difference",
}


def fmt(v) -> str:
    """6 significant digits; absent (NaN) entries become empty cells."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    v = float(v)
    if math.isnan(v):
        return ""
    s = f"{v:.6g}"
    return "0" if s == "-0" else s


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _id(c) -> str:
    return str(int(c)) if float(c).is_integer() else str(c)


def write_matrix_csv(report: SymMatrixReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["class"] + [_id(c) for c in report.class_ids])
        for cid, row in zip(report.class_ids, report.values):
            w.writerow([_id(cid)] + [fmt(v) for v in row])


def read_matrix_csv(path, kind: str) -> SymMatrixReport:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["class"]:
        raise FormatError(f"{path}: missing class header")
    col_ids = rows[0][1:]
    row_ids = [r[0] for r in rows[1:]]
    if col_ids != row_ids:
        raise FormatError(f"{path}: row ids {row_ids} differ from column ids {col_ids}")
    try:
        values = [[float(v) if v != "" else np.nan for v in r[1:]] for r in rows[1:]]
        ids = np.array([int(c) for c in col_ids])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return SymMatrixReport(np.array(values, dtype=np.float64).reshape(len(ids), len(ids)), kind, ids)


def write_means_csv(means: np.ndarray, class_ids, path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["class"] + [f"x{i}" for i in range(means.shape[1])])
        for cid, row in zip(class_ids, means):
            w.writerow([_id(cid)] + [fmt(v) for v in row])


def write_variability_csv(var: VariabilitySummary, counts, class_ids, path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["class", "count", "variability"])
        for cid, n, v in zip(class_ids, counts, var.per_class):
            w.writerow([_id(cid), int(n), fmt(v)])
        w.writerow(["mean", "", fmt(var.mean)])
        w.writerow(["std", "", fmt(var.std)])


def write_compression_csv(curves: CompressionCurves, path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(
            ["k", "fraction", "average"] + [f"class_{_id(c)}" for c in curves.class_ids]
        )
        for t, k in enumerate(curves.dims):
            w.writerow(
                [int(k), fmt(curves.fractions[t]), fmt(curves.average[t])]
                + [fmt(v) for v in curves.per_class[:, t]]
            )


def write_margins_meta_csv(results: dict, class_ids, path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(
            ["class_i", "class_j", "separable", "margin", "iterations", "gap_lower", "gap_upper"]
        )
        for (i, j), res in sorted(results.items()):
            w.writerow(
                [
                    _id(class_ids[i]),
                    _id(class_ids[j]),
                    int(res.separable),
                    fmt(res.margin) if res.separable else "",
                    res.iterations,
                    fmt(res.lower),
                    fmt(res.upper),
                ]
            )


def write_nc_csv(nc, path) -> None:
    """One summary row; statistics in fixed-point with 6 decimals."""
    from .neural_collapse import NC_FIELDS

    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(NC_FIELDS)
        row = nc.row()
        w.writerow([str(row[0])] + [f"{float(v):.6f}" for v in row[1:]])


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def colormap_for(kind: str):
    name = DIVERGING_CMAP if kind == "delta" else SEQUENTIAL_CMAP
    return colormaps[name].resampled(CMAP_LEVELS)


def color_limits(report: SymMatrixReport) -> tuple[float, float]:
    """Color scale of a heatmap: data range, or symmetric about 0 for deltas."""
    vals = report.values[report.present]
    if vals.size == 0:
        return 0.0, 1.0
    if report.kind == "delta":
        r = float(np.max(np.abs(vals)))
        return (-r, r) if r > 0 else (-1.0, 1.0)
    lo, hi = float(vals.min()), float(vals.max())
    if hi <= lo:
        hi = lo + 1.0
    return lo, hi


def _save_svg(fig: Figure, path) -> None:
    FigureCanvasSVG(fig)
    fig.savefig(path, format="svg", metadata={"Date": None})


def render_heatmap(report: SymMatrixReport, path, title: str | None = None) -> None:
    """Draw ``report`` as an SVG grid; absent entries are left blank."""
    with matplotlib.rc_context(SVG_RC):
        m = report.m
        cmap = colormap_for(report.kind)
        lo, hi = color_limits(report)
        norm = Normalize(vmin=lo, vmax=hi)
        size = 2.0 + 0.35 * m
        fig = Figure(figsize=(size + 1.5, size))
        ax = fig.add_subplot(1, 1, 1)
        for i in range(m):
            for j in range(m):
                v = report.values[i, j]
                if np.isnan(v):
                    continue
                rect = Rectangle((j, i), 1, 1, facecolor=cmap(norm(v)), edgecolor="none")
                rect.set_gid(f"cell-{i}-{j}")
                ax.add_patch(rect)
        ticks = np.arange(m) + 0.5
        labels = [_id(c) for c in report.class_ids]
        ax.set_xlim(0, m)
        ax.set_ylim(m, 0)
        ax.set_xticks(ticks, labels, fontsize=7)
        ax.set_yticks(ticks, labels, fontsize=7)
        ax.set_aspect("equal")
        ax.set_title(title or TITLES.get(report.kind, report.kind), fontsize=9)
        sm = ScalarMappable(norm=norm, cmap=cmap)
        cb = fig.colorbar(sm, ax=ax, fraction=0.046, pad=0.04)
        cb.ax.tick_params(labelsize=7)
        vals = report.values[report.present]
        if vals.size:
            note = f"min={fmt(vals.min())}  max={fmt(vals.max())}"
        else:
            note = "no entries"
        ax.set_xlabel(note, fontsize=7)
        _save_svg(fig, path)


def render_compression(curves: CompressionCurves, path) -> None:
    """Per-class (thin) and average (thick) residual error against k/p."""
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(5, 3.6))
        ax = fig.add_subplot(1, 1, 1)
        for c, curve in zip(curves.class_ids, curves.per_class):
            ax.plot(curves.fractions, curve, lw=0.6, alpha=0.5, gid=f"class-{_id(c)}")
        ax.plot(curves.fractions, curves.average, color="k", lw=2.0, gid="average")
        ax.set_xlabel("hyperplane dimension / feature dimension")
        ax.set_ylabel("RMS residual")
        ax.set_title("Average approximation error", fontsize=9)
        ax.set_xlim(0, max(1e-12, float(curves.fractions.max())))
        ax.set_ylim(bottom=0)
        _save_svg(fig, path)


def check_same_classes(a: SymMatrixReport, b: SymMatrixReport, what: str) -> None:
    if not np.array_equal(a.class_ids, b.class_ids):
        raise ComparisonError(
            f"{what}: class ids differ (base {[_id(c) for c in a.class_ids]} "
            f"vs other {[_id(c) for c in b.class_ids]})"
        )


def write_matrix(report: SymMatrixReport, out_dir: Path, stem: str, title=None) -> None:
    """CSV and heatmap from the same in-memory matrix."""
    write_matrix_csv(report, out_dir / f"{stem}.csv")
    render_heatmap(report, out_dir / f"{stem}.svg", title)

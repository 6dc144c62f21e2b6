"""SVG figures derived from the experiment CSV files."""

from __future__ import annotations

import csv
import os
from collections import OrderedDict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..diagnostics import convergence_rate  # noqa: E402
from ..errors import PlotError  # noqa: E402

# keep text as text and make repeated runs byte-identical
matplotlib.rcParams["svg.fonttype"] = "none"
matplotlib.rcParams["svg.hashsalt"] = "entropy-dg"
_META = {"Date": None, "Creator": None}


def read_csv(path):
    """Header and rows (dicts of strings); empty files raise PlotError."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0]:
        raise PlotError(f"{path}: empty CSV", column=None)
    header = rows[0]
    body = [dict(zip(header, r)) for r in rows[1:] if r]
    if not body:
        raise PlotError(f"{path}: no data rows", column=header[0])
    return header, body


def _require(path, header, columns):
    for c in columns:
        if c not in header:
            raise PlotError(f"{path}: missing column {c!r}", column=c)


def _floats(path, rows, column):
    try:
        return np.array([float(r[column]) for r in rows])
    except (KeyError, ValueError):
        raise PlotError(f"{path}: non-numeric values in column {column!r}", column=column) from None


def _save(fig, svg_path):
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata=_META)
    plt.close(fig)


def plot_convergence(csv_path, svg_path, x="h", y="L2_error", group=("N", "quadrature", "flux"),
                     last=3):
    """Log-log error curves, one per group, labelled with the fitted slope.

    Returns ``{group label: slope}`` where the slope is the least-squares
    fit over the ``last`` finest meshes.
    """
    header, rows = read_csv(csv_path)
    group = tuple(g for g in group if g in header)
    _require(csv_path, header, (x, y))
    series = OrderedDict()
    for r in rows:
        series.setdefault(" ".join(f"{g}={r[g]}" for g in group) or y, []).append(r)
    slopes = {}
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, sel in series.items():
        h = _floats(csv_path, sel, x)
        e = _floats(csv_path, sel, y)
        order = np.argsort(h)
        ok = e[order] > 0
        h, e = h[order][ok], e[order][ok]
        if len(h) >= 2:
            slope = convergence_rate(h, e, min(last, len(h)))
            slopes[label] = slope
            label = f"{label} (slope {slope:.4f})"
        ax.loglog(h, e, marker="o", label=label)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.grid(True, which="both", ls=":")
    ax.legend(fontsize=6)
    _save(fig, svg_path)
    return slopes


def plot_timeseries(csv_path, svg_path, x="t", y=("delta_U",), logy=False, label_by=None):
    """Line plot of columns ``y`` against ``x``; ``label_by`` splits rows into series."""
    header, rows = read_csv(csv_path)
    _require(csv_path, header, (x,) + tuple(y) + ((label_by,) if label_by else ()))
    groups = OrderedDict()
    for r in rows:
        groups.setdefault(r[label_by] if label_by else "", []).append(r)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name, sel in groups.items():
        t = _floats(csv_path, sel, x)
        for col in y:
            v = _floats(csv_path, sel, col)
            lab = f"{col} {label_by}={name}" if label_by else col
            if logy:
                ax.semilogy(t, np.abs(v), label=lab)
            else:
                ax.plot(t, v, label=lab)
    ax.set_xlabel(x)
    ax.set_ylabel(", ".join(y))
    ax.grid(True, ls=":")
    ax.legend(fontsize=6)
    _save(fig, svg_path)


def plot_snapshot_1d(csv_path, svg_path, fields=("rho", "p")):
    """Point values as lines and cell averages as filled markers."""
    header, rows = read_csv(csv_path)
    _require(csv_path, header, ("kind", "x") + tuple(fields))
    pts = [r for r in rows if r["kind"] == "point"]
    avg = [r for r in rows if r["kind"] == "average"]
    ref = [r for r in rows if r["kind"] == "exact"]
    fig, axes = plt.subplots(1, len(fields), figsize=(5 * len(fields), 4), squeeze=False)
    for ax, f in zip(axes[0], fields):
        if pts:
            ax.plot(_floats(csv_path, pts, "x"), _floats(csv_path, pts, f), lw=0.8, label="u_h")
        if ref:
            ax.plot(_floats(csv_path, ref, "x"), _floats(csv_path, ref, f), "k--", lw=0.8,
                    label="exact")
        if avg:
            ax.plot(_floats(csv_path, avg, "x"), _floats(csv_path, avg, f), "o", ms=3,
                    label="cell average")
        ax.set_xlabel("x")
        ax.set_ylabel(f)
        ax.legend(fontsize=6)
    _save(fig, svg_path)


def plot_snapshot_2d(csv_path, svg_path, field="rho"):
    """Cell-average field on element centroids."""
    header, rows = read_csv(csv_path)
    _require(csv_path, header, ("x", "y", field))
    x, y, f = (_floats(csv_path, rows, c) for c in ("x", "y", field))
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    art = ax.tripcolor(x, y, f, shading="gouraud")
    fig.colorbar(art, ax=ax, label=field)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    _save(fig, svg_path)


def emit_plots(directory):
    """Render every recognised CSV in ``directory``; returns the SVG paths."""
    made = []
    for name in sorted(os.listdir(directory)):
        path = os.path.join(directory, name)
        stem, ext = os.path.splitext(name)
        if ext != ".csv":
            continue
        svg = os.path.join(directory, stem + ".svg")
        header, _ = read_csv(path)
        if name == "errors.csv" or "L2_error" in header:
            plot_convergence(path, svg)
        elif stem.startswith("entropy"):
            plot_timeseries(path, svg, y=("delta_U",), logy=True,
                            label_by="run" if "run" in header else None)
        elif stem.startswith("snapshot") and "kind" in header:
            plot_snapshot_1d(path, svg, fields=tuple(f for f in ("rho", "u", "p") if f in header))
        elif stem.startswith("snapshot"):
            plot_snapshot_2d(path, svg)
        elif stem == "drift":
            plot_convergence(path, svg, x="dt", y="delta_U_T", group=())
        else:
            continue
        made.append(svg)
    return made

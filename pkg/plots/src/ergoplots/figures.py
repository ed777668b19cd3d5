"""Figure and table renderers for run-directory artifacts.

Four kinds are supported, all reading only the documented CSV files:

* fig2   -- mean (G) and annealed (W) log-deviation curves versus the
            reversal time for every lattice subdirectory present, with a
            least-squares line over the growth window of each curve.
            Curves are shifted horizontally so the lattices do not
            overlap (1d by +20, 2d by +10, 3d unshifted); the shifts can
            be switched off.
* fig3   -- relative rate spread sqrt(var)/lambda versus lattice size
            from fig3_sweep.csv, one marker series per dimensionality,
            with a dashed level at 2/N_nn for each.
* fig4   -- sigma_G^2 / (2 dt) versus the reversal time per lattice,
            with a dashed level at Lambda - lambda_max from summary.csv.
* table1 -- summary.csv formatted as a markdown table.

Rendering is deterministic: a fixed svg hash salt is used and no
timestamps are written into the output body. Inputs are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import GW_COLUMNS, SUMMARY_COLUMNS, SWEEP_COLUMNS, SchemaError, read_table

KINDS = ("fig2", "fig3", "fig4", "table1")

# Horizontal shifts keeping the three lattices apart on the shared time
# axis (caption convention: 1d moved right by 20, 2d by 10).
FIG2_OFFSETS = {"1d": 20.0, "2d": 10.0, "3d": 0.0}

_COLORS = {"1d": "tab:blue", "2d": "tab:orange", "3d": "tab:green"}
_LATTICE_LABELS = ("1d", "2d", "3d")


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: one of KINDS, from `indir`, into the file `out`."""

    kind: str
    indir: Path
    out: Path
    offsets: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r} (use one of {KINDS})")


def _color(label, idx):
    return _COLORS.get(label, f"C{idx % 10}")


def _load_gw_dirs(indir) -> list[tuple[str, np.ndarray]]:
    """All <label>/gw_curves.csv under indir, as (label, float array)."""
    found = []
    for label in _LATTICE_LABELS:
        path = Path(indir) / label / "gw_curves.csv"
        if path.is_file():
            found.append((label, np.array(read_table(path, GW_COLUMNS), dtype=float)))
    if not found:
        raise SchemaError(
            f"{indir}: no lattice subdirectory with gw_curves.csv "
            f"(looked under {', '.join(_LATTICE_LABELS)})"
        )
    return found


def _fit_window(x, y):
    """Least-squares line over the interior of the rise of y(x).

    Points between 15% and 85% of the total rise are used, which keeps
    both the early transient and the saturated tail out of the fit; with
    fewer than two interior points every point is used instead.
    Returns (slope, intercept, x_window).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo = y[0] + 0.15 * (y[-1] - y[0])
    hi = y[0] + 0.85 * (y[-1] - y[0])
    mask = (y >= min(lo, hi)) & (y <= max(lo, hi))
    if mask.sum() < 2:
        mask = np.ones(x.shape, dtype=bool)
    slope, intercept = np.polyfit(x[mask], y[mask], 1)
    return float(slope), float(intercept), x[mask]


def _build_fig2(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for idx, (label, arr) in enumerate(_load_gw_dirs(spec.indir)):
        dt, g, w = arr[:, 0], arr[:, 1], arr[:, 2]
        shift = FIG2_OFFSETS.get(label, 0.0) if spec.offsets else 0.0
        color = _color(label, idx)
        ax.plot(dt + shift, g, color=color, lw=1.2, label=f"{label} G")
        ax.plot(dt + shift, w, color=color, lw=1.2, ls="--", label=f"{label} W")
        for curve in (g, w):
            slope, intercept, xw = _fit_window(dt, curve)
            ax.plot(xw + shift, slope * xw + intercept, color="black", lw=0.8, alpha=0.75)
    ax.set_xlabel(r"reversal time $\Delta t$")
    ax.set_ylabel("log deviation")
    ax.legend(fontsize=8, ncols=2)
    fig.tight_layout()
    return fig


def _build_fig3(spec: FigureSpec):
    rows = read_table(Path(spec.indir) / "fig3_sweep.csv", SWEEP_COLUMNS)
    groups: dict[tuple[int, int], list[tuple]] = {}
    for label, dims, n_sites, n_nn, lam, lam_err, var, var_err in rows:
        groups.setdefault((dims, n_nn), []).append((n_sites, np.sqrt(var) / lam))
    markers = {1: "o", 2: "s", 3: "^"}
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    for idx, (dims, n_nn) in enumerate(sorted(groups)):
        pts = sorted(groups[(dims, n_nn)])
        sizes = [p[0] for p in pts]
        spread = [p[1] for p in pts]
        color = f"C{idx % 10}"
        ax.plot(sizes, spread, marker=markers.get(dims, "x"), ls="-", lw=0.9,
                color=color, label=f"{dims}d")
        ax.axhline(2.0 / n_nn, ls="--", lw=0.9, color=color)
    ax.set_xscale("log")
    ax.set_xlabel("lattice sites $N$")
    ax.set_ylabel(r"$\sqrt{\langle\delta\lambda^2\rangle}\,/\,\lambda_{\max}$")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def fig4_series(indir) -> list[tuple[str, np.ndarray, np.ndarray, float]]:
    """Per summary.csv row: (label, dt, sigma_G^2/(2 dt), Lambda - lambda).

    Every lattice named in summary.csv must have its gw_curves.csv; the
    dt = 0 grid point carries no diffusive information and is dropped.
    """
    indir = Path(indir)
    summary = read_table(indir / "summary.csv", SUMMARY_COLUMNS)
    series = []
    for row in summary:
        label, lam, big = row[0], row[2], row[3]
        arr = np.array(read_table(indir / label / "gw_curves.csv", GW_COLUMNS),
                       dtype=float)
        keep = arr[:, 0] > 0
        dt = arr[keep, 0]
        ratio = arr[keep, 3] / (2.0 * dt)
        series.append((label, dt, ratio, big - lam))
    return series


def _build_fig4(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for idx, (label, dt, ratio, level) in enumerate(fig4_series(spec.indir)):
        color = _color(label, idx)
        ax.plot(dt, ratio, color=color, lw=1.2, label=label)
        ax.axhline(level, ls="--", lw=0.9, color=color)
    ax.set_xlabel(r"reversal time $\Delta t$")
    ax.set_ylabel(r"$\sigma_G^2 \,/\, 2\Delta t$")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _markdown_table(rows) -> str:
    header = [col.name for col in SUMMARY_COLUMNS]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(" --- " for _ in header) + "|",
    ]
    for lattice, n_nn, lam, big, var_d, var_e, t4, t9, t11, verdict in rows:
        cells = (
            lattice, str(n_nn), f"{lam:.3f}", f"{big:.3f}",
            f"{var_d:.4f}", f"{var_e:.4f}",
            f"{t4:.3f}", f"{t9:.3f}", f"{t11:.3f}", verdict,
        )
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def _save_figure(fig, out: Path):
    suffix = out.suffix.lower()
    if suffix == ".svg":
        fig.savefig(out, format="svg", metadata={"Date": None})
    elif suffix == ".pdf":
        fig.savefig(out, format="pdf", metadata={"CreationDate": None})
    else:
        raise ValueError(f"unsupported output format {suffix!r} (use .svg or .pdf)")


def render(spec: FigureSpec) -> Path:
    """Draw spec.kind from spec.indir into spec.out; returns spec.out."""
    out = Path(spec.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    if spec.kind == "table1":
        rows = read_table(Path(spec.indir) / "summary.csv", SUMMARY_COLUMNS)
        out.write_text(_markdown_table(rows))
        return out
    plt.rcParams["svg.hashsalt"] = "ergoplots"
    builder = {"fig2": _build_fig2, "fig3": _build_fig3, "fig4": _build_fig4}[spec.kind]
    fig = builder(spec)
    try:
        _save_figure(fig, out)
    finally:
        plt.close(fig)
    return out

"""Render figure descriptions (``plots.json``) to PNG with matplotlib.

The core library only emits descriptions and CSV data; this module is the
single place that imports matplotlib, and it does so lazily.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path


def describe(name, data, x, y, kind="line", title="", xlabel=None, ylabel=None, logx=False, logy=False,
             symlog=False, series=None):
    """One figure description: which CSV columns to draw and how."""
    return {
        "name": name, "data": data, "x": x, "y": y, "kind": kind, "title": title,
        "xlabel": xlabel or x, "ylabel": ylabel or (y if isinstance(y, str) else ", ".join(y)),
        "logx": logx, "logy": logy, "symlog": symlog, "series": series,
    }


def _columns(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {}
    for row in rows:
        for k, v in row.items():
            cols.setdefault(k, []).append(v)
    return cols


def _floats(values):
    out = []
    for v in values:
        if v in ("", None):
            out.append(float("nan"))
        elif "/" in v:
            num, den = v.split("/")
            out.append(int(num) / int(den))
        else:
            out.append(float(v))
    return out


def render(descriptions, out_dir, dpi=120) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    written = []
    for d in descriptions:
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        if d["kind"] == "intervals":
            _draw_intervals(ax, out_dir / d["data"])
        elif d["kind"] == "matrix":
            _draw_matrix(fig, ax, out_dir / d["data"])
        else:
            cols = _columns(out_dir / d["data"])
            xs = _floats(cols[d["x"]])
            ys = [d["y"]] if isinstance(d["y"], str) else d["y"]
            for y in ys:
                vals = _floats(cols[y])
                if d["kind"] == "scatter":
                    ax.plot(xs, vals, ".", ms=3, label=y)
                elif d["kind"] == "errorbar":
                    lo, hi = _floats(cols[d["series"][0]]), _floats(cols[d["series"][1]])
                    err = [[v - a for v, a in zip(vals, lo)], [b - v for v, b in zip(vals, hi)]]
                    ax.errorbar(xs, vals, yerr=err, fmt="o-", capsize=3, label=y)
                else:
                    ax.plot(xs, vals, "-", lw=0.8, label=y)
            if len(ys) > 1:
                ax.legend(frameon=False)
        if d.get("logx"):
            ax.set_xscale("log")
        if d.get("logy"):
            ax.set_yscale("log")
        if d.get("symlog"):
            ax.set_yscale("symlog", linthresh=1.0)
        ax.set_xlabel(d["xlabel"])
        ax.set_ylabel(d["ylabel"])
        if d.get("title"):
            ax.set_title(d["title"])
        fig.tight_layout()
        path = out_dir / f"{d['name']}.png"
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        written.append(path)
    return written


def _draw_intervals(ax, path):
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            k = int(row["level"])
            a, b = float(row["a"]), float(row["b"])
            ax.plot([a, b], [k, k], "-", lw=4, solid_capstyle="butt", color="C0")
    ax.invert_yaxis()


def _draw_matrix(fig, ax, path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    grid = [[int(v) for v in r[1:]] for r in rows[1:]]
    im = ax.imshow(grid, cmap="Greys_r", vmin=0, vmax=1, interpolation="nearest")
    fig.colorbar(im, ax=ax, fraction=0.046)


def render_file(plots_json, dpi=120) -> list[Path]:
    plots_json = Path(plots_json)
    return render(json.loads(plots_json.read_text()), plots_json.parent, dpi)

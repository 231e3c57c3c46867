"""Small hand-written SVG line charts: learning curves (mean and std band over seeds) and
per-joint acceleration traces."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]
W, H = 640, 400
MARGIN = dict(left=70, right=150, top=40, bottom=50)


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (np.asarray(v, dtype=float) - lo) / span * (b - a)


def line_chart(series, path, title="", xlabel="", ylabel="") -> None:
    """``series`` is a list of dicts with keys ``label``, ``x``, ``y`` and optionally ``std``."""
    xs = np.concatenate([np.asarray(s["x"], float) for s in series]) if series else np.zeros(1)
    lows = [np.asarray(s["y"], float) - np.asarray(s.get("std", 0.0)) for s in series]
    highs = [np.asarray(s["y"], float) + np.asarray(s.get("std", 0.0)) for s in series]
    ys = np.concatenate(lows + highs) if series else np.zeros(1)
    ys = ys[np.isfinite(ys)] if np.isfinite(ys).any() else np.zeros(1)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    pad = 0.05 * (y1 - y0 or 1.0)
    y0, y1 = y0 - pad, y1 + pad
    left, right = MARGIN["left"], W - MARGIN["right"]
    top, bottom = MARGIN["top"], H - MARGIN["bottom"]
    sx, sy = _scale(x0, x1, left, right), _scale(y0, y1, bottom, top)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" fill="none" stroke="#444"/>',
           f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{(left + right) / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="16" y="{(top + bottom) / 2}" text-anchor="middle" transform="rotate(-90 16 {(top + bottom) / 2})">{escape(ylabel)}</text>']
    for v in np.linspace(x0, x1, 5):
        out.append(f'<text x="{sx(v):.1f}" y="{bottom + 16}" text-anchor="middle">{v:.4g}</text>')
    for v in np.linspace(y0, y1, 5):
        out.append(f'<text x="{left - 6}" y="{sy(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
        out.append(f'<line x1="{left}" x2="{right}" y1="{sy(v):.1f}" y2="{sy(v):.1f}" stroke="#ddd"/>')
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        x, y = np.asarray(s["x"], float), np.asarray(s["y"], float)
        if "std" in s and len(x):
            std = np.asarray(s["std"], float)
            upper = [f"{a:.1f},{b:.1f}" for a, b in zip(sx(x), sy(y + std))]
            lower = [f"{a:.1f},{b:.1f}" for a, b in zip(sx(x[::-1]), sy((y - std)[::-1]))]
            out.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(sx(x), sy(y)))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = top + 16 * (i + 1)
        out.append(f'<line x1="{right + 10}" x2="{right + 30}" y1="{ly - 4}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{right + 35}" y="{ly}">{escape(str(s["label"]))}</text>')
    out.append("</svg>")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(out))


def learning_curves(runs: dict, path, key="success_rate", title="") -> None:
    """``runs`` maps a variant label to a list of per-seed eval rows (dicts with total_steps and ``key``).

    Seeds are aligned on the union of their evaluation steps, carrying each seed's last value forward.
    """
    series = []
    for label, seeds in runs.items():
        grid = sorted({r["total_steps"] for rows in seeds for r in rows})
        if not grid:
            continue
        table = []
        for rows in seeds:
            steps = np.array([r["total_steps"] for r in rows], float)
            vals = np.array([r[key] for r in rows], float)
            pos = np.searchsorted(steps, grid, side="right") - 1
            table.append(np.where(pos >= 0, vals[np.maximum(pos, 0)], np.nan))
        table = np.array(table)
        series.append({"label": label, "x": grid, "y": np.nanmean(table, axis=0), "std": np.nanstd(table, axis=0)})
    line_chart(series, path, title, "environment steps", key.replace("_", " "))


def acceleration_svg(traj, path, title="") -> None:
    from .evaluate import accelerations

    acc = accelerations(traj)
    t = traj.times[1:]
    series = [{"label": f"joint {j + 1}", "x": t, "y": acc[:, j]} for j in range(acc.shape[1])] if len(acc) else []
    line_chart(series, path, title, "time [s]", "acceleration [rad/s^2]")

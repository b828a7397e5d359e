"""Self-contained SVG charts: line plots with confidence bands and heatmaps.

No plotting dependency; the experiment runner writes these next to the
metrics CSVs so every run is inspectable from a browser.
"""

from __future__ import annotations

import numpy as np

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _scale(vals, lo, hi, out_lo, out_hi):
    vals = np.asarray(vals, dtype=np.float64)
    if hi == lo:
        hi = lo + 1.0
    return out_lo + (vals - lo) / (hi - lo) * (out_hi - out_lo)


def _axis_ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi == lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, n)
    return raw


def line_chart(
    series: list[dict],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    width: int = 640,
    height: int = 400,
) -> str:
    """Render line series to an SVG string.

    Each series is a dict with keys: x, y, optional (lo, hi) band, label.
    """
    margin_l, margin_r, margin_t, margin_b = 62, 16, 30, 46
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b
    xs = np.concatenate([np.asarray(s["x"], dtype=np.float64) for s in series])
    ys = [np.asarray(s["y"], dtype=np.float64) for s in series]
    for s in series:
        if "lo" in s:
            ys.append(np.asarray(s["lo"], dtype=np.float64))
            ys.append(np.asarray(s["hi"], dtype=np.float64))
    yall = np.concatenate(ys)
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(yall.min()), float(yall.max())
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(v):
        return _scale(v, x_lo, x_hi, margin_l, margin_l + plot_w)

    def py(v):
        return _scale(v, y_lo, y_hi, margin_t + plot_h, margin_t)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.0f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
    ]
    # axes and ticks
    parts.append(f'<line x1="{margin_l}" y1="{margin_t+plot_h}" x2="{margin_l+plot_w}" '
                 f'y2="{margin_t+plot_h}" stroke="black"/>')
    parts.append(f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" '
                 f'y2="{margin_t+plot_h}" stroke="black"/>')
    for tx in _axis_ticks(x_lo, x_hi):
        x = float(px(tx))
        parts.append(f'<line x1="{x:.1f}" y1="{margin_t+plot_h}" x2="{x:.1f}" '
                     f'y2="{margin_t+plot_h+4}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{margin_t+plot_h+16}" text-anchor="middle">'
                     f'{tx:g}</text>')
    for ty in _axis_ticks(y_lo, y_hi):
        y = float(py(ty))
        parts.append(f'<line x1="{margin_l-4}" y1="{y:.1f}" x2="{margin_l}" y2="{y:.1f}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{margin_l-7}" y="{y+3:.1f}" text-anchor="end">{ty:.3g}</text>')
    parts.append(f'<text x="{margin_l+plot_w/2:.0f}" y="{height-8}" text-anchor="middle">'
                 f'{x_label}</text>')
    parts.append(f'<text x="14" y="{margin_t+plot_h/2:.0f}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {margin_t+plot_h/2:.0f})">{y_label}</text>')

    for i, s in enumerate(series):
        color = s.get("color", _COLORS[i % len(_COLORS)])
        x = np.asarray(s["x"], dtype=np.float64)
        if "lo" in s:
            lo = np.asarray(s["lo"], dtype=np.float64)
            hi = np.asarray(s["hi"], dtype=np.float64)
            band = (
                " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x, hi))
                + " "
                + " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x[::-1], lo[::-1]))
            )
            parts.append(f'<polygon points="{band}" fill="{color}" opacity="0.18"/>')
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x, s["y"]))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if s.get("label"):
            ly = margin_t + 14 + 14 * i
            parts.append(f'<line x1="{margin_l+plot_w-110}" y1="{ly-4}" '
                         f'x2="{margin_l+plot_w-90}" y2="{ly-4}" stroke="{color}" stroke-width="2"/>')
            parts.append(f'<text x="{margin_l+plot_w-85}" y="{ly}">{s["label"]}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def heatmap(
    grid: np.ndarray,
    title: str = "",
    x_labels: list | None = None,
    y_labels: list | None = None,
    width: int = 520,
    height: int = 460,
    fmt: str = "{:.2f}",
) -> str:
    """Render a matrix as a colored cell grid with printed values."""
    grid = np.asarray(grid, dtype=np.float64)
    rows, cols = grid.shape
    margin_l, margin_t, margin_b = 70, 40, 20
    cell_w = (width - margin_l - 16) / cols
    cell_h = (height - margin_t - margin_b) / rows
    lo, hi = float(np.nanmin(grid)), float(np.nanmax(grid))
    if hi == lo:
        hi = lo + 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.0f}" y="20" text-anchor="middle" font-size="13">{title}</text>',
    ]
    for r in range(rows):
        for c in range(cols):
            v = grid[r, c]
            frac = 0.0 if np.isnan(v) else (v - lo) / (hi - lo)
            # white -> blue ramp
            shade = int(255 - frac * 160)
            color = f"rgb({shade},{shade},255)" if not np.isnan(v) else "#dddddd"
            x = margin_l + c * cell_w
            y = margin_t + r * cell_h
            parts.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{cell_w:.1f}" '
                         f'height="{cell_h:.1f}" fill="{color}" stroke="#888"/>')
            if not np.isnan(v):
                parts.append(f'<text x="{x+cell_w/2:.1f}" y="{y+cell_h/2+4:.1f}" '
                             f'text-anchor="middle">{fmt.format(v)}</text>')
    if x_labels:
        for c, lab in enumerate(x_labels):
            x = margin_l + (c + 0.5) * cell_w
            parts.append(f'<text x="{x:.1f}" y="{margin_t-6}" text-anchor="middle">{lab}</text>')
    if y_labels:
        for r, lab in enumerate(y_labels):
            y = margin_t + (r + 0.5) * cell_h
            parts.append(f'<text x="{margin_l-6}" y="{y+4:.1f}" text-anchor="end">{lab}</text>')
    parts.append("</svg>")
    return "\n".join(parts)

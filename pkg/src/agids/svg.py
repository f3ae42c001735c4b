"""Minimal grouped-bar chart rendered straight to SVG text."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from xml.sax.saxutils import escape

PALETTE = ("#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948")


def grouped_bars(
    title: str,
    groups: Sequence[str],
    series: Mapping[str, Sequence[tuple[float, float]]],
    *,
    y_label: str = "delta (refined - baseline)",
    width: int = 720,
    height: int = 420,
) -> str:
    """Render ``series[name][g] = (mean, std)`` as bars with error whiskers.

    Bars are grouped by ``groups`` along the x axis; a zero line is drawn so
    positive and negative deltas read at a glance.
    """
    left, right, top, bottom = 70, 20, 40, 70
    plot_w = width - left - right
    plot_h = height - top - bottom
    lows = [m - s for vals in series.values() for m, s in vals]
    highs = [m + s for vals in series.values() for m, s in vals]
    lo = min([0.0, *lows])
    hi = max([0.0, *highs])
    if hi - lo < 1e-12:
        hi, lo = hi + 1.0, lo - 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def y(v: float) -> float:
        return top + plot_h * (hi - v) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{y(0.0):.2f}" x2="{left + plot_w}" y2="{y(0.0):.2f}" stroke="black"/>',
        f'<text transform="translate(16 {top + plot_h / 2:.1f}) rotate(-90)" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{escape(y_label)}</text>',
    ]
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        out.append(
            f'<text x="{left - 6}" y="{y(v) + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.3g}</text>'
        )
    names = list(series)
    n_groups = max(len(groups), 1)
    group_w = plot_w / n_groups
    bar_w = group_w * 0.8 / max(len(names), 1)
    for g, label in enumerate(groups):
        gx = left + g * group_w + group_w * 0.1
        for s, name in enumerate(names):
            mean, std = series[name][g]
            x = gx + s * bar_w
            y0, y1 = sorted((y(0.0), y(mean)))
            color = PALETTE[s % len(PALETTE)]
            out.append(f'<rect x="{x:.2f}" y="{y0:.2f}" width="{bar_w * 0.9:.2f}" height="{y1 - y0:.2f}" fill="{color}"/>')
            if std > 0:
                cx = x + bar_w * 0.45
                out.append(
                    f'<line x1="{cx:.2f}" y1="{y(mean - std):.2f}" x2="{cx:.2f}" y2="{y(mean + std):.2f}" stroke="black"/>'
                )
        out.append(
            f'<text x="{left + (g + 0.5) * group_w:.2f}" y="{top + plot_h + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{escape(label)}</text>'
        )
    for s, name in enumerate(names):
        lx = left + s * 130
        ly = height - 18
        out.append(f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" fill="{PALETTE[s % len(PALETTE)]}"/>')
        out.append(f'<text x="{lx + 16}" y="{ly}" font-family="sans-serif" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

"""Dependency-free SVG log-log plot of a convergence report."""

from __future__ import annotations

import math

WIDTH, HEIGHT, MARGIN = 480, 360, 60
COLORS = {"l2_error": "#1f4e9c", "energy_error": "#2a8c4a"}


def _decades(lo, hi):
    return range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)


def convergence_svg(report, reference_slope: float = 2.0) -> str:
    """Errors against ``h`` on log axes with a dashed reference line of the given slope."""
    hs = report.hs
    series = {c: [getattr(r, c) for r in report.rows] for c in COLORS}
    values = [v for vals in series.values() for v in vals if v > 0]
    x_lo, x_hi = min(hs) / 1.5, max(hs) * 1.5
    y_lo, y_hi = min(values) / 3.0, max(values) * 3.0

    def px(h):
        t = (math.log10(h) - math.log10(x_lo)) / (math.log10(x_hi) - math.log10(x_lo))
        return MARGIN + t * (WIDTH - 2 * MARGIN)

    def py(e):
        t = (math.log10(e) - math.log10(y_lo)) / (math.log10(y_hi) - math.log10(y_lo))
        return HEIGHT - MARGIN - t * (HEIGHT - 2 * MARGIN)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
        f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>',
    ]
    for k in _decades(x_lo, x_hi):
        h = 10.0**k
        if x_lo <= h <= x_hi:
            out.append(f'<text x="{px(h):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">1e{k}</text>')
    for k in _decades(y_lo, y_hi):
        e = 10.0**k
        if y_lo <= e <= y_hi:
            out.append(f'<text x="{MARGIN - 6}" y="{py(e) + 4:.1f}" text-anchor="end">1e{k}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">h</text>')

    # reference line anchored at the finest L2 error
    e_ref = series["l2_error"][-1]
    h_ref = hs[-1]
    ref = [(h, e_ref * (h / h_ref) ** reference_slope) for h in (min(hs), max(hs))]
    out.append(
        f'<polyline fill="none" stroke="red" stroke-dasharray="5,3" points="'
        + " ".join(f"{px(h):.1f},{py(e):.1f}" for h, e in ref)
        + '"/>'
    )
    legend_y = MARGIN + 14
    for name, color in COLORS.items():
        pts = [(h, e) for h, e in zip(hs, series[name]) if e > 0]
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="'
            + " ".join(f"{px(h):.1f},{py(e):.1f}" for h, e in pts)
            + '"/>'
        )
        for h, e in pts:
            out.append(f'<circle cx="{px(h):.1f}" cy="{py(e):.1f}" r="2.5" fill="{color}"/>')
        out.append(f'<text x="{MARGIN + 8}" y="{legend_y}" fill="{color}">{name}</text>')
        legend_y += 14
    out.append(f'<text x="{MARGIN + 8}" y="{legend_y}" fill="red">slope {reference_slope:g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

"""Minimal SVG line plots (log-log), no plotting dependency.

Good enough for the experiment artifacts: one polyline per labelled series,
decade ticks, and a small legend.  Nonpositive values are clipped to half the
smallest positive value so they stay visible on the log axis.
"""

import math

__all__ = ["line_plot_svg"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

_WIDTH, _HEIGHT = 640, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 40, 50


def _decades(lo: float, hi: float):
    start = math.floor(math.log10(lo))
    stop = math.ceil(math.log10(hi))
    return [10.0**e for e in range(start, stop + 1)]


def line_plot_svg(path, series: dict, xlabel: str = "", ylabel: str = "", title: str = "") -> None:
    """Write a log-log line plot; ``series`` maps labels to (xs, ys) pairs."""
    positive = [v for xs, ys in series.values() for v in ys if v > 0]
    floor = (min(positive) if positive else 1.0) / 2.0
    all_x, all_y = [], []
    clipped = {}
    for label, (xs, ys) in series.items():
        ys = [max(float(v), floor) for v in ys]
        xs = [float(v) for v in xs]
        clipped[label] = (xs, ys)
        all_x.extend(xs)
        all_y.extend(ys)
    if not all_x:
        raise ValueError("nothing to plot")

    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo / 2, x_hi * 2
    if y_lo == y_hi:
        y_lo, y_hi = y_lo / 2, y_hi * 2

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def sx(x):
        t = (math.log10(x) - math.log10(x_lo)) / (math.log10(x_hi) - math.log10(x_lo))
        return _MARGIN_L + t * plot_w

    def sy(y):
        t = (math.log10(y) - math.log10(y_lo)) / (math.log10(y_hi) - math.log10(y_lo))
        return _HEIGHT - _MARGIN_B - t * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2}" y="24" text-anchor="middle" font-size="15">{title}</text>',
    ]
    # axes
    x0, y0 = _MARGIN_L, _HEIGHT - _MARGIN_B
    parts.append(
        f'<path d="M {x0} {_MARGIN_T} L {x0} {y0} L {_WIDTH - _MARGIN_R} {y0}" '
        'stroke="black" fill="none"/>'
    )
    for tick in _decades(x_lo, x_hi):
        if x_lo <= tick <= x_hi:
            parts.append(
                f'<line x1="{sx(tick):.1f}" y1="{y0}" x2="{sx(tick):.1f}" y2="{y0 + 5}" stroke="black"/>'
                f'<text x="{sx(tick):.1f}" y="{y0 + 20}" text-anchor="middle" font-size="11">1e{int(math.log10(tick))}</text>'
            )
    for tick in _decades(y_lo, y_hi):
        if y_lo <= tick <= y_hi:
            parts.append(
                f'<line x1="{x0 - 5}" y1="{sy(tick):.1f}" x2="{x0}" y2="{sy(tick):.1f}" stroke="black"/>'
                f'<text x="{x0 - 8}" y="{sy(tick):.1f}" text-anchor="end" font-size="11" dominant-baseline="middle">1e{int(math.log10(tick))}</text>'
            )
    parts.append(
        f'<text x="{_WIDTH / 2}" y="{_HEIGHT - 10}" text-anchor="middle" font-size="13">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{_HEIGHT / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {_HEIGHT / 2})">{ylabel}</text>'
    )

    for i, (label, (xs, ys)) in enumerate(clipped.items()):
        color = _COLORS[i % len(_COLORS)]
        points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.8"/>'
        )
        ly = _MARGIN_T + 16 * i + 8
        lx = _WIDTH - _MARGIN_R - 150
        parts.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" stroke-width="1.8"/>'
            f'<text x="{lx + 28}" y="{ly + 4}" font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")

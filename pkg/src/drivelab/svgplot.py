"""Self-contained SVG figures (no rendering dependency).

Data series are drawn as <polyline> elements, exactly one per series;
axes, grids and track outlines use <line>/<path> so a figure contains as
many polylines as controllers plotted.
"""

from __future__ import annotations

import numpy as np

from .fileio import atomic_write_text

WIDTH, HEIGHT = 880, 520
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 42, 52

CONTROLLER_COLORS = {
    "mlp": "#1f77b4",
    "cnn": "#d62728",
    "pp": "#2ca02c",
    "stanley": "#7f7f7f",
    "replay": "#9467bd",
}


def _color(label: str, index: int) -> str:
    fallback = ["#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#9467bd", "#8c564b"]
    return CONTROLLER_COLORS.get(label, fallback[index % len(fallback)])


def _limits(arrays: list[np.ndarray]) -> tuple[float, float]:
    lo = min(float(np.min(a)) for a in arrays if len(a))
    hi = max(float(np.max(a)) for a in arrays if len(a))
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


class _Figure:
    def __init__(self, title: str, xlabel: str, ylabel: str,
                 xlim: tuple[float, float], ylim: tuple[float, float],
                 equal: bool = False):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="16">{_esc(title)}</text>',
        ]
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if equal:
            span_x = (self.x1 - self.x0) / (WIDTH - MARGIN_L - MARGIN_R)
            span_y = (self.y1 - self.y0) / (HEIGHT - MARGIN_T - MARGIN_B)
            span = max(span_x, span_y)
            cx, cy = (self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2
            half_x = span * (WIDTH - MARGIN_L - MARGIN_R) / 2
            half_y = span * (HEIGHT - MARGIN_T - MARGIN_B) / 2
            self.x0, self.x1 = cx - half_x, cx + half_x
            self.y0, self.y1 = cy - half_y, cy + half_y
        self._axes(xlabel, ylabel)
        self._legend_y = MARGIN_T + 8

    def px(self, x):
        return MARGIN_L + (np.asarray(x) - self.x0) / (self.x1 - self.x0) * \
            (WIDTH - MARGIN_L - MARGIN_R)

    def py(self, y):
        return HEIGHT - MARGIN_B - (np.asarray(y) - self.y0) / (self.y1 - self.y0) * \
            (HEIGHT - MARGIN_T - MARGIN_B)

    def _axes(self, xlabel: str, ylabel: str) -> None:
        left, right = MARGIN_L, WIDTH - MARGIN_R
        top, bottom = MARGIN_T, HEIGHT - MARGIN_B
        self.parts.append(
            f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>')
        self.parts.append(
            f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>')
        for frac in np.linspace(0.0, 1.0, 6):
            xv = self.x0 + frac * (self.x1 - self.x0)
            yv = self.y0 + frac * (self.y1 - self.y0)
            xp = float(self.px(xv))
            yp = float(self.py(yv))
            self.parts.append(
                f'<line x1="{xp:.1f}" y1="{bottom}" x2="{xp:.1f}" y2="{top}" '
                'stroke="#dddddd" stroke-width="0.5"/>')
            self.parts.append(
                f'<line x1="{left}" y1="{yp:.1f}" x2="{right}" y2="{yp:.1f}" '
                'stroke="#dddddd" stroke-width="0.5"/>')
            self.parts.append(
                f'<text x="{xp:.1f}" y="{bottom + 18}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11">{xv:.4g}</text>')
            self.parts.append(
                f'<text x="{left - 8}" y="{yp + 4:.1f}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11">{yv:.4g}</text>')
        self.parts.append(
            f'<text x="{(left + right) / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{_esc(xlabel)}</text>')
        self.parts.append(
            f'<text x="20" y="{(top + bottom) / 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13" '
            f'transform="rotate(-90 20 {(top + bottom) / 2})">{_esc(ylabel)}</text>')

    def polyline(self, x, y, color: str, label: str) -> None:
        xs, ys = self.px(x), self.py(y)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
        self.parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.4" points="{pts}"/>')
        lx = WIDTH - MARGIN_R + 12
        self.parts.append(
            f'<line x1="{lx}" y1="{self._legend_y}" x2="{lx + 22}" '
            f'y2="{self._legend_y}" stroke="{color}" stroke-width="2"/>')
        self.parts.append(
            f'<text x="{lx + 28}" y="{self._legend_y + 4}" font-family="sans-serif" '
            f'font-size="12">{_esc(label)}</text>')
        self._legend_y += 18

    def path_dashed(self, x, y, color: str = "#444444") -> None:
        xs, ys = self.px(x), self.py(y)
        d = "M " + " L ".join(f"{a:.2f} {b:.2f}" for a, b in zip(xs, ys))
        self.parts.append(
            f'<path fill="none" stroke="{color}" stroke-width="1" '
            f'stroke-dasharray="6 4" d="{d}"/>')

    def marker(self, x: float, y: float, text: str) -> None:
        xp, yp = float(self.px(x)), float(self.py(y))
        self.parts.append(
            f'<circle cx="{xp:.1f}" cy="{yp:.1f}" r="3" fill="#444444"/>')
        self.parts.append(
            f'<text x="{xp + 6:.1f}" y="{yp - 6:.1f}" font-family="sans-serif" '
            f'font-size="12" fill="#444444">{_esc(text)}</text>')

    def save(self, path: str) -> None:
        self.parts.append("</svg>")
        atomic_write_text(path, "\n".join(self.parts) + "\n")


def line_chart(path: str, title: str, xlabel: str, ylabel: str,
               series: list[tuple[str, np.ndarray, np.ndarray]]) -> None:
    """series: (label, x, y) triples; one polyline per series."""
    fig = _Figure(title, xlabel, ylabel,
                  _limits([np.asarray(x) for _, x, _ in series]),
                  _limits([np.asarray(y) for _, _, y in series]))
    for i, (label, x, y) in enumerate(series):
        fig.polyline(np.asarray(x), np.asarray(y), _color(label, i), label)
    fig.save(path)


def track_chart(path: str, title: str, ref_xy: np.ndarray,
                section_marks: list[tuple[float, float, str]],
                series: list[tuple[str, np.ndarray]]) -> None:
    """Top view: dashed reference line, section markers, one polyline per
    controller trajectory."""
    arrays = [ref_xy] + [xy for _, xy in series if len(xy)]
    fig = _Figure(title, "X [m]", "Y [m]",
                  _limits([a[:, 0] for a in arrays]),
                  _limits([a[:, 1] for a in arrays]), equal=True)
    fig.path_dashed(ref_xy[:, 0], ref_xy[:, 1])
    for x, y, label in section_marks:
        fig.marker(x, y, label)
    for i, (label, xy) in enumerate(series):
        if len(xy):
            fig.polyline(xy[:, 0], xy[:, 1], _color(label, i), label)
    fig.save(path)

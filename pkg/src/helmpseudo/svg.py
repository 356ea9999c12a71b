"""Minimal SVG writer for isoline plots and line charts (fixed 800x800 viewport)."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

SIZE = 800
MARGIN = 70
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    span = hi - lo
    if span <= 0:
        return np.array([lo])
    raw = span / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=10 * mag)
    start = np.ceil(lo / step) * step
    t = np.arange(start, hi + 0.5 * step, step)
    # avoid "-0" labels from rounding
    return np.where(np.abs(t) < 1e-9 * step, 0.0, t) + 0.0


class SvgCanvas:
    """Linear axes mapping the data box (x0, x1, y0, y1) onto the viewport."""

    def __init__(self, box, title: str = "", xlabel: str = "", ylabel: str = "", equal: bool = False):
        x0, x1, y0, y1 = (float(b) for b in box)
        if equal:
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            half = 0.5 * max(x1 - x0, y1 - y0)
            x0, x1, y0, y1 = cx - half, cx + half, cy - half, cy + half
        self.box = (x0, x1, y0, y1)
        self.items: list[str] = []
        self.legend: list[tuple[str, str, str]] = []
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel

    def _px(self, x, y):
        x0, x1, y0, y1 = self.box
        w = SIZE - 2 * MARGIN
        px = MARGIN + (np.asarray(x, float) - x0) / (x1 - x0) * w
        py = SIZE - MARGIN - (np.asarray(y, float) - y0) / (y1 - y0) * w
        return px, py

    def polyline(self, z, color: str = "black", width: float = 1.5, closed: bool = False,
                 dash: str | None = None) -> None:
        z = np.asarray(z, dtype=complex)
        if len(z) < 2:
            return
        px, py = self._px(z.real, z.imag)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, py))
        tag = "polygon" if closed else "polyline"
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<{tag} points="{pts}" fill="none" stroke="{color}" '
                          f'stroke-width="{width}"{extra}/>')

    def circle(self, center: complex, radius: float, color: str = "black", dash: str | None = None,
               width: float = 1.5) -> None:
        t = np.linspace(0, 2 * np.pi, 241)[:-1]
        self.polyline(center + radius * np.exp(1j * t), color, width, closed=True, dash=dash)

    def markers(self, z, color: str = "black", r: float = 2.0) -> None:
        z = np.asarray(z, dtype=complex)
        px, py = self._px(z.real, z.imag)
        for a, b in zip(px, py):
            self.items.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="{r}" fill="{color}"/>')

    def add_legend(self, label: str, color: str, dash: str | None = None) -> None:
        self.legend.append((label, color, dash or ""))

    def _axes(self) -> list[str]:
        x0, x1, y0, y1 = self.box
        lo, hi = MARGIN, SIZE - MARGIN
        out = [f'<rect x="{lo}" y="{lo}" width="{hi - lo}" height="{hi - lo}" fill="none" stroke="#444"/>']
        for t in _ticks(x0, x1):
            px, _ = self._px(t, y0)
            out.append(f'<line x1="{_fmt(px)}" y1="{hi}" x2="{_fmt(px)}" y2="{hi + 6}" stroke="#444"/>')
            out.append(f'<text x="{_fmt(px)}" y="{hi + 22}" font-size="13" text-anchor="middle">{t:g}</text>')
        for t in _ticks(y0, y1):
            _, py = self._px(x0, t)
            out.append(f'<line x1="{lo - 6}" y1="{_fmt(py)}" x2="{lo}" y2="{_fmt(py)}" stroke="#444"/>')
            out.append(f'<text x="{lo - 10}" y="{_fmt(py + 4)}" font-size="13" text-anchor="end">{t:g}</text>')
        if self.title:
            out.append(f'<text x="{SIZE / 2}" y="{lo - 25}" font-size="17" text-anchor="middle">'
                       f'{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{SIZE / 2}" y="{SIZE - 20}" font-size="15" text-anchor="middle">'
                       f'{escape(self.xlabel)}</text>')
        if self.ylabel:
            out.append(f'<text x="20" y="{SIZE / 2}" font-size="15" text-anchor="middle" '
                       f'transform="rotate(-90 20 {SIZE / 2})">{escape(self.ylabel)}</text>')
        for k, (label, color, dash) in enumerate(self.legend):
            y = lo + 18 + 18 * k
            extra = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<line x1="{hi - 150}" y1="{y}" x2="{hi - 120}" y2="{y}" stroke="{color}" '
                       f'stroke-width="2"{extra}/>')
            out.append(f'<text x="{hi - 112}" y="{y + 4}" font-size="13">{escape(label)}</text>')
        return out

    def render(self) -> str:
        body = "\n".join(self._axes() + self.items)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
                f'viewBox="0 0 {SIZE} {SIZE}">\n<rect width="100%" height="100%" fill="white"/>\n'
                f'{body}\n</svg>\n')

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.render())


def isoline_plot(isolines: dict, window, title: str = "", eigenvalues=None) -> SvgCanvas:
    """Isolines coloured by epsilon, optionally with eigenvalue markers."""
    canvas = SvgCanvas(window, title, "Re z", "Im z", equal=True)
    for k, eps in enumerate(sorted(isolines)):
        color = PALETTE[k % len(PALETTE)]
        canvas.add_legend(f"eps = {eps:g}", color)
        for line in isolines[eps]:
            canvas.polyline(line.points, color, closed=line.closed)
    if eigenvalues is not None:
        canvas.markers(eigenvalues, "black", 1.5)
    return canvas


def line_plot(x, series: dict, title: str = "", xlabel: str = "", ylabel: str = "") -> SvgCanvas:
    """series maps label -> y values (same length as x); NaN entries are skipped."""
    x = np.asarray(x, float)
    ys = [np.asarray(v, float) for v in series.values()]
    finite = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.array([0.0])
    ylo, yhi = float(finite.min()), float(finite.max())
    pad = 0.05 * max(yhi - ylo, 1e-12)
    xpad = 0.05 * max(x.max() - x.min(), 1e-12)
    canvas = SvgCanvas((x.min() - xpad, x.max() + xpad, ylo - pad, yhi + pad), title, xlabel, ylabel)
    for k, (label, y) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        y = np.asarray(y, float)
        ok = np.isfinite(y)
        canvas.polyline(x[ok] + 1j * y[ok], color, 2.0)
        canvas.markers(x[ok] + 1j * y[ok], color, 3.0)
        canvas.add_legend(label, color)
    return canvas

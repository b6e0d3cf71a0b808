"""Minimal self-contained SVG line, step and error-bar charts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]


@dataclass
class Series:
    x: list
    y: list
    label: str = ""
    style: str = "line"  # line | step | points
    yerr: list | None = None


@dataclass
class Chart:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    width: int = 640
    height: int = 420
    series: list = field(default_factory=list)

    def add(self, *args, **kw) -> "Chart":
        self.series.append(Series(*args, **kw))
        return self

    def _limits(self):
        xs, ys = [], []
        for s in self.series:
            xs += [v for v in s.x if math.isfinite(v)]
            err = s.yerr or [0.0] * len(s.y)
            for v, e in zip(s.y, err):
                if math.isfinite(v):
                    ys += [v - e, v + e]
        if not xs:
            return 0.0, 1.0, 0.0, 1.0
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        if x1 == x0:
            x1 = x0 + 1.0
        pad = 0.05 * (y1 - y0 or 1.0)
        return x0, x1, y0 - pad, y1 + pad

    def render(self) -> str:
        W, H = self.width, self.height
        ml, mr, mt, mb = 70, 20, 36, 50
        x0, x1, y0, y1 = self._limits()
        sx = lambda v: ml + (v - x0) / (x1 - x0) * (W - ml - mr)
        sy = lambda v: H - mb - (v - y0) / (y1 - y0) * (H - mt - mb)
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
               f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
               f'<rect width="{W}" height="{H}" fill="white"/>',
               f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(self.title)}</text>']
        out.append(f'<rect x="{ml}" y="{mt}" width="{W - ml - mr}" height="{H - mt - mb}" '
                   f'fill="none" stroke="black"/>')
        for v in _ticks(x0, x1):
            out.append(f'<line x1="{sx(v):.2f}" y1="{H - mb}" x2="{sx(v):.2f}" y2="{H - mb + 5}" stroke="black"/>')
            out.append(f'<text x="{sx(v):.2f}" y="{H - mb + 18}" text-anchor="middle">{v:g}</text>')
        for v in _ticks(y0, y1):
            out.append(f'<line x1="{ml - 5}" y1="{sy(v):.2f}" x2="{ml}" y2="{sy(v):.2f}" stroke="black"/>')
            out.append(f'<text x="{ml - 8}" y="{sy(v) + 4:.2f}" text-anchor="end">{v:g}</text>')
        out.append(f'<text x="{(ml + W - mr) / 2}" y="{H - 12}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="16" y="{(mt + H - mb) / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {(mt + H - mb) / 2})">{escape(self.ylabel)}</text>')
        for i, s in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            pts = [(a, b) for a, b in zip(s.x, s.y) if math.isfinite(a) and math.isfinite(b)]
            if s.style == "step" and pts:
                path, prev = [], None
                for a, b in pts:
                    if prev is None:
                        path.append(f"M{sx(a):.2f},{sy(b):.2f}")
                    else:
                        path.append(f"H{sx(a):.2f}V{sy(b):.2f}")
                    prev = b
                out.append(f'<path d="{"".join(path)}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            elif s.style == "line" and pts:
                d = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in pts)
                out.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            if s.style == "points" or s.yerr:
                for j, (a, b) in enumerate(zip(s.x, s.y)):
                    if s.yerr:
                        e = s.yerr[j]
                        out.append(f'<line x1="{sx(a):.2f}" y1="{sy(b - e):.2f}" x2="{sx(a):.2f}" '
                                   f'y2="{sy(b + e):.2f}" stroke="{color}"/>')
                    out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="{color}"/>')
            if s.label:
                ly = mt + 16 + 16 * i
                out.append(f'<line x1="{W - mr - 120}" y1="{ly - 4}" x2="{W - mr - 100}" y2="{ly - 4}" '
                           f'stroke="{color}" stroke-width="2"/>')
                out.append(f'<text x="{W - mr - 95}" y="{ly}">{escape(s.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def _ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    n = int(math.floor((hi - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]

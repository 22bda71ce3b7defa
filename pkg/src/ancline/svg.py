"""Minimal standalone SVG line plots: axes, series, legend. Output is deterministic text."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1b6e3a", "#b5651d", "#2b5fa8", "#a8323e", "#6b4ea0", "#3a8a8a")
W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 80, 20, 30, 60


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n)


def line_plot(x, series: dict[str, np.ndarray], *, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Render ``series`` (name -> y values over ``x``) as an SVG document string."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()]) if ys else np.array([0.0])
    xlo, xhi = float(x.min()), float(x.max())
    ylo, yhi = float(min(finite.min(), 0.0)), float(finite.max())
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(v):
        return LEFT + (v - xlo) / (xhi - xlo) * pw

    def py(v):
        return TOP + ph - (v - ylo) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W // 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    for t in _ticks(xlo, xhi):
        X = _fmt(px(t))
        out.append(f'<line x1="{X}" y1="{TOP + ph}" x2="{X}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{TOP + ph + 18}" text-anchor="middle" font-size="10">{t:.3g}</text>')
    for t in _ticks(ylo, yhi):
        Y = _fmt(py(t))
        out.append(f'<line x1="{LEFT - 5}" y1="{Y}" x2="{LEFT}" y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{Y}" text-anchor="end" font-size="10" dominant-baseline="middle">{t:.3g}</text>')
    out.append(f'<text x="{LEFT + pw // 2}" y="{H - 15}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    out.append(
        f'<text x="15" y="{TOP + ph // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {TOP + ph // 2})">{escape(ylabel)}</text>'
    )
    for i, (name, y) in enumerate(ys.items()):
        color = PALETTE[i % len(PALETTE)]
        ok = np.isfinite(y)
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x[ok], y[ok]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = TOP + 12 + 16 * i
        out.append(f'<line x1="{LEFT + pw - 150}" y1="{ly}" x2="{LEFT + pw - 130}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + pw - 125}" y="{ly + 4}" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

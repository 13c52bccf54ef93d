"""Minimal self-contained SVG rendering for sweep curves and the ground-truth chords."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

W, H = 560, 400
MARGIN = dict(left=70, right=20, top=40, bottom=55)
PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


def _fmt(v: float) -> str:
    return f"{v:.3g}"


def line_plot(
    path: str | Path,
    x,
    y,
    *,
    title: str,
    xlabel: str,
    ylabel: str,
    baseline: float | None = None,
    scatter: tuple | None = None,
) -> Path:
    """Solid line through (x, y), optional per-seed points and a dashed horizontal baseline."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ys = [y[np.isfinite(y)]]
    if baseline is not None and np.isfinite(baseline):
        ys.append(np.array([baseline]))
    if scatter is not None:
        ys.append(np.asarray(scatter[1], dtype=float))
    allv = np.concatenate(ys)
    allv = allv[np.isfinite(allv)]
    ylo, yhi = (float(allv.min()), float(allv.max())) if allv.size else (0.0, 1.0)
    pad = 0.08 * (yhi - ylo or abs(yhi) or 1.0)
    ylo, yhi = ylo - pad, yhi + pad
    xlo, xhi = float(x.min()), float(x.max())
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5

    px0, px1 = MARGIN["left"], W - MARGIN["right"]
    py0, py1 = H - MARGIN["bottom"], MARGIN["top"]

    def sx(v):
        return px0 + (v - xlo) / (xhi - xlo) * (px1 - px0)

    def sy(v):
        return py0 + (v - ylo) / (yhi - ylo) * (py1 - py0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="15" font-family="sans-serif">{escape(title)}</text>',
        f'<line x1="{px0}" y1="{py0}" x2="{px1}" y2="{py0}" stroke="black"/>',
        f'<line x1="{px0}" y1="{py0}" x2="{px0}" y2="{py1}" stroke="black"/>',
    ]
    for tx in _ticks(xlo, xhi):
        out.append(f'<line x1="{sx(tx):.2f}" y1="{py0}" x2="{sx(tx):.2f}" y2="{py0 + 5}" stroke="black"/>')
        out.append(
            f'<text x="{sx(tx):.2f}" y="{py0 + 18}" text-anchor="middle" font-size="11" font-family="sans-serif">{_fmt(tx)}</text>'
        )
    for ty in _ticks(ylo, yhi):
        out.append(f'<line x1="{px0 - 5}" y1="{sy(ty):.2f}" x2="{px0}" y2="{sy(ty):.2f}" stroke="black"/>')
        out.append(
            f'<text x="{px0 - 8}" y="{sy(ty) + 4:.2f}" text-anchor="end" font-size="11" font-family="sans-serif">{_fmt(ty)}</text>'
        )
    out.append(
        f'<text x="{(px0 + px1) / 2}" y="{H - 12}" text-anchor="middle" font-size="13" font-family="sans-serif">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="16" y="{(py0 + py1) / 2}" text-anchor="middle" font-size="13" font-family="sans-serif" '
        f'transform="rotate(-90 16 {(py0 + py1) / 2})">{escape(ylabel)}</text>'
    )
    if baseline is not None and np.isfinite(baseline):
        out.append(
            f'<line class="baseline" x1="{px0}" y1="{sy(baseline):.2f}" x2="{px1}" y2="{sy(baseline):.2f}" '
            'stroke="gray" stroke-dasharray="6,4"/>'
        )
    if scatter is not None:
        for a, b in zip(*scatter):
            if np.isfinite(b):
                out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="2.5" fill="{PALETTE[0]}" fill-opacity="0.35"/>')
    keep = np.isfinite(y)
    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[keep], y[keep]))
    out.append(f'<polyline class="series" points="{pts}" fill="none" stroke="{PALETTE[0]}" stroke-width="2"/>')
    for a, b in zip(x[keep], y[keep]):
        out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="4" fill="{PALETTE[0]}"/>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def ground_truth_figure(path: str | Path, x0: np.ndarray, x1: np.ndarray, ring_radius: float = 1.0) -> Path:
    """Source points, target points, the straight chords between pairs, and the target ring (dashed)."""
    size = 520
    half = size / 2
    extent = 1.25 * ring_radius

    def s(p):
        return half + p[0] / extent * (half - 10), half - p[1] / extent * (half - 10)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<circle class="ring" cx="{half}" cy="{half}" r="{ring_radius / extent * (half - 10):.2f}" '
        'fill="none" stroke="gray" stroke-dasharray="6,4"/>',
    ]
    for i, (a, b) in enumerate(zip(x0, x1)):
        (ax, ay), (bx, by) = s(a), s(b)
        color = PALETTE[i % len(PALETTE)]
        out.append(
            f'<line class="chord" x1="{ax:.2f}" y1="{ay:.2f}" x2="{bx:.2f}" y2="{by:.2f}" stroke="{color}" stroke-opacity="0.6"/>'
        )
    for a in x0:
        ax, ay = s(a)
        out.append(f'<circle class="source" cx="{ax:.2f}" cy="{ay:.2f}" r="3" fill="#1f77b4"/>')
    for b in x1:
        bx, by = s(b)
        out.append(f'<circle class="target" cx="{bx:.2f}" cy="{by:.2f}" r="3" fill="#ff7f0e"/>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path

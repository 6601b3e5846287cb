"""Deterministic SVG plots of 3-strategy trajectories in ternary coordinates."""
import numpy as np

from .state import ternary_coords

WIDTH, HEIGHT = 800, 700
SIDE = 700.0
LEFT, BASE = 50.0, 650.0
MAX_POINTS = 2000
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")
LABELS = ("1", "2", "3")


def to_canvas(x):
    """Map states (..., 3) to canvas pixel coordinates."""
    u, v = ternary_coords(x)
    return LEFT + SIDE * u, BASE - SIDE * v


def _fmt(a):
    return f"{a:.3f}"


def _downsample(states, max_points):
    if states.shape[0] <= max_points:
        return states
    idx = np.unique(np.linspace(0, states.shape[0] - 1, max_points).round().astype(int))
    return states[idx]


def emit_simplex_svg(trajs, markers=(), path=None, max_points=MAX_POINTS, title=None):
    """Render trajectories (objects with ``.states`` or raw (m, 3) arrays) as SVG text.

    Each trajectory becomes a polyline ``id="traj-k"``; a trajectory that never
    moves is drawn as a dot. ``markers`` (e.g. Nash equilibria) are drawn as
    open circles. Identical inputs give byte-identical output.
    """
    arrays = [np.asarray(getattr(t, "states", t), dtype=float) for t in trajs]
    markers = [np.asarray(m, dtype=float) for m in markers]
    for a in arrays + markers:
        if a.shape[-1] != 3:
            raise ValueError("simplex plots need n = 3")
    verts = to_canvas(np.eye(3))
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        safe = str(title).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        lines.append(f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="18">{safe}</text>')
    pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(*verts))
    lines.append(f'<polygon id="simplex" points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>')
    offsets = ((-14, 18), (14, 18), (0, -10))
    for (a, b), (dx, dy), label in zip(zip(*verts), offsets, LABELS):
        lines.append(f'<text x="{_fmt(a + dx)}" y="{_fmt(b + dy)}" text-anchor="middle" font-size="16">{label}</text>')
    for k, states in enumerate(arrays):
        color = PALETTE[k % len(PALETTE)]
        if states.shape[0] == 0:
            continue
        if states.shape[0] == 1 or np.all(states == states[0]):
            cx, cy = to_canvas(states[0])
            lines.append(f'<circle id="traj-{k}" cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="3" fill="{color}"/>')
            continue
        cu, cv = to_canvas(_downsample(states, max_points))
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(cu, cv))
        lines.append(f'<polyline id="traj-{k}" points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>')
        sx, sy = to_canvas(states[0])
        lines.append(f'<circle class="start" cx="{_fmt(sx)}" cy="{_fmt(sy)}" r="2.5" fill="{color}"/>')
    for k, m in enumerate(markers):
        cx, cy = to_canvas(m)
        lines.append(f'<circle id="marker-{k}" class="marker" cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="6" '
                     f'fill="none" stroke="black" stroke-width="2"/>')
    lines.append("</svg>")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    return text

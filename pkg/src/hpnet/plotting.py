"""Direct SVG emission: rollout metric curves and scene overlays.

No display server or plotting library involved; output is plain SVG 1.1
text that any standards-conforming viewer opens. Scene overlays follow the
fixed palette: lanes grey, observed history green, ground-truth future
red, predicted trajectories blue.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

LANE_COLOR = "#9a9a9a"
HISTORY_COLOR = "#2e8b57"
GT_COLOR = "#d43a3a"
PRED_COLOR = "#2460d8"
SERIES_COLORS = ("#2460d8", "#d4702a", "#2e8b57", "#8a4fd4")


def _fmt(x):
    return f"{float(x):.3f}".rstrip("0").rstrip(".")


def _polyline(points, stroke, width=1.5, opacity=1.0, dash=None):
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<polyline fill="none" stroke="{stroke}" stroke-width="{_fmt(width)}"'
        f' stroke-opacity="{_fmt(opacity)}"{dash_attr} points="{pts}" />'
    )


def _text(x, y, s, size=11, color="#333333", anchor="start"):
    return (
        f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}"'
        f' font-family="sans-serif" fill="{color}" text-anchor="{anchor}">'
        f"{escape(s)}</text>"
    )


def _document(width, height, elements):
    body = "\n".join(elements)
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"'
        f' viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f"{body}\n</svg>\n"
    )


def line_chart(series, title, ylabel, width=640, height=400):
    """series: iterable of (label, xs, ys). Returns SVG text."""
    margin = 56
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    xs_all = np.concatenate([np.asarray(xs, dtype=float) for _, xs, _ in series])
    ys_all = np.concatenate([np.asarray(ys, dtype=float) for _, _, ys in series])
    x_lo, x_hi = xs_all.min(), xs_all.max()
    y_lo, y_hi = ys_all.min(), ys_all.max()
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(x):
        return margin + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return height - margin - (y - y_lo) / (y_hi - y_lo) * plot_h

    els = [
        _polyline([(margin, margin), (margin, height - margin),
                   (width - margin, height - margin)], "#444444", 1.0),
        _text(width / 2, margin / 2, title, size=14, anchor="middle"),
        _text(14, height / 2, ylabel, size=11, anchor="middle"),
    ]
    for i in range(5):
        yv = y_lo + (y_hi - y_lo) * i / 4
        els.append(_text(margin - 6, sy(yv) + 4, f"{yv:.3g}", size=9, anchor="end"))
        xv = x_lo + (x_hi - x_lo) * i / 4
        els.append(_text(sx(xv), height - margin + 14, f"{xv:.3g}", size=9,
                         anchor="middle"))
    for i, (label, xs, ys) in enumerate(series):
        color = SERIES_COLORS[i % len(SERIES_COLORS)]
        pts = [(sx(x), sy(y)) for x, y in zip(xs, ys)]
        els.append(_polyline(pts, color, 2.0))
        els.append(_text(width - margin, margin + 16 * i + 4, label,
                         color=color, anchor="end"))
    return _document(width, height, els)


def scene_overlay(scene, predictions=None, agents=None, width=640, height=640):
    """Scene drawing; ``predictions`` maps agent index -> [K, F, 2] global
    trajectories drawn in blue for the selected agents (default: focal)."""
    pts = [l.centerline for l in scene.lanes]
    for a in scene.agents:
        pts.append(a.xy[a.valid])
    if predictions:
        pts.extend(np.asarray(p).reshape(-1, 2) for p in predictions.values())
    allp = np.concatenate([p for p in pts if len(p)], axis=0)
    lo = allp.min(axis=0) - 5.0
    hi = allp.max(axis=0) + 5.0
    span = float(max(hi[0] - lo[0], hi[1] - lo[1]))
    margin = 20
    scale = (min(width, height) - 2 * margin) / span

    def s(p):
        return (margin + (p[0] - lo[0]) * scale,
                height - margin - (p[1] - lo[1]) * scale)

    els = []
    for lane in scene.lanes:
        els.append(_polyline([s(p) for p in lane.centerline], LANE_COLOR, 1.0, 0.8))
    t0 = scene.history_frames
    for a in scene.agents:
        hist = a.xy[:t0][a.valid[:t0]]
        fut = a.xy[t0:][a.valid[t0:]]
        if len(hist) > 1:
            els.append(_polyline([s(p) for p in hist], HISTORY_COLOR, 2.0))
        if len(fut) > 1:
            els.append(_polyline([s(p) for p in fut], GT_COLOR, 2.0))
    if predictions is None:
        predictions = {}
    for n, trajs in predictions.items():
        if agents is not None and n not in agents:
            continue
        start = scene.agents[n].xy[t0 - 1]
        for mode in np.asarray(trajs, dtype=float):
            path = np.concatenate([start[None], mode], axis=0)
            els.append(_polyline([s(p) for p in path], PRED_COLOR, 1.5, 0.85))
    return _document(width, height, els)

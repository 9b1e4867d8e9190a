"""Deterministic SVG scatter plots of 2-D source, target and transported points."""

import xml.etree.ElementTree as ET

import numpy as np

from .errors import ShapeError, UsageError

SIZE = 600
MARGIN = 30
RADIUS = 2.5
STYLES = {
    "source": "#1f77b4",
    "target": "#ff7f0e",
    "pred": "#2ca02c",
}


def _fmt(v):
    return f"{v:.3f}"


def _check_2d(name, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 2:
        cols = X.shape[1] if X.ndim == 2 else "?"
        raise ShapeError(f"{name} has {cols} columns; plot needs exactly 2 (select two columns first)")
    return X


def render_svg(source, target, pred=None, rays=False, title=None):
    """Return the SVG document as a string."""
    source = _check_2d("source", source)
    target = _check_2d("target", target)
    sets = [("source", source), ("target", target)]
    if pred is not None:
        pred = _check_2d("pred", pred)
        if len(pred) != len(source):
            raise ShapeError(f"pred has {len(pred)} rows, source has {len(source)}")
        sets.append(("pred", pred))
    if rays and pred is None:
        raise UsageError("rays need transported points (--pred)")

    pts = np.vstack([X for _, X in sets])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(max((hi - lo).max(), 1e-12))
    scale = (SIZE - 2 * MARGIN) / span

    def to_px(X):
        px = MARGIN + (X[:, 0] - lo[0]) * scale
        py = SIZE - MARGIN - (X[:, 1] - lo[1]) * scale
        return px, py

    svg = ET.Element("svg", {"xmlns": "http://www.w3.org/2000/svg", "version": "1.1",
                             "width": str(SIZE), "height": str(SIZE),
                             "viewBox": f"0 0 {SIZE} {SIZE}"})
    if title:
        ET.SubElement(svg, "title").text = title
    ET.SubElement(svg, "rect", {"width": str(SIZE), "height": str(SIZE), "fill": "white"})
    if rays:
        g = ET.SubElement(svg, "g", {"id": "rays", "stroke": "#999999", "stroke-width": "0.5"})
        sx, sy = to_px(source)
        tx, ty = to_px(pred)
        for a, b, c, d in zip(sx, sy, tx, ty):
            ET.SubElement(g, "line", {"x1": _fmt(a), "y1": _fmt(b), "x2": _fmt(c), "y2": _fmt(d)})
    for name, X in sets:
        g = ET.SubElement(svg, "g", {"id": name, "fill": STYLES[name], "fill-opacity": "0.7"})
        px, py = to_px(X)
        for a, b in zip(px, py):
            ET.SubElement(g, "circle", {"cx": _fmt(a), "cy": _fmt(b), "r": str(RADIUS)})
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(svg, encoding="unicode") + "\n"

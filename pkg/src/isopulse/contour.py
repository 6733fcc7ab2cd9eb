"""Marching-squares contour extraction and polyline intersection tests."""
from __future__ import annotations

import numpy as np


def _interp(pa, va, pb, vb, level):
    t = (level - va) / (vb - va)
    t = min(1.0, max(0.0, t))
    return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))


def _cell_segments(corners, values, level):
    """Segments of the level line inside one cell.

    corners/values are in cyclic order (bl, br, tr, tl). The ambiguous
    saddle case is resolved by the cell-center average.
    """
    above = [v >= level for v in values]
    idx = sum(1 << k for k, a in enumerate(above) if a)
    if idx in (0, 15):
        return []
    pts = {}
    for k in range(4):
        k2 = (k + 1) % 4
        if above[k] != above[k2]:
            pts[(k, k2)] = _interp(corners[k], values[k], corners[k2], values[k2], level)
    edges = list(pts.values())
    if len(edges) == 2:
        return [(edges[0], edges[1])]
    if len(edges) == 4:
        keys = list(pts.keys())
        center_above = (sum(values) / 4.0) >= level
        # connect crossings so that the "above" corners stay on one side
        if above[0] == center_above:
            pairing = [((0, 1), (1, 2)), ((2, 3), (3, 0))]
        else:
            pairing = [((3, 0), (0, 1)), ((1, 2), (2, 3))]
        segs = []
        for a, b in pairing:
            if a in pts and b in pts:
                segs.append((pts[a], pts[b]))
        return segs
    return []


def marching_squares(xs, ys, values, level, mask=None):
    """Extract the polylines of values == level on a rectangular grid.

    values is indexed [ix, iy]; cells touching masked or non-finite nodes
    are skipped. Returns a list of (k, 2) arrays of (x, y) vertices.
    """
    values = np.asarray(values, float)
    nx, ny = values.shape
    bad = ~np.isfinite(values)
    if mask is not None:
        bad |= np.asarray(mask, bool)
    segments = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            if bad[i, j] or bad[i + 1, j] or bad[i + 1, j + 1] or bad[i, j + 1]:
                continue
            corners = ((xs[i], ys[j]), (xs[i + 1], ys[j]),
                       (xs[i + 1], ys[j + 1]), (xs[i], ys[j + 1]))
            vals = (values[i, j], values[i + 1, j],
                    values[i + 1, j + 1], values[i, j + 1])
            segments.extend(_cell_segments(corners, vals, level))
    return _stitch(segments)


def _key(pt):
    return (round(pt[0], 10), round(pt[1], 10))


def _stitch(segments):
    """Join raw segments into polylines by shared endpoints."""
    if not segments:
        return []
    adj: dict = {}
    for si, (a, b) in enumerate(segments):
        adj.setdefault(_key(a), []).append((si, 0))
        adj.setdefault(_key(b), []).append((si, 1))
    used = [False] * len(segments)
    lines = []
    for si in range(len(segments)):
        if used[si]:
            continue
        used[si] = True
        a, b = segments[si]
        chain = [a, b]
        # extend forward from b, then backward from a
        for endpoint, append in ((b, True), (a, False)):
            current = endpoint
            while True:
                candidates = [(sj, end) for sj, end in adj.get(_key(current), [])
                              if not used[sj]]
                if not candidates:
                    break
                sj, end = candidates[0]
                used[sj] = True
                nxt = segments[sj][1 - end]
                if append:
                    chain.append(nxt)
                else:
                    chain.insert(0, nxt)
                current = nxt
        lines.append(np.asarray(chain, float))
    lines.sort(key=lambda ln: (ln[:, 0].min(), ln[:, 1].min()))
    return lines


def _orient(p, q, r):
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _seg_intersection(p1, p2, p3, p4, eps=1e-12):
    """Proper intersection point of segments p1p2 and p3p4, or None."""
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and \
       ((d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)):
        denom = (p1[0] - p2[0]) * (p3[1] - p4[1]) - (p1[1] - p2[1]) * (p3[0] - p4[0])
        if abs(denom) < 1e-300:
            return None
        t = ((p1[0] - p3[0]) * (p3[1] - p4[1]) - (p1[1] - p3[1]) * (p3[0] - p4[0])) / denom
        return (p1[0] + t * (p2[0] - p1[0]), p1[1] + t * (p2[1] - p1[1]))
    return None


def polyline_intersections(line_a, line_b):
    """All proper crossings between two polylines (bounding-box prefiltered)."""
    pts = []
    a = np.asarray(line_a, float)
    b = np.asarray(line_b, float)
    if (a[:, 0].max() < b[:, 0].min() or b[:, 0].max() < a[:, 0].min() or
            a[:, 1].max() < b[:, 1].min() or b[:, 1].max() < a[:, 1].min()):
        return pts
    for i in range(len(a) - 1):
        for j in range(len(b) - 1):
            hit = _seg_intersection(a[i], a[i + 1], b[j], b[j + 1])
            if hit is not None:
                pts.append(hit)
    return pts

"""Small 2D computational-geometry kit: convex hulls, half-plane clipping,
point/polygon queries and segment intersection.

All polygons are numpy arrays of shape (m, 2) in counter-clockwise order.
"""

import numpy as np


def convex_hull(points):
    """Monotone-chain convex hull; returns CCW vertices without repetition.

    Degenerate inputs (fewer than 3 distinct points, collinear sets) return
    the reduced vertex chain (possibly 1 or 2 points).
    """
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        return pts[[0, -1]]
    return hull


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def polygon_area(poly):
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def polygon_centroid(poly):
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3 or abs(polygon_area(poly)) < 1e-12:
        return poly.mean(axis=0)
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    c = x * yn - xn * y
    a = 0.5 * np.sum(c)
    return np.array([np.sum((x + xn) * c), np.sum((y + yn) * c)]) / (6.0 * a)


def point_in_convex(poly, p, eps=1e-9):
    """True if p lies inside or on the CCW convex polygon."""
    if len(poly) == 0:
        return False
    if len(poly) == 1:
        return bool(np.linalg.norm(poly[0] - p) <= eps)
    if len(poly) == 2:
        return point_segment_distance(p, poly[0], poly[1]) <= eps
    nxt = np.roll(poly, -1, axis=0)
    cr = (nxt[:, 0] - poly[:, 0]) * (p[1] - poly[:, 1]) - (nxt[:, 1] - poly[:, 1]) * (p[0] - poly[:, 0])
    return bool(np.all(cr >= -eps))


def clip_halfplane(poly, normal, offset):
    """Sutherland–Hodgman clip of a convex polygon by {p : n·p >= b}."""
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 0:
        return poly
    n = np.asarray(normal, dtype=float)
    out = []
    m = len(poly)
    d = poly @ n - offset
    for i in range(m):
        j = (i + 1) % m
        if d[i] >= 0:
            out.append(poly[i])
        if (d[i] >= 0) != (d[j] >= 0):
            t = d[i] / (d[i] - d[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    if not out:
        return np.zeros((0, 2))
    return np.array(out)


def point_segment_distance(p, a, b):
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return float(np.linalg.norm(p - a))
    t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def point_polygon_distance(poly, p):
    """Distance from p to a convex polygon (0 if inside)."""
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 0:
        return np.inf
    if len(poly) == 1:
        return float(np.linalg.norm(poly[0] - p))
    if len(poly) >= 3 and point_in_convex(poly, p):
        return 0.0
    nxt = np.roll(poly, -1, axis=0)
    return min(point_segment_distance(p, a, b) for a, b in zip(poly, nxt))


def segments_intersect(p1, p2, q1, q2, eps=0.0):
    """Proper or touching intersection test for segments p1p2 and q1q2."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True
    if abs(d1) <= eps and _on_segment(q1, q2, p1):
        return True
    if abs(d2) <= eps and _on_segment(q1, q2, p2):
        return True
    if abs(d3) <= eps and _on_segment(p1, p2, q1):
        return True
    if abs(d4) <= eps and _on_segment(p1, p2, q2):
        return True
    return False


def _on_segment(a, b, p):
    return (
        min(a[0], b[0]) - 1e-12 <= p[0] <= max(a[0], b[0]) + 1e-12
        and min(a[1], b[1]) - 1e-12 <= p[1] <= max(a[1], b[1]) + 1e-12
    )


def hulls_intersect_or_near(hull_a, hull_b, max_gap):
    """True if two convex hulls overlap or come within max_gap of each other."""
    if len(hull_a) == 0 or len(hull_b) == 0:
        return False
    for p in hull_a:
        if point_polygon_distance(hull_b, p) <= max_gap:
            return True
    for p in hull_b:
        if point_polygon_distance(hull_a, p) <= max_gap:
            return True
    if len(hull_a) >= 2 and len(hull_b) >= 2:
        na, nb = np.roll(hull_a, -1, axis=0), np.roll(hull_b, -1, axis=0)
        for a1, a2 in zip(hull_a, na):
            for b1, b2 in zip(hull_b, nb):
                if segments_intersect(a1, a2, b1, b2):
                    return True
    return False


def hull_contains_hull(outer, inner, eps=1e-9):
    """True if every vertex of `inner` lies inside convex polygon `outer`."""
    if len(outer) < 3 or len(inner) == 0:
        return False
    return all(point_in_convex(outer, p, eps) for p in inner)


def cone_intersects_polygon(apex, direction, half_angle, poly):
    """Does a 2D cone (apex, unit direction, half-angle) hit a convex polygon?"""
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 0:
        return False
    if len(poly) >= 3 and point_in_convex(poly, apex):
        return True
    d = np.asarray(direction, dtype=float)
    dn = np.linalg.norm(d)
    if dn < 1e-12:
        return False
    d = d / dn
    cos_h = np.cos(half_angle)
    # any vertex within the angular wedge
    rel = poly - apex
    dist = np.linalg.norm(rel, axis=1)
    ok = dist > 1e-12
    if np.any((rel[ok] @ d) >= cos_h * dist[ok]):
        return True
    if np.any(~ok):
        return True
    # either boundary ray crossing a polygon edge
    far = 4.0 * (np.max(dist) + 1.0)
    for sign in (-1.0, 1.0):
        c, s = np.cos(sign * half_angle), np.sin(sign * half_angle)
        ray = np.array([c * d[0] - s * d[1], s * d[0] + c * d[1]])
        end = apex + far * ray
        nxt = np.roll(poly, -1, axis=0)
        for a, b in zip(poly, nxt):
            if segments_intersect(apex, end, a, b):
                return True
    return False

"""Planar straight-line graph helpers: faces, containment, intersections."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def polygon_area(xy) -> float:
    """Signed shoelace area (positive for counter-clockwise loops)."""
    xy = np.asarray(xy, dtype=float)
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def point_in_polygon(pt, xy) -> bool:
    """Even-odd ray casting; points on the boundary count as outside."""
    px, py = pt
    inside = False
    n = len(xy)
    for k in range(n):
        x1, y1 = xy[k]
        x2, y2 = xy[(k + 1) % n]
        if point_segment_distance(pt, (x1, y1), (x2, y2)) < 1e-14:
            return False
        if (y1 > py) != (y2 > py):
            xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if xc > px:
                inside = not inside
    return inside


def point_segment_distance(pt, a, b) -> float:
    px, py = pt
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = min(1.0, max(0.0, ((px - ax) * dx + (py - ay) * dy) / L2))
    return math.hypot(px - ax - t * dx, py - ay - t * dy)


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_cross(a, b, c, d, tol=1e-14) -> bool:
    """True if closed segments ab and cd share a point other than a common endpoint."""
    shared = {tuple(a), tuple(b)} & {tuple(c), tuple(d)}
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    scale = max(1.0, *(abs(v) for v in (*a, *b, *c, *d))) ** 2
    eps = tol * scale
    if shared:
        # collinear overlap beyond the shared endpoint is still a crossing
        if abs(o1) <= eps and abs(o2) <= eps:
            s = np.array(shared.pop())
            others = [np.array(p) for p in (a, b, c, d) if tuple(p) != tuple(s)]
            if len(others) == 2:
                return float(np.dot(others[0] - s, others[1] - s)) > 0.0
        return False
    if ((o1 > eps and o2 < -eps) or (o1 < -eps and o2 > eps)) and (
        (o3 > eps and o4 < -eps) or (o3 < -eps and o4 > eps)
    ):
        return True
    for p, q, r, o in ((a, b, c, o1), (a, b, d, o2), (c, d, a, o3), (c, d, b, o4)):
        if abs(o) <= eps and point_segment_distance(r, p, q) <= 1e-12:
            return True
    return False


@dataclass(frozen=True)
class Face:
    """A bounded face of the graph, identified by its outer counter-clockwise cycle."""

    cycle: tuple[int, ...]
    outer_area: float
    area: float


def planar_faces(vertices, edges) -> tuple[list[Face], list[tuple[int, ...]]]:
    """Trace the faces of a planar straight-line graph.

    Returns the bounded faces (outer cycle CCW, area net of enclosed
    components) and the clockwise cycles that bound connected components
    from the outside.
    """
    V = np.asarray(vertices, dtype=float)
    nbrs: dict[int, list[int]] = {}
    for i, j in edges:
        nbrs.setdefault(i, []).append(j)
        nbrs.setdefault(j, []).append(i)
    for v, lst in nbrs.items():
        lst.sort(key=lambda w: math.atan2(V[w, 1] - V[v, 1], V[w, 0] - V[v, 0]))

    visited: set[tuple[int, int]] = set()
    ccw: list[tuple[int, ...]] = []
    cw: list[tuple[int, ...]] = []
    for u in sorted(nbrs):
        for v in nbrs[u]:
            if (u, v) in visited:
                continue
            cycle = []
            a, b = u, v
            while (a, b) not in visited:
                visited.add((a, b))
                cycle.append(a)
                lst = nbrs[b]
                k = lst.index(a)
                a, b = b, lst[(k - 1) % len(lst)]
            area = polygon_area(V[list(cycle)])
            (ccw if area > 0 else cw).append(tuple(cycle))

    outer = [(c, polygon_area(V[list(c)])) for c in ccw]
    net = [a for _, a in outer]
    for hole in cw:
        probe = V[hole[0]]
        host = containing_cycle(probe, [c for c, _ in outer], V, exclude_vertices=set(hole))
        if host is not None:
            net[host] += polygon_area(V[list(hole)])
    faces = [Face(c, a, n) for (c, a), n in zip(outer, net)]
    return faces, cw


def containing_cycle(pt, cycles, V, exclude_vertices=()) -> int | None:
    """Index of the smallest-area cycle strictly containing ``pt``."""
    best, best_area = None, math.inf
    for k, c in enumerate(cycles):
        if set(c) & set(exclude_vertices):
            continue
        xy = V[list(c)]
        if point_in_polygon(pt, xy):
            a = abs(polygon_area(xy))
            if a < best_area:
                best, best_area = k, a
    return best


def face_of_point(pt, faces: list[Face], vertices) -> int | None:
    V = np.asarray(vertices, dtype=float)
    return containing_cycle(pt, [f.cycle for f in faces], V)

"""Conforming triangular meshes with per-element polynomial order.

Triangles are stored counter-clockwise with the newest vertex first, so the
refinement edge of triangle ``t`` is always ``(tris[t, 1], tris[t, 2])``.
Refinement is newest-vertex bisection with conforming closure; there are no
hanging nodes.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import triangle as _triangle
from scipy.spatial import cKDTree

from . import geometry
from .problem import ProblemDefinition, region_faces, validate

MAX_ORDER = 6
_BIG = np.int64(1) << 32


class MeshError(ValueError):
    def __init__(self, message: str, rule: str, entity: str | None = None, distance: float | None = None):
        super().__init__(message)
        self.rule = rule
        self.entity = entity
        self.distance = distance


class Action(str, enum.Enum):
    BISECT = "bisect"
    INCREMENT_ORDER = "increment_order"


@dataclass(frozen=True)
class RefinementMark:
    tri: int
    action: Action = Action.BISECT


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray  # (N, 2) r, z
    tris: np.ndarray  # (M, 3) node ids, newest vertex first, CCW
    region: np.ndarray  # (M,) index into region_names
    level: np.ndarray  # (M,) bisection depth
    order: np.ndarray  # (M,) polynomial order
    seg_edges: np.ndarray  # (S, 2) sorted node pairs on constrained (marked) edges
    seg_markers: tuple[str, ...]
    region_names: tuple[str, ...]
    region_materials: tuple[str, ...]

    def __post_init__(self):
        _freeze(self.nodes, self.tris, self.region, self.level, self.order, self.seg_edges)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_tris(self) -> int:
        return len(self.tris)

    @property
    def newest_vertex(self) -> np.ndarray:
        return self.tris[:, 0]

    @cached_property
    def _edge_data(self):
        t = self.tris
        a, b = t[:, [1, 2, 0]], t[:, [2, 0, 1]]
        keys = np.minimum(a, b) * _BIG + np.maximum(a, b)
        ukeys, inv = np.unique(keys.ravel(), return_inverse=True)
        tri_edges = inv.reshape(-1, 3)
        E = len(ukeys)
        edge_tris = np.full((E, 2), -1, dtype=np.int64)
        edge_local = np.full((E, 2), -1, dtype=np.int64)
        flat_t = np.repeat(np.arange(len(t)), 3)
        flat_l = np.tile(np.arange(3), len(t))
        order = np.argsort(inv, kind="stable")
        e_sorted = inv[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = e_sorted[1:] != e_sorted[:-1]
        slot = np.where(first, 0, 1)
        if np.any(np.bincount(inv, minlength=E) > 2):
            raise MeshError("edge shared by more than two triangles", "non-conforming")
        edge_tris[e_sorted, slot] = flat_t[order]
        edge_local[e_sorted, slot] = flat_l[order]
        edges = np.column_stack([ukeys // _BIG, ukeys % _BIG])
        _freeze(ukeys, tri_edges, edge_tris, edge_local, edges)
        return ukeys, edges, tri_edges, edge_tris, edge_local

    @property
    def edge_keys(self) -> np.ndarray:
        return self._edge_data[0]

    @property
    def edges(self) -> np.ndarray:
        """(E, 2) sorted node pairs."""
        return self._edge_data[1]

    @property
    def tri_edges(self) -> np.ndarray:
        """(M, 3) edge id of local edge i (opposite vertex i)."""
        return self._edge_data[2]

    @property
    def edge_tris(self) -> np.ndarray:
        """(E, 2) incident triangles, -1 padded for boundary edges."""
        return self._edge_data[3]

    @property
    def edge_local(self) -> np.ndarray:
        return self._edge_data[4]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return np.nonzero(self.edge_tris[:, 1] < 0)[0]

    @cached_property
    def interior_edges(self) -> np.ndarray:
        return np.nonzero(self.edge_tris[:, 1] >= 0)[0]

    @cached_property
    def edge_markers(self) -> np.ndarray:
        """Marker per edge (object array, None for unconstrained edges)."""
        out = np.full(len(self.edges), None, dtype=object)
        if len(self.seg_edges):
            sk = self.seg_edges[:, 0] * _BIG + self.seg_edges[:, 1]
            pos = np.searchsorted(self.edge_keys, sk)
            ok = (pos < len(self.edge_keys)) & (self.edge_keys[np.minimum(pos, len(self.edge_keys) - 1)] == sk)
            for k in np.nonzero(ok)[0]:
                out[pos[k]] = self.seg_markers[k]
        return out

    @cached_property
    def areas(self) -> np.ndarray:
        x = self.nodes[self.tris]
        d1, d2 = x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def diameters(self) -> np.ndarray:
        x = self.nodes[self.tris]
        lens = np.linalg.norm(x[:, [1, 2, 0]] - x[:, [2, 0, 1]], axis=2)
        return lens.max(axis=1)

    @cached_property
    def _affine(self):
        x = self.nodes[self.tris]
        J = np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]], axis=2)  # columns d/dxi, d/deta
        Jinv = np.linalg.inv(J)
        _freeze(J, Jinv)
        return x[:, 0].copy(), J, Jinv

    @cached_property
    def _centroid_tree(self):
        return cKDTree(self.nodes[self.tris].mean(axis=1))

    def min_angles(self) -> np.ndarray:
        x = self.nodes[self.tris]
        out = np.full(len(x), np.pi)
        for i in range(3):
            u = x[:, (i + 1) % 3] - x[:, i]
            v = x[:, (i + 2) % 3] - x[:, i]
            c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            out = np.minimum(out, np.arccos(np.clip(c, -1.0, 1.0)))
        return out

    def with_orders(self, order) -> "Mesh":
        order = np.asarray(order, dtype=np.int64).copy()
        if order.shape != (self.n_tris,) or order.min() < 1 or order.max() > MAX_ORDER:
            raise MeshError(f"orders must lie in [1, {MAX_ORDER}]", "order-range")
        return dataclasses.replace(self, order=order)

    def region_id(self, name: str) -> int:
        try:
            return self.region_names.index(name)
        except ValueError:
            raise MeshError(f"region {name!r} not in mesh", "unknown-region", name) from None

    def to_text(self) -> str:
        """Plain-text dump: header, one node per line, then one triangle per line."""
        lines = [f"# axihp-mesh nodes={self.n_nodes} triangles={self.n_tris} (r z | n0 n1 n2 region p)"]
        lines += [f"{r:.17g} {z:.17g}" for r, z in self.nodes]
        lines += [f"{a} {b} {c} {g} {p}" for (a, b, c), g, p in zip(self.tris, self.region, self.order)]
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# construction


def _orient_newest(nodes: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """CCW orientation with the vertex opposite the longest edge first."""
    tris = tris.copy()
    x = nodes[tris]
    d1, d2 = x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]
    flip = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    x = nodes[tris]
    lens = np.linalg.norm(x[:, [1, 2, 0]] - x[:, [2, 0, 1]], axis=2)  # edge opposite vertex i
    a, b = tris[:, [1, 2, 0]], tris[:, [2, 0, 1]]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    tol = 1e-12 * lens.max(axis=1, keepdims=True)
    cand = lens >= lens.max(axis=1, keepdims=True) - tol
    # among tied longest edges pick the lexicographically smallest node pair
    score = np.where(cand, lo * _BIG + hi, np.iinfo(np.int64).max)
    k = np.argmin(score, axis=1)
    rows = np.arange(len(tris))
    return np.column_stack([tris[rows, k], tris[rows, (k + 1) % 3], tris[rows, (k + 2) % 3]])


def triangulate(p: ProblemDefinition, h_init: float) -> Mesh:
    """Constrained quality Delaunay mesh of the seeded regions of ``p``.

    Unseeded faces are left out. Every triangle ends up with longest edge
    <= 2 h_init and order 1.
    """
    if not h_init > 0:
        raise MeshError("h_init must be positive", "h-nonpositive")
    violations = validate(p)
    if violations:
        v = violations[0]
        raise MeshError(f"invalid problem: {v.rule} at {v.entity}", v.rule, v.entity)
    faces, owner = region_faces(p)
    V = np.asarray(p.vertices, dtype=float)
    feature = np.inf
    for reg, f in zip(p.regions, owner):
        face = faces[f]
        if face.area < 1e-12:
            raise MeshError(f"region {reg.name!r} is degenerate (area {face.area:.3g} m^2)", "degenerate-region", reg.name)
        xy = V[list(face.cycle)]
        feature = min(feature, float(np.min(xy.max(axis=0) - xy.min(axis=0))))
    if h_init > feature * (1.0 + 1e-9):
        raise MeshError(
            f"h_init {h_init:g} exceeds smallest region feature {feature:g}", "feature-underresolved"
        )

    markers = sorted({m for _, _, m in p.edges})
    marker_id = {m: k + 1 for k, m in enumerate(markers)}
    tri_in = {
        "vertices": V,
        "segments": np.array([[i, j] for i, j, _ in p.edges], dtype=np.int32),
        "segment_markers": np.array([[marker_id[m]] for _, _, m in p.edges], dtype=np.int32),
        "regions": np.array([[*reg.seed, k + 1, 0.0] for k, reg in enumerate(p.regions)]),
    }
    out = _triangle.triangulate(tri_in, f"pq28AQa{0.5 * h_init * h_init:.17g}")
    attr = np.rint(out["triangle_attributes"][:, 0]).astype(np.int64)
    keep = attr > 0
    tris = out["triangles"][keep].astype(np.int64)
    used = np.unique(tris)
    remap = np.full(len(out["vertices"]), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    nodes = out["vertices"][used]
    nodes[:, 0] = np.maximum(nodes[:, 0], 0.0)
    tris = _orient_newest(nodes, remap[tris])

    seg = out["segments"].astype(np.int64)
    smark = out["segment_markers"].ravel()
    ok = (remap[seg[:, 0]] >= 0) & (remap[seg[:, 1]] >= 0) & (smark > 0)
    seg = np.sort(remap[seg[ok]], axis=1)
    seg_markers = tuple(markers[k - 1] for k in smark[ok])

    m = Mesh(
        nodes=nodes,
        tris=tris,
        region=attr[keep] - 1,
        level=np.zeros(len(tris), dtype=np.int64),
        order=np.ones(len(tris), dtype=np.int64),
        seg_edges=seg,
        seg_markers=seg_markers,
        region_names=tuple(r.name for r in p.regions),
        region_materials=tuple(r.material for r in p.regions),
    )
    # drop constrained edges that bound only removed faces
    mk = m.seg_edges[:, 0] * _BIG + m.seg_edges[:, 1]
    present = np.isin(mk, m.edge_keys)
    if not present.all():
        m = dataclasses.replace(
            m, seg_edges=m.seg_edges[present], seg_markers=tuple(s for s, k in zip(m.seg_markers, present) if k)
        )
    for _ in range(20):
        long = np.nonzero(m.diameters > 2.0 * h_init)[0]
        if len(long) == 0:
            break
        m = _bisect(m, _ref_keys(m.tris)[long])
    return dataclasses.replace(m, level=np.zeros(m.n_tris, dtype=np.int64))


# --------------------------------------------------------------------------
# refinement


def _edge_keys(tris: np.ndarray) -> np.ndarray:
    a, b = tris[:, [1, 2, 0]], tris[:, [2, 0, 1]]
    return np.minimum(a, b) * _BIG + np.maximum(a, b)


def _ref_keys(tris: np.ndarray) -> np.ndarray:
    a, b = tris[:, 1], tris[:, 2]
    return np.minimum(a, b) * _BIG + np.maximum(a, b)


def _bisect(m: Mesh, marked_keys) -> Mesh:
    """Bisect every edge in ``marked_keys`` plus the closure needed for conformity."""
    tris = m.tris.copy()
    marked = np.unique(np.asarray(marked_keys, dtype=np.int64))
    while True:
        K = _edge_keys(tris)
        has = np.isin(K, marked)
        need = has.any(axis=1) & ~has[:, 0]
        if not need.any():
            break
        marked = np.union1d(marked, K[need, 0])

    n0 = m.n_nodes
    region, level, order = m.region.copy(), m.level.copy(), m.order.copy()
    # every marked edge gets exactly one midpoint; endpoints are all original nodes
    mids = n0 + np.arange(len(marked))
    i, j = marked // _BIG, marked % _BIG
    new_nodes = 0.5 * (m.nodes[i] + m.nodes[j])
    while True:
        ref = _ref_keys(tris)
        sel = np.nonzero(np.isin(ref, marked))[0]
        if len(sel) == 0:
            break
        mv = mids[np.searchsorted(marked, ref[sel])]
        t = tris[sel]
        tris[sel] = np.column_stack([mv, t[:, 0], t[:, 1]])
        tris = np.vstack([tris, np.column_stack([mv, t[:, 2], t[:, 0]])])
        level[sel] += 1
        region = np.concatenate([region, region[sel]])
        level = np.concatenate([level, level[sel]])
        order = np.concatenate([order, order[sel]])

    seg = m.seg_edges
    sk = seg[:, 0] * _BIG + seg[:, 1]
    pos = np.searchsorted(marked, sk)
    hit = (pos < len(marked)) & (marked[np.minimum(pos, len(marked) - 1)] == sk)
    new_seg, new_mark = [], []
    for k in range(len(seg)):
        a, b = seg[k]
        if hit[k]:
            mid = mids[pos[k]]
            new_seg += [(min(a, mid), max(a, mid)), (min(mid, b), max(mid, b))]
            new_mark += [m.seg_markers[k]] * 2
        else:
            new_seg.append((a, b))
            new_mark.append(m.seg_markers[k])
    return dataclasses.replace(
        m,
        nodes=np.vstack([m.nodes, new_nodes]),
        tris=tris,
        region=region,
        level=level,
        order=order,
        seg_edges=np.array(new_seg, dtype=np.int64).reshape(-1, 2),
        seg_markers=tuple(new_mark),
    )


def refine(m: Mesh, marks) -> Mesh:
    """Apply bisection and order-increment marks; returns a new mesh.

    ``Bisect`` splits the triangle across its refinement edge (neighbours
    are bisected as needed to stay conforming); ``IncrementOrder`` raises p
    by one. A triangle carrying both is bisected and its children get p + 1.
    """
    bis, inc = [], []
    for mk in marks:
        if not 0 <= mk.tri < m.n_tris:
            raise MeshError(f"triangle id {mk.tri} out of range", "invalid-mark", str(mk.tri))
        if Action(mk.action) is Action.INCREMENT_ORDER:
            if m.order[mk.tri] >= MAX_ORDER:
                raise MeshError(f"triangle {mk.tri} already at order {MAX_ORDER}", "order-cap", str(mk.tri))
            inc.append(mk.tri)
        else:
            bis.append(mk.tri)
    out = m
    if inc:
        order = m.order.copy()
        order[np.unique(inc)] += 1
        out = dataclasses.replace(out, order=order)
    if bis:
        out = _bisect(out, _ref_keys(out.tris)[np.unique(bis)])
    return out


def refine_uniform(m: Mesh) -> Mesh:
    """Bisect all three edges of every triangle (each triangle becomes four)."""
    return _bisect(m, np.unique(_edge_keys(m.tris)))


# --------------------------------------------------------------------------
# point location


def _bary(m: Mesh, tri_ids: np.ndarray, pts: np.ndarray) -> np.ndarray:
    x0, _, Jinv = m._affine
    d = pts - x0[tri_ids]
    l12 = np.einsum("...ij,...j->...i", Jinv[tri_ids], d)
    return np.concatenate([1.0 - l12.sum(axis=-1, keepdims=True), l12], axis=-1)


def boundary_distance(m: Mesh, pt) -> float:
    e = m.edges[m.boundary_edges]
    return min(geometry.point_segment_distance(pt, m.nodes[a], m.nodes[b]) for a, b in e)


def locate_many(m: Mesh, pts, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Containing triangle and barycentric coordinates for each point.

    Points within ``tol`` (metres) of the domain boundary are accepted and
    snapped onto the nearest triangle.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n = len(pts)
    k = min(m.n_tris, 16)
    _, cand = m._centroid_tree.query(pts, k=k)
    cand = cand.reshape(n, k)
    lam = _bary(m, cand, pts[:, None, :].repeat(k, axis=1))
    minlam = lam.min(axis=-1)
    eps = -1e-12
    found = minlam >= eps
    first = np.argmax(found, axis=1)
    ok = found[np.arange(n), first]
    tri = cand[np.arange(n), first]
    bary = lam[np.arange(n), first]
    for q in np.nonzero(~ok)[0]:
        lam_all = _bary(m, np.arange(m.n_tris), np.broadcast_to(pts[q], (m.n_tris, 2)))
        worst = lam_all.min(axis=1)
        best = int(np.argmax(worst))
        if worst[best] < eps:
            dist = boundary_distance(m, pts[q])
            inside = _inside_domain(m, pts[q])
            if not inside and dist > tol:
                raise MeshError(
                    f"point ({pts[q, 0]:.6g}, {pts[q, 1]:.6g}) is outside the domain "
                    f"(nearest boundary at {dist:.3g} m)",
                    "outside-domain",
                    distance=dist,
                )
        tri[q] = best
        bary[q] = lam_all[best]
    bary = np.clip(bary, 0.0, 1.0)
    bary /= bary.sum(axis=1, keepdims=True)
    return tri, bary


def _inside_domain(m: Mesh, pt) -> bool:
    lam = _bary(m, np.arange(m.n_tris), np.broadcast_to(np.asarray(pt, float), (m.n_tris, 2)))
    return bool((lam.min(axis=1) >= -1e-9).any())


def locate(m: Mesh, point) -> tuple[int, np.ndarray]:
    tri, bary = locate_many(m, np.asarray(point, dtype=float)[None, :])
    return int(tri[0]), bary[0]

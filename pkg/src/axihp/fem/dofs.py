"""Global numbering of hierarchic degrees of freedom under the minimum rule."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..mesh import Mesh
from .basis import bubble_slots, edge_slots, nbasis


@dataclass(frozen=True, eq=False)
class DofMap:
    """Vertex DOFs first (node order), then edge modes (edge order), then bubbles (triangle order)."""

    mesh: Mesh
    edge_order: np.ndarray
    edge_start: np.ndarray
    bubble_start: np.ndarray
    ndofs: int

    @cached_property
    def groups(self) -> list[tuple[int, np.ndarray, np.ndarray, np.ndarray]]:
        """``(p, tri_ids, l2g, sign)`` per element order; ``l2g`` is -1 for inactive edge modes."""
        m = self.mesh
        out = []
        for p in np.unique(m.order):
            p = int(p)
            ids = np.nonzero(m.order == p)[0]
            nb = nbasis(p)
            l2g = np.full((len(ids), nb), -1, dtype=np.int64)
            sign = np.ones((len(ids), nb))
            t = m.tris[ids]
            l2g[:, :3] = t
            for i in range(3):
                e = m.tri_edges[ids, i]
                a, b = t[:, (i + 1) % 3], t[:, (i + 2) % 3]
                pe = self.edge_order[e]
                for slot, k in zip(edge_slots(p, i), range(2, p + 1)):
                    active = k <= pe
                    l2g[:, slot] = np.where(active, self.edge_start[e] + k - 2, -1)
                    if k % 2:
                        sign[:, slot] = np.where(a < b, 1.0, -1.0)
            bs = bubble_slots(p)
            if len(bs):
                l2g[:, bs] = self.bubble_start[ids][:, None] + np.arange(len(bs))[None, :]
            for arr in (ids, l2g, sign):
                arr.setflags(write=False)
            out.append((p, ids, l2g, sign))
        return out

    def gather(self, x: np.ndarray, l2g: np.ndarray, sign: np.ndarray) -> np.ndarray:
        """Local (signed) coefficients; zero for inactive modes."""
        return np.where(l2g >= 0, x[np.maximum(l2g, 0)], 0.0) * sign

    def edge_dofs(self, e: int) -> np.ndarray:
        return self.edge_start[e] + np.arange(self.edge_order[e] - 1)


def build_dofmap(m: Mesh) -> DofMap:
    et = m.edge_tris
    o1 = m.order[et[:, 0]]
    o2 = np.where(et[:, 1] >= 0, m.order[np.maximum(et[:, 1], 0)], o1)
    edge_order = np.minimum(o1, o2)
    n_edge = edge_order - 1
    edge_start = m.n_nodes + np.concatenate([[0], np.cumsum(n_edge)[:-1]])
    nb_bubble = (m.order - 1) * (m.order - 2) // 2
    base = m.n_nodes + int(n_edge.sum())
    bubble_start = base + np.concatenate([[0], np.cumsum(nb_bubble)[:-1]])
    ndofs = base + int(nb_bubble.sum())
    for arr in (edge_order, edge_start, bubble_start):
        arr.setflags(write=False)
    return DofMap(m, edge_order, edge_start, bubble_start, ndofs)

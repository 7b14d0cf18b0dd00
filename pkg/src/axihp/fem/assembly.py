"""Assembly of the axisymmetric weak forms.

All forms carry the r weight and the 2 pi azimuthal factor, so quadratic
forms of the assembled matrices are physical (J, W) quantities.

Electrostatic::

    a(phi, v) = 2 pi \\int eps grad(phi) . grad(v) r dr dz

Time-harmonic A_phi (rms phasors)::

    a(A, v) = 2 pi \\int nu (1/r) grad(rA) . grad(rv) dr dz + j omega 2 pi \\int sigma A v r dr dz
    l(v)    = 2 pi \\int J_src v r dr dz

where (1/r) grad(rA) . grad(rv) = r grad A . grad v + A v_r + A_r v + A v / r.
The natural condition of this form is B_z = 0 on r-normal boundaries and
B_r = 0 on z-normal ones. A = 0 is imposed on the axis to keep the energy
bounded. Transient heat uses one implicit-Euler step::

    (rho c / dt) m(T, v) + 2 pi \\int k grad T . grad v r + 2 pi \\oint_conv h T v r
        = (rho c / dt) m(T_prev, v) + 2 pi \\int q v r + 2 pi \\oint_conv h T_amb v r
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..constants import EPS0, MU0, TWO_PI
from ..mesh import Mesh
from ..problem import BCKind, Physics, ProblemDefinition, SourceMode
from .basis import edge_tables, volume_tables
from .dofs import DofMap, build_dofmap
from .quadrature import MAX_ORDER as MAX_QUAD
from .solution import ElementField, FieldSolution, physical_grads

CHUNK = 2048


class AssemblyError(ValueError):
    pass


def quad_order(p: int) -> int:
    return min(2 * p + 2, MAX_QUAD)


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Reduced system on the free DOFs after symmetric Dirichlet elimination.

    ``full_matrix``/``full_rhs`` keep the unreduced operator for consistency
    checks (energy, power balance). ``kind`` is ``"spd"`` or ``"complex-symmetric"``.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    ndofs: int
    kind: str
    dofmap: DofMap | None = None
    physics: Physics | None = None
    frequency: float | None = None
    element_data: dict = field(default_factory=dict)
    mirror: int = 1
    full_matrix: sp.csr_matrix | None = None
    full_rhs: np.ndarray | None = None

    @classmethod
    def from_matrix(cls, A, b, kind: str = "spd") -> "LinearSystem":
        """Wrap a plain (already reduced) system."""
        A = sp.csr_matrix(A)
        b = np.atleast_1d(np.asarray(b))
        n = A.shape[0]
        return cls(A, b, np.arange(n), np.zeros(0, dtype=np.int64), np.zeros(0), n, kind)

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        x = np.zeros(self.ndofs, dtype=np.result_type(x_free, self.fixed_values))
        x[self.free] = x_free
        x[self.fixed] = self.fixed_values
        return x

    def solution(self, x: np.ndarray) -> FieldSolution:
        """Wrap a full coefficient vector from ``solve`` as a FieldSolution."""
        if self.dofmap is None:
            raise AssemblyError("system has no DOF map attached")
        return FieldSolution(
            self.dofmap.mesh, self.dofmap, np.asarray(x), self.physics, self.frequency, dict(self.element_data), self.mirror
        )


# --------------------------------------------------------------------------
# element data


def _materials(m: Mesh, p: ProblemDefinition):
    mats = []
    for name in m.region_materials:
        if name not in p.materials:
            raise AssemblyError(f"material {name!r} missing from problem")
        mats.append(p.materials[name])
    return mats


def element_data(m: Mesh, p: ProblemDefinition, sigma=None) -> dict:
    """Per-triangle coefficients: eps, nu, sigma, J (source density), k, rho_c."""
    mats = _materials(m, p)
    g = m.region
    eps = EPS0 * np.array([mt.epsilon_r for mt in mats])[g]
    nu = 1.0 / (MU0 * np.array([mt.mu_r for mt in mats])[g])
    sig = np.array([mt.sigma_ref for mt in mats])[g] if sigma is None else np.asarray(sigma, dtype=float)
    if sig.shape != (m.n_tris,):
        raise AssemblyError("conductivity override must give one value per triangle")
    k = np.array([mt.thermal_conductivity for mt in mats])[g]
    rho_c = np.array([mt.density * mt.heat_capacity for mt in mats])[g]
    J = np.zeros(m.n_tris)
    q = np.zeros(m.n_tris)
    for s in p.sources:
        rid = m.region_id(s.region)
        sel = g == rid
        area = float(m.areas[sel].sum())
        if area <= 0.0:
            raise AssemblyError(f"source region {s.region!r} has zero area")
        if s.mode is SourceMode.TOTAL_CURRENT:
            # the mirrored half carries the same current density
            J[sel] += s.value / (p.mirror_factor * area)
        elif s.mode is SourceMode.CURRENT_DENSITY:
            J[sel] += s.value
        elif s.mode is SourceMode.VOLUMETRIC_HEAT:
            q[sel] += s.value
    return {"eps": eps, "nu": nu, "sigma": sig, "J": J, "k": k, "rho_c": rho_c, "q": q}


# --------------------------------------------------------------------------
# element integration


def _geometry(m: Mesh, ids: np.ndarray, pts: np.ndarray):
    x0, J, Jinv = m._affine
    X = x0[ids][:, None, :] + np.einsum("eij,qj->eqi", J[ids], pts)
    det = 2.0 * m.areas[ids]
    return X, det, Jinv[ids]


def _volume_terms(m: Mesh, dm: DofMap, terms, need_load=None):
    """Accumulate element matrices/vectors for each order group.

    ``terms(ids, r, wq, V, PG, X, pts)`` returns (Ke (n, nb, nb) or None, fe (n, nb) or None).
    Returns COO triplets for the matrix and a dense load vector.
    """
    rows, cols, vals = [], [], []
    load = None
    for p, ids_all, l2g_all, sign_all in dm.groups:
        pts, w, V, G, _ = volume_tables(p, quad_order(p))
        for c0 in range(0, len(ids_all), CHUNK):
            ids = ids_all[c0 : c0 + CHUNK]
            l2g = l2g_all[c0 : c0 + CHUNK]
            sgn = sign_all[c0 : c0 + CHUNK]
            X, det, Jinv = _geometry(m, ids, pts)
            r = X[..., 0]
            wq = TWO_PI * det[:, None] * w[None, :]
            PG = physical_grads(Jinv, G)
            Ke, fe = terms(ids, r, wq, V, PG, X, pts)
            active = l2g >= 0
            if Ke is not None:
                Ke = Ke * sgn[:, :, None] * sgn[:, None, :]
                mask = active[:, :, None] & active[:, None, :]
                R = np.broadcast_to(l2g[:, :, None], Ke.shape)
                C = np.broadcast_to(l2g[:, None, :], Ke.shape)
                rows.append(R[mask])
                cols.append(C[mask])
                vals.append(Ke[mask])
            if fe is not None:
                fe = fe * sgn
                if load is None:
                    load = np.zeros(dm.ndofs, dtype=fe.dtype)
                elif fe.dtype.kind == "c" and load.dtype.kind != "c":
                    load = load.astype(complex)
                np.add.at(load, l2g[active], fe[active])
    return rows, cols, vals, load


def _coo(rows, cols, vals, n, dtype=float) -> sp.csr_matrix:
    if not rows:
        return sp.csr_matrix((n, n), dtype=dtype)
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    A = A.tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def stiffness_matrix(m: Mesh, dm: DofMap, coef: np.ndarray) -> sp.csr_matrix:
    """2 pi \\int coef grad u . grad v r."""

    def terms(ids, r, wq, V, PG, X, pts):
        return np.einsum("eq,eqai,eqbi->eab", coef[ids][:, None] * wq * r, PG, PG), None

    return _coo(*_volume_terms(m, dm, terms)[:3], dm.ndofs)


def mass_matrix(m: Mesh, dm: DofMap, coef: np.ndarray) -> sp.csr_matrix:
    """2 pi \\int coef u v r."""

    def terms(ids, r, wq, V, PG, X, pts):
        return np.einsum("eq,qa,qb->eab", coef[ids][:, None] * wq * r, V, V), None

    return _coo(*_volume_terms(m, dm, terms)[:3], dm.ndofs)


def curl_matrix(m: Mesh, dm: DofMap, nu: np.ndarray) -> sp.csr_matrix:
    """2 pi \\int nu (1/r) grad(rA) . grad(rv)."""

    def terms(ids, r, wq, V, PG, X, pts):
        c = nu[ids][:, None] * wq
        K = np.einsum("eq,eqai,eqbi->eab", c * r, PG, PG)
        K += np.einsum("eq,qa,qb->eab", c / r, V, V)
        cross = np.einsum("eq,eqa,qb->eab", c, PG[..., 0], V)
        K += cross + cross.transpose(0, 2, 1)
        return K, None

    return _coo(*_volume_terms(m, dm, terms)[:3], dm.ndofs)


def _sample_source(q, m: Mesh, ids, pts, X):
    """Source values (n, nq) from a scalar, per-element array, ElementField or callable."""
    if q is None:
        return np.zeros((len(ids), len(pts)))
    if isinstance(q, ElementField):
        if q.mesh is not m and q.mesh.n_tris != m.n_tris:
            raise AssemblyError("source field lives on a different mesh")
        return q.sample(ids, pts)
    if callable(q):
        return np.asarray(q(ids, pts, X))
    q = np.asarray(q)
    if q.ndim == 0:
        return np.full((len(ids), len(pts)), q)
    return np.broadcast_to(q[ids][:, None], (len(ids), len(pts)))


def load_vector(m: Mesh, dm: DofMap, q) -> np.ndarray:
    """2 pi \\int q v r."""

    def terms(ids, r, wq, V, PG, X, pts):
        f = _sample_source(q, m, ids, pts, X)
        return None, np.einsum("eq,qb->eb", f * wq * r, V)

    load = _volume_terms(m, dm, terms)[3]
    return np.zeros(dm.ndofs) if load is None else load


def _edge_groups(m: Mesh, dm: DofMap, edges: np.ndarray):
    """Boundary edges grouped by (order, local index): yields (p, i, tris, l2g, sign)."""
    if len(edges) == 0:
        return
    tri = m.edge_tris[edges, 0]
    loc = m.edge_local[edges, 0]
    for p, ids, l2g, sign in dm.groups:
        pos = np.searchsorted(ids, tri)
        pos = np.minimum(pos, len(ids) - 1)
        hit = ids[pos] == tri
        for i in range(3):
            sel = np.nonzero(hit & (loc == i))[0]
            if len(sel):
                yield p, i, tri[sel], l2g[pos[sel]], sign[pos[sel]]


def robin_terms(m: Mesh, dm: DofMap, edges: np.ndarray, h: np.ndarray, g: np.ndarray):
    """2 pi \\oint h u v r ds and 2 pi \\oint h g v r ds on the listed boundary edges.

    ``h`` and ``g`` are per-edge values aligned with ``edges``.
    """
    rows, cols, vals = [], [], []
    load = np.zeros(dm.ndofs)
    if len(edges) == 0:
        return sp.csr_matrix((dm.ndofs, dm.ndofs)), load
    h_of = dict(zip(edges.tolist(), h))
    g_of = dict(zip(edges.tolist(), g))
    x0, J, _ = m._affine
    for p, i, tris, l2g, sgn in _edge_groups(m, dm, edges):
        _, w, rp, V, _ = edge_tables(p, i, p + 2)
        e_ids = m.tri_edges[tris, i]
        hh = np.array([h_of[e] for e in e_ids])
        gg = np.array([g_of[e] for e in e_ids])
        X = x0[tris][:, None, :] + np.einsum("eij,qj->eqi", J[tris], rp)
        a, b = m.nodes[m.edges[e_ids, 0]], m.nodes[m.edges[e_ids, 1]]
        length = np.linalg.norm(b - a, axis=1)
        wq = TWO_PI * length[:, None] * w[None, :] * X[..., 0]
        Ke = np.einsum("eq,qa,qb->eab", hh[:, None] * wq, V, V) * sgn[:, :, None] * sgn[:, None, :]
        fe = np.einsum("eq,qb->eb", (hh * gg)[:, None] * wq, V) * sgn
        active = l2g >= 0
        mask = active[:, :, None] & active[:, None, :]
        rows.append(np.broadcast_to(l2g[:, :, None], Ke.shape)[mask])
        cols.append(np.broadcast_to(l2g[:, None, :], Ke.shape)[mask])
        vals.append(Ke[mask])
        np.add.at(load, l2g[active], fe[active])
    return _coo(rows, cols, vals, dm.ndofs), load


# --------------------------------------------------------------------------
# Dirichlet data


def dirichlet_dofs(m: Mesh, dm: DofMap, values: dict) -> tuple[np.ndarray, np.ndarray]:
    """Fixed DOFs and values for constant-valued markers ``values`` (marker -> value).

    A constant trace is carried by the vertex functions, so edge modes on
    constrained edges are fixed at zero. Shared vertices take the value of
    the lowest-numbered constrained edge.
    """
    fixed: dict[int, float] = {}
    markers = m.edge_markers
    for e in m.boundary_edges:
        mk = markers[e]
        if mk in values:
            for n in m.edges[e]:
                fixed.setdefault(int(n), values[mk])
            for d in dm.edge_dofs(e):
                fixed.setdefault(int(d), 0.0)
    keys = np.array(sorted(fixed), dtype=np.int64)
    return keys, np.array([fixed[k] for k in keys.tolist()])


def _reduce(A, b, dm: DofMap, fixed, g, kind, **kw) -> LinearSystem:
    n = dm.ndofs
    is_free = np.ones(n, dtype=bool)
    is_free[fixed] = False
    free = np.nonzero(is_free)[0]
    xg = np.zeros(n, dtype=np.result_type(A.dtype, g))
    xg[fixed] = g
    Af = A[free][:, free].tocsr()
    bf = (b - A @ xg)[free]
    return LinearSystem(Af, bf, free, fixed, g, n, kind, dm, full_matrix=A, full_rhs=b, **kw)


# --------------------------------------------------------------------------
# physics


def assemble_electrostatic(m: Mesh, p: ProblemDefinition, dofmap: DofMap | None = None) -> LinearSystem:
    if p.physics is not Physics.ELECTROSTATIC:
        raise AssemblyError(f"problem physics is {p.physics.value}, not electrostatic")
    dm = dofmap or build_dofmap(m)
    data = element_data(m, p)
    if np.any(~np.isfinite(data["eps"])) or np.any(data["eps"] <= 0):
        raise AssemblyError("missing or invalid permittivity")
    values = {k: bc.value for k, bc in p.boundaries.items() if bc.kind is BCKind.DIRICHLET}
    fixed, g = dirichlet_dofs(m, dm, values)
    if len(fixed) == 0:
        raise AssemblyError("no Dirichlet condition: the potential is determined only up to a constant")
    K = stiffness_matrix(m, dm, data["eps"])
    b = np.zeros(dm.ndofs)
    return _reduce(K, b, dm, fixed, g, "spd", physics=p.physics, element_data=data)


def assemble_harmonic_magnetic(
    m: Mesh, p: ProblemDefinition, sigma=None, dofmap: DofMap | None = None
) -> LinearSystem:
    """Complex-symmetric system for the rms phasor A_phi.

    ``sigma`` optionally overrides the per-triangle conductivity (coupled runs).
    """
    if not p.physics.has_magnetic:
        raise AssemblyError(f"problem physics is {p.physics.value}, not magnetic")
    if not p.frequency or p.frequency <= 0:
        raise AssemblyError("harmonic analysis needs a positive frequency")
    dm = dofmap or build_dofmap(m)
    data = element_data(m, p, sigma)
    omega = TWO_PI * p.frequency
    K = curl_matrix(m, dm, data["nu"])
    M = mass_matrix(m, dm, data["sigma"])
    A = (K + 1j * omega * M).tocsr()
    b = load_vector(m, dm, data["J"]).astype(complex)
    values = {}
    for k, bc in p.boundaries.items():
        if bc.kind in (BCKind.MAGNETIC_POTENTIAL_ZERO, BCKind.AXIS):
            values[k] = 0.0
        elif bc.kind is BCKind.DIRICHLET:
            values[k] = bc.value
    fixed, g = dirichlet_dofs(m, dm, values)
    return _reduce(
        A, b, dm, fixed, g.astype(complex), "complex-symmetric",
        physics=p.physics, frequency=p.frequency, element_data=data, mirror=p.mirror_factor,
    )


def assemble_thermal_step(
    m: Mesh, p: ProblemDefinition, T_prev: FieldSolution, q, dt: float, dofmap: DofMap | None = None
) -> LinearSystem:
    """One implicit-Euler step from ``T_prev`` with heat source ``q`` (W/m^3).

    ``q`` may be None, a scalar, a per-triangle array, an ElementField on ``m``
    or a callable ``q(tri_ids, ref_pts, phys_pts) -> (n, nq)``.
    """
    if not dt > 0:
        raise AssemblyError("time step must be positive")
    dm = dofmap or T_prev.dofmap
    if dm.mesh is not m or T_prev.dofmap.ndofs != dm.ndofs:
        raise AssemblyError("previous temperature is not defined on this mesh")
    data = element_data(m, p)
    if np.any(data["k"] <= 0) or np.any(data["rho_c"] <= 0):
        raise AssemblyError("thermal material data missing on part of the mesh")
    K = stiffness_matrix(m, dm, data["k"])
    M = mass_matrix(m, dm, data["rho_c"] / dt)
    conv = [e for e in m.boundary_edges if (bc := p.boundaries.get(m.edge_markers[e])) and bc.kind is BCKind.CONVECTION]
    conv = np.array(conv, dtype=np.int64)
    hs = np.array([p.boundaries[m.edge_markers[e]].h for e in conv])
    ts = np.array([p.boundaries[m.edge_markers[e]].T_ambient for e in conv])
    H, hload = robin_terms(m, dm, conv, hs, ts)
    A = (K + M + H).tocsr()
    b = M @ np.asarray(T_prev.coeffs, dtype=float) + load_vector(m, dm, q) + hload
    values = {k: bc.value for k, bc in p.boundaries.items() if bc.kind is BCKind.FIXED_TEMPERATURE}
    fixed, g = dirichlet_dofs(m, dm, values)
    data = dict(data, conv_edges=conv, conv_h=hs, conv_T=ts)
    return _reduce(A, b, dm, fixed, g, "spd", physics=Physics.THERMAL_TRANSIENT, element_data=data)

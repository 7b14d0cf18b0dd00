"""Finite-element fields and point evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mesh import Mesh, locate_many
from ..problem import Physics
from .basis import _eval, nbasis
from .dofs import DofMap, build_dofmap


def physical_grads(Jinv: np.ndarray, ref_grads: np.ndarray) -> np.ndarray:
    """Map reference gradients (..., nb, 2) to physical ones with per-element ``Jinv`` (n, 2, 2).

    ``ref_grads`` is either (nq, nb, 2), shared by all elements, or (n, nq, nb, 2).
    """
    if ref_grads.ndim == 3:
        return np.einsum("eki,qbk->eqbi", Jinv, ref_grads)
    return np.einsum("eki,eqbk->eqbi", Jinv, ref_grads)


@dataclass(frozen=True, eq=False)
class FieldSolution:
    """Coefficients of a scalar field in the hierarchic space of ``dofmap``.

    Harmonic fields hold rms phasors of A_phi (V s/m); ``element_data`` carries
    the per-triangle material coefficients used to assemble the system
    (``eps``, ``nu``, ``sigma``, ``k``, ``rho_c``), so derived quantities use
    exactly what was solved.
    """

    mesh: Mesh
    dofmap: DofMap
    coeffs: np.ndarray
    physics: Physics
    frequency: float | None = None
    element_data: dict = field(default_factory=dict)
    mirror: int = 1

    def __post_init__(self):
        if len(self.coeffs) != self.dofmap.ndofs:
            raise ValueError("coefficient vector length does not match the DOF map")
        self.coeffs.setflags(write=False)

    @property
    def omega(self) -> float:
        return 2.0 * np.pi * (self.frequency or 0.0)

    @classmethod
    def constant(cls, mesh: Mesh, value: float, physics: Physics, dofmap: DofMap | None = None, **kw):
        """The constant function: vertex coefficients = value, higher modes zero."""
        dm = dofmap or build_dofmap(mesh)
        x = np.zeros(dm.ndofs)
        x[: mesh.n_nodes] = value
        return cls(mesh, dm, x, physics, **kw)

    def local(self, p: int, ids: np.ndarray, l2g: np.ndarray, sign: np.ndarray) -> np.ndarray:
        return self.dofmap.gather(self.coeffs, l2g, sign)

    def values_and_grads(self, tri_ids, bary) -> tuple[np.ndarray, np.ndarray]:
        """Field value and physical gradient at points given by element + barycentrics."""
        tri_ids = np.asarray(tri_ids)
        bary = np.atleast_2d(np.asarray(bary, dtype=float))
        dtype = self.coeffs.dtype
        vals = np.zeros(len(tri_ids), dtype=dtype)
        grads = np.zeros((len(tri_ids), 2), dtype=dtype)
        _, _, Jinv = self.mesh._affine
        for p, ids, l2g, sign in self.dofmap.groups:
            pos = np.searchsorted(ids, tri_ids)
            pos = np.minimum(pos, len(ids) - 1)
            hit = np.nonzero(ids[pos] == tri_ids)[0]
            if len(hit) == 0:
                continue
            c = self.dofmap.gather(self.coeffs, l2g[pos[hit]], sign[pos[hit]])
            V, G = _eval(p, bary[hit, 1], bary[hit, 2])
            vals[hit] = np.einsum("nb,nb->n", c, V)
            gref = np.einsum("nb,nbk->nk", c, G)
            grads[hit] = np.einsum("nki,nk->ni", Jinv[tri_ids[hit]], gref)
        return vals, grads

    def evaluate_many(self, pts) -> tuple[np.ndarray, np.ndarray]:
        tri, bary = locate_many(self.mesh, pts)
        return self.values_and_grads(tri, bary)


@dataclass(frozen=True)
class PointValue:
    value: complex | float
    gradient: np.ndarray
    derived: dict


def evaluate(s: FieldSolution, point) -> PointValue:
    """Value, gradient and physics-specific derived fields at ``point`` = (r, z).

    Electrostatic: ``E`` = -grad phi and ``|E|``. Harmonic: ``B_r`` = -dA/dz,
    ``B_z`` = dA/dr + A/r, ``|J_eddy|`` = omega sigma |A| (all rms).
    Thermal: heat flux ``q`` = -k grad T.
    """
    tri, bary = locate_many(s.mesh, np.asarray(point, dtype=float)[None, :])
    v, g = s.values_and_grads(tri, bary)
    value, grad = v[0], g[0]
    t = int(tri[0])
    r = float(point[0])
    derived: dict = {}
    if s.physics is Physics.ELECTROSTATIC:
        E = -grad
        derived["E"] = E
        derived["|E|"] = float(np.linalg.norm(E))
    elif s.physics in (Physics.HARMONIC_MAGNETIC, Physics.COUPLED_MAGNETOTHERMAL):
        Br = -grad[1]
        Bz = grad[0] + (value / r if r > 0 else grad[0])
        derived["B_r"] = Br
        derived["B_z"] = Bz
        sigma = s.element_data.get("sigma")
        sig = float(sigma[t]) if sigma is not None else 0.0
        derived["|J_eddy|"] = s.omega * sig * abs(value)
    elif s.physics is Physics.THERMAL_TRANSIENT:
        k = s.element_data.get("k")
        derived["q"] = -(float(k[t]) if k is not None else 1.0) * grad
    return PointValue(value, grad, derived)


@dataclass(frozen=True, eq=False)
class ElementField:
    """Discontinuous piecewise polynomial: full local hierarchic basis per triangle.

    ``coeffs[t, :nbasis(order[t])]`` are coefficients in the reference-triangle
    orientation of triangle ``t`` (no global edge signs).
    """

    mesh: Mesh
    order: np.ndarray
    coeffs: np.ndarray

    def sample(self, tri_ids, ref_pts) -> np.ndarray:
        """Values at reference points ``ref_pts`` (nq, 2) in each listed triangle -> (n, nq)."""
        tri_ids = np.asarray(tri_ids)
        ref_pts = np.asarray(ref_pts, dtype=float)
        out = np.zeros((len(tri_ids), len(ref_pts)), dtype=self.coeffs.dtype)
        ords = self.order[tri_ids]
        for p in np.unique(ords):
            sel = np.nonzero(ords == p)[0]
            V, _ = _eval(int(p), ref_pts[:, 0], ref_pts[:, 1])
            out[sel] = self.coeffs[tri_ids[sel], : nbasis(int(p))] @ V.T
        return out

    def values_at(self, tri_ids, bary) -> np.ndarray:
        tri_ids = np.asarray(tri_ids)
        bary = np.atleast_2d(bary)
        out = np.zeros(len(tri_ids), dtype=self.coeffs.dtype)
        ords = self.order[tri_ids]
        for p in np.unique(ords):
            sel = np.nonzero(ords == p)[0]
            V, _ = _eval(int(p), bary[sel, 1], bary[sel, 2])
            out[sel] = np.einsum("nb,nb->n", self.coeffs[tri_ids[sel], : nbasis(int(p))], V)
        return out

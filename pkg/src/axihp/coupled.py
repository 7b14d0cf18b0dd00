"""Staggered magnetothermal coupling with field transfer between meshes.

Loop: harmonic solve with the current conductivity map on the EM mesh ->
loss density projected onto the (coarser) thermal mesh and rescaled so the
total matches the EM-side loss -> implicit-Euler thermal steps -> element
conductivity update -> EM re-solve when the conductivity moved by more
than the threshold (or every N steps).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adaptivity import StrategyConfig, run_adaptive, solve_on
from .constants import TWO_PI
from .fem.assembly import assemble_thermal_step, element_data, quad_order
from .fem.basis import nbasis, volume_tables
from .fem.dofs import build_dofmap
from .fem.solution import ElementField, FieldSolution
from .fem.solver import solve
from .mesh import Mesh, MeshError, locate_many, triangulate
from .problem import Physics, ProblemDefinition
from .quantities import eddy_loss, integrate

ABS_ZERO_C = -273.15
PROJECTION_ORDER = 14


class CouplingError(ValueError):
    pass


@dataclass(frozen=True)
class CouplingSchedule:
    """Heating schedule. ``trigger`` is ``"threshold"`` (relative sigma change) or ``"every"`` (N steps)."""

    total_time: float = 60.0
    dt: float = 0.1
    threshold: float = 0.02
    every: int = 5
    trigger: str = "threshold"
    temperature_dependence: bool = True
    T_initial: float = 20.0

    def __post_init__(self):
        if not self.dt > 0:
            raise CouplingError("dt must be positive")
        if self.total_time < 0:
            raise CouplingError("total time must be non-negative")
        if not 0 < self.threshold < 1:
            raise CouplingError("threshold must lie in (0, 1)")
        if self.trigger not in ("threshold", "every") or self.every < 1:
            raise CouplingError("trigger must be 'threshold' or 'every' with N >= 1")

    @property
    def n_steps(self) -> int:
        n = self.total_time / self.dt
        if n > 1e7:
            raise CouplingError("time step too small for the requested duration")
        return int(round(n))


@dataclass
class TemperatureHistory:
    """One row per thermal step; ``loss`` is the EM loss (W) applied from ``t`` onward.

    ``energy`` is the thermal energy gained since t = 0 and ``convection``
    the convective power at ``t``, both for the full (mirrored) body.
    """

    t: list = field(default_factory=list)
    hotspot: list = field(default_factory=list)
    mean: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    em_resolved: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    convection: list = field(default_factory=list)
    em_solves: int = 0
    em_dofs: int = 0
    thermal_dofs: int = 0

    def rows(self):
        return list(zip(self.t, self.hotspot, self.mean, self.loss, self.em_resolved))

    def input_energy(self) -> float:
        """\\int P dt with P held constant over each step."""
        t = np.asarray(self.t)
        return float(np.sum(np.asarray(self.loss)[:-1] * np.diff(t)))

    def convected_energy(self) -> float:
        t = np.asarray(self.t)
        return float(np.sum(np.asarray(self.convection)[1:] * np.diff(t)))


# --------------------------------------------------------------------------
# field transfer


def _sampler(src):
    """Callable pts (n, 2) -> values for a FieldSolution, an ElementField or a callable."""
    if isinstance(src, FieldSolution):
        return lambda pts: src.evaluate_many(pts)[0]
    if isinstance(src, ElementField):
        def f(pts):
            tri, bary = locate_many(src.mesh, pts, tol=1e-9)
            return src.values_at(tri, bary)
        return f
    if callable(src):
        return src
    raise TypeError("source must be a FieldSolution, an ElementField or a callable")


def _source_mesh(src):
    return getattr(src, "mesh", None)


def project_field(src, dst_mesh: Mesh, order=None) -> ElementField:
    """Element-wise r-weighted L2 projection onto discontinuous polynomials on ``dst_mesh``.

    ``src`` is sampled at high-order quadrature points of each destination
    triangle. Constants are reproduced exactly and, because the weight is r,
    \\int q 2 pi r over every destination element is preserved up to quadrature.
    """
    order = dst_mesh.order if order is None else np.broadcast_to(np.asarray(order), (dst_mesh.n_tris,))
    sample = _sampler(src)
    x0, J, _ = dst_mesh._affine
    pmax = int(order.max())
    coeffs = None
    for p in np.unique(order):
        p = int(p)
        ids = np.nonzero(order == p)[0]
        pts, w, V, _, _ = volume_tables(p, PROJECTION_ORDER)
        X = x0[ids][:, None, :] + np.einsum("eij,qj->eqi", J[ids], pts)
        try:
            vals = np.asarray(sample(X.reshape(-1, 2))).reshape(len(ids), len(pts))
        except MeshError as exc:
            raise CouplingError(f"destination mesh is not inside the source domain: {exc}") from exc
        wr = w[None, :] * X[..., 0]
        M = np.einsum("eq,qa,qb->eab", wr, V, V)
        b = np.einsum("eq,qb->eb", wr * vals, V)
        c = np.linalg.solve(M, b[..., None])[..., 0]
        if coeffs is None:
            coeffs = np.zeros((dst_mesh.n_tris, nbasis(pmax)), dtype=c.dtype)
        elif c.dtype.kind == "c" and coeffs.dtype.kind != "c":
            coeffs = coeffs.astype(complex)
        coeffs[ids, : nbasis(p)] = c
    return ElementField(dst_mesh, np.asarray(order).copy(), coeffs)


def element_integral(f: ElementField, region_mask=None) -> float:
    """2 pi \\int f r dr dz."""
    m = f.mesh
    x0, J, _ = m._affine
    total = 0.0
    for p in np.unique(f.order):
        ids = np.nonzero(f.order == p)[0]
        if region_mask is not None:
            ids = ids[region_mask[ids]]
        pts, w, V, _, _ = volume_tables(int(p), PROJECTION_ORDER)
        r = x0[ids][:, None, 0] + np.einsum("ej,qj->eq", J[ids][:, 0, :], pts)
        vals = f.coeffs[ids, : nbasis(int(p))] @ V.T
        total += float(np.real(np.sum(vals * r * w[None, :] * (2.0 * m.areas[ids])[:, None])))
    return TWO_PI * total


def loss_density(s: FieldSolution):
    """Callable pts -> sigma omega^2 |A|^2 (W/m^3) of a harmonic solution."""
    sigma = s.element_data["sigma"]
    w2 = s.omega**2

    def f(pts):
        tri, bary = locate_many(s.mesh, pts, tol=1e-9)
        u, _ = s.values_and_grads(tri, bary)
        return sigma[tri] * w2 * np.abs(u) ** 2

    return f


# --------------------------------------------------------------------------
# conductivity


def _element_mean_T(T: FieldSolution, mesh: Mesh, ids: np.ndarray) -> np.ndarray:
    pts, w, *_ = volume_tables(1, 4)
    x0, J, _ = mesh._affine
    X = x0[ids][:, None, :] + np.einsum("eij,qj->eqi", J[ids], pts)
    try:
        vals = T.evaluate_many(X.reshape(-1, 2))[0].reshape(len(ids), len(pts))
    except MeshError as exc:
        raise CouplingError(f"thermal mesh does not cover the conducting region: {exc}") from exc
    r = X[..., 0]
    return np.sum(vals * r * w, axis=1) / np.sum(r * w, axis=1)


def update_conductivity(p: ProblemDefinition, T: FieldSolution, mesh: Mesh | None = None, enabled: bool = True) -> np.ndarray:
    """Per-triangle sigma on ``mesh`` (default: the temperature mesh).

    Triangles whose region is part of the thermal model get
    sigma_ref / (1 + alpha (T_K - T_ref)) with T_K the r-weighted element mean;
    all others keep sigma_ref.
    """
    mesh = T.mesh if mesh is None else mesh
    mats = [p.materials[name] for name in mesh.region_materials]
    sig = np.array([mt.sigma_ref for mt in mats])[mesh.region]
    if not enabled:
        return sig
    hot = np.isin(np.array(mesh.region_names)[mesh.region], T.mesh.region_names)
    ids = np.nonzero(hot & (sig > 0))[0]
    if len(ids) == 0:
        return sig
    Tk = _element_mean_T(T, mesh, ids)
    if np.any(Tk < ABS_ZERO_C):
        raise CouplingError(f"temperature {Tk.min():.4g} C is below absolute zero")
    out = sig.copy()
    for k in np.unique(mesh.region[ids]):
        mt = mats[k]
        sel = ids[mesh.region[ids] == k]
        out[sel] = mt.sigma(Tk[np.searchsorted(ids, sel)])
    if np.any(out[ids] <= 0):
        raise CouplingError("conductivity model gives a non-positive value")
    return out


# --------------------------------------------------------------------------
# driver


def thermal_problem(p: ProblemDefinition) -> ProblemDefinition:
    names = [reg.name for reg in p.regions if p.materials[reg.material].has_thermal]
    if not names:
        raise CouplingError("no region carries thermal material data")
    return p.restricted_to(names)


def default_thermal_mesh(p: ProblemDefinition, h: float = 0.005) -> Mesh:
    return triangulate(thermal_problem(p), h)


def _hotspot(T: FieldSolution) -> float:
    m = T.mesh
    best = float(np.max(T.coeffs[: m.n_nodes]))
    x0, J, _ = m._affine
    for p, ids, l2g, sign in T.dofmap.groups:
        _, _, V, _, _ = volume_tables(p, quad_order(p))
        vals = T.dofmap.gather(T.coeffs, l2g, sign) @ V.T
        best = max(best, float(vals.max()))
    return best


def _convective_power(T: FieldSolution, data: dict, mirror: int) -> float:
    from .fem.quadrature import line_rule

    edges = data["conv_edges"]
    if len(edges) == 0:
        return 0.0
    m = T.mesh
    s, w = line_rule(int(m.order.max()) + 2)
    a, b = m.nodes[m.edges[edges, 0]], m.nodes[m.edges[edges, 1]]
    X = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    tri = np.repeat(m.edge_tris[edges, 0], len(s))
    from .mesh import _bary

    vals, _ = T.values_and_grads(tri, _bary(m, tri, X.reshape(-1, 2)))
    vals = vals.reshape(len(edges), len(s))
    length = np.linalg.norm(b - a, axis=1)
    dens = data["conv_h"][:, None] * (vals - data["conv_T"][:, None]) * X[..., 0]
    return mirror * TWO_PI * float(np.sum(dens * w[None, :] * length[:, None]))


class _EMState:
    def __init__(self, p, mesh, p_th, th_mesh, sched):
        self.p, self.mesh, self.p_th, self.th_mesh = p, mesh, p_th, th_mesh
        names = set(th_mesh.region_names)
        self.mask = np.isin(np.array(mesh.region_names)[mesh.region], list(names))
        self.sigma = None
        self.solves = 0

    def solve(self, sigma):
        s = solve_on(self.mesh, self.p, sigma)
        self.solves += 1
        self.sigma = sigma
        P = eddy_loss(s)
        P_heated = s.mirror * integrate(
            s, lambda u, g, r, ids: s.element_data["sigma"][ids][:, None] * s.omega**2 * np.abs(u) ** 2 * self.mask[ids][:, None]
        )
        q = project_field(loss_density(s), self.th_mesh)
        total = element_integral(q) * s.mirror
        scale = P_heated / total if total > 0 else 0.0
        q = ElementField(q.mesh, q.order, np.real(q.coeffs) * scale)
        return s, P, P_heated, q


def run_coupled(
    p: ProblemDefinition,
    sched: CouplingSchedule,
    em_cfg: StrategyConfig,
    th_mesh: Mesh | None = None,
    em_mesh: Mesh | None = None,
) -> TemperatureHistory:
    """Heat the workpiece for ``sched.total_time`` seconds.

    The EM mesh is adapted once with the reference conductivity (or taken
    from ``em_mesh``) and reused for all re-solves.
    """
    if p.physics is not Physics.COUPLED_MAGNETOTHERMAL:
        raise CouplingError(f"problem physics is {p.physics.value}, not coupled_magnetothermal")
    p_th = thermal_problem(p)
    th_mesh = th_mesh if th_mesh is not None else default_thermal_mesh(p)
    if em_mesh is None:
        em_mesh = run_adaptive(p, em_cfg).mesh
    em = _EMState(p, em_mesh, p_th, th_mesh, sched)
    mirror = p.mirror_factor

    dm = build_dofmap(th_mesh)
    T = FieldSolution.constant(th_mesh, sched.T_initial, Physics.THERMAL_TRANSIENT, dofmap=dm, element_data=element_data(th_mesh, p_th))
    rho_c = T.element_data["rho_c"]

    def energy(Tf):
        return mirror * integrate(Tf, lambda u, g, r, ids: rho_c[ids][:, None] * (u - sched.T_initial))

    def mean(Tf):
        vol = integrate(Tf, lambda u, g, r, ids: np.ones_like(u))
        return integrate(Tf, lambda u, g, r, ids: u) / vol

    sigma0 = update_conductivity(p, T, em_mesh, sched.temperature_dependence)
    _, _, P, q = em.solve(sigma0)
    hist = TemperatureHistory(em_dofs=build_dofmap(em_mesh).ndofs, thermal_dofs=dm.ndofs)
    conv_data = None

    def record(t, Tf, resolved, conv):
        hist.t.append(t)
        hist.hotspot.append(_hotspot(Tf))
        hist.mean.append(mean(Tf))
        hist.loss.append(P)
        hist.em_resolved.append(int(resolved))
        hist.energy.append(energy(Tf))
        hist.convection.append(conv)

    record(0.0, T, True, 0.0)
    for k in range(1, sched.n_steps + 1):
        sys = assemble_thermal_step(th_mesh, p_th, T, q, sched.dt, dofmap=dm)
        T = sys.solution(solve(sys))
        conv_data = sys.element_data
        conv = _convective_power(T, conv_data, mirror)
        resolved = False
        if sched.temperature_dependence and k < sched.n_steps:
            sigma = update_conductivity(p, T, em_mesh, True)
            if sched.trigger == "every":
                due = k % sched.every == 0
            else:
                sel = em.mask & (em.sigma > 0)
                due = bool(np.any(np.abs(sigma[sel] / em.sigma[sel] - 1.0) > sched.threshold))
            if due:
                _, _, P, q = em.solve(sigma)
                resolved = True
        record(k * sched.dt, T, resolved, conv)
    hist.em_solves = em.solves
    return hist


def lumped_heating(
    p: ProblemDefinition, em_mesh: Mesh, total_time: float, dt: float, temperature_dependence: bool = True,
    T0: float = 20.0, T_nodes=None,
):
    """Lumped oracle dT/dt = P(T) / (m c) with P(T) from single EM solves at uniform T.

    P(T) is tabulated at ``T_nodes`` and interpolated linearly; convection is
    neglected. Returns (t, T) arrays.
    """
    p_th = thermal_problem(p)
    mats = [p.materials[reg.material] for reg in p_th.regions]
    heated = np.isin(np.array(em_mesh.region_names)[em_mesh.region], [reg.name for reg in p_th.regions])
    base = update_conductivity(p, FieldSolution.constant(em_mesh, T0, Physics.THERMAL_TRANSIENT), em_mesh, False)
    heat_cap = 0.0
    for reg, mt in zip(p_th.regions, mats):
        sel = em_mesh.region == em_mesh.region_id(reg.name)
        x = em_mesh.nodes[em_mesh.tris[sel]]
        r = x[..., 0].mean(axis=1)
        heat_cap += p.mirror_factor * mt.density * mt.heat_capacity * TWO_PI * float(np.sum(r * em_mesh.areas[sel]))
    T_nodes = np.asarray(T_nodes if T_nodes is not None else np.linspace(T0, T0 + 600.0, 7), dtype=float)

    def P_of(Tval):
        sig = base.copy()
        for reg, mt in zip(p_th.regions, mats):
            sel = (em_mesh.region == em_mesh.region_id(reg.name)) & (base > 0)
            sig[sel] = mt.sigma(Tval)
        s = solve_on(em_mesh, p, sig)
        return eddy_loss(s, None) if heated.all() else sum(eddy_loss(s, reg.name) for reg in p_th.regions)

    if temperature_dependence:
        table = np.array([P_of(Tn) for Tn in T_nodes])
    else:
        table = np.full(len(T_nodes), P_of(T0))
    n = int(round(total_time / dt))
    t = np.arange(n + 1) * dt
    T = np.empty(n + 1)
    T[0] = T0

    def rate(Tv):
        return np.interp(Tv, T_nodes, table) / heat_cap

    for k in range(n):  # classical RK4
        k1 = rate(T[k])
        k2 = rate(T[k] + 0.5 * dt * k1)
        k3 = rate(T[k] + 0.5 * dt * k2)
        k4 = rate(T[k] + dt * k3)
        T[k + 1] = T[k] + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return t, T, T_nodes, table

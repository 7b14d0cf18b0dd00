"""A-posteriori error estimation, bulk marking and the h/p refinement loop."""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .fem.assembly import assemble_electrostatic, assemble_harmonic_magnetic, quad_order
from .fem.basis import _eval, basis_layout, volume_tables
from .fem.dofs import build_dofmap
from .fem.solution import FieldSolution, physical_grads
from .fem.solver import solve
from .mesh import Action, Mesh, RefinementMark, _bary, refine, refine_uniform, triangulate
from .problem import Physics, ProblemDefinition, region_faces
from .quantities import QoI


class Strategy(str, enum.Enum):
    UNIFORM_H = "UniformH"
    ADAPTIVE_H = "AdaptiveH"
    ADAPTIVE_P = "AdaptiveP"
    ADAPTIVE_HP = "AdaptiveHP"

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        key = text.replace("-", "").replace("_", "").lower()
        for s in cls:
            if s.value.lower() == key:
                return s
        raise ValueError(f"unknown strategy {text!r}; expected one of {[s.value for s in cls]}")


@dataclass(frozen=True)
class ErrorIndicators:
    eta_K: np.ndarray
    jump: np.ndarray  # per-element squared jump contribution
    residual: np.ndarray  # per-element squared residual contribution

    @property
    def eta(self) -> float:
        return float(math.sqrt(np.sum(self.eta_K**2)))


@dataclass(frozen=True)
class StrategyConfig:
    strategy: Strategy = Strategy.ADAPTIVE_HP
    theta: float = 0.6
    zeta: float = 0.3
    max_dofs: int = 200_000
    max_steps: int = 30
    target: float = 1e-4
    initial_order: int | None = None
    h_init: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy) if isinstance(self.strategy, str) else self.strategy)
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if not 0 < self.zeta < 1:
            raise ValueError("zeta must lie in (0, 1)")
        if self.max_dofs < 1 or self.max_steps < 0 or not self.target > 0:
            raise ValueError("budgets must be positive")
        if self.initial_order is not None and not 1 <= self.initial_order <= 6:
            raise ValueError("initial order must lie in [1, 6]")

    @property
    def start_order(self) -> int:
        return 1 if self.initial_order is None else self.initial_order


@dataclass(frozen=True)
class ConvergenceRecord:
    step: int
    dofs: int
    elements: int
    max_p: int
    qois: dict
    error_est: float
    rel_error_est: float
    wall_ms: float


# --------------------------------------------------------------------------
# estimator


def _coefficient(s: FieldSolution) -> np.ndarray:
    d = s.element_data
    if s.physics is Physics.ELECTROSTATIC:
        return d["eps"]
    if s.physics.has_magnetic:
        return d["nu"]
    return d["k"]


def _edge_points(m: Mesh, edges: np.ndarray, n: int):
    from .fem.quadrature import line_rule

    t, w = line_rule(n)
    a, b = m.nodes[m.edges[edges, 0]], m.nodes[m.edges[edges, 1]]
    X = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    d = b - a
    length = np.linalg.norm(d, axis=1)
    normal = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    return X, w, length, normal


def _normal_flux(s: FieldSolution, tri: np.ndarray, X: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Coefficient-weighted normal flux from inside ``tri`` at points X (n, nq, 2)."""
    n, nq, _ = X.shape
    tri_rep = np.repeat(tri, nq)
    pts = X.reshape(-1, 2)
    bary = _bary(s.mesh, tri_rep, pts)
    u, g = s.values_and_grads(tri_rep, bary)
    nrm = np.repeat(normal, nq, axis=0)
    dn = np.einsum("ni,ni->n", g, nrm)
    c = _coefficient(s)[tri_rep]
    if s.physics.has_magnetic:
        dn = dn + u * nrm[:, 0] / pts[:, 0]
    return (c * dn).reshape(n, nq)


def _residual(s: FieldSolution, ids, l2g, sign, p, r, wq_r):
    """r-weighted squared strong residual per element (without 2 pi), divided by the coefficient."""
    m = s.mesh
    pts, w, V, G, Hs = volume_tables(p, quad_order(p))
    _, _, Jinv = m._affine
    Ji = Jinv[ids]
    c = s.dofmap.gather(s.coeffs, l2g, sign)
    u = c @ V.T
    gu = np.einsum("eb,eqbi->eqi", c, physical_grads(Ji, G))
    href = np.einsum("eb,qbk->eqk", c, Hs)  # xx, xy, yy in reference coordinates
    Hm = np.stack([np.stack([href[..., 0], href[..., 1]], -1), np.stack([href[..., 1], href[..., 2]], -1)], -2)
    lap = np.einsum("eki,eli,eqkl->eq", Ji, Ji, Hm)
    coef = _coefficient(s)[ids][:, None]
    d = s.element_data
    if s.physics is Physics.ELECTROSTATIC:
        R = coef * (lap + gu[..., 0] / r)
    elif s.physics.has_magnetic:
        R = d["J"][ids][:, None] - 1j * s.omega * d["sigma"][ids][:, None] * u
        R = R + coef * (lap + gu[..., 0] / r - u / r**2)
    else:
        R = coef * (lap + gu[..., 0] / r) + d.get("q", np.zeros(m.n_tris))[ids][:, None]
    return np.sum(np.abs(R) ** 2 / coef * wq_r, axis=1)


def estimate_error(m: Mesh, s: FieldSolution) -> ErrorIndicators:
    """Kelly flux-jump indicator plus scaled interior residual, r-weighted.

    eta_K^2 = h_K / (2 p_K) sum_e \\int_e r [[c du/dn]]^2 / c ds + (h_K / (2 p_K))^2 \\int_K r |R|^2 / c

    Both terms scale like c |grad u|^2, so eta is comparable with the
    energy norm \\int c |grad e|^2 r dr dz (no 2 pi factor).
    """
    if s.mesh is not m:
        raise ValueError("solution is not defined on this mesh")
    h = m.diameters
    pk = m.order.astype(float)
    jump = np.zeros(m.n_tris)
    ie = m.interior_edges
    if len(ie):
        nq = int(m.order.max()) + 2
        X, w, length, normal = _edge_points(m, ie, nq)
        t0, t1 = m.edge_tris[ie, 0], m.edge_tris[ie, 1]
        f0 = _normal_flux(s, t0, X, normal)
        f1 = _normal_flux(s, t1, X, normal)
        coef = _coefficient(s)
        cbar = 0.5 * (coef[t0] + coef[t1])
        J = np.sum(np.abs(f0 - f1) ** 2 * X[..., 0] * w[None, :], axis=1) * length / cbar
        np.add.at(jump, t0, J)
        np.add.at(jump, t1, J)
    jump *= h / (2.0 * pk)
    res = np.zeros(m.n_tris)
    x0, Jac, _ = m._affine
    for p, ids, l2g, sign in s.dofmap.groups:
        pts, w, *_ = volume_tables(p, quad_order(p))
        r = x0[ids][:, None, 0] + np.einsum("ej,qj->eq", Jac[ids][:, 0, :], pts)
        wq_r = (2.0 * m.areas[ids])[:, None] * w[None, :] * r
        res[ids] = _residual(s, ids, l2g, sign, p, r, wq_r)
    res *= (h / (2.0 * pk)) ** 2
    eta = np.sqrt(jump + res)
    return ErrorIndicators(eta, jump, res)


def energy_norm_sq(s: FieldSolution, region=None) -> float:
    """\\int c |grad u|^2 r dr dz in the estimator's normalization (no 2 pi).

    Harmonic fields use nu r |B|^2 with B = (-A_z, A_r + A/r).
    """
    from .quantities import integrate

    coef = _coefficient(s)
    if s.physics.has_magnetic:
        def dens(u, g, r, ids):
            return coef[ids][:, None] * (np.abs(g[..., 1]) ** 2 + np.abs(g[..., 0] + u / r) ** 2)
    else:
        def dens(u, g, r, ids):
            return coef[ids][:, None] * np.sum(np.abs(g) ** 2, axis=-1)
    return integrate(s, dens, region) / (2.0 * math.pi)


# --------------------------------------------------------------------------
# marking


def mark(ind: ErrorIndicators | np.ndarray, theta: float) -> list[int]:
    """Minimal Dörfler set: greedy by descending eta_K, ties to the lower id."""
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    eta = np.asarray(ind.eta_K if isinstance(ind, ErrorIndicators) else ind, dtype=float)
    e2 = eta**2
    if theta == 1.0:
        return [int(k) for k in np.nonzero(eta > 0)[0]]
    order = np.lexsort((np.arange(len(eta)), -eta))
    total = e2.sum()
    if total == 0:
        return []
    cum = np.cumsum(e2[order])
    k = int(np.searchsorted(cum, theta**2 * total * (1.0 - 1e-12))) + 1
    return sorted(int(t) for t in order[: min(k, len(order))])


# --------------------------------------------------------------------------
# h/p decision


def _degree_energies(Kloc: np.ndarray, c: np.ndarray, deg: np.ndarray, p: int) -> tuple[float, float]:
    """Energy added by degree p-1 and by degree p, H1-orthogonalized.

    ``best(k)`` is the seminorm energy of the best approximation of ``c`` by
    the degree-<=k hierarchic functions, so E_k = best(k) - best(k-1) does
    not depend on how the hierarchic modes overlap.
    """
    b = Kloc @ c

    def best(k):
        S = np.nonzero(deg <= k)[0]
        if len(S) == 0:
            return 0.0
        y, *_ = np.linalg.lstsq(Kloc[np.ix_(S, S)], b[S], rcond=None)
        return float(np.real(np.conj(b[S]) @ y))

    lo2, lo1 = best(p - 2), best(p - 1)
    full = float(np.real(np.conj(c) @ b))
    return lo1 - lo2, full - lo1


def _local_stiffness(m: Mesh, t: int, p: int) -> np.ndarray:
    pts, w, V, G, _ = volume_tables(p, quad_order(p))
    _, _, Jinv = m._affine
    PG = np.einsum("ki,qbk->qbi", Jinv[t], G)
    return np.einsum("q,qai,qbi->ab", w * 2.0 * m.areas[t], PG, PG)


def _patch_fit(m: Mesh, s: FieldSolution, t: int) -> np.ndarray:
    """Least-squares order-2 hierarchic coefficients fitted to nodal values around ``t``."""
    tri = m.tris[t]
    patch = np.nonzero(np.isin(m.tris, tri).any(axis=1))[0]
    nodes = np.unique(m.tris[patch])
    x0, _, Jinv = m._affine
    ref = (m.nodes[nodes] - x0[t]) @ Jinv[t].T
    V, _ = _eval(2, ref[:, 0], ref[:, 1])
    vals = s.coeffs[nodes]  # vertex coefficients are nodal values
    coef, *_ = np.linalg.lstsq(V, vals, rcond=None)
    return coef


def smoothness_ratio(m: Mesh, s: FieldSolution, t: int) -> float:
    """rho = E_p / (E_{p-1} + E_p) from orthogonalized degree-group energies.

    Order-1 elements use a least-squares order-2 fit over the vertex patch.
    """
    p = int(m.order[t])
    if p == 1:
        c = _patch_fit(m, s, t)
        p = 2
    else:
        for pp, ids, l2g, sign in s.dofmap.groups:
            if pp == p:
                k = int(np.searchsorted(ids, t))
                c = s.dofmap.gather(s.coeffs, l2g[k : k + 1], sign[k : k + 1])[0]
                break
    _, deg = basis_layout(p)
    lo, hi = _degree_energies(_local_stiffness(m, t, p), c, deg, p)
    if lo + hi <= 0:
        return 0.0
    return max(hi, 0.0) / (max(lo, 0.0) + max(hi, 0.0))


def decide_hp(m: Mesh, s: FieldSolution, marked, zeta: float = 0.3) -> list[RefinementMark]:
    out = []
    for t in sorted(int(k) for k in marked):
        if m.order[t] >= 6:
            out.append(RefinementMark(t, Action.BISECT))
            continue
        rho = smoothness_ratio(m, s, t)
        out.append(RefinementMark(t, Action.INCREMENT_ORDER if rho < zeta else Action.BISECT))
    return out


# --------------------------------------------------------------------------
# loop


def default_h(p: ProblemDefinition) -> float:
    """A tenth of the smallest bounding-box side, capped by the smallest region feature."""
    V = np.asarray(p.vertices, dtype=float)
    span = V.max(axis=0) - V.min(axis=0)
    faces, owner = region_faces(p)
    feature = min(float(np.min(np.ptp(V[list(faces[f].cycle)], axis=0))) for f in owner)
    return min(feature, float(span.min()) / 10.0)


def solve_on(m: Mesh, p: ProblemDefinition, sigma=None) -> FieldSolution:
    """Assemble and solve the field problem of ``p`` on ``m``."""
    if p.physics is Physics.ELECTROSTATIC:
        sys = assemble_electrostatic(m, p)
    elif p.physics.has_magnetic:
        sys = assemble_harmonic_magnetic(m, p, sigma=sigma)
    else:
        raise ValueError(f"no stationary field problem for physics {p.physics.value}")
    return sys.solution(solve(sys))


@dataclass
class AdaptiveRun:
    records: list[ConvergenceRecord] = field(default_factory=list)
    mesh: Mesh | None = None
    solution: FieldSolution | None = None


def _next_mesh(m: Mesh, s: FieldSolution, cfg: StrategyConfig, ind: ErrorIndicators) -> Mesh:
    if cfg.strategy is Strategy.UNIFORM_H:
        return refine_uniform(m)
    marked = mark(ind, cfg.theta)
    if cfg.strategy is Strategy.ADAPTIVE_H:
        marks = [RefinementMark(t, Action.BISECT) for t in marked]
    elif cfg.strategy is Strategy.ADAPTIVE_P:
        marks = [RefinementMark(t, Action.BISECT if m.order[t] >= 6 else Action.INCREMENT_ORDER) for t in marked]
    else:
        marks = decide_hp(m, s, marked, cfg.zeta)
    new = refine(m, marks)
    if build_dofmap(new).ndofs <= s.dofmap.ndofs:
        new = refine(m, [RefinementMark(t, Action.BISECT) for t in marked])
    return new


def run_adaptive(p: ProblemDefinition, cfg: StrategyConfig, qois=(), mesh: Mesh | None = None) -> AdaptiveRun:
    """Solve, record, estimate, mark and refine until a budget or the target is hit."""
    run = AdaptiveRun()
    if cfg.max_steps == 0:
        return run
    qois = [QoI.parse(q) if isinstance(q, str) else q for q in qois]
    for q in qois:
        q.check(p)
    if mesh is None:
        mesh = triangulate(p, cfg.h_init or default_h(p))
        mesh = mesh.with_orders(np.full(mesh.n_tris, cfg.start_order))
    m = mesh
    for step in range(cfg.max_steps):
        t0 = time.perf_counter()
        s = solve_on(m, p)
        values = {q.name: float(q.evaluate(s, p)) for q in qois}
        ind = estimate_error(m, s)
        eta = ind.eta
        norm = math.sqrt(max(energy_norm_sq(s), 0.0))
        rel = eta / norm if norm > 0 else (0.0 if eta == 0 else math.inf)
        wall = (time.perf_counter() - t0) * 1e3
        run.records.append(
            ConvergenceRecord(step, s.dofmap.ndofs, m.n_tris, int(m.order.max()), values, eta, rel, wall)
        )
        run.mesh, run.solution = m, s
        if rel <= cfg.target or step == cfg.max_steps - 1:
            break
        new = _next_mesh(m, s, cfg, ind)
        if build_dofmap(new).ndofs > cfg.max_dofs:
            break
        m = new
    return run


def adapt_loop(p: ProblemDefinition, cfg: StrategyConfig, qois=()) -> list[ConvergenceRecord]:
    return run_adaptive(p, cfg, qois).records

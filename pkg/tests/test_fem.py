import dataclasses
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from axihp.adaptivity import default_h
from axihp.constants import EPS0
from axihp.fem.assembly import (
    AssemblyError,
    LinearSystem,
    _reduce,
    assemble_electrostatic,
    assemble_harmonic_magnetic,
    assemble_thermal_step,
    dirichlet_dofs,
    load_vector,
    stiffness_matrix,
)
from axihp.fem.basis import reference_basis
from axihp.fem.dofs import build_dofmap
from axihp.fem.quadrature import quadrature
from axihp.fem.solution import FieldSolution, evaluate
from axihp.fem.solver import SolverError, solve
from axihp.mesh import RefinementMark, _bary, locate_many, refine, refine_uniform, triangulate
from axihp.problem import Physics, builtin_benchmark
from axihp.quantities import electrostatic_energy

from conftest import ALU, rect_problem

# --------------------------------------------------------------------------
# quadrature


def test_order_one_is_centroid():
    pts, w = quadrature(1)
    assert len(w) == 1
    assert np.allclose(pts[0], 1 / 3)
    assert w[0] == pytest.approx(0.5)


@pytest.mark.parametrize("order", range(1, 15))
def test_monomials_closed_form(order):
    pts, w = quadrature(order)
    assert np.all(w > 0)
    assert w.sum() == pytest.approx(0.5, abs=1e-14)
    for a in range(order + 1):
        for b in range(order + 1 - a):
            for c in range(order + 1 - a - b):
                exact = math.factorial(a) * math.factorial(b) * math.factorial(c) * 2 * 0.5 / math.factorial(a + b + c + 2)
                got = np.sum(w * pts[:, 0] ** a * pts[:, 1] ** b * pts[:, 2] ** c)
                assert abs(got - exact) < 1e-13


@pytest.mark.parametrize("order", [0, 15])
def test_quadrature_order_range(order):
    with pytest.raises(ValueError):
        quadrature(order)


# --------------------------------------------------------------------------
# basis


def test_p1_at_centroid():
    v, g = reference_basis(1, [1 / 3, 1 / 3, 1 / 3])
    assert np.allclose(v, 1 / 3)
    v2, g2 = reference_basis(1, [0.1, 0.2, 0.7])
    assert np.allclose(g, g2)


def test_partition_of_unity(rng):
    lam = rng.dirichlet([1, 1, 1], 50)
    for p in range(1, 7):
        v, _ = reference_basis(p, lam)
        assert np.allclose(v[:, :3].sum(axis=1), 1.0, atol=1e-14)
        assert np.allclose(v[:, :3], lam, atol=1e-14)


def test_gradients_finite_difference(rng):
    lam = rng.dirichlet([2, 2, 2], 20)
    h = 1e-6
    _, g = reference_basis(4, lam)
    for d, step in enumerate(([-h, h, 0.0], [-h, 0.0, h])):
        step = np.array(step)
        vp, _ = reference_basis(4, lam + step)
        vm, _ = reference_basis(4, lam - step)
        assert np.max(np.abs((vp - vm) / (2 * h) - g[..., d])) < 1e-6


@pytest.mark.parametrize("p", [0, 7])
def test_basis_order_range(p):
    with pytest.raises(ValueError):
        reference_basis(p, [1 / 3, 1 / 3, 1 / 3])


def test_higher_modes_vanish_at_vertices():
    v, _ = reference_basis(6, np.eye(3))
    assert np.allclose(v[:, 3:], 0.0, atol=1e-13)


# --------------------------------------------------------------------------
# DOF map


def _random_orders(m, r):
    return m.with_orders(r.integers(1, 7, m.n_tris))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_dof_count_formula(seed):
    r = np.random.default_rng(seed)
    m = _random_orders(triangulate(rect_problem(), 0.3), r)
    dm = build_dofmap(m)
    n = m.n_nodes
    for e in range(len(m.edges)):
        ts = [t for t in m.edge_tris[e] if t >= 0]
        n += min(m.order[t] for t in ts) - 1
    n += sum((p - 1) * (p - 2) // 2 for p in m.order)
    assert dm.ndofs == n


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_continuity_across_edges(seed):
    r = np.random.default_rng(seed)
    m = triangulate(builtin_benchmark("spark-gap-l"), 0.2)
    m = refine(m, [RefinementMark(int(t)) for t in r.choice(m.n_tris, 10, replace=False)])
    m = _random_orders(m, r)
    dm = build_dofmap(m)
    s = FieldSolution(m, dm, r.standard_normal(dm.ndofs), Physics.ELECTROSTATIC)
    s_pts = np.linspace(0.1, 0.9, 5)
    worst = 0.0
    for e in m.interior_edges:
        a, b = m.nodes[m.edges[e]]
        X = a[None, :] + s_pts[:, None] * (b - a)[None, :]
        vals = []
        for t in m.edge_tris[e]:
            lam = _bary(m, np.full(5, t), X)
            vals.append(s.values_and_grads(np.full(5, t), lam)[0])
        worst = max(worst, np.max(np.abs(vals[0] - vals[1])))
    assert worst < 1e-9


# --------------------------------------------------------------------------
# electrostatic assembly


def _galerkin(p_def, order, src, nref=1):
    m = triangulate(p_def, 0.25)
    for _ in range(nref):
        m = refine_uniform(m)
    m = m.with_orders(np.full(m.n_tris, order))
    dm = build_dofmap(m)
    K = stiffness_matrix(m, dm, np.full(m.n_tris, EPS0))
    b = load_vector(m, dm, src)
    values = {k: bc.value for k, bc in p_def.boundaries.items() if bc.kind.value == "dirichlet"}
    fixed, g = dirichlet_dofs(m, dm, values)
    sys = _reduce(K, b, dm, fixed, g, "spd", physics=Physics.ELECTROSTATIC)
    return m, sys.solution(solve(sys))


def _strip(r0=0.2, r1=0.7):
    return rect_problem(r0=r0, r1=r1, boundaries={
        "bottom": {"kind": "dirichlet", "potential_V": 0.0}, "top": {"kind": "dirichlet", "potential_V": 0.0},
        "left": {"kind": "neumann"}, "right": {"kind": "neumann"}})


def _nodal_error(m, s, exact):
    pts = m.nodes
    tri, bary = locate_many(m, pts)
    u, _ = s.values_and_grads(tri, bary)
    return np.max(np.abs(u - exact(pts)))


def test_galerkin_exact_quadratic_in_z():
    # phi = z (1 - z): -div(eps grad phi) = 2 eps
    m, s = _galerkin(_strip(), 2, 2.0 * EPS0)
    assert _nodal_error(m, s, lambda X: X[:, 1] * (1 - X[:, 1])) < 1e-9


def test_galerkin_exact_cubic_in_z():
    # phi = z - z^3: -phi_zz = 6 z
    m, s = _galerkin(_strip(), 3, lambda ids, pts, X: 6.0 * EPS0 * X[..., 1])
    assert _nodal_error(m, s, lambda X: X[:, 1] - X[:, 1] ** 3) < 1e-9


def test_galerkin_exact_quadratic_in_r():
    # phi = r^2 on an annulus: -(1/r)(r phi_r)_r = -4
    a, b = 0.2, 0.7
    p_def = rect_problem(r0=a, r1=b, boundaries={
        "left": {"kind": "dirichlet", "potential_V": a * a}, "right": {"kind": "dirichlet", "potential_V": b * b},
        "bottom": {"kind": "neumann"}, "top": {"kind": "neumann"}})
    m, s = _galerkin(p_def, 2, -4.0 * EPS0)
    assert _nodal_error(m, s, lambda X: X[:, 0] ** 2) < 1e-9


def test_plate_linear(plate_problem):
    m = triangulate(plate_problem, 0.2)
    sys = assemble_electrostatic(m, plate_problem)
    s = sys.solution(solve(sys))
    assert np.max(np.abs(np.asarray(s.coeffs[: m.n_nodes]) - 1000 * m.nodes[:, 1])) < 1e-10 * 1000
    pv = evaluate(s, (0.33, 0.41))
    assert np.allclose(pv.gradient, [0.0, 1000.0], atol=1e-10 * 1000)
    assert np.allclose(pv.derived["E"], [0.0, -1000.0], atol=1e-7)


def test_constant_dirichlet():
    p_def = rect_problem(boundaries={k: {"kind": "dirichlet", "potential_V": 7.0} for k in ("bottom", "right", "top", "left")})
    m = triangulate(p_def, 0.2)
    m = m.with_orders(np.full(m.n_tris, 3))
    sys = assemble_electrostatic(m, p_def)
    s = sys.solution(solve(sys))
    pts = m.nodes[m.tris].mean(axis=1)
    u, _ = s.evaluate_many(pts)
    assert np.max(np.abs(u - 7.0)) < 1e-10


def test_unconstrained_rejected():
    p_def = rect_problem()
    with pytest.raises(AssemblyError):
        assemble_electrostatic(triangulate(p_def, 0.5), p_def)


def test_coax_uniform_p2():
    p_def = builtin_benchmark("coax-capacitor")
    m = triangulate(p_def, default_h(p_def))
    for _ in range(3):
        m = refine_uniform(m)
    m = m.with_orders(np.full(m.n_tris, 2))
    sys = assemble_electrostatic(m, p_def)
    s = sys.solution(solve(sys))
    a, b, V = 0.2, 0.8, 1000.0
    for r in (0.3, 0.5, 0.7):
        exact = V * math.log(b / r) / math.log(b / a)
        assert evaluate(s, (r, 0.5)).value == pytest.approx(exact, rel=1e-3)


def test_node_value_is_coefficient(plate_problem):
    p_def = builtin_benchmark("spark-gap-l")
    m = triangulate(p_def, 0.1)
    sys = assemble_electrostatic(m, p_def)
    s = sys.solution(solve(sys))
    for n in (5, 40, 77):
        assert evaluate(s, m.nodes[n]).value == pytest.approx(s.coeffs[n], abs=1e-9)


def _mixed_mesh(name, h, seed=3):
    r = np.random.default_rng(seed)
    p_def = builtin_benchmark(name)
    m = triangulate(p_def, h)
    return p_def, m.with_orders(r.integers(1, 5, m.n_tris))


def test_symmetry_and_energy_consistency():
    p_def, m = _mixed_mesh("spark-gap-l", 0.1)
    sys = assemble_electrostatic(m, p_def)
    A = sys.full_matrix
    assert abs(A - A.T).max() <= 1e-14 * abs(A).max()
    x = solve(sys)
    s = sys.solution(x)
    half = 0.5 * x @ (A @ x)
    assert half == pytest.approx(electrostatic_energy(s), rel=1e-8)
    # SPD reduced matrix: Cholesky-free check via smallest eigenvalue of a dense copy
    ev = np.linalg.eigvalsh(sys.matrix.toarray())
    assert ev.min() > 0


def test_harmonic_complex_symmetric():
    p_def, m = _mixed_mesh("induction-tube", 0.01)
    sys = assemble_harmonic_magnetic(m, p_def)
    A = sys.full_matrix
    assert abs(A - A.T).max() <= 1e-14 * abs(A).max()
    assert abs(A - A.conj().T).max() > 0  # not Hermitian


def test_harmonic_lossless_is_real():
    p_def = builtin_benchmark("induction-tube")
    m = triangulate(p_def, 0.01)
    sys = assemble_harmonic_magnetic(m, p_def, sigma=np.zeros(m.n_tris))
    x = solve(sys)
    assert np.max(np.abs(x.imag)) < 1e-10 * np.max(np.abs(x.real))
    assert np.max(np.abs(x.real)) > 0


def test_harmonic_zero_source():
    p_def = dataclasses.replace(builtin_benchmark("induction-tube"), sources=())
    m = triangulate(p_def, 0.01)
    x = solve(assemble_harmonic_magnetic(m, p_def))
    assert np.all(x == 0)


def test_harmonic_missing_frequency():
    p_def = builtin_benchmark("induction-tube")
    m = triangulate(p_def, 0.01)
    with pytest.raises(AssemblyError):
        assemble_harmonic_magnetic(m, dataclasses.replace(p_def, frequency=None))


# --------------------------------------------------------------------------
# thermal


def _thermal_rod(R=0.01, L=0.02, outer="neumann", heat=0.0):
    bcs = {"axis": {"kind": "axis"}}
    for k in ("bottom", "right", "top"):
        bcs[k] = {"kind": "convection", "h_W_per_m2K": 10.0, "T_ambient_C": 20.0} if outer == "convection" else {"kind": "neumann"}
    return rect_problem(r0=0.0, r1=R, z0=0.0, z1=L, markers=("bottom", "right", "top", "axis"), physics="thermal_transient",
                        boundaries=bcs, material=ALU, sources=[{"region": "body", "heat_W_per_m3": heat}] if heat else [])


def _T0(m, value=20.0):
    return FieldSolution.constant(m, value, Physics.THERMAL_TRANSIENT)


def test_thermal_equilibrium():
    p_def = _thermal_rod()
    m = triangulate(p_def, 0.004)
    m = m.with_orders(np.full(m.n_tris, 2))
    sys = assemble_thermal_step(m, p_def, _T0(m), None, 0.1)
    T = solve(sys)
    assert np.max(np.abs(T[: m.n_nodes] - 20.0)) < 1e-10
    assert np.max(np.abs(T[m.n_nodes:])) < 1e-10


def test_thermal_lumped_step():
    q, dt = 1e6, 0.5
    p_def = _thermal_rod()
    m = triangulate(p_def, 0.004)
    m = m.with_orders(np.full(m.n_tris, 2))
    sys = assemble_thermal_step(m, p_def, _T0(m), q, dt)
    T = sys.solution(solve(sys))
    u, _ = T.evaluate_many(m.nodes[m.tris].mean(axis=1))
    assert np.mean(u) - 20.0 == pytest.approx(q * dt / (2700 * 896), rel=1e-8)


def test_thermal_convective_steady_state():
    R, L, q, h = 0.01, 0.02, 1e4, 10.0
    p_def = _thermal_rod(R, L, outer="convection")
    m = triangulate(p_def, 0.004)
    T = _T0(m)
    for _ in range(60):
        sys = assemble_thermal_step(m, p_def, T, q, 500.0)
        T = sys.solution(solve(sys))
    V, S = math.pi * R**2 * L, 2 * math.pi * R * L + 2 * math.pi * R**2
    exact = 20.0 + q * V / (h * S)
    u, _ = T.evaluate_many([[R / 2, L / 2]])
    assert u[0] == pytest.approx(exact, rel=1e-2)


def test_thermal_bad_dt():
    p_def = _thermal_rod()
    m = triangulate(p_def, 0.004)
    with pytest.raises(AssemblyError):
        assemble_thermal_step(m, p_def, _T0(m), None, 0.0)


def test_thermal_missing_material_data():
    bad = dataclasses.replace(_thermal_rod(), materials={"m": dataclasses.replace(_thermal_rod().materials["m"], density=0.0)})
    m = triangulate(_thermal_rod(), 0.004)
    with pytest.raises(AssemblyError):
        assemble_thermal_step(m, bad, _T0(m), None, 0.1)


# --------------------------------------------------------------------------
# solver


def test_solve_1x1():
    x = solve(LinearSystem.from_matrix([[2.0]], [4.0]))
    assert x[0] == pytest.approx(2.0)


def test_solve_3x3_known_inverse():
    A = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]])
    b = np.array([1.0, 2.0, 3.0])
    x = solve(LinearSystem.from_matrix(A, b))
    assert np.allclose(x, np.linalg.inv(A) @ b, atol=1e-12)


def test_solve_random_spd_500(rng):
    B = sp.random(500, 500, density=0.01, random_state=np.random.RandomState(4))
    A = (B @ B.T + sp.identity(500) * 0.5).tocsr()
    b = rng.standard_normal(500)
    x = solve(LinearSystem.from_matrix(A, b))
    assert np.linalg.norm(b - A @ x) / np.linalg.norm(b) <= 1e-10


def test_solve_deterministic(rng):
    B = sp.random(200, 200, density=0.05, random_state=np.random.RandomState(1))
    A = (B @ B.T + sp.identity(200)).tocsr()
    b = rng.standard_normal(200)
    assert np.array_equal(solve(LinearSystem.from_matrix(A, b)), solve(LinearSystem.from_matrix(A, b)))


def test_solve_singular():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SolverError):
        solve(LinearSystem.from_matrix(A, [1.0, 0.0]))

import dataclasses

import numpy as np
import pytest

from axihp.adaptivity import StrategyConfig, run_adaptive, solve_on
from axihp.constants import TWO_PI
from axihp.coupled import (
    CouplingError,
    CouplingSchedule,
    default_thermal_mesh,
    element_integral,
    loss_density,
    lumped_heating,
    project_field,
    run_coupled,
    update_conductivity,
)
from axihp.fem.basis import volume_tables
from axihp.fem.solution import FieldSolution
from axihp.mesh import locate_many, triangulate
from axihp.problem import Physics, SourceSpec, builtin_benchmark
from axihp.quantities import eddy_loss

from conftest import rect_problem

SIGMA_AL = 30.6327e6


@pytest.fixture(scope="module")
def coupled():
    p = builtin_benchmark("induction-coupled")
    em = run_adaptive(p, StrategyConfig("AdaptiveHP", max_steps=12)).mesh
    return p, em


def _hires_integral(f, m):
    """2 pi \\int f r over ``m`` by brute-force degree-14 quadrature on every triangle."""
    pts, w, *_ = volume_tables(1, 14)
    x0, J, _ = m._affine
    X = x0[:, None, :] + np.einsum("eij,qj->eqi", J, pts)
    vals = f(X.reshape(-1, 2)).reshape(X.shape[:2])
    return TWO_PI * float(np.sum(vals * X[..., 0] * w * (2 * m.areas)[:, None]))


# --------------------------------------------------------------------------
# projection


def test_projection_identity_on_same_mesh():
    p = rect_problem(r0=0.1, r1=0.5)
    m = triangulate(p, 0.1)
    m = m.with_orders(np.full(m.n_tris, 2))
    f = lambda X: 1 + X[:, 0] ** 2 - 3 * X[:, 0] * X[:, 1]
    q = project_field(f, m)
    pts = np.random.default_rng(1).random((200, 2)) * [0.4, 1.0] + [0.1, 0.0]
    tri, bary = locate_many(m, pts)
    assert np.allclose(q.values_at(tri, bary), f(pts), atol=1e-12)


def test_projection_preserves_constant():
    p = rect_problem(r0=0.0, r1=0.5, markers=("b", "r", "t", "axis"),
                     boundaries={"b": {"kind": "neumann"}, "r": {"kind": "neumann"}, "t": {"kind": "neumann"}, "axis": {"kind": "axis"}})
    src = triangulate(p, 0.05)
    dst = triangulate(p, 0.2)
    s = FieldSolution.constant(src, 5.0, Physics.THERMAL_TRANSIENT)
    q = project_field(s, dst, order=1)
    assert np.allclose(q.coeffs[:, :3], 5.0, atol=1e-12)
    assert np.allclose(q.coeffs[:, 3:], 0.0, atol=1e-12)


def test_projection_conserves_skin_layer_power(coupled):
    p, em = coupled
    s = solve_on(em, p)
    coarse = default_thermal_mesh(p, 0.02)
    q = project_field(loss_density(s), coarse)
    # EM-side loss in the workpiece, integrated on the fine EM mesh
    exact = sum(eddy_loss(s, name) for name in coarse.region_names) / s.mirror
    assert element_integral(q) == pytest.approx(exact, rel=5e-3)
    assert _hires_integral(loss_density(s), coarse) == pytest.approx(exact, rel=5e-3)


# --------------------------------------------------------------------------
# conductivity


def test_conductivity_update():
    p = builtin_benchmark("induction-coupled")
    th = default_thermal_mesh(p)
    em = triangulate(p, 0.01)
    al = em.region == em.region_id(th.region_names[0])
    sig = update_conductivity(p, FieldSolution.constant(th, 20.0, Physics.THERMAL_TRANSIENT), em)
    assert np.allclose(sig[al], SIGMA_AL, rtol=1e-14)
    sig = update_conductivity(p, FieldSolution.constant(th, 300.0, Physics.THERMAL_TRANSIENT), em)
    assert np.allclose(sig[al], 14.64e6, rtol=1e-3)
    sig = update_conductivity(p, FieldSolution.constant(th, 300.0, Physics.THERMAL_TRANSIENT), em, enabled=False)
    assert np.allclose(sig[al], SIGMA_AL, rtol=1e-14)
    with pytest.raises(CouplingError):
        update_conductivity(p, FieldSolution.constant(th, -300.0, Physics.THERMAL_TRANSIENT), em)


# --------------------------------------------------------------------------
# schedule


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(total_time=-1.0), dict(threshold=0.0), dict(trigger="never"), dict(every=0, trigger="every")])
def test_schedule_validation(kw):
    with pytest.raises(CouplingError):
        CouplingSchedule(**kw)


def test_wrong_physics(coupled):
    with pytest.raises(CouplingError):
        run_coupled(builtin_benchmark("induction-tube"), CouplingSchedule(1.0), StrategyConfig(max_steps=1))


# --------------------------------------------------------------------------
# heating runs


def test_dependence_off_constant_loss(coupled):
    p, em = coupled
    h = run_coupled(p, CouplingSchedule(5.0, 0.1, temperature_dependence=False), None, em_mesh=em)
    assert h.em_solves == 1
    assert np.ptp(h.loss) <= 1e-10 * h.loss[0]
    assert sum(h.em_resolved) == 1


def test_zero_current_stays_ambient(coupled):
    p, em = coupled
    cold = dataclasses.replace(p, sources=tuple(SourceSpec(s.region, s.mode, 0.0) for s in p.sources))
    h = run_coupled(cold, CouplingSchedule(2.0, 0.1), None, em_mesh=em)
    assert np.allclose(h.hotspot, 20.0, atol=1e-9)
    assert np.allclose(h.loss, 0.0)


def test_zero_duration_gives_initial_row(coupled):
    p, em = coupled
    h = run_coupled(p, CouplingSchedule(0.0, 0.1), None, em_mesh=em)
    assert h.t == [0.0]
    assert h.hotspot == [20.0]


def test_energy_balance_and_monotone_hotspot(coupled):
    p, em = coupled
    h = run_coupled(p, CouplingSchedule(20.0, 0.1), None, em_mesh=em)
    E_in = h.input_energy()
    assert h.energy[-1] + h.convected_energy() == pytest.approx(E_in, rel=2e-2)
    assert all(b >= a for a, b in zip(h.hotspot, h.hotspot[1:]))
    assert h.hotspot[-1] > 20.0
    assert h.em_solves >= 1


def test_every_n_trigger_schedule(coupled):
    p, em = coupled
    h = run_coupled(p, CouplingSchedule(10.0, 0.1, trigger="every", every=25), None, em_mesh=em)
    assert h.em_solves == 1 + 99 // 25
    assert [k for k, v in enumerate(h.em_resolved) if v] == [0, 25, 50, 75]


def test_thermal_mesh_resolution_barely_matters(coupled):
    p, em = coupled
    sched = CouplingSchedule(10.0, 0.1)
    a = run_coupled(p, sched, None, default_thermal_mesh(p, 0.008), em_mesh=em)
    b = run_coupled(p, sched, None, default_thermal_mesh(p, 0.004), em_mesh=em)
    rise_a, rise_b = a.hotspot[-1] - 20.0, b.hotspot[-1] - 20.0
    assert b.hotspot[-1] == pytest.approx(a.hotspot[-1], rel=1e-2)
    assert rise_b == pytest.approx(rise_a, rel=5e-2)


def test_loss_trend_matches_lumped_oracle(coupled):
    p, em = coupled
    h = run_coupled(p, CouplingSchedule(30.0, 0.1), None, em_mesh=em)
    _, _, T_nodes, table = lumped_heating(p, em, 30.0, 0.1, True)
    oracle_slope = np.sign(table[1] - table[0])
    assert oracle_slope != 0
    assert np.sign(h.loss[-1] - h.loss[0]) == oracle_slope


def test_lumped_oracle_off_is_linear(coupled):
    p, em = coupled
    t, T, _, table = lumped_heating(p, em, 10.0, 0.5, False)
    assert np.allclose(np.diff(T, 2), 0.0, atol=1e-10)
    assert np.ptp(table) == 0.0

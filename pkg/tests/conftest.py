import json
import sys

import numpy as np
import pytest

from axihp.problem import from_dict, parse_problem

AIR = {"epsilon_r": 1.0}
ALU = {
    "sigma_S_per_m": 30.6327e6,
    "sigma_temp_coeff_per_K": 0.0039,
    "density_kg_per_m3": 2700.0,
    "heat_capacity_J_per_kgK": 896.0,
    "thermal_conductivity_W_per_mK": 237.0,
}


def rect_doc(r0=0.0, r1=1.0, z0=0.0, z1=1.0, markers=("bottom", "right", "top", "left"), physics="electrostatic",
             boundaries=None, material=None, name="rect", **extra):
    """Single rectangular region; edges bottom, right, top, left."""
    doc = {
        "name": name,
        "physics": physics,
        "vertices": [[r0, z0], [r1, z0], [r1, z1], [r0, z1]],
        "edges": [[0, 1, markers[0]], [1, 2, markers[1]], [2, 3, markers[2]], [3, 0, markers[3]]],
        "regions": [{"name": "body", "seed": [(r0 + r1) / 2, (z0 + z1) / 2], "material": "m"}],
        "materials": {"m": material or AIR},
        "boundaries": boundaries or {m: {"kind": "neumann"} for m in set(markers)},
    }
    doc.update(extra)
    return doc


def rect_problem(**kw):
    return parse_problem(json.dumps(rect_doc(**kw)))


def rect_unvalidated(**kw):
    return from_dict(rect_doc(**kw))


@pytest.fixture
def plate_problem():
    """phi = 0 at z = 0, 1000 V at z = 1, insulated sides; exact phi = 1000 z."""
    return rect_problem(
        r0=0.1, r1=0.6,
        boundaries={
            "bottom": {"kind": "dirichlet", "potential_V": 0.0},
            "top": {"kind": "dirichlet", "potential_V": 1000.0},
            "left": {"kind": "neumann"},
            "right": {"kind": "neumann"},
        },
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")

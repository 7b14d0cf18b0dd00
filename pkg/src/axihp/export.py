"""VTK legacy export of solutions (vertex values plus per-element derived fields)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .fem.solution import FieldSolution
from .problem import Physics


def _cell_fields(s: FieldSolution) -> dict:
    m = s.mesh
    ids = np.arange(m.n_tris)
    bary = np.full((m.n_tris, 3), 1.0 / 3.0)
    u, g = s.values_and_grads(ids, bary)
    out = {"order": m.order.astype(float), "region": m.region.astype(float)}
    if s.physics is Physics.ELECTROSTATIC:
        out["E_abs"] = np.linalg.norm(np.abs(g), axis=1)
    elif s.physics.has_magnetic:
        r = m.nodes[m.tris].mean(axis=1)[:, 0]
        sigma = s.element_data["sigma"]
        out["J_eddy_abs"] = s.omega * sigma * np.abs(u)
        out["loss_density"] = sigma * s.omega**2 * np.abs(u) ** 2
        out["B_abs"] = np.sqrt(np.abs(g[:, 1]) ** 2 + np.abs(g[:, 0] + u / r) ** 2)
    else:
        k = s.element_data.get("k")
        if k is not None:
            out["heat_flux_abs"] = k * np.linalg.norm(np.abs(g), axis=1)
    return out


def vtk_text(s: FieldSolution, title: str = "axihp solution") -> str:
    """Unstructured-grid VTK (ASCII) with nodes at (r, z, 0).

    Hierarchic edge and bubble modes vanish at vertices, so vertex values are
    the vertex coefficients.
    """
    m = s.mesh
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {m.n_nodes} double")
    lines += [f"{r:.17g} {z:.17g} 0" for r, z in m.nodes]
    lines.append(f"CELLS {m.n_tris} {4 * m.n_tris}")
    lines += [f"3 {a} {b} {c}" for a, b, c in m.tris]
    lines.append(f"CELL_TYPES {m.n_tris}")
    lines += ["5"] * m.n_tris
    v = np.asarray(s.coeffs[: m.n_nodes])
    point = {"phi": v} if s.physics is Physics.ELECTROSTATIC else {"T": v}
    if np.iscomplexobj(v) or s.physics.has_magnetic:
        point = {"A_re": v.real, "A_im": np.imag(v)}
    lines.append(f"POINT_DATA {m.n_nodes}")
    for name, arr in point.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{x:.17g}" for x in arr]
    lines.append(f"CELL_DATA {m.n_tris}")
    for name, arr in _cell_fields(s).items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{x:.17g}" for x in np.real(arr)]
    return "\n".join(lines) + "\n"


def write_vtk(s: FieldSolution, path) -> Path:
    path = Path(path)
    path.write_text(vtk_text(s))
    return path

"""Benchmark problem descriptions: data model, file format, validation.

A problem file is a JSON document with SI units throughout. Keys that carry
a physical quantity end in a unit suffix (``sigma_S_per_m``,
``potential_V``, ...); a key with a recognised stem but a different suffix is
rejected as a unit error rather than silently ignored.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from importlib import resources

from . import geometry


class ProblemError(ValueError):
    """Base class for problem-definition errors.

    ``entity`` names the offending vertex/edge/region/material/key.
    """

    def __init__(self, message: str, entity: str | None = None):
        super().__init__(message)
        self.entity = entity


class ProblemSyntaxError(ProblemError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ProblemSchemaError(ProblemError):
    pass


class ProblemSemanticError(ProblemError):
    def __init__(self, violations: list["Violation"]):
        text = "; ".join(f"{v.rule}: {v.entity}" for v in violations)
        super().__init__(f"invalid problem: {text}", violations[0].entity)
        self.violations = violations


class Physics(str, enum.Enum):
    ELECTROSTATIC = "electrostatic"
    HARMONIC_MAGNETIC = "harmonic_magnetic"
    THERMAL_TRANSIENT = "thermal_transient"
    COUPLED_MAGNETOTHERMAL = "coupled_magnetothermal"

    @property
    def has_magnetic(self) -> bool:
        return self in (Physics.HARMONIC_MAGNETIC, Physics.COUPLED_MAGNETOTHERMAL)

    @property
    def has_thermal(self) -> bool:
        return self in (Physics.THERMAL_TRANSIENT, Physics.COUPLED_MAGNETOTHERMAL)


class BCKind(str, enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    AXIS = "axis"
    CONVECTION = "convection"
    FIXED_TEMPERATURE = "fixed_temperature"
    MAGNETIC_POTENTIAL_ZERO = "magnetic_potential_zero"


class SourceMode(str, enum.Enum):
    TOTAL_CURRENT = "total_current"
    CURRENT_DENSITY = "current_density"
    VOLUMETRIC_HEAT = "volumetric_heat"


@dataclass(frozen=True)
class MaterialProperties:
    epsilon_r: float = 1.0
    sigma_ref: float = 0.0
    sigma_temp_coeff: float = 0.0
    T_ref: float = 20.0
    mu_r: float = 1.0
    density: float = 0.0
    heat_capacity: float = 0.0
    thermal_conductivity: float = 0.0

    def sigma(self, T):
        """Conductivity at temperature ``T`` (°C): sigma_ref / (1 + alpha (T - T_ref))."""
        return self.sigma_ref / (1.0 + self.sigma_temp_coeff * (T - self.T_ref))

    @property
    def has_thermal(self) -> bool:
        return self.density > 0 and self.heat_capacity > 0 and self.thermal_conductivity > 0


@dataclass(frozen=True)
class BoundaryCondition:
    kind: BCKind
    value: float = 0.0
    h: float = 0.0
    T_ambient: float = 0.0

    @classmethod
    def dirichlet(cls, potential: float) -> "BoundaryCondition":
        return cls(BCKind.DIRICHLET, value=float(potential))

    @classmethod
    def neumann(cls) -> "BoundaryCondition":
        return cls(BCKind.NEUMANN)

    @classmethod
    def axis(cls) -> "BoundaryCondition":
        return cls(BCKind.AXIS)

    @classmethod
    def convection(cls, h: float, T_ambient: float) -> "BoundaryCondition":
        return cls(BCKind.CONVECTION, h=float(h), T_ambient=float(T_ambient))

    @classmethod
    def fixed_temperature(cls, T: float) -> "BoundaryCondition":
        return cls(BCKind.FIXED_TEMPERATURE, value=float(T))

    @classmethod
    def magnetic_potential_zero(cls) -> "BoundaryCondition":
        return cls(BCKind.MAGNETIC_POTENTIAL_ZERO)


@dataclass(frozen=True)
class SourceSpec:
    region: str
    mode: SourceMode
    value: float


@dataclass(frozen=True)
class Region:
    name: str
    seed: tuple[float, float]
    material: str


@dataclass(frozen=True)
class ProblemDefinition:
    name: str
    physics: Physics
    vertices: tuple[tuple[float, float], ...]
    edges: tuple[tuple[int, int, str], ...]
    regions: tuple[Region, ...]
    materials: dict[str, MaterialProperties]
    boundaries: dict[str, BoundaryCondition]
    sources: tuple[SourceSpec, ...] = ()
    frequency: float | None = None
    probes: tuple[tuple[float, float], ...] = ()
    symmetry_plane: float | None = None

    @property
    def mirror_factor(self) -> int:
        """2 when only the half above a mirror plane is modeled."""
        return 1 if self.symmetry_plane is None else 2

    def region_index(self, name: str) -> int:
        for k, reg in enumerate(self.regions):
            if reg.name == name:
                return k
        raise ProblemError(f"unknown region {name!r}", name)

    def probe(self, ref) -> tuple[float, float]:
        """Resolve ``"P1"``-style names (1-based) or explicit coordinates."""
        if isinstance(ref, str):
            if ref.upper().startswith("P") and ref[1:].isdigit():
                k = int(ref[1:]) - 1
                if 0 <= k < len(self.probes):
                    return self.probes[k]
            raise ProblemError(f"unknown probe {ref!r}", ref)
        r, z = ref
        return float(r), float(z)

    def restricted_to(self, region_names) -> "ProblemDefinition":
        """Same geometry with only the named regions seeded (others become holes)."""
        keep = tuple(reg for reg in self.regions if reg.name in set(region_names))
        if not keep:
            raise ProblemError(f"no regions among {sorted(region_names)}")
        return ProblemDefinition(
            name=self.name,
            physics=self.physics,
            vertices=self.vertices,
            edges=self.edges,
            regions=keep,
            materials=self.materials,
            boundaries=self.boundaries,
            sources=tuple(s for s in self.sources if s.region in {r.name for r in keep}),
            frequency=self.frequency,
            probes=self.probes,
            symmetry_plane=self.symmetry_plane,
        )


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str


def region_faces(p: ProblemDefinition):
    """Map each region to the index of the face its seed lies in (None if outside)."""
    faces, _ = geometry.planar_faces(p.vertices, [(i, j) for i, j, _ in p.edges])
    return faces, [geometry.face_of_point(reg.seed, faces, p.vertices) for reg in p.regions]


def validate(p: ProblemDefinition) -> list[Violation]:
    out: list[Violation] = []
    nv = len(p.vertices)
    for k, (r, z) in enumerate(p.vertices):
        if not (math.isfinite(r) and math.isfinite(z)):
            out.append(Violation(f"vertex {k}", "non-finite-coordinate"))
        elif r < 0:
            out.append(Violation(f"vertex {k}", "negative-radius"))

    seen: set[tuple[int, int]] = set()
    degree = [0] * nv
    edges_ok = True
    for k, (i, j, marker) in enumerate(p.edges):
        if not (0 <= i < nv and 0 <= j < nv) or i == j:
            out.append(Violation(f"edge {k}", "bad-edge-vertices"))
            edges_ok = False
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            out.append(Violation(f"edge {k}", "duplicate-edge"))
        seen.add(key)
        degree[i] += 1
        degree[j] += 1
        if marker not in p.boundaries:
            out.append(Violation(f"marker {marker}", "missing-boundary"))
        else:
            bc = p.boundaries[marker]
            if bc.kind is BCKind.AXIS and (abs(p.vertices[i][0]) > 1e-12 or abs(p.vertices[j][0]) > 1e-12):
                out.append(Violation(f"edge {k}", "axis-off-axis"))
    for v in range(nv):
        if 0 < degree[v] < 2:
            out.append(Violation(f"vertex {v}", "open-loop"))
        elif degree[v] == 0:
            out.append(Violation(f"vertex {v}", "isolated-vertex"))

    if edges_ok:
        E = p.edges
        for a in range(len(E)):
            pa, pb = p.vertices[E[a][0]], p.vertices[E[a][1]]
            for b in range(a + 1, len(E)):
                if geometry.segments_cross(pa, pb, p.vertices[E[b][0]], p.vertices[E[b][1]]):
                    out.append(Violation(f"edges {a},{b}", "self-intersection"))

    face_areas = {}
    if edges_ok and not any(v.rule in ("open-loop", "self-intersection") for v in out):
        faces, owner = region_faces(p)
        claimed: dict[int, str] = {}
        for reg, f in zip(p.regions, owner):
            if f is None:
                out.append(Violation(f"region {reg.name}", "seed-outside"))
                continue
            if f in claimed:
                out.append(Violation(f"region {reg.name}", "ambiguous-region"))
            claimed[f] = reg.name
            face_areas[reg.name] = faces[f].area
        for reg in p.regions:
            for i, j, _ in p.edges:
                if geometry.point_segment_distance(reg.seed, p.vertices[i], p.vertices[j]) < 1e-12:
                    out.append(Violation(f"region {reg.name}", "seed-on-edge"))
                    break

    names = [reg.name for reg in p.regions]
    for nm in sorted({n for n in names if names.count(n) > 1}):
        out.append(Violation(f"region {nm}", "duplicate-region-name"))
    for reg in p.regions:
        if reg.material not in p.materials:
            out.append(Violation(f"region {reg.name} material {reg.material}", "dangling-material"))

    used = {reg.material for reg in p.regions}
    for nm, m in sorted(p.materials.items()):
        if m.epsilon_r < 1:
            out.append(Violation(f"material {nm}", "epsilon-range"))
        if m.sigma_ref < 0:
            out.append(Violation(f"material {nm}", "negative-conductivity"))
        if m.mu_r <= 0:
            out.append(Violation(f"material {nm}", "nonpositive-permeability"))
        thermal = (m.density, m.heat_capacity, m.thermal_conductivity)
        if p.physics.has_thermal and nm in used:
            if p.physics is Physics.THERMAL_TRANSIENT and not m.has_thermal:
                out.append(Violation(f"material {nm}", "thermal-nonpositive"))
            elif any(t > 0 for t in thermal) and not m.has_thermal:
                out.append(Violation(f"material {nm}", "thermal-nonpositive"))
        if any(t < 0 for t in thermal):
            out.append(Violation(f"material {nm}", "thermal-nonpositive"))
    if p.physics is Physics.COUPLED_MAGNETOTHERMAL and not any(
        p.materials[m].has_thermal for m in used if m in p.materials
    ):
        out.append(Violation("materials", "no-thermal-region"))

    if p.physics.has_magnetic and not (p.frequency is not None and p.frequency > 0):
        out.append(Violation("frequency_hz", "frequency-missing"))

    for k, src in enumerate(p.sources):
        if src.region not in names:
            out.append(Violation(f"source {k} region {src.region}", "dangling-source-region"))
        elif src.mode is SourceMode.TOTAL_CURRENT and face_areas.get(src.region, 1.0) <= 0:
            out.append(Violation(f"source {k} region {src.region}", "zero-area-source"))

    for k, (r, z) in enumerate(p.probes):
        if r < 0:
            out.append(Violation(f"probe P{k + 1}", "negative-radius"))
    return out


# --------------------------------------------------------------------------
# file format

_MATERIAL_KEYS = {
    "epsilon_r": "epsilon_r",
    "sigma_S_per_m": "sigma_ref",
    "sigma_temp_coeff_per_K": "sigma_temp_coeff",
    "T_ref_C": "T_ref",
    "mu_r": "mu_r",
    "density_kg_per_m3": "density",
    "heat_capacity_J_per_kgK": "heat_capacity",
    "thermal_conductivity_W_per_mK": "thermal_conductivity",
}
_BC_KEYS = {
    BCKind.DIRICHLET: {"potential_V": "value"},
    BCKind.NEUMANN: {},
    BCKind.AXIS: {},
    BCKind.CONVECTION: {"h_W_per_m2K": "h", "T_ambient_C": "T_ambient"},
    BCKind.FIXED_TEMPERATURE: {"T_C": "value"},
    BCKind.MAGNETIC_POTENTIAL_ZERO: {},
}
_SOURCE_KEYS = {
    "total_current_A": SourceMode.TOTAL_CURRENT,
    "current_density_A_per_m2": SourceMode.CURRENT_DENSITY,
    "heat_W_per_m3": SourceMode.VOLUMETRIC_HEAT,
}
_TOP_REQUIRED = ("name", "physics", "vertices", "edges", "regions", "materials", "boundaries")
_TOP_OPTIONAL = ("sources", "frequency_hz", "probes", "symmetry_plane_z")


def _check_keys(obj: dict, allowed, where: str, required=()):
    if not isinstance(obj, dict):
        raise ProblemSchemaError(f"{where}: expected an object", where)
    for key in required:
        if key not in obj:
            raise ProblemSchemaError(f"{where}: missing key {key!r}", key)
    for key in obj:
        if key in allowed:
            continue
        stem = key.split("_")[0]
        match = [a for a in allowed if a.split("_")[0] == stem]
        if match:
            raise ProblemSchemaError(
                f"{where}: wrong unit suffix in {key!r} (expected {match[0]!r})", key
            )
        raise ProblemSchemaError(f"{where}: unknown key {key!r}", key)


def _num(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ProblemSchemaError(f"{where}: expected a number, got {x!r}", where)
    return float(x)


def _point(x, where: str) -> tuple[float, float]:
    if not isinstance(x, list) or len(x) != 2:
        raise ProblemSchemaError(f"{where}: expected [r, z]", where)
    return _num(x[0], where), _num(x[1], where)


def _enum(cls, value, where: str):
    try:
        return cls(value)
    except ValueError:
        valid = ", ".join(m.value for m in cls)
        raise ProblemSchemaError(f"{where}: {value!r} is not one of {valid}", where) from None


def from_dict(doc: dict) -> ProblemDefinition:
    """Build (without semantic validation) a problem from a decoded document."""
    _check_keys(doc, _TOP_REQUIRED + _TOP_OPTIONAL, "document", _TOP_REQUIRED)
    if not isinstance(doc["name"], str):
        raise ProblemSchemaError("name: expected a string", "name")
    physics = _enum(Physics, doc["physics"], "physics")
    vertices = tuple(_point(v, f"vertices[{k}]") for k, v in enumerate(doc["vertices"]))
    edges = []
    for k, e in enumerate(doc["edges"]):
        if (
            not isinstance(e, list)
            or len(e) != 3
            or not all(isinstance(i, int) and not isinstance(i, bool) for i in e[:2])
            or not isinstance(e[2], str)
        ):
            raise ProblemSchemaError(f"edges[{k}]: expected [i, j, \"marker\"]", f"edges[{k}]")
        edges.append((e[0], e[1], e[2]))
    regions = []
    for k, r in enumerate(doc["regions"]):
        where = f"regions[{k}]"
        _check_keys(r, ("name", "seed", "material"), where, ("seed", "material"))
        regions.append(Region(str(r.get("name", f"region{k}")), _point(r["seed"], where), str(r["material"])))
    materials = {}
    if not isinstance(doc["materials"], dict):
        raise ProblemSchemaError("materials: expected an object", "materials")
    for nm, m in doc["materials"].items():
        where = f"materials.{nm}"
        _check_keys(m, _MATERIAL_KEYS, where)
        materials[nm] = MaterialProperties(**{_MATERIAL_KEYS[k]: _num(v, f"{where}.{k}") for k, v in m.items()})
    boundaries = {}
    if not isinstance(doc["boundaries"], dict):
        raise ProblemSchemaError("boundaries: expected an object", "boundaries")
    for marker, b in doc["boundaries"].items():
        where = f"boundaries.{marker}"
        if not isinstance(b, dict) or "kind" not in b:
            raise ProblemSchemaError(f"{where}: missing key 'kind'", marker)
        kind = _enum(BCKind, b["kind"], f"{where}.kind")
        keys = _BC_KEYS[kind]
        _check_keys(b, ("kind", *keys), where, ("kind", *keys))
        boundaries[marker] = BoundaryCondition(kind, **{keys[k]: _num(b[k], f"{where}.{k}") for k in keys})
    sources = []
    for k, s in enumerate(doc.get("sources", [])):
        where = f"sources[{k}]"
        _check_keys(s, ("region", *_SOURCE_KEYS), where, ("region",))
        modes = [key for key in _SOURCE_KEYS if key in s]
        if len(modes) != 1:
            raise ProblemSchemaError(f"{where}: exactly one of {', '.join(_SOURCE_KEYS)} required", where)
        sources.append(SourceSpec(str(s["region"]), _SOURCE_KEYS[modes[0]], _num(s[modes[0]], where)))
    freq = doc.get("frequency_hz")
    sym = doc.get("symmetry_plane_z")
    return ProblemDefinition(
        name=doc["name"],
        physics=physics,
        vertices=vertices,
        edges=tuple(edges),
        regions=tuple(regions),
        materials=materials,
        boundaries=boundaries,
        sources=tuple(sources),
        frequency=None if freq is None else _num(freq, "frequency_hz"),
        probes=tuple(_point(q, f"probes[{k}]") for k, q in enumerate(doc.get("probes", []))),
        symmetry_plane=None if sym is None else _num(sym, "symmetry_plane_z"),
    )


def parse_problem(text: str) -> ProblemDefinition:
    """Parse and validate a problem document.

    Raises
    ------
    ProblemSyntaxError
        Malformed JSON; carries ``line`` and ``column``.
    ProblemSchemaError
        Missing or unknown keys, unit-suffix mistakes, wrong value types.
    ProblemSemanticError
        Any :func:`validate` violation (dangling material, open loop, ...).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    p = from_dict(doc)
    violations = validate(p)
    if violations:
        raise ProblemSemanticError(violations)
    return p


def load_problem(path) -> ProblemDefinition:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read())


def to_dict(p: ProblemDefinition) -> dict:
    inv_mat = {v: k for k, v in _MATERIAL_KEYS.items()}
    doc: dict = {
        "name": p.name,
        "physics": p.physics.value,
        "vertices": [[r, z] for r, z in p.vertices],
        "edges": [[i, j, m] for i, j, m in p.edges],
        "regions": [{"name": r.name, "seed": list(r.seed), "material": r.material} for r in p.regions],
        "materials": {
            nm: {inv_mat[f]: getattr(m, f) for f in inv_mat} for nm, m in p.materials.items()
        },
        "boundaries": {},
    }
    for marker, bc in p.boundaries.items():
        entry = {"kind": bc.kind.value}
        for key, attr in _BC_KEYS[bc.kind].items():
            entry[key] = getattr(bc, attr)
        doc["boundaries"][marker] = entry
    inv_src = {v: k for k, v in _SOURCE_KEYS.items()}
    if p.sources:
        doc["sources"] = [{"region": s.region, inv_src[s.mode]: s.value} for s in p.sources]
    if p.frequency is not None:
        doc["frequency_hz"] = p.frequency
    if p.probes:
        doc["probes"] = [list(q) for q in p.probes]
    if p.symmetry_plane is not None:
        doc["symmetry_plane_z"] = p.symmetry_plane
    return doc


def serialize(p: ProblemDefinition) -> str:
    return json.dumps(to_dict(p), indent=2) + "\n"


# --------------------------------------------------------------------------
# built-in benchmarks

AIR = MaterialProperties()
ALUMINIUM_SIGMA = 30.6327e6  # S/m
ALUMINIUM = MaterialProperties(
    sigma_ref=ALUMINIUM_SIGMA,
    sigma_temp_coeff=0.0039,
    T_ref=20.0,
    density=2700.0,
    heat_capacity=896.0,
    thermal_conductivity=237.0,
)


def _spark_gap_l() -> ProblemDefinition:
    corner = (0.05, 0.55)
    return ProblemDefinition(
        name="spark-gap-l",
        physics=Physics.ELECTROSTATIC,
        vertices=((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.05, 1.0), corner, (0.0, 0.55)),
        edges=(
            (0, 1, "plate"),
            (1, 2, "outer"),
            (2, 3, "outer"),
            (3, 4, "electrode"),
            (4, 5, "electrode"),
            (5, 0, "axis"),
        ),
        regions=(Region("air", (0.5, 0.5), "air"),),
        materials={"air": AIR},
        boundaries={
            "plate": BoundaryCondition.dirichlet(1000.0),
            "electrode": BoundaryCondition.dirichlet(0.0),
            "outer": BoundaryCondition.neumann(),
            "axis": BoundaryCondition.axis(),
        },
        probes=((0.01, 0.5), (corner[0] + 0.005, corner[1] - 0.005)),
    )


def _coax_capacitor() -> ProblemDefinition:
    a, b = 0.2, 0.8
    return ProblemDefinition(
        name="coax-capacitor",
        physics=Physics.ELECTROSTATIC,
        vertices=((a, 0.0), (b, 0.0), (b, 1.0), (a, 1.0)),
        edges=((0, 1, "end"), (1, 2, "outer"), (2, 3, "end"), (3, 0, "inner")),
        regions=(Region("gap", (0.5, 0.5), "air"),),
        materials={"air": AIR},
        boundaries={
            "inner": BoundaryCondition.dirichlet(1000.0),
            "outer": BoundaryCondition.dirichlet(0.0),
            "end": BoundaryCondition.neumann(),
        },
        probes=((0.5, 0.5),),
    )


def _induction(name: str, physics: Physics) -> ProblemDefinition:
    R, H = 0.03, 0.05  # workpiece radius, half-height
    c0, w, hh, wall = 0.035, 0.02, 0.02, 0.003  # coil inner radius, width, half-height, wall
    vertices = (
        (0.0, 0.0),
        (R, 0.0),
        (c0, 0.0),
        (c0 + wall, 0.0),
        (c0 + w - wall, 0.0),
        (c0 + w, 0.0),
        (0.2, 0.0),
        (0.2, 0.15),
        (0.0, 0.15),
        (0.0, H),
        (R, H),
        (c0, hh),
        (c0 + w, hh),
        (c0 + wall, hh - wall),
        (c0 + w - wall, hh - wall),
    )
    edges = (
        (0, 1, "symmetry"),
        (1, 2, "symmetry"),
        (2, 3, "symmetry"),
        (3, 4, "symmetry"),
        (4, 5, "symmetry"),
        (5, 6, "symmetry"),
        (6, 7, "outer"),
        (7, 8, "outer"),
        (8, 9, "axis"),
        (9, 0, "axis"),
        (1, 10, "workpiece_surface"),
        (10, 9, "workpiece_surface"),
        (2, 11, "coil"),
        (11, 12, "coil"),
        (12, 5, "coil"),
        (3, 13, "coil"),
        (13, 14, "coil"),
        (14, 4, "coil"),
    )
    regions = (
        Region("air", (0.1, 0.1), "air"),
        Region("workpiece", (R / 2, H / 2), "aluminium"),
        Region("coil", (c0 + wall / 2, hh / 2), "copper"),
        Region("coil_bore", (c0 + w / 2, (hh - wall) / 2), "air"),
    )
    coupled = physics is Physics.COUPLED_MAGNETOTHERMAL
    return ProblemDefinition(
        name=name,
        physics=physics,
        vertices=vertices,
        edges=edges,
        regions=regions,
        materials={
            "air": AIR,
            "aluminium": ALUMINIUM if coupled else MaterialProperties(sigma_ref=ALUMINIUM_SIGMA),
            "copper": MaterialProperties(sigma_ref=0.0),
        },
        boundaries={
            "symmetry": BoundaryCondition.neumann(),
            "outer": BoundaryCondition.magnetic_potential_zero(),
            "axis": BoundaryCondition.axis(),
            "workpiece_surface": BoundaryCondition.convection(10.0, 20.0),
            "coil": BoundaryCondition.neumann(),
        },
        sources=(SourceSpec("coil", SourceMode.TOTAL_CURRENT, 3500.0),),
        frequency=2000.0,
        probes=((R, 0.0), (R, H)),
        symmetry_plane=0.0,
    )


# analytic-cylinder dimensions, shared with the oracle comparison
CYLINDER_RADIUS = 0.01
CYLINDER_HEIGHT = 0.005
CYLINDER_SHELL = (0.012, 0.013)
CYLINDER_CURRENT = 100.0  # A rms through the shell cross-section (per modeled height)


def _analytic_cylinder() -> ProblemDefinition:
    R, H = CYLINDER_RADIUS, CYLINDER_HEIGHT
    s0, s1 = CYLINDER_SHELL
    return ProblemDefinition(
        name="analytic-cylinder",
        physics=Physics.HARMONIC_MAGNETIC,
        vertices=((0.0, 0.0), (R, 0.0), (s0, 0.0), (s1, 0.0), (s1, H), (s0, H), (R, H), (0.0, H)),
        edges=(
            (0, 1, "end"),
            (1, 2, "end"),
            (2, 3, "end"),
            (3, 4, "outer"),
            (4, 5, "end"),
            (5, 6, "end"),
            (6, 7, "end"),
            (7, 0, "axis"),
            (1, 6, "interface"),
            (2, 5, "interface"),
        ),
        regions=(
            Region("cylinder", (R / 2, H / 2), "aluminium"),
            Region("gap", ((R + s0) / 2, H / 2), "air"),
            Region("shell", ((s0 + s1) / 2, H / 2), "copper"),
        ),
        materials={
            "air": AIR,
            "aluminium": MaterialProperties(sigma_ref=ALUMINIUM_SIGMA),
            "copper": MaterialProperties(sigma_ref=0.0),
        },
        boundaries={
            "end": BoundaryCondition.neumann(),
            "outer": BoundaryCondition.neumann(),
            "axis": BoundaryCondition.axis(),
            "interface": BoundaryCondition.neumann(),
        },
        sources=(SourceSpec("shell", SourceMode.TOTAL_CURRENT, CYLINDER_CURRENT),),
        frequency=2000.0,
        probes=(((R + s0) / 2, H / 2),),
    )


_BUILTINS = {
    "spark-gap-l": _spark_gap_l,
    "induction-tube": lambda: _induction("induction-tube", Physics.HARMONIC_MAGNETIC),
    "induction-coupled": lambda: _induction("induction-coupled", Physics.COUPLED_MAGNETOTHERMAL),
    "coax-capacitor": _coax_capacitor,
    "analytic-cylinder": _analytic_cylinder,
}

BENCHMARK_NAMES = tuple(_BUILTINS)


def builtin_benchmark(name: str) -> ProblemDefinition:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ProblemError(
            f"unknown benchmark {name!r}; valid names: {', '.join(BENCHMARK_NAMES)}", name
        ) from None


def shipped_problem_text(name: str) -> str:
    """Text of the problem file shipped in the package data directory."""
    return resources.files("axihp").joinpath("data", f"{name}.json").read_text(encoding="utf-8")


def resolve_problem(ref: str) -> ProblemDefinition:
    """A built-in benchmark name or a path to a problem file."""
    if ref in _BUILTINS:
        return builtin_benchmark(ref)
    return load_problem(ref)

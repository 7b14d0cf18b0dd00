"""Quantities of interest and analytic reference formulas.

Volume integrals include the 2 pi azimuthal factor, so energies are in J and
losses in W for the full 3D body (times the mirror factor when only half of
a symmetric device is modeled). Harmonic quantities use rms phasors: the
time-averaged loss density is sigma omega^2 |A|^2 with no factor 1/2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .constants import EPS0, MU0, TWO_PI
from .fem.assembly import LinearSystem, quad_order
from .fem.basis import volume_tables
from .fem.solution import FieldSolution, evaluate, physical_grads
from .mesh import Mesh
from .problem import Physics, ProblemDefinition


class QuantityError(ValueError):
    pass


class QoIKind(str, enum.Enum):
    DOMAIN_INTEGRAL = "domain_integral"
    POINT_VALUE = "point_value"


_QUANTITIES = {"energy": QoIKind.DOMAIN_INTEGRAL, "eddy_loss": QoIKind.DOMAIN_INTEGRAL, "field_stress": QoIKind.POINT_VALUE}


@dataclass(frozen=True)
class QoI:
    """A named scalar output: ``energy[@region]``, ``eddy_loss[@region]`` or ``field_stress@probe``."""

    name: str
    kind: QoIKind
    quantity: str
    region: str | None = None
    probe: str | tuple[float, float] | None = None

    @classmethod
    def parse(cls, text: str) -> "QoI":
        base, _, target = text.partition("@")
        if base not in _QUANTITIES:
            raise QuantityError(f"unknown quantity {base!r}; expected one of {sorted(_QUANTITIES)}")
        kind = _QUANTITIES[base]
        if kind is QoIKind.POINT_VALUE:
            if not target:
                raise QuantityError(f"{base} needs a probe, e.g. {base}@P1")
            return cls(text, kind, base, probe=target)
        return cls(text, kind, base, region=target or None)

    def check(self, p: ProblemDefinition) -> None:
        """Raise if the referenced region or probe is absent from ``p``."""
        if self.region is not None:
            p.region_index(self.region)
        if self.probe is not None:
            p.probe(self.probe)

    def evaluate(self, s: FieldSolution, p: ProblemDefinition) -> float:
        if self.quantity == "energy":
            return electrostatic_energy(s, self.region)
        if self.quantity == "eddy_loss":
            return eddy_loss(s, self.region)
        return field_stress(s, p.probe(self.probe))


def default_qois(p: ProblemDefinition) -> list[QoI]:
    if p.physics is Physics.ELECTROSTATIC:
        out = [QoI.parse("energy")]
        out += [QoI.parse(f"field_stress@P{k + 1}") for k in range(len(p.probes))]
        return out
    return [QoI.parse("eddy_loss")]


# --------------------------------------------------------------------------
# domain integrals


def _region_mask(m: Mesh, region: str | None) -> np.ndarray:
    if region is None:
        return np.ones(m.n_tris, dtype=bool)
    return m.region == m.region_id(region)


def integrate(s: FieldSolution, density, region: str | None = None, order_boost: int = 0) -> float:
    """2 pi \\int density(u, grad u, r, tri_ids) r dr dz over ``region``.

    ``density`` receives values (n, nq), physical gradients (n, nq, 2),
    radii (n, nq) and triangle ids (n,).
    """
    m = s.mesh
    mask = _region_mask(m, region)
    x0, J, Jinv = m._affine
    total = 0.0
    for p, ids, l2g, sign in s.dofmap.groups:
        keep = mask[ids]
        if not keep.any():
            continue
        ids, l2g, sign = ids[keep], l2g[keep], sign[keep]
        pts, w, V, G, _ = volume_tables(p, min(quad_order(p) + order_boost, 14))
        c = s.dofmap.gather(s.coeffs, l2g, sign)
        u = c @ V.T
        PG = physical_grads(Jinv[ids], G)
        gu = np.einsum("eb,eqbi->eqi", c, PG)
        r = x0[ids][:, None, 0] + np.einsum("ej,qj->eq", J[ids][:, 0, :], pts)
        wq = TWO_PI * (2.0 * m.areas[ids])[:, None] * w[None, :]
        total += float(np.sum(density(u, gu, r, ids) * wq * r))
    return total


def electrostatic_energy(s: FieldSolution, region: str | None = None) -> float:
    """W = 1/2 \\int eps |grad phi|^2 dV (J)."""
    if s.physics is not Physics.ELECTROSTATIC:
        raise QuantityError("electrostatic energy needs an electrostatic solution")
    eps = s.element_data.get("eps", np.full(s.mesh.n_tris, EPS0))
    return 0.5 * integrate(s, lambda u, g, r, ids: eps[ids][:, None] * np.sum(np.abs(g) ** 2, axis=-1), region)


def field_stress(s: FieldSolution, probe) -> float:
    """|E| = |grad phi| at ``probe`` (V/m)."""
    if s.physics is not Physics.ELECTROSTATIC:
        raise QuantityError("field stress needs an electrostatic solution")
    return float(evaluate(s, probe).derived["|E|"])


def eddy_loss(s: FieldSolution, region: str | None = None) -> float:
    """P = mirror * \\int sigma omega^2 |A|^2 dV (W, rms phasors)."""
    if not s.physics.has_magnetic:
        raise QuantityError("eddy loss needs a harmonic magnetic solution")
    sigma = s.element_data["sigma"]
    w2 = s.omega**2
    return s.mirror * integrate(s, lambda u, g, r, ids: sigma[ids][:, None] * w2 * np.abs(u) ** 2, region)


def complex_power_loss(sys: LinearSystem, x: np.ndarray) -> float:
    """Loss from the complex power balance of the assembled system.

    With A x = b and K real symmetric, x^H b = x^H K x + j omega x^H M_sigma x,
    so the dissipated power is omega Im(x^H b) (times the mirror factor).
    """
    omega = TWO_PI * sys.frequency
    return sys.mirror * omega * float(np.imag(np.vdot(x, sys.full_rhs)))


# --------------------------------------------------------------------------
# skin depth


@dataclass(frozen=True)
class SkinDepthInput:
    rho: float  # resistivity, ohm m
    omega: float  # rad/s
    mu: float  # H/m
    eps: float = EPS0  # F/m

    def __post_init__(self):
        for k in ("rho", "omega", "mu", "eps"):
            v = getattr(self, k)
            if not (np.isfinite(v) and v > 0):
                raise QuantityError(f"{k} must be positive, got {v!r}")


def skin_depth_full(inp: SkinDepthInput) -> float:
    """delta = sqrt(2 rho / omega mu) sqrt(sqrt(1 + (rho omega eps)^2) + rho omega eps)."""
    x = inp.rho * inp.omega * inp.eps
    return math.sqrt(2.0 * inp.rho / (inp.omega * inp.mu)) * math.sqrt(math.hypot(1.0, x) + x)


def skin_depth(rho: float, omega: float, mu: float) -> float:
    """Good-conductor limit delta = sqrt(2 rho / omega mu)."""
    for k, v in (("rho", rho), ("omega", omega), ("mu", mu)):
        if not (np.isfinite(v) and v > 0):
            raise QuantityError(f"{k} must be positive, got {v!r}")
    return math.sqrt(2.0 * rho / (omega * mu))


@dataclass(frozen=True)
class ConductorData:
    """Linear resistivity model rho(T) = rho_ref (1 + alpha (T - T_ref))."""

    name: str
    sigma_ref: float  # S/m at T_ref
    alpha: float  # 1/K
    T_ref: float = 20.0
    mu_r: float = 1.0

    def sigma(self, T: float) -> float:
        return self.sigma_ref / (1.0 + self.alpha * (T - self.T_ref))


# handbook room-temperature values
CONDUCTORS = {
    "aluminium": ConductorData("aluminium", 30.6327e6, 0.0039),
    "copper": ConductorData("copper", 58.0e6, 0.00393),
    "steel": ConductorData("steel", 7.0e6, 0.003, mu_r=100.0),
}
CONDUCTORS["aluminum"] = CONDUCTORS["aluminium"]


def conductor(name: str) -> ConductorData:
    try:
        return CONDUCTORS[name.lower()]
    except KeyError:
        raise QuantityError(f"unknown material {name!r}; known: {', '.join(sorted(CONDUCTORS))}") from None


def skin_depth_curve(material, f: float, T_range=None, mu_r_list=None) -> list[tuple[float, float]]:
    """(T, delta) rows for a temperature sweep, or (mu_r, delta) rows for a permeability sweep.

    ``material`` is a name or ConductorData. Exactly one of ``T_range`` and
    ``mu_r_list`` is used; the temperature sweep keeps the material's mu_r and
    the permeability sweep uses sigma at T_ref.
    """
    mat = conductor(material) if isinstance(material, str) else material
    omega = TWO_PI * f
    if mu_r_list is not None:
        vals = [float(v) for v in mu_r_list]
        if not vals:
            raise QuantityError("empty permeability sweep")
        return [(v, skin_depth(1.0 / mat.sigma_ref, omega, MU0 * v)) for v in vals]
    vals = [float(v) for v in (T_range if T_range is not None else [])]
    if not vals:
        raise QuantityError("empty temperature sweep")
    rows = []
    for T in vals:
        sig = mat.sigma(T)
        if not sig > 0:
            raise QuantityError(f"conductivity model invalid at {T} C")
        rows.append((T, skin_depth(1.0 / sig, omega, MU0 * mat.mu_r)))
    return rows


# --------------------------------------------------------------------------
# Kelvin-function cylinder oracle

MIN_TERMS = 30
MAX_RATIO = 50.0


def _kelvin_series(x, nterms: int):
    """ber, bei and their derivatives at x by the power series with ``nterms`` terms."""
    h = x / 2
    h4 = h**4
    ber = bei = dber = dbei = mpmath.mpf(0)
    a = mpmath.mpf(1)  # (x/2)^(4k) / ((2k)!)^2 with sign
    for k in range(nterms):
        b = a * h * h / ((2 * k + 1) ** 2)  # (x/2)^(4k+2) / ((2k+1)!)^2
        ber += a
        bei += b
        dber += a * 4 * k / x if k else 0
        dbei += b * (4 * k + 2) / x
        a = -a * h4 / (((2 * k + 1) * (2 * k + 2)) ** 2)
    return ber, bei, dber, dbei


def kelvin(x: float, nterms: int | None = None):
    """(ber, bei, ber', bei') at x, with a doubled-term convergence check."""
    x = mpmath.mpf(x)
    with mpmath.workdps(30 + int(float(x))):
        n = max(MIN_TERMS, int(float(x)) + 20) if nterms is None else nterms
        first = _kelvin_series(x, n)
        second = _kelvin_series(x, 2 * n)
        scale = max(abs(v) for v in second)
        for u, v in zip(first, second):
            if abs(u - v) > mpmath.mpf(1e-12) * scale:
                raise QuantityError(f"Kelvin series did not converge at x = {float(x):g}")
        return tuple(float(v) for v in second)


def analytic_cylinder_loss(R: float, sigma: float, mu: float, f: float, B_rms: float) -> float:
    """Eddy loss per unit length (W/m) of an infinite solid cylinder in a uniform axial field.

    ``B_rms`` is the applied rms flux density outside the cylinder (H0 = B_rms / mu0).
    With X = sqrt(2) R / delta and F = ber + j bei::

        P' = (2 pi R / sigma) H0^2 (sqrt 2 / delta) Re(F'(X) conj F(X)) / |F(X)|^2
    """
    for k, v in (("R", R), ("mu", mu), ("f", f)):
        if not v > 0:
            raise QuantityError(f"{k} must be positive")
    if sigma < 0 or B_rms < 0:
        raise QuantityError("conductivity and flux density must be non-negative")
    if sigma == 0 or B_rms == 0:
        return 0.0
    delta = skin_depth(1.0 / sigma, TWO_PI * f, mu)
    if R / delta > MAX_RATIO:
        raise QuantityError(f"R/delta = {R / delta:.3g} > {MAX_RATIO:g}: use the asymptotic (thin skin) formula")
    X = math.sqrt(2.0) * R / delta
    ber, bei, dber, dbei = kelvin(X)
    F, dF = complex(ber, bei), complex(dber, dbei)
    H0 = B_rms / MU0
    return TWO_PI * R / sigma * H0**2 * (math.sqrt(2.0) / delta) * (dF * F.conjugate()).real / abs(F) ** 2


def low_frequency_cylinder_loss(R: float, sigma: float, f: float, B_rms: float) -> float:
    """Limit pi sigma omega^2 B^2 R^4 / 8 for R << delta."""
    return math.pi * sigma * (TWO_PI * f) ** 2 * B_rms**2 * R**4 / 8.0


# --------------------------------------------------------------------------
# reference extrapolation


def extrapolate_reference(values) -> float:
    """Aitken delta-squared on the last three entries."""
    v = [float(x) for x in values]
    if len(v) < 3:
        raise QuantityError("extrapolation needs at least three values")
    x0, x1, x2 = v[-3:]
    denom = x2 - 2.0 * x1 + x0
    if abs(denom) < 1e-300:
        return x2
    return x2 - (x2 - x1) ** 2 / denom

"""Superconducting flux loop: inductance, applied flux, fluxoid branches, two-level dynamics."""
from __future__ import annotations

from dataclasses import dataclass
import cmath
import math

import numpy as np

from .constants import HBAR, MU_0, PHI_0
from .errors import SimulationError
from .magnetostatics import ChipGeometry, CurrentLoop


class QuadratureError(SimulationError):
    pass


def self_inductance(R: float, a: float) -> float:
    """Thin circular ring of radius ``R`` and wire radius ``a``: mu0 R (ln(8R/a) - 2)."""
    if not (0.0 < a < R / 2.0):
        raise ValueError(f"thin-wire assumption violated: need 0 < a < R/2, got a={a}, R={R}")
    return MU_0 * R * (math.log(8.0 * R / a) - 2.0)


def half_flux_bias(R: float) -> float:
    """Uniform normal field that threads exactly Phi_0/2 through a loop of radius ``R``."""
    return PHI_0 / (2.0 * math.pi * R * R)


def _same_loop(a: CurrentLoop, b: CurrentLoop) -> bool:
    return a.center == b.center and a.radius == b.radius and a.normal == b.normal


def _other_sources(g: ChipGeometry, loop: CurrentLoop) -> ChipGeometry:
    return ChipGeometry(g.segments, tuple(lp for lp in g.loops if not _same_loop(lp, loop)), g.bias)


def _disc_basis(n):
    n = np.asarray(n)
    trial = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - (trial @ n) * n
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(n, e1)


def external_flux(loop: CurrentLoop, g: ChipGeometry, rtol: float = 1e-6,
                  max_nodes: int = 1 << 20) -> float:
    """Flux (Wb) of every source in ``g`` other than ``loop`` through the loop disc.

    The uniform bias contributes B.n pi R^2 in closed form.  Filament sources
    are integrated with Gauss-Legendre nodes in radius and equispaced nodes
    in angle (spectrally accurate for the periodic angular integrand),
    doubling both until successive estimates agree to ``rtol`` of the flux
    scale pi R^2 max|B_n|.
    """
    n = np.asarray(loop.normal)
    R = loop.radius
    flux = float(np.dot(g.bias, n)) * math.pi * R * R
    src = _other_sources(g, loop).with_bias((0.0, 0.0, 0.0))
    if not src.segments and not src.loops:
        return flux
    c = np.asarray(loop.center)
    e1, e2 = _disc_basis(n)
    nr, nt = 16, 32
    prev = None
    while nr * nt <= max_nodes:
        x, w = np.polynomial.legendre.leggauss(nr)
        r = 0.5 * R * (x + 1.0)
        wr = 0.5 * R * w * r
        th = 2.0 * math.pi * np.arange(nt) / nt
        rr, tt = np.meshgrid(r, th, indexing="ij")
        pts = (c + rr[..., None] * (np.cos(tt)[..., None] * e1 + np.sin(tt)[..., None] * e2))
        Bn = src.field_many(pts.reshape(-1, 3)) @ n
        Bn = Bn.reshape(nr, nt)
        est = float(wr @ Bn.sum(axis=1)) * (2.0 * math.pi / nt)
        scale = math.pi * R * R * float(np.abs(Bn).max())
        if prev is not None and abs(est - prev) <= rtol * max(scale, abs(est)):
            return flux + est
        prev = est
        nr, nt = 2 * nr, 2 * nt
    raise QuadratureError(f"loop flux quadrature not converged to rtol={rtol}")


@dataclass(frozen=True)
class FluxLoopState:
    loop: CurrentLoop             # geometry only; the current field is ignored
    wire_radius: float
    self_inductance: float
    external_flux: float
    branch_n0: int = 0
    branch_n1: int = 1
    I_branch0: float = 0.0
    I_branch1: float = 0.0

    @property
    def branch_currents(self) -> tuple[float, float]:
        return self.I_branch0, self.I_branch1

    def branch_loops(self) -> tuple[CurrentLoop, CurrentLoop]:
        return self.loop.with_current(self.I_branch0), self.loop.with_current(self.I_branch1)


def persistent_current(fls: FluxLoopState, n: int) -> float:
    """Current of fluxoid branch ``n``: (n Phi_0 - Phi_ext) / L."""
    return (n * PHI_0 - fls.external_flux) / fls.self_inductance


def flux_state(loop: CurrentLoop, g: ChipGeometry, wire_radius: float = 5e-7,
               n0: int = 0, n1: int = 1) -> FluxLoopState:
    """Evaluate inductance, applied flux and both branch currents for ``loop`` in ``g``."""
    L = self_inductance(loop.radius, wire_radius)
    phi = external_flux(loop, g)
    geom = loop.with_current(0.0)
    proto = FluxLoopState(geom, wire_radius, L, phi, n0, n1)
    return FluxLoopState(geom, wire_radius, L, phi, n0, n1,
                         persistent_current(proto, n0), persistent_current(proto, n1))


NORM_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class QubitState:
    """Amplitudes on |0> (left well, one circulation) and |1> (right well)."""

    c0: complex
    c1: complex
    E0: float = 0.0
    J_tunnel: float = 0.0

    def __post_init__(self):
        if abs(self.norm2 - 1.0) > NORM_TOL:
            raise ValueError(f"qubit amplitudes must be normalised, |c0|^2 + |c1|^2 = {self.norm2!r}")

    @property
    def populations(self) -> tuple[float, float]:
        return abs(self.c0) ** 2, abs(self.c1) ** 2

    @property
    def norm2(self) -> float:
        return abs(self.c0) ** 2 + abs(self.c1) ** 2


def qubit_evolve(q: QubitState, dt: float) -> QubitState:
    """Apply exp(-i H dt / hbar) with H = E0 (|0><0| + |1><1|) + J (|0><1| + |1><0|)."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    th = q.J_tunnel * dt / HBAR
    c, s = math.cos(th), math.sin(th)
    ph = cmath.exp(-1j * q.E0 * dt / HBAR)
    c0 = ph * (c * q.c0 - 1j * s * q.c1)
    c1 = ph * (c * q.c1 - 1j * s * q.c0)
    # the map is unitary and states are normalised; rescale to unit norm so
    # product rounding, correlated from step to step at fixed dt, cannot accumulate
    k = 1.0 / math.sqrt(abs(c0) ** 2 + abs(c1) ** 2)
    c0, c1 = c0 * k, c1 * k
    return QubitState(c0, c1, q.E0, q.J_tunnel)


def prepare_symmetric_superposition(E0: float = 0.0) -> QubitState:
    """(|0> + |1>)/sqrt(2) with the tunnelling switched off afterwards."""
    a = 1.0 / math.sqrt(2.0)
    return QubitState(complex(a), complex(a), E0, 0.0)


@dataclass(frozen=True)
class CriticalFieldReport:
    max_field: float
    B_crit: float
    n_samples: int
    passed: bool


def critical_field_check(g: ChipGeometry, loop: CurrentLoop, B_crit: float = 1e-2,
                         n_samples: int = 360) -> CriticalFieldReport:
    """Largest |B| of the other sources along the loop filament, compared with ``B_crit``."""
    if not B_crit > 0:
        raise ValueError("critical field must be positive")
    e1, e2 = _disc_basis(loop.normal)
    th = 2.0 * math.pi * np.arange(n_samples) / n_samples
    pts = np.asarray(loop.center) + loop.radius * (
        np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2)
    bmax = float(_other_sources(g, loop).field_magnitude(pts).max())
    return CriticalFieldReport(bmax, B_crit, n_samples, bmax < B_crit)

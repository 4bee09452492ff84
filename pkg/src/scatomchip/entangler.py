"""Adiabatic transport of the trap toward the loop and accumulation of the entangling phase.

The joint state after transport is

    (|0>|N>_0 + exp(i Phi) |1>|N>_1) / sqrt(2)

up to a global phase, with Phi = N * integral (mu0 - mu1) dt / hbar.  The
condensate occupations are carried as the integer N; the geometric phases
of the two branches are taken as zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import math
import warnings

import numpy as np
from scipy.interpolate import PchipInterpolator

from .condensate import CondensateSpec, branch_chemical_potential
from .constants import HBAR, PHI_0
from .errors import SimulationError
from .fluxloop import FluxLoopState, QubitState, prepare_symmetric_superposition, qubit_evolve
from .magnetostatics import ChipGeometry, infinite_wire_height
from .trap import AtomSpecies, ConvergenceError, NotATrapError, find_minimum, trap_frequencies


class ProtocolError(SimulationError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"ramp step {step}: {message}")
        self.step = step


class AdiabaticityWarning(UserWarning):
    pass


SHAPES = ("linear", "smoothstep")


@dataclass(frozen=True)
class RampSchedule:
    """Trap-loop separation ramp; ``steps`` counts sample points including both ends."""

    duration: float = 0.1
    steps: int = 512
    start_separation: float = 1e-4
    end_separation: float = 1e-5
    shape: str = "smoothstep"

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("ramp duration must be positive")
        if self.steps < 2:
            raise ValueError("ramp needs at least 2 steps")
        if self.shape not in SHAPES:
            raise ValueError(f"ramp shape must be one of {SHAPES}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.duration, self.steps)

    def progress(self, u):
        u = np.clip(u, 0.0, 1.0)
        if self.shape == "linear":
            return u
        return u * u * (3.0 - 2.0 * u)

    def separation(self, t):
        return self.start_separation + (self.end_separation - self.start_separation) * \
            self.progress(np.asarray(t) / self.duration)


@dataclass(frozen=True)
class EntangledSystemState:
    N: int
    qubit: QubitState
    Phi: float
    mu_trace: tuple                     # ((t, mu0, mu1), ...) in s, J, J
    gamma0: float = 0.0
    gamma1: float = 0.0
    lost_atom: bool = False
    phase_noise_sigma: float = 0.0
    separations: tuple = ()
    phi_trace: tuple = ()
    margin_trace: tuple = ()
    adiabatic_margin: float = 0.0
    traps0: tuple = field(default=(), repr=False)
    traps1: tuple = field(default=(), repr=False)
    warnings: tuple = ()

    @property
    def mixed(self) -> bool:
        return self.lost_atom


def integrate_phase(times, mu0, mu1, N: int) -> np.ndarray:
    """Running N * integral (mu0 - mu1)/hbar dt by the composite trapezoid rule."""
    t = np.asarray(times, dtype=float)
    d = (np.asarray(mu0, dtype=float) - np.asarray(mu1, dtype=float)) / HBAR
    out = np.zeros_like(t)
    out[1:] = np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(t))
    return N * out


def _margin_series(ramp: RampSchedule, traps) -> np.ndarray:
    w = np.array([min(c.frequencies) for c in traps])
    # the ramp grid is uniform; a scalar spacing keeps a constant trace exactly flat
    return np.abs(np.gradient(w, ramp.duration / (ramp.steps - 1))) / w ** 2


def adiabaticity_margin(ramp: RampSchedule, trap_trace) -> float:
    """max |d w_min/dt| / w_min^2 over the ramp; below ~0.1 counts as adiabatic."""
    if len(trap_trace) != ramp.steps:
        raise ValueError("trap trace must have one entry per ramp step")
    return float(_margin_series(ramp, trap_trace).max())


@dataclass(frozen=True)
class TransportMap:
    """Inverse table trap height -> y-bias for the unperturbed chip."""

    heights: np.ndarray
    bias_y: np.ndarray

    def __call__(self, height):
        return PchipInterpolator(self.heights, self.bias_y)(height)

    def covers(self, height) -> bool:
        return self.heights[0] <= height <= self.heights[-1]


def transport_map(g: ChipGeometry, atom: AtomSpecies, h_lo: float, h_hi: float,
                  n: int = 33) -> TransportMap:
    """Tabulate the unperturbed trap height for y-biases spanning [h_lo, h_hi]."""
    bx, by, bz = g.bias
    if by == 0.0 or not g.segments:
        raise ProtocolError("transport needs wire segments and a nonzero y-bias", 0)
    bar = max(g.segments, key=lambda s: abs(s.end[0] - s.start[0]))
    c = find_minimum(g, atom, (0.0, 0.0, infinite_wire_height(bar.current, by)))
    h0 = c.minimum[2]
    # trap height scales roughly as 1/B_y
    lo = by * h0 / max(h_hi, 1e-9) * 0.97
    hi = by * h0 / max(h_lo, 1e-9) * 1.03
    grid = np.geomspace(lo, hi, n) if lo > 0 else -np.geomspace(-lo, -hi, n)
    heights, biases = [], []
    guess = (c.minimum[0], c.minimum[1], h_hi)
    for b in grid:
        try:
            m = find_minimum(g.with_bias((bx, b, bz)), atom, guess)
        except (ConvergenceError, NotATrapError):
            continue
        heights.append(m.minimum[2])
        biases.append(b)
        guess = m.minimum
    order = np.argsort(heights)
    return TransportMap(np.asarray(heights)[order], np.asarray(biases)[order])


def run_protocol(g: ChipGeometry, fls: FluxLoopState, spec: CondensateSpec,
                 ramp: RampSchedule, qubit: QubitState | None = None,
                 adiabatic_threshold: float = 0.1
                 ) -> EntangledSystemState:
    """Carry the trap from the start to the end separation and integrate the branch phase.

    The loop stays fixed; the trap height is set by the y-bias, looked up from
    a precomputed height -> bias table.  ``fls.external_flux`` is the flux at
    the bias of ``g``; any change of the applied flux along the ramp is added
    to it and the branch currents are recomputed with fixed fluxoid numbers.

    The phase integrates tiny differences of nearly equal chemical
    potentials, so trap minima and curvatures come from the source-scaled
    field derivatives of the trap module, whose round-off is far below that
    of a uniform micrometre stencil on |B|.
    """
    atom = spec.atom
    qubit = prepare_symmetric_superposition() if qubit is None else qubit
    n_hat = np.asarray(fls.loop.normal)
    area = math.pi * fls.loop.radius ** 2
    z_loop = fls.loop.center[2]
    times = ramp.times
    seps = ramp.separation(times)
    targets = z_loop + seps
    for k, h in enumerate(targets):
        if h <= 0.0:
            raise ProtocolError(f"target trap height {h:.3g} m lies below the chip surface", k)
    tmap = transport_map(g, atom, float(targets.min()), float(targets.max()))
    if len(tmap.heights) < 4:
        raise ProtocolError("no trap found over the requested separation range", 0)

    flux_ref = float(np.dot(g.bias, n_hat)) * area
    bx, _, bz = g.bias
    traps0, traps1, mu0, mu1 = [], [], [], []
    notes = []
    prev = None
    for k, (t, h) in enumerate(zip(times, targets)):
        if not tmap.covers(h):
            raise ProtocolError(
                f"separation {seps[k]:.3g} m outside the achievable range "
                f"[{tmap.heights[0] - z_loop:.3g}, {tmap.heights[-1] - z_loop:.3g}] m", k)
        gk = g.with_bias((bx, float(tmap(h)), bz))
        phi_ext = fls.external_flux + float(np.dot(gk.bias, n_hat)) * area - flux_ref
        currents = ((fls.branch_n0 * PHI_0 - phi_ext) / fls.self_inductance,
                    (fls.branch_n1 * PHI_0 - phi_ext) / fls.self_inductance)
        branch = []
        for label, current in enumerate(currents):
            geom = gk.with_loops(fls.loop.with_current(current))
            if prev is None:
                start, warm = (fls.loop.center[0], fls.loop.center[1], h), False
            else:
                q = prev[label].minimum
                start, warm = (q[0], q[1], q[2] + h - targets[k - 1]), True
            try:
                c = find_minimum(geom, atom, start, polish_only=warm)
                branch.append(trap_frequencies(geom, atom, c))
            except (NotATrapError, ConvergenceError) as err:
                raise ProtocolError(f"branch {label}: trap lost ({err})", k) from err
        prev = branch
        traps0.append(branch[0])
        traps1.append(branch[1])
        mu0.append(branch_chemical_potential(branch[0], spec))
        mu1.append(branch_chemical_potential(branch[1], spec))
        if k == 0 and abs(mu0[0] - mu1[0]) >= 1e-3 * abs(mu0[0]):
            msg = "initial separation too small: branch energies already differ by > 1e-3"
            notes.append(msg)
            warnings.warn(msg, AdiabaticityWarning, stacklevel=2)

    phi = integrate_phase(times, mu0, mu1, spec.N)
    margins = np.maximum(_margin_series(ramp, traps0), _margin_series(ramp, traps1))
    margin = float(margins.max())
    if margin >= adiabatic_threshold:
        msg = (f"adiabaticity margin {margin:.3g} exceeds {adiabatic_threshold}: "
               "transport may excite the condensate")
        notes.append(msg)
        warnings.warn(msg, AdiabaticityWarning, stacklevel=2)

    dt = np.diff(times)
    for step in dt:
        qubit = qubit_evolve(qubit, float(step))
    return EntangledSystemState(
        N=spec.N, qubit=qubit, Phi=float(phi[-1]),
        mu_trace=tuple(zip(map(float, times), mu0, mu1)),
        separations=tuple(map(float, seps)), phi_trace=tuple(map(float, phi)),
        margin_trace=tuple(map(float, margins)), adiabatic_margin=margin,
        traps0=tuple(traps0), traps1=tuple(traps1), warnings=tuple(notes),
    )


def apply_phase_noise(s: EntangledSystemState, sigma: float) -> EntangledSystemState:
    """Record shot-to-shot Gaussian jitter of Phi (rad); sampling draws from it per shot."""
    if sigma < 0:
        raise ValueError("phase noise sigma must be non-negative")
    return replace(s, phase_noise_sigma=float(sigma))


def apply_atom_loss(s: EntangledSystemState) -> EntangledSystemState:
    """Lose one atom: the remaining N-1 atoms are left in the incoherent branch mixture."""
    if s.N < 2:
        raise ValueError("atom loss needs N >= 2")
    return replace(s, N=s.N - 1, lost_atom=True)


def stability_bound(N: int) -> float:
    """Largest shot-to-shot wander of Phi, pi/(2N), still counting as stable preparation."""
    return math.pi / (2.0 * N)

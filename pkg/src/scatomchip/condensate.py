"""Thomas-Fermi energetics of the condensate in the unperturbed and loop-perturbed traps."""
from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .constants import HBAR
from .fluxloop import FluxLoopState
from .magnetostatics import ChipGeometry
from .trap import (RB87, AtomSpecies, ConvergenceError, NotATrapError, TrapCharacterization,
                   find_minimum, trap_frequencies)


class ThomasFermiValidityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CondensateSpec:
    atom: AtomSpecies = RB87
    N: int = 1000

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("atom number N must be a positive integer")


@dataclass(frozen=True)
class BranchEnergetics:
    mu0: float          # J, trap-bottom Zeeman energy plus Thomas-Fermi chemical potential
    mu1: float
    mu0_field: float    # T, mu0 / (mF gF muB)
    mu1_field: float
    trap0: TrapCharacterization
    trap1: TrapCharacterization

    @property
    def minima_separation(self) -> float:
        return float(np.linalg.norm(np.subtract(self.trap0.minimum, self.trap1.minimum)))


def _check_freqs(freqs):
    f = np.asarray(freqs, dtype=float)
    if f.shape != (3,) or not np.all(f > 0):
        raise ValueError(f"trap frequencies must be three positive values, got {freqs!r}")
    return f


def thomas_fermi_mu(spec: CondensateSpec, freqs) -> float:
    """Chemical potential (J) of N atoms in a harmonic trap, Thomas-Fermi limit.

    mu = (hbar w / 2) (15 N a_s / a_ho)^(2/5) with w the geometric-mean
    frequency and a_ho = sqrt(hbar / (m w)).  Validity at small N is not
    enforced; a warning is issued below 100 atoms.
    """
    f = _check_freqs(freqs)
    if spec.N < 100:
        warnings.warn(f"Thomas-Fermi approximation is poor for N={spec.N} < 100",
                      ThomasFermiValidityWarning, stacklevel=2)
    wbar = float(np.prod(f)) ** (1.0 / 3.0)
    a_ho = math.sqrt(HBAR / (spec.atom.mass * wbar))
    return 0.5 * HBAR * wbar * (15.0 * spec.N * spec.atom.scattering_length / a_ho) ** 0.4


def ground_width(freqs, atom: AtomSpecies = RB87) -> tuple:
    """Harmonic-oscillator ground-state widths sqrt(hbar/(m w)) per axis, same order as input."""
    f = _check_freqs(freqs)
    return tuple(float(x) for x in np.sqrt(HBAR / (atom.mass * f)))


def branch_chemical_potential(trap: TrapCharacterization, spec: CondensateSpec) -> float:
    return spec.atom.moment * trap.B_min + thomas_fermi_mu(spec, trap.frequencies)


def branch_energetics(g_base: ChipGeometry, fls: FluxLoopState, spec: CondensateSpec,
                      guess=None, *, polish_only: bool = False,
                      guesses=None) -> BranchEnergetics:
    """Trap and chemical potential for each persistent-current branch of the loop.

    ``guess`` seeds both minimum searches (default: the unperturbed trap
    minimum, searched from the loop centre); ``guesses`` seeds them
    separately.
    """
    atom = spec.atom
    if guesses is None:
        if guess is None:
            guess = find_minimum(g_base, atom, fls.loop.center).minimum
        guesses = (guess, guess)
    traps = []
    for label, loop, start in zip((0, 1), fls.branch_loops(), guesses):
        g = g_base.with_loops(loop)
        try:
            c = find_minimum(g, atom, start, polish_only=polish_only)
            traps.append(trap_frequencies(g, atom, c))
        except (NotATrapError, ConvergenceError) as err:
            raise type(err)(f"branch {label}: {err}") from err
    mu = [branch_chemical_potential(t, spec) for t in traps]
    return BranchEnergetics(mu[0], mu[1], mu[0] / atom.moment, mu[1] / atom.moment, *traps)

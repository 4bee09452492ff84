"""Magnetic microtrap characterisation: Zeeman potential, minimum, frequencies, profiles."""
from __future__ import annotations

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy.optimize import minimize

from .constants import MU_B, RB87_MASS, RB87_SCATTERING_LENGTH
from .errors import SimulationError
from .magnetostatics import ChipGeometry, CurrentLoop, SingularPointError, vec3


class NotATrapError(SimulationError):
    """The stationary point is a saddle, or there is no trap-bottom field."""


class ConvergenceError(SimulationError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class AtomSpecies:
    mass: float
    gF: float
    mF: int
    scattering_length: float
    label: str = ""

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("atom mass must be positive")
        if not self.gF * self.mF > 0:
            raise ValueError("gF*mF must be positive (weak-field seeker) to be trapped")

    @property
    def moment(self) -> float:
        """Magnetic moment mF*gF*muB in J/T."""
        return self.mF * self.gF * MU_B


RB87 = AtomSpecies(RB87_MASS, 0.5, 2, RB87_SCATTERING_LENGTH, "87Rb |F=2, mF=2>")

SPECIES = {"rb87": RB87}


@dataclass(frozen=True)
class TrapCharacterization:
    minimum: tuple
    B_min: float
    frequencies: tuple | None = None    # rad/s, ascending
    principal_axes: np.ndarray | None = None  # columns are the eigenvectors
    converged: bool = False
    gradient_norm: float = math.nan     # T/m at the reported minimum
    iterations: int = 0

    @property
    def omega_bar(self) -> float:
        return float(np.prod(self.frequencies) ** (1.0 / 3.0))


@dataclass(frozen=True)
class AxialProfile:
    positions: np.ndarray
    B_unperturbed: np.ndarray
    B_branch0: np.ndarray
    B_branch1: np.ndarray


def zeeman_potential(B, atom: AtomSpecies = RB87) -> float:
    """Potential energy mF*gF*muB*|B| in joule; ``B`` is a vector or a magnitude."""
    b = np.asarray(B, dtype=float)
    mag = float(np.linalg.norm(b)) if b.ndim else abs(float(b))
    return atom.moment * mag


_E = np.eye(3)


def _tup(p):
    return tuple(float(x) for x in p)


def _stencil(h: float) -> np.ndarray:
    """Centre, the six axial neighbours and the twelve diagonal ones."""
    pts = [np.zeros(3)]
    for i in range(3):
        pts += [h * _E[i], -h * _E[i]]
    for i in range(3):
        for j in range(i + 1, 3):
            pts += [h * (_E[i] + _E[j]), h * (_E[i] - _E[j]),
                    -h * (_E[i] - _E[j]), -h * (_E[i] + _E[j])]
    return np.array(pts)


def _differences(f: np.ndarray, h: float):
    """First and second central differences of values ``f`` on ``_stencil(h)``.

    ``f`` has shape (19,) or (19, 3); derivative axes are appended last.
    """
    f0 = f[0]
    d1 = np.empty(f0.shape + (3,))
    d2 = np.empty(f0.shape + (3, 3))
    for i in range(3):
        fp, fm = f[1 + 2 * i], f[2 + 2 * i]
        d1[..., i] = (fp - fm) / (2.0 * h)
        d2[..., i, i] = (fp - 2.0 * f0 + fm) / (h * h)
    k = 7
    for i in range(3):
        for j in range(i + 1, 3):
            fpp, fpm, fmp, fmm = f[k:k + 4]
            d2[..., i, j] = d2[..., j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h * h)
            k += 4
    return f0, d1, d2


def _gradient_hessian(g: ChipGeometry, p: np.ndarray, h: float):
    """Central-difference gradient and Hessian of |B| with one uniform step."""
    return _differences(g.field_magnitude(p + _stencil(h)), h)


#: finite-difference step as a fraction of the distance to the nearest filament
REL_STEP = 0.02


def _segment_distance(seg, p) -> float:
    a, b = np.asarray(seg.start), np.asarray(seg.end)
    u = b - a
    t = min(1.0, max(0.0, float((p - a) @ u) / float(u @ u)))
    return float(np.linalg.norm(p - a - t * u))


def _loop_distance(loop: CurrentLoop, p) -> float:
    v = p - np.asarray(loop.center)
    z = float(v @ np.asarray(loop.normal))
    rho = float(np.linalg.norm(v - z * np.asarray(loop.normal)))
    return math.hypot(rho - loop.radius, z)


def _field_derivatives(g: ChipGeometry, p: np.ndarray, rel_step: float = REL_STEP):
    """B, its Jacobian J[k, i] = dB_k/dx_i and second derivatives T[k, i, j] at ``p``.

    Wires and loops are differenced separately, each with a step proportional
    to its distance from ``p``.  The millitesla wire field is smooth on the
    scale of the trap height, so it takes a wide stencil, while only the weak
    loop field is differenced on the micrometre scale.  Each group uses a
    fourth-order Richardson combination of steps h and 2h.
    """
    B = g.field(p)
    J = np.zeros((3, 3))
    T = np.zeros((3, 3, 3))
    groups = ((ChipGeometry(g.segments), [_segment_distance(s, p) for s in g.segments]),
              (ChipGeometry((), g.loops), [_loop_distance(lp, p) for lp in g.loops]))
    for src, dist in groups:
        if not dist:
            continue
        h = rel_step * min(dist)
        base = _stencil(1.0)
        F = src.field_many(np.concatenate([p + h * base, p + 2.0 * h * base]))
        _, J1, T1 = _differences(F[:19], h)
        _, J2, T2 = _differences(F[19:], 2.0 * h)
        J += (4.0 * J1 - J2) / 3.0
        T += (4.0 * T1 - T2) / 3.0
    return B, J, T


def _magnitude_derivatives(g: ChipGeometry, p: np.ndarray, rel_step: float = REL_STEP):
    """|B|, its gradient and Hessian at ``p`` from the vector-field derivatives."""
    B, J, T = _field_derivatives(g, p, rel_step)
    b = float(np.linalg.norm(B))
    grad = B @ J / b
    H = (J.T @ J + np.einsum("k,kij->ij", B, T)) / b - np.outer(grad, grad) / b
    return b, grad, H


def _newton_polish(g, p, rel_step, tol, max_iter):
    """Damped Newton on |B|; returns (point, |B|, gradient norm, iterations) or None."""
    for it in range(1, max_iter + 1):
        f0, grad, H = _magnitude_derivatives(g, p, rel_step)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol:
            return p, f0, gnorm, it
        try:
            w = np.linalg.eigvalsh(H)
            if w[0] <= 0:
                return None
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            return None
        # near the minimum the predicted decrease drops below the round-off of |B|
        slack = 1e-14 * f0
        lam = 1.0
        while lam > 1e-6:
            q = p - lam * step
            if g.field_magnitude(q)[0] <= f0 + slack:
                break
            lam *= 0.5
        else:
            return p, f0, gnorm, it
        p = q
    f0, grad, _ = _magnitude_derivatives(g, p, rel_step)
    return p, f0, float(np.linalg.norm(grad)), max_iter


def find_minimum(g: ChipGeometry, atom: AtomSpecies = RB87, guess=(0.0, 0.0, 5e-4), *,
                 scale: float = 1e-5, rel_step: float = REL_STEP, tol: float = 1e-9,
                 max_iter: int = 10_000, polish_only: bool = False) -> TrapCharacterization:
    """Locate the local minimum of |B| nearest ``guess``.

    A Nelder-Mead descent (initial simplex size ``scale``) brings the point
    into the basin and a damped Newton iteration on finite differences
    polishes it until the gradient of |B| drops below ``tol`` T/m.  Derivatives
    come from ``_field_derivatives`` with steps ``rel_step`` times the source
    distance.  With
    ``polish_only`` the simplex stage is skipped unless Newton fails, which
    is the cheap path when ``guess`` is already close (warm starts).
    """
    p = vec3(guess)
    used = 0
    if polish_only:
        res = _newton_polish(g, p, rel_step, tol, 50)
        if res is not None and res[2] < tol:
            q, f0, gnorm, it = res
            return TrapCharacterization(_tup(q), float(f0), converged=True, gradient_norm=gnorm,
                                        iterations=it)

    def obj(x):
        try:
            return g.field_magnitude(x)[0] * 1e4
        except SingularPointError:
            return math.inf

    simplex = np.vstack([p, p + scale * _E])
    nm = minimize(obj, p, method="Nelder-Mead",
                  options=dict(initial_simplex=simplex, xatol=1e-10, fatol=1e-14,
                               maxiter=max_iter, maxfev=max_iter))
    used += nm.nit
    p = nm.x
    res = _newton_polish(g, p, rel_step, tol, max(10, min(100, max_iter - used)))
    if res is None:
        best = TrapCharacterization(_tup(p), float(nm.fun) * 1e-4, converged=False, iterations=used)
        raise ConvergenceError(
            f"minimum search near {_tup(vec3(guess))} did not reach a positive-definite "
            f"basin; best iterate {_tup(p)}", best)
    q, f0, gnorm, it = res
    used += it
    if gnorm >= tol:
        best = TrapCharacterization(_tup(q), float(f0), converged=False, gradient_norm=gnorm,
                                    iterations=used)
        raise ConvergenceError(
            f"gradient {gnorm:.3g} T/m above tolerance after {used} iterations; "
            f"best iterate {_tup(q)}", best)
    return TrapCharacterization(_tup(q), float(f0), converged=True, gradient_norm=gnorm,
                                iterations=used)


def potential_hessian(g: ChipGeometry, atom: AtomSpecies, p, h: float | None = None,
                      order: int = 4) -> np.ndarray:
    """Hessian of the Zeeman potential, J/m^2.

    By default it is assembled from the field derivatives of
    ``_field_derivatives`` (steps scaled to the source distances).  An
    explicit ``h`` instead differences |B| directly with one uniform step;
    ``order=4`` then Richardson-combines the stencils at h and 2h.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    p = vec3(p)
    if h is None:
        return atom.moment * _magnitude_derivatives(g, p)[2]
    if not h > 0.0:
        raise ValueError("finite-difference step h must be positive")
    _, _, H = _gradient_hessian(g, p, h)
    if order == 4:
        _, _, H2 = _gradient_hessian(g, p, 2.0 * h)
        H = (4.0 * H - H2) / 3.0
    return atom.moment * H


def trap_frequencies(g: ChipGeometry, atom: AtomSpecies, c: TrapCharacterization,
                     h: float | None = None, order: int = 4) -> TrapCharacterization:
    if not c.B_min > 0.0:
        raise NotATrapError("zero trap-bottom field: no Ioffe field, not a harmonic trap")
    H = potential_hessian(g, atom, c.minimum, h, order)
    w, v = np.linalg.eigh(0.5 * (H + H.T))
    if w[0] <= 0.0:
        raise NotATrapError(f"Hessian eigenvalues {w} are not all positive (saddle point)")
    freqs = tuple(float(x) for x in np.sqrt(w / atom.mass))
    return replace(c, frequencies=freqs, principal_axes=v)


def characterize(g: ChipGeometry, atom: AtomSpecies = RB87, guess=(0.0, 0.0, 5e-4),
                 **kw) -> TrapCharacterization:
    """``find_minimum`` followed by ``trap_frequencies``."""
    return trap_frequencies(g, atom, find_minimum(g, atom, guess, **kw))


def axial_profile(g_base: ChipGeometry, loop_branches: tuple, origin, direction=(1.0, 0.0, 0.0),
                  half_width: float = 3e-5, n: int = 601) -> AxialProfile:
    """|B| along a line for no loop and for each of the two loop branches.

    Positions are signed offsets (m) from ``origin`` along ``direction``.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    origin = vec3(origin)
    u = vec3(direction)
    u = u / np.linalg.norm(u)
    s = np.linspace(-half_width, half_width, n)
    pts = origin + s[:, None] * u
    loop0, loop1 = loop_branches
    curves = []
    for geom in (g_base, g_base.with_loops(loop0), g_base.with_loops(loop1)):
        try:
            curves.append(geom.field_magnitude(pts))
        except SingularPointError as err:
            raise SingularPointError(err.kind, err.source_index, err.point_index,
                                     err.point) from None
    return AxialProfile(s, *curves)


def branch_loops(loop: CurrentLoop, currents) -> tuple[CurrentLoop, CurrentLoop]:
    return loop.with_current(currents[0]), loop.with_current(currents[1])

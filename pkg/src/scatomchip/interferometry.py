"""Time-of-flight interference of the two released condensate modes along the x axis.

Each mode is a freely expanding Gaussian
    psi_c(x, t) = (pi sigma0^2)^(-1/4) (sigma0^2/q)^(1/2) exp(-(x - c)^2 / (2 q)),
    q = sigma0^2 (1 + i tau),  tau = hbar t / (m sigma0^2),
so |psi|^2 has width sigma_t = sigma0 sqrt(1 + tau^2) and the relative phase of
modes at -d/2 and +d/2 winds with wavenumber k = tau d / sigma_t^2 = 2 pi / Lambda.

For the state (|N,0> + e^{i Phi}|0,N>)/sqrt(2) the centre of mass X = sum(x)/N
has the closed-form density
    f(X) = sqrt(N/pi)/sigma_t exp(-N X^2/sigma_t^2 - N d^2/(4 sigma_t^2))
           [cosh(N d X/sigma_t^2) + cos(N k X - Phi)] / (1 + s^N cos Phi)
with s = exp(-d^2/(4 sigma0^2)) the mode overlap; its fringes have period
Lambda/N.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .constants import HBAR
from .errors import SimulationError
from .trap import RB87, AtomSpecies

MAX_EXACT_N = 8
BINS_PER_PERIOD = 16


class ResolutionError(SimulationError):
    """Grid too coarse to resolve the expected fringes."""


class SamplerInefficiencyError(SimulationError):
    pass


@dataclass(frozen=True)
class ExpandedMode:
    center: float
    sigma0: float
    t: float
    atom: AtomSpecies = RB87

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if not self.t >= 0:
            raise ValueError("expansion time must be non-negative")

    @property
    def tau(self) -> float:
        return HBAR * self.t / (self.atom.mass * self.sigma0 ** 2)

    @property
    def complex_width(self) -> complex:
        """sqrt(q) in metres; q = sigma0^2 (1 + i tau) sets spreading and chirp."""
        return self.sigma0 * complex(1.0, self.tau) ** 0.5

    @property
    def sigma_t(self) -> float:
        return self.sigma0 * math.hypot(1.0, self.tau)

    def amplitude(self, x) -> np.ndarray:
        q = self.complex_width ** 2
        x = np.asarray(x, dtype=float)
        pref = (math.pi * self.sigma0 ** 2) ** -0.25 * np.sqrt(self.sigma0 ** 2 / q)
        return pref * np.exp(-(x - self.center) ** 2 / (2.0 * q))

    def density(self, x) -> np.ndarray:
        return np.abs(self.amplitude(x)) ** 2


def mode_pair(d: float, sigma0: float, t: float, atom: AtomSpecies = RB87):
    """Modes released from wells at -d/2 (branch 0) and +d/2 (branch 1)."""
    if not d > 0:
        raise ValueError("well separation d must be positive")
    return ExpandedMode(-0.5 * d, sigma0, t, atom), ExpandedMode(0.5 * d, sigma0, t, atom)


def fringe_period(t: float, atom: AtomSpecies, d: float, sigma0: float) -> float:
    """Single-particle fringe period Lambda = 2 pi hbar (t^2 + (m sigma0^2/hbar)^2) / (t m d)."""
    if not (t > 0 and d > 0 and sigma0 > 0):
        raise ValueError("t, d and sigma0 must all be positive")
    m = atom.mass
    return 2.0 * math.pi * HBAR * (t * t + (m * sigma0 ** 2 / HBAR) ** 2) / (t * m * d)


def _pair_params(modes):
    a, b = modes
    if (a.sigma0, a.t, a.atom) != (b.sigma0, b.t, b.atom):
        raise ValueError("modes must share sigma0, t and atom species")
    d = abs(b.center - a.center)
    if d == 0:
        raise ValueError("modes must be separated")
    mid = 0.5 * (a.center + b.center)
    st = a.sigma_t
    k = a.tau * d / st ** 2
    overlap = math.exp(-d * d / (4.0 * a.sigma0 ** 2))
    # the fringe term is written for the lower-x mode carrying no phase
    sign = 1.0 if b.center > a.center else -1.0
    return mid, d, st, sign * k, overlap


def _check_grid(grid, period):
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ResolutionError("grid must be a 1-D array of at least two points")
    step = float(np.max(np.abs(np.diff(x))))
    if step > period / 8.0:
        raise ResolutionError(
            f"grid spacing {step:.3g} m gives fewer than 8 points per fringe period {period:.3g} m")
    return x


def com_distribution(N: int, Phi: float, modes, grid, mixed: bool = False) -> np.ndarray:
    """Density (1/m) of the centre of mass of N atoms in (|N,0> + e^{i Phi}|0,N>)/sqrt(2).

    With ``mixed`` the state is the incoherent branch mixture and the fringe
    term is dropped.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    mid, d, st, k, s = _pair_params(modes)
    x = _check_grid(grid, 2.0 * math.pi / (abs(k) * N)) - mid
    u = N * d * x / st ** 2
    logenv = -N * x * x / st ** 2 - N * d * d / (4.0 * st ** 2)
    pref = math.sqrt(N / math.pi) / st
    # cosh(u) exp(logenv) is evaluated as a sum of two Gaussians to avoid overflow
    cosh_part = 0.5 * (np.exp(logenv + u) + np.exp(logenv - u))
    if mixed:
        return pref * cosh_part
    fringe = np.exp(logenv) * np.cos(N * k * x - Phi)
    return pref * (cosh_part + fringe) / (1.0 + s ** N * math.cos(Phi))


def two_condensate_reference(N: int, modes, grid, theta: float = 0.0) -> np.ndarray:
    """Single-atom density for two independent condensates with relative phase ``theta``.

    Each shot shows fringes of period Lambda at a random position; the
    result does not depend on N, which is accepted only for interface
    symmetry with ``com_distribution``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    return com_distribution(1, theta, modes, grid)


# ---------------------------------------------------------------- sampling

@dataclass(frozen=True)
class ShotRecord:
    index: int
    phi: float
    detected: bool
    positions: tuple

    @property
    def com(self) -> float:
        return float(np.mean(self.positions)) if self.positions else math.nan


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def total(self) -> float:
        return float(self.counts.sum())


@dataclass
class InterferenceRecord:
    """Monte-Carlo shot list; ``period_com`` and ``visibility`` are filled by ``extract_period``."""

    N: int
    Lambda: float
    shots: list
    seed: int
    modes: tuple
    Phi: float = 0.0
    sigma_phi: float = 0.0
    efficiency: float = 1.0
    mixed: bool = False
    reference: bool = False
    acceptance: float = 1.0
    period_com: float = math.nan
    visibility: float = math.nan
    visibility_se: float = math.nan
    histogram: Histogram | None = None
    periodogram: "Periodogram | None" = field(default=None, repr=False)

    @property
    def expected_period(self) -> float:
        return self.Lambda if self.reference else self.Lambda / self.N

    @property
    def retained(self) -> list:
        return [s for s in self.shots if s.detected]

    @property
    def com_values(self) -> np.ndarray:
        return np.array([s.com for s in self.shots if s.detected])

    @property
    def retained_fraction(self) -> float:
        return len(self.retained) / len(self.shots)


def shot_rng(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for one shot."""
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


_MAX_ATTEMPTS = 100_000


def _draw_atoms(rng, n, phi, mid, d, st, k, coherent):
    """Draw n positions from the N-atom branch superposition by rejection.

    Proposals come from the equal mixture of the two product states (each
    atom Normal(c, sigma_t^2/2)); since the cross term is bounded by that
    mixture the acceptance probability (1 + cos(k S - phi)/cosh(d S/sigma_t^2))/2
    with S = sum of offsets is exact and close to one half.
    """
    scale = st / math.sqrt(2.0)
    for attempt in range(1, _MAX_ATTEMPTS + 1):
        c = 0.5 * d if rng.random() < 0.5 else -0.5 * d
        x = rng.normal(c, scale, n)
        if not coherent:
            return x + mid, attempt
        S = float(x.sum())
        u = d * S / st ** 2
        ratio = 0.0 if abs(u) > 700.0 else math.cos(k * S - phi) / math.cosh(u)
        if rng.random() < 0.5 * (1.0 + ratio):
            return x + mid, attempt
    raise SamplerInefficiencyError(
        f"rejection acceptance below {1.0 / _MAX_ATTEMPTS:.0e}; use a smaller N or a shorter "
        "expansion time")


def _sample(N, Phi, modes, n_shots, seed, sigma_phi, efficiency, mixed, reference):
    if not 1 <= N <= MAX_EXACT_N:
        raise ValueError(f"exact joint sampling supports 1 <= N <= {MAX_EXACT_N}")
    if n_shots < 1:
        raise ValueError("n_shots must be at least 1")
    if not 0.0 < efficiency <= 1.0:
        raise ValueError("detection efficiency must lie in (0, 1]")
    if sigma_phi < 0:
        raise ValueError("sigma_phi must be non-negative")
    mid, d, st, k, _ = _pair_params(modes)
    shots, tries = [], 0
    for i in range(n_shots):
        rng = shot_rng(seed, i)
        if reference:
            phi = float(rng.uniform(0.0, 2.0 * math.pi))
            xs, used = zip(*(_draw_atoms(rng, 1, phi, mid, d, st, k, True) for _ in range(N)))
            x = np.concatenate(xs)
            tries += sum(used) / N
        else:
            phi = float(Phi + sigma_phi * rng.standard_normal()) if sigma_phi > 0 else float(Phi)
            x, used = _draw_atoms(rng, N, phi, mid, d, st, k, not mixed)
            tries += used
        detected = bool(efficiency >= 1.0 or np.all(rng.random(N) < efficiency))
        shots.append(ShotRecord(i, phi, detected, tuple(map(float, x)) if detected else ()))
    acc = n_shots / tries
    if acc < 1e-4:
        raise SamplerInefficiencyError(f"rejection acceptance {acc:.2g} below 1e-4")
    Lam = 2.0 * math.pi / abs(k)
    return InterferenceRecord(N, Lam, shots, seed, tuple(modes), float(Phi), float(sigma_phi),
                              float(efficiency), mixed, reference, acc)


def sample_shots(N: int, Phi: float, modes, n_shots: int, seed: int, sigma_phi: float = 0.0,
                 efficiency: float = 1.0, mixed: bool = False) -> InterferenceRecord:
    """Repeated release of the entangled state; only shots detecting all N atoms are retained.

    Per shot: Phi_shot ~ Normal(Phi, sigma_phi^2), N positions from the exact
    joint density, then independent detection of each atom with probability
    ``efficiency``.  Every shot has its own stream keyed by (seed, index), so
    results do not depend on evaluation order.
    """
    return _sample(N, Phi, modes, n_shots, seed, sigma_phi, efficiency, mixed, False)


def sample_reference_shots(N: int, modes, n_shots: int, seed: int,
                           efficiency: float = 1.0) -> InterferenceRecord:
    """Control run: N independent atoms per shot from two condensates with a random phase."""
    return _sample(N, 0.0, modes, n_shots, seed, 0.0, efficiency, False, True)


# ---------------------------------------------------------------- estimation

@dataclass(frozen=True)
class Periodogram:
    frequencies: np.ndarray     # 1/m
    power: np.ndarray
    noise_floor: float          # shot-noise power level
    f_min: float

    def power_at(self, f: float) -> float:
        return float(np.interp(f, self.frequencies, self.power))


@dataclass(frozen=True)
class FringeFit:
    period: float
    visibility: float
    a: float
    b: float
    significant: bool


def histogram(values, bin_width: float, span=None) -> Histogram:
    """Histogram with bin edges on the lattice ``bin_width * Z``."""
    v = np.asarray(values, dtype=float)
    lo, hi = (v.min(), v.max()) if span is None else span
    i0 = math.floor(lo / bin_width)
    i1 = math.ceil(hi / bin_width)
    if i1 == i0:
        i1 += 1
    edges = bin_width * np.arange(i0, i1 + 1)
    counts, _ = np.histogram(v, edges)
    return Histogram(edges, counts.astype(float))


def periodogram(h: Histogram, pad: int = 8, envelope_std: float | None = None) -> Periodogram:
    """|DFT|^2 of the mean-subtracted counts, zero padded ``pad`` times.

    Frequencies below f_min = sqrt(5)/(pi std) belong to the smooth envelope
    and are excluded from peak searches.  The noise floor is the Poisson
    level: the expected power of pure counting noise equals the total count.
    """
    c = h.counts - h.counts.mean()
    n = len(c) * pad
    F = np.fft.rfft(c, n)
    f = np.fft.rfftfreq(n, h.width)
    if envelope_std is None:
        x = h.centers
        w = h.counts / max(h.total, 1.0)
        envelope_std = math.sqrt(max(float(w @ (x - w @ x) ** 2), h.width ** 2))
    return Periodogram(f, np.abs(F) ** 2, max(h.total, 1.0),
                       math.sqrt(5.0) / (math.pi * envelope_std))


def peak_frequency(p: Periodogram):
    """Refined frequency and power of the strongest peak above f_min, or None."""
    band = np.nonzero(p.frequencies >= p.f_min)[0]
    if len(band) < 3:
        return None
    j = band[np.argmax(p.power[band])]
    pw = p.power
    if 0 < j < len(pw) - 1:
        denom = pw[j - 1] - 2.0 * pw[j] + pw[j + 1]
        delta = 0.5 * (pw[j - 1] - pw[j + 1]) / denom if denom < 0 else 0.0
    else:
        delta = 0.0
    df = p.frequencies[1] - p.frequencies[0]
    return float(p.frequencies[j] + delta * df), float(pw[j])


def local_envelope(h: Histogram, period: float) -> np.ndarray:
    """Running mean of the counts over exactly one period (fractional end weights)."""
    L = period / h.width
    m = int(math.floor(L))
    if m % 2 == 0:
        m -= 1
    half = m // 2
    frac = 0.5 * (L - m)
    kernel = np.ones(m + 2)
    kernel[0] = kernel[-1] = frac
    kernel /= L
    return np.convolve(h.counts, kernel, mode="same")


def fit_fringe(h: Histogram, period: float, min_fraction: float = 0.05) -> FringeFit:
    """Least-squares fit of counts = E(x) (1 + a cos(2 pi x/p) + b sin(2 pi x/p)).

    E is the one-period running mean of the counts; bins within half a
    period of the histogram edge, or where E is below ``min_fraction`` of its
    peak, are left out.  The visibility is sqrt(a^2 + b^2), clipped to 1.
    """
    E = local_envelope(h, period)
    x = h.centers
    margin = 0.5 * period + h.width
    keep = (x > h.edges[0] + margin) & (x < h.edges[-1] - margin) & (E >= min_fraction * E.max())
    if keep.sum() < 4:
        return FringeFit(period, 0.0, 0.0, 0.0, False)
    ph = 2.0 * math.pi * x[keep] / period
    A = np.column_stack([E[keep] * np.cos(ph), E[keep] * np.sin(ph)])
    (a, b), *_ = np.linalg.lstsq(A, h.counts[keep] - E[keep], rcond=None)
    return FringeFit(period, float(min(1.0, math.hypot(a, b))), float(a), float(b), True)


def analyze_histogram(h: Histogram, envelope_std: float | None = None):
    """Periodogram peak and fringe fit of a histogram.

    Returns (period, visibility, periodogram); a peak below three times the
    Poisson noise floor counts as no fringe and gives (nan, 0.0, ...).
    """
    p = periodogram(h, envelope_std=envelope_std)
    peak = peak_frequency(p)
    if peak is None or peak[1] < 3.0 * p.noise_floor:
        return math.nan, 0.0, p
    period = 1.0 / peak[0]
    return period, fit_fringe(h, period).visibility, p


def extract_period(record: InterferenceRecord, bootstrap: int = 0,
                   seed: int | None = None) -> tuple[float, float]:
    """Centre-of-mass fringe period and visibility; both are stored back into ``record``.

    The histogram bin width is 1/16 of the expected period.  ``bootstrap``
    > 0 adds a shot-resampling standard error of the visibility at the
    extracted period.
    """
    com = record.com_values
    if len(com) < 10:
        raise ValueError("need at least 10 retained shots")
    expected = record.expected_period
    width = expected / BINS_PER_PERIOD
    h = histogram(com, width)
    if h.edges[-1] - h.edges[0] < 3.0 * expected:
        raise ValueError("histogram spans fewer than 3 expected periods")
    period, vis, p = analyze_histogram(h, float(np.std(com)))
    record.histogram, record.periodogram = h, p
    record.period_com, record.visibility = period, vis
    if bootstrap and math.isfinite(period):
        record.visibility_se = float(bootstrap_visibility(
            com, period, width, bootstrap, record.seed if seed is None else seed).std(ddof=1))
    return period, vis


def bootstrap_coefficients(com, period: float, bin_width: float, n_boot: int = 200,
                           seed: int = 0) -> np.ndarray:
    """(a, b) fringe coefficients for ``n_boot`` resamplings of the shot list."""
    com = np.asarray(com, dtype=float)
    rng = np.random.default_rng(seed)
    span = (com.min(), com.max())
    out = np.empty((n_boot, 2))
    for i in range(n_boot):
        h = histogram(rng.choice(com, len(com)), bin_width, span)
        f = fit_fringe(h, period)
        out[i] = f.a, f.b
    return out


def bootstrap_visibility(com, period: float, bin_width: float, n_boot: int = 200,
                         seed: int = 0) -> np.ndarray:
    ab = bootstrap_coefficients(com, period, bin_width, n_boot, seed)
    return np.minimum(1.0, np.hypot(ab[:, 0], ab[:, 1]))


def fringe_chi2(com, period: float, bin_width: float, n_boot: int = 200, seed: int = 0) -> float:
    """Chi-square of the fitted (a, b) against zero under the bootstrap covariance (2 dof)."""
    com = np.asarray(com, dtype=float)
    f = fit_fringe(histogram(com, bin_width), period)
    cov = np.cov(bootstrap_coefficients(com, period, bin_width, n_boot, seed).T)
    v = np.array([f.a, f.b])
    return float(v @ np.linalg.solve(cov, v))


def expected_histogram(N: int, Phi: float, modes, edges, n_shots: float, sigma_phi: float = 0.0,
                       mixed: bool = False, sub: int = 16, n_phase: int = 24) -> Histogram:
    """Mean counts per bin for ``n_shots`` retained shots, phase noise averaged exactly.

    Each bin is integrated with Simpson's rule on ``sub`` sub-intervals; the
    shot-to-shot phase average uses Gauss-Hermite nodes.
    """
    edges = np.asarray(edges, dtype=float)
    sub += sub % 2
    w = edges[1] - edges[0]
    x = edges[0] + w / sub * np.arange((len(edges) - 1) * sub + 1)
    if sigma_phi > 0 and not mixed:
        nodes, weights = np.polynomial.hermite_e.hermegauss(n_phase)
        weights = weights / weights.sum()
        dens = sum(wt * com_distribution(N, Phi + sigma_phi * z, modes, x)
                   for z, wt in zip(nodes, weights))
    else:
        dens = com_distribution(N, Phi, modes, x, mixed)
    simpson = np.ones(sub + 1)
    simpson[1:-1:2], simpson[2:-1:2] = 4.0, 2.0
    simpson *= (w / sub) / 3.0
    segs = np.lib.stride_tricks.sliding_window_view(dens, sub + 1)[::sub]
    return Histogram(edges, n_shots * segs @ simpson)

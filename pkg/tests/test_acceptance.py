"""Acceptance criteria 1-10, each at its stated tolerance, one PASS/FAIL line per criterion."""
import math
import time
import warnings

import numpy as np
import pytest
from scipy.integrate import trapezoid

from scatomchip.cli import Scenario
from scatomchip.condensate import CondensateSpec, thomas_fermi_mu
from scatomchip.config import load_config
from scatomchip.entangler import AdiabaticityWarning, apply_atom_loss, run_protocol, RampSchedule
from scatomchip.fluxloop import (QubitState, half_flux_bias, prepare_symmetric_superposition,
                                 qubit_evolve)
from scatomchip.constants import HBAR
from scatomchip.interferometry import (BINS_PER_PERIOD, com_distribution, expected_histogram,
                                       extract_period, fit_fringe, fringe_chi2, fringe_period,
                                       histogram, mode_pair, periodogram, sample_reference_shots,
                                       sample_shots)
from scatomchip.magnetostatics import CurrentLoop, field_jacobian, infinite_wire_height, loop_field
from scatomchip.trap import RB87, axial_profile, characterize, find_minimum

from test_entangler import symmetric_setup
from test_interferometry import dominant_period, lambda_reference
from test_magnetostatics import biot_savart_loop
from test_trap import cancellation_height

SEED = 1            # the shipped preset's seed; every Monte-Carlo run below derives from it
SHOTS = 20000


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def modes():
    return mode_pair(1e-5, 5e-7, 1e-2, RB87)


def test_criterion_01_perturbation_amplitude(report):
    t0 = time.perf_counter()
    sc = Scenario(load_config("paper_default"))
    fls = sc.flux
    p = axial_profile(sc.geometry, fls.branch_loops(), sc.trap.minimum,
                      half_width=sc.cfg["profile.half_width_m"], n=sc.cfg["profile.points"])
    elapsed = time.perf_counter() - t0
    d0 = p.B_branch0 - p.B_unperturbed
    d1 = p.B_branch1 - p.B_unperturbed
    amp = max(np.abs(d0).max(), np.abs(d1).max())
    # sign-mirrored: opposite branch currents, and perturbations that cancel to first order
    mirror = np.abs(d0 + d1).max() / amp
    opposite = fls.I_branch0 == -fls.I_branch1
    ok = (5.5e-7 / 2 <= amp <= 2 * 5.5e-7 and mirror < 0.05 and opposite
          and np.corrcoef(d0, d1)[0, 1] < -0.99 and elapsed < 10)
    report(1, ok, f"max |dB| = {amp:.4g} T (target 5.5e-7 T, ratio {amp / 5.5e-7:.3f}), "
                  f"max|d0+d1|/max|d| = {mirror:.2g}, I = {fls.I_branch0:.4g}/{fls.I_branch1:.4g} A, "
                  f"{elapsed:.2f} s")
    assert ok


def test_criterion_02_trap_location(report):
    t0 = time.perf_counter()
    z = find_minimum(Scenario(load_config("paper_default")).geometry,
                     guess=(0.0, 0.0, infinite_wire_height(5.0, 2e-3))).minimum[2]
    elapsed = time.perf_counter() - t0
    z_oracle = cancellation_height(5.0, 5e-3, 2e-3)
    z_inf = infinite_wire_height(5.0, 2e-3)
    r1, r2 = z / z_oracle - 1, z / z_inf - 1
    ok = abs(r1) <= 0.03 and abs(r2) <= 0.03 and elapsed < 1
    report(2, ok, f"z = {z:.6g} m; finite-segment oracle {z_oracle:.6g} m ({r1:+.2%}), "
                  f"infinite wire {z_inf:.6g} m ({r2:+.2%}), {elapsed:.2f} s")
    assert ok


def test_criterion_03_chemical_potential(report):
    t0 = time.perf_counter()
    base = Scenario(load_config("paper_default")).geometry
    N = np.array([1e2, 1e3, 1e4, 1e5, 1e6])
    f = characterize(base).frequencies
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mu = np.array([thomas_fermi_mu(CondensateSpec(RB87, int(n)), f) for n in N])
        slope = np.diff(np.log(mu)) / np.diff(np.log(N))
        scan = {}
        for bx in np.linspace(5e-5, 2e-4, 7):
            g = base.with_bias((bx, base.bias[1], base.bias[2]))
            c = characterize(g)
            scan[bx] = thomas_fermi_mu(CondensateSpec(RB87, 1), c.frequencies) / RB87.moment
    elapsed = time.perf_counter() - t0
    ratios = {bx: C / 2.631e-9 for bx, C in scan.items()}
    best = min(ratios, key=lambda bx: abs(math.log(ratios[bx])))
    ok = (np.abs(slope - 0.4).max() <= 1e-12
          and all(0.5 <= r <= 2.0 for r in ratios.values()) and elapsed < 10)
    listing = ", ".join(f"{bx * 1e4:.2f} G: {r:.3f}" for bx, r in ratios.items())
    report(3, ok, f"max |slope - 2/5| = {np.abs(slope - 0.4).max():.1e}; C/2.631e-9 T by x-bias "
                  f"[{listing}]; best agreement at {best * 1e4:.2f} G "
                  f"(C = {scan[best]:.4g} T), {elapsed:.2f} s")
    assert ok


def test_criterion_04_flux_bias(report):
    t0 = time.perf_counter()
    cfg = load_config("paper_default")
    b = half_flux_bias(cfg["loop.radius_m"])
    elapsed = time.perf_counter() - t0
    ok = abs(b - 1.317e-5) / 1.317e-5 < 1e-3 and abs(b / 1e-5 - 1) <= 0.35 and cfg.zbias == b \
        and elapsed < 1
    report(4, ok, f"Phi0/2 bias = {b:.5g} T, {b / 1e-5 - 1:+.1%} from 1e-5 T, {elapsed:.3f} s")
    assert ok


def test_criterion_05_fringe_law(report, modes):
    lam = fringe_period(1e-2, RB87, 1e-5, 5e-7)
    ref = lambda_reference(1e-2, 1e-5, 5e-7)
    x = np.linspace(-8e-5, 8e-5, 20001)
    a, b = modes
    rho = np.abs(a.amplitude(x) + b.amplitude(x)) ** 2
    rho /= trapezoid(rho, x)
    brute = dominant_period(x, rho, 0.5 / lam)
    ok = abs(lam / ref - 1) <= 1e-9 and abs(lam / 4.597e-6 - 1) < 1e-3 and abs(brute / lam - 1) <= 0.01
    report(5, ok, f"Lambda = {lam:.7g} m (independent evaluation {ref:.7g} m, rel {lam / ref - 1:.1e}); "
                  f"brute-force N=1 period {brute:.5g} m ({brute / lam - 1:+.2%})")
    assert ok


def test_criterion_06_lambda_over_n(report, modes):
    t0 = time.perf_counter()
    lam = fringe_period(1e-2, RB87, 1e-5, 5e-7)
    periods, retained = {}, {}
    for N in (1, 2, 3):
        rec = sample_shots(N, 0.0, modes, SHOTS, seed=SEED + N)
        periods[N], _ = extract_period(rec)
        retained[N] = len(rec.retained)
    control = {}
    for N in (2, 3):
        ref = sample_reference_shots(N, modes, SHOTS, seed=SEED + 10 + N)
        com = ref.com_values
        pg = periodogram(histogram(com, lam / N / BINS_PER_PERIOD), envelope_std=float(np.std(com)))
        control[N] = pg.power_at(N / lam) / pg.noise_floor
    elapsed = time.perf_counter() - t0
    ratio = {N: periods[N] * N / periods[1] for N in (1, 2, 3)}
    ok = (all(n >= 2e4 for n in retained.values()) and all(abs(r - 1) <= 0.05 for r in ratio.values())
          and all(c < 3.0 for c in control.values()) and elapsed < 300)
    report(6, ok, "period(N)*N/period(1) = " + ", ".join(f"N={N}: {r:.4f}" for N, r in ratio.items())
           + f" (period(1) = {periods[1]:.5g} m); reference power at N/Lambda over noise floor: "
           + ", ".join(f"N={N}: {c:.2f}" for N, c in control.items()) + f" (< 3); {elapsed:.1f} s")
    assert ok


def test_criterion_07_phase_noise_visibility(report, modes):
    N = 2
    rows, ok = [], True
    for k, sigma in enumerate((0.0, 0.5, 1.0, math.pi / (2 * N))):
        rec = sample_shots(N, 0.0, modes, SHOTS, seed=SEED + 20 + k, sigma_phi=sigma)
        period, v = extract_period(rec, bootstrap=200)
        # noise-free value of the same estimator on the same bins
        v0 = fit_fringe(expected_histogram(N, 0.0, modes, rec.histogram.edges, len(rec.retained)),
                        period).visibility
        ratio, se = v / v0, rec.visibility_se / v0
        oracle = math.exp(-sigma ** 2 / 2)
        z = (ratio - oracle) / se
        if k < 3:
            ok &= abs(z) <= 3
        rows.append(f"sigma={sigma:.3f}: V/V0 = {ratio:.4f} +- {se:.4f} vs {oracle:.4f} (z={z:+.2f})")
    report(7, ok, "; ".join(rows) + " [last row is the pi/(2N) stability bound, reported only]")
    assert ok


def test_criterion_08_atom_loss(report, default_geometry, default_flux, modes):
    lam = fringe_period(1e-2, RB87, 1e-5, 5e-7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdiabaticityWarning)
        state = run_protocol(default_geometry, default_flux, CondensateSpec(N=2), RampSchedule(steps=65))
    lost = apply_atom_loss(state)
    rec = sample_shots(lost.N, lost.Phi, modes, SHOTS, seed=SEED + 30, mixed=lost.mixed)
    com = rec.com_values
    chi2 = fringe_chi2(com, lam / lost.N, lam / lost.N / BINS_PER_PERIOD, seed=SEED)
    v = fit_fringe(histogram(com, lam / lost.N / BINS_PER_PERIOD), lam / lost.N).visibility
    # the pure N=1 state with the same phase, for contrast
    pure = sample_shots(1, lost.Phi, modes, SHOTS, seed=SEED + 31).com_values
    chi2_pure = fringe_chi2(pure, lam, lam / BINS_PER_PERIOD, seed=SEED)
    exact = com_distribution(lost.N, lost.Phi, modes, np.linspace(-6e-5, 6e-5, 4001), mixed=True)
    ok = lost.mixed and lost.N == 1 and len(com) >= 2e4 and chi2 < 5.991 and np.all(exact >= 0)
    report(8, ok, f"after loss N={lost.N}, mixed={lost.mixed}; fitted V = {v:.4f}, chi2 vs V=0 = "
                  f"{chi2:.2f} (95% bound 5.99, 2 dof); coherent control chi2 = {chi2_pure:.0f}")
    assert ok


def test_criterion_09_symmetry_zero_phase(report):
    g, fls = symmetric_setup()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdiabaticityWarning)
        s = run_protocol(g, fls, CondensateSpec(N=1000), RampSchedule())
    t, mu0, mu1 = np.array(s.mu_trace).T
    rel = np.max(np.abs(mu0 - mu1) / mu0)
    ok = rel < 1e-6 and abs(s.Phi) < 1e-6
    report(9, ok, f"max |mu0-mu1|/mu0 = {rel:.2e}, |Phi| = {abs(s.Phi):.2e} rad "
                  f"over {len(t)} ramp steps")
    assert ok


def test_criterion_10_numerical_hygiene(report, default_geometry, default_trap, default_flux):
    # divergence of the full chip plus loop field near the trap
    g = default_geometry.with_loops(default_flux.branch_loops()[0])
    rng = np.random.default_rng(SEED)
    worst_div = 0.0
    for _ in range(20):
        p = np.asarray(default_trap.minimum) + rng.uniform(-2e-5, 2e-5, 3)
        J = field_jacobian(g, p, h=1e-9)
        worst_div = max(worst_div, abs(np.trace(J)) / np.abs(J).max())
    # loop field against direct quadrature of the filament
    loop = CurrentLoop((0, 0, 0), 5e-6, current=6.9e-5)
    worst_loop = 0.0
    for p in ((3e-6, 0, 4e-6), (1e-6, 2e-6, -3e-6), (8e-6, -4e-6, 1e-6), (2e-7, 0, 1e-6)):
        ref = biot_savart_loop(loop.center, loop.radius, loop.current, p)
        worst_loop = max(worst_loop, np.linalg.norm(loop_field(loop, p) - ref) / np.linalg.norm(ref))
    # qubit unitarity over a million steps
    J_t = 1e-30
    q = QubitState(0.6 + 0j, 0.8j, 3e-31, J_t)
    dt = 7.071e-4 * HBAR / J_t
    drift = 0.0
    for k in range(10 ** 6):
        q = qubit_evolve(q, dt)
        if k % 997 == 0:
            drift = max(drift, abs(q.norm2 - 1.0))
    drift = max(drift, abs(q.norm2 - 1.0))
    assert prepare_symmetric_superposition().norm2 == pytest.approx(1.0, abs=1e-15)
    # trapezoid convergence of Phi
    phi = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdiabaticityWarning)
        for n in (33, 65, 129):
            phi.append(run_protocol(default_geometry, default_flux, CondensateSpec(N=1000),
                                    RampSchedule(steps=n)).Phi)
    order = math.log2(abs(phi[0] - phi[1]) / abs(phi[1] - phi[2]))
    ok = worst_div < 1e-6 and worst_loop < 1e-9 and drift < 1e-12 and order >= 2
    report(10, ok, f"max |div B|/|grad B| = {worst_div:.1e}, loop quadrature rel err = "
                   f"{worst_loop:.1e} (< 1e-9), qubit norm drift over 1e6 steps = {drift:.1e} "
                   f"(< 1e-12), Phi convergence order = {order:.2f} (>= 2); the property suites in the "
                   f"other test modules cover the remaining invariants")
    assert ok

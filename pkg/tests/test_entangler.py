import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scatomchip.condensate import CondensateSpec
from scatomchip.constants import HBAR, PHI_0, PLANCK
from scatomchip.entangler import (AdiabaticityWarning, EntangledSystemState, ProtocolError,
                                  RampSchedule, adiabaticity_margin, apply_atom_loss,
                                  apply_phase_noise, integrate_phase, run_protocol,
                                  stability_bound, transport_map)
from scatomchip.fluxloop import (FluxLoopState, flux_state, half_flux_bias,
                                 prepare_symmetric_superposition)
from scatomchip.magnetostatics import CurrentLoop, z_trap_geometry
from scatomchip.trap import RB87, characterize, find_minimum


@pytest.fixture(scope="module")
def default_run(default_geometry, default_flux):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdiabaticityWarning)
        return run_protocol(default_geometry, default_flux, CondensateSpec(N=1000), RampSchedule())


def symmetric_setup():
    """Z-trap without z-bias and a loop on the vertical axis through the bar centre,
    biased to half a flux quantum so the branch currents are exactly opposite."""
    g = z_trap_geometry()
    z0 = find_minimum(g).minimum[2]
    loop = CurrentLoop((0.0, 0.0, z0 - 1e-5), 5e-6)
    base = flux_state(loop, g)
    L = base.self_inductance
    fls = FluxLoopState(base.loop, 5e-7, L, PHI_0 / 2, 0, 1, -PHI_0 / (2 * L), PHI_0 / (2 * L))
    return g, fls


# -- phase integration

def test_constant_offset_gives_two_pi():
    t = np.linspace(0.0, 1.0, 513)
    mu1 = np.full_like(t, 1e-30)
    phi = integrate_phase(t, mu1 + PLANCK * 1.0, mu1, 1)
    assert phi[-1] == pytest.approx(2 * math.pi, abs=1e-9)


@given(st.integers(1, 10 ** 6))
def test_phase_linear_in_n(N):
    t = np.linspace(0, 0.1, 65)
    mu0 = 1e-31 * np.sin(30 * t) + 2e-30
    mu1 = 1e-31 * np.cos(20 * t) + 2e-30
    one = integrate_phase(t, mu0, mu1, N)
    two = integrate_phase(t, mu0, mu1, 2 * N)
    assert np.array_equal(two, 2 * one)


def test_phase_antisymmetric(default_run):
    t, mu0, mu1 = np.array(default_run.mu_trace).T
    assert np.array_equal(integrate_phase(t, mu1, mu0, 1000), -integrate_phase(t, mu0, mu1, 1000))


def test_phase_additive_over_consecutive_halves(default_run):
    t, mu0, mu1 = np.array(default_run.mu_trace).T
    k = len(t) // 2
    first = integrate_phase(t[:k + 1], mu0[:k + 1], mu1[:k + 1], default_run.N)[-1]
    second = integrate_phase(t[k:], mu0[k:], mu1[k:], default_run.N)[-1]
    assert first + second == pytest.approx(default_run.Phi, abs=1e-9)


def test_phase_trace_consistent(default_run):
    assert default_run.phi_trace[0] == 0.0
    assert default_run.phi_trace[-1] == default_run.Phi
    t = [row[0] for row in default_run.mu_trace]
    assert np.all(np.diff(t) > 0)
    assert math.isfinite(default_run.Phi)


# -- the protocol on the default geometry

def test_default_protocol_regression(default_run):
    assert default_run.Phi == pytest.approx(-13563.352, rel=1e-6)
    assert default_run.adiabatic_margin == pytest.approx(0.6033, rel=1e-3)
    assert any("adiabaticity" in w for w in default_run.warnings)
    assert default_run.gamma0 == default_run.gamma1 == 0.0
    assert default_run.separations[0] == pytest.approx(1e-4)
    assert default_run.separations[-1] == pytest.approx(1e-5)


def test_adiabaticity_warning_is_emitted(default_geometry, default_flux):
    with pytest.warns(AdiabaticityWarning):
        run_protocol(default_geometry, default_flux, CondensateSpec(N=1000), RampSchedule(steps=17))


def test_qubit_populations_stay_balanced(default_run):
    assert default_run.qubit.populations == pytest.approx((0.5, 0.5), abs=1e-15)


def test_convergence_order_at_least_two(default_geometry, default_flux):
    spec = CondensateSpec(N=1000)
    phi = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdiabaticityWarning)
        for n in (33, 65, 129):
            phi.append(run_protocol(default_geometry, default_flux, spec, RampSchedule(steps=n)).Phi)
    d1, d2 = abs(phi[0] - phi[1]), abs(phi[1] - phi[2])
    order = math.log2(d1 / d2)
    assert order >= 2
    # the change on doubling stays inside the trapezoid bound estimated from the coarser pair
    assert d2 <= d1 / 3


def test_symmetric_geometry_gives_zero_phase():
    # N T / hbar amplifies a relative mismatch of mu by ~1e8 here, so this
    # probes the round-off of the trap minimum and curvature evaluation
    g, fls = symmetric_setup()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdiabaticityWarning)
        s = run_protocol(g, fls, CondensateSpec(N=1000), RampSchedule(steps=129))
    t, mu0, mu1 = np.array(s.mu_trace).T
    assert np.max(np.abs(mu0 - mu1) / mu0) < 1e-13
    assert abs(s.Phi) < 1e-6


def test_broken_config_names_first_ramp_step(default_geometry, default_flux):
    with pytest.raises(ProtocolError) as err:
        run_protocol(default_geometry, default_flux, CondensateSpec(),
                     RampSchedule(steps=9, start_separation=5e-2))
    assert err.value.step == 0
    assert str(err.value).startswith("ramp step 0:")


def test_trap_lost_midway_names_step(default_geometry, default_flux):
    with pytest.raises(ProtocolError) as err:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AdiabaticityWarning)
            run_protocol(default_geometry, default_flux, CondensateSpec(),
                         RampSchedule(steps=65, end_separation=1e-6))
    assert 0 < err.value.step < 64
    assert f"ramp step {err.value.step}" in str(err.value)


def test_target_below_chip_rejected(default_geometry, default_flux):
    with pytest.raises(ProtocolError) as err:
        run_protocol(default_geometry, default_flux, CondensateSpec(),
                     RampSchedule(steps=5, start_separation=1e-3))
    assert err.value.step == 0


def test_initial_separation_too_small_warns():
    # an x-bias against the lead field lowers the trap bottom, so the loop's
    # branch-dependent shift is a larger fraction of mu
    g = z_trap_geometry(bias_x=-4e-5, bias_z=half_flux_bias(5e-6))
    z0 = find_minimum(g).minimum[2]
    fls = flux_state(CurrentLoop((0.0, 0.0, z0 - 1e-5), 5e-6), g)
    with pytest.warns(AdiabaticityWarning, match="initial separation"):
        run_protocol(g, fls, CondensateSpec(), RampSchedule(steps=5, start_separation=1e-5,
                                                            end_separation=9e-6))


def test_transport_map_requires_y_bias():
    with pytest.raises(ProtocolError):
        transport_map(z_trap_geometry(bias_y=0.0), RB87, 4e-4, 5e-4)


def test_transport_map_monotone(default_geometry):
    tm = transport_map(default_geometry, RB87, 4.8e-4, 5.9e-4)
    assert np.all(np.diff(tm.heights) > 0)
    assert tm.covers(5e-4) and not tm.covers(1e-2)
    # inverse table reproduces the unperturbed height
    by = float(tm(5.2e-4))
    bx, _, bz = default_geometry.bias
    z = find_minimum(default_geometry.with_bias((bx, by, bz)), guess=(0, 0, 5.2e-4)).minimum[2]
    assert z == pytest.approx(5.2e-4, rel=1e-4)


# -- ramp schedule and adiabaticity

def test_ramp_validation():
    with pytest.raises(ValueError):
        RampSchedule(duration=0.0)
    with pytest.raises(ValueError):
        RampSchedule(steps=1)
    with pytest.raises(ValueError):
        RampSchedule(shape="cubic")


@pytest.mark.parametrize("shape", ["linear", "smoothstep"])
def test_ramp_monotone(shape):
    r = RampSchedule(shape=shape, steps=101)
    s = r.separation(r.times)
    assert s[0] == pytest.approx(1e-4) and s[-1] == pytest.approx(1e-5)
    assert np.all(np.diff(s) < 0)


def test_static_ramp_margin_zero(default_geometry, default_flux):
    ramp = RampSchedule(steps=9, start_separation=1e-4, end_separation=1e-4)
    assert adiabaticity_margin(ramp, [characterize(default_geometry)] * 9) == 0.0
    # through the full protocol only the minimiser's last digits vary
    s = run_protocol(default_geometry, default_flux, CondensateSpec(), ramp)
    assert s.adiabatic_margin < 1e-6


def test_halving_duration_doubles_margin(default_run):
    r = RampSchedule()
    full = adiabaticity_margin(r, default_run.traps0)
    half = adiabaticity_margin(RampSchedule(duration=r.duration / 2), default_run.traps0)
    assert half / full == pytest.approx(2.0, rel=0.05)


def test_margin_needs_aligned_trace(default_run):
    with pytest.raises(ValueError):
        adiabaticity_margin(RampSchedule(steps=10), default_run.traps0)


# -- decoherence channels

def _state(N=2):
    return EntangledSystemState(N, prepare_symmetric_superposition(), 1.0, ((0.0, 1.0, 1.0),))


def test_phase_noise():
    s = apply_phase_noise(_state(), 0.3)
    assert s.phase_noise_sigma == 0.3 and s.Phi == 1.0
    assert apply_phase_noise(_state(), 0.0).phase_noise_sigma == 0.0
    with pytest.raises(ValueError):
        apply_phase_noise(_state(), -0.1)


def test_atom_loss():
    s = apply_atom_loss(_state(2))
    assert s.N == 1 and s.lost_atom and s.mixed
    s3 = apply_atom_loss(_state(3))
    assert s3.N == 2 and s3.mixed
    with pytest.raises(ValueError):
        apply_atom_loss(_state(1))


def test_stability_bound():
    assert stability_bound(10) == pytest.approx(math.pi / 20)
    assert math.exp(-stability_bound(10) ** 2 / 2) == pytest.approx(0.9878, abs=1e-4)


@settings(max_examples=10, deadline=None)
@given(st.floats(1e-31, 1e-29), st.floats(0.01, 1.0))
def test_constant_offset_closed_form(dmu, T):
    t = np.linspace(0.0, T, 33)
    phi = integrate_phase(t, np.full_like(t, dmu), np.zeros_like(t), 3)
    assert phi[-1] == pytest.approx(3 * dmu * T / HBAR, rel=1e-12)

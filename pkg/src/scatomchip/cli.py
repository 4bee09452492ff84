"""Command-line driver: one subcommand per scenario, CSV outputs plus run metadata."""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
from pathlib import Path
import sys
import warnings

import numpy as np

from . import __version__
from .condensate import CondensateSpec, branch_energetics, ground_width, thomas_fermi_mu
from .config import FROM_TRAP, SimulationConfig, load_config
from .constants import CONSTANTS, PHI_0
from .entangler import RampSchedule, run_protocol
from .errors import SimulationError
from .fluxloop import critical_field_check, flux_state, half_flux_bias
from .interferometry import (BINS_PER_PERIOD, com_distribution, extract_period, fringe_period,
                             mode_pair, sample_shots, two_condensate_reference)
from .magnetostatics import ChipGeometry, CurrentLoop, infinite_wire_height, z_trap_geometry
from .trap import axial_profile, characterize

SUBCOMMANDS = ("field-profile", "trap", "flux", "entangle", "interfere", "montecarlo")


class Scenario:
    """Geometry, trap and loop derived from a config, built lazily."""

    def __init__(self, cfg: SimulationConfig):
        self.cfg = cfg
        self.atom = cfg.atom
        self._trap = self._fls = None

    @property
    def geometry(self) -> ChipGeometry:
        c = self.cfg
        return z_trap_geometry(c["wire.bar_length_m"], c["wire.lead_length_m"],
                               c["wire.current_a"], c["bias.y_t"], c["bias.x_t"], self.cfg.zbias)

    @property
    def trap(self):
        if self._trap is None:
            h = infinite_wire_height(self.cfg["wire.current_a"], self.cfg["bias.y_t"])
            self._trap = characterize(self.geometry, self.atom, (0.0, 0.0, h))
        return self._trap

    @property
    def loop(self) -> CurrentLoop:
        # Centred over the bar's symmetry plane, where the wire threads no net
        # flux and the z-bias alone sets the loop flux; the trap minimum itself
        # sits a few um off this axis because the z-bias tilts the trap.
        c = self.cfg
        return CurrentLoop((c["loop.offset_x_m"], c["loop.offset_y_m"],
                            self.trap.minimum[2] - c["loop.separation_m"]),
                           c["loop.radius_m"], c["loop.normal"])

    @property
    def flux(self):
        if self._fls is None:
            c = self.cfg
            self._fls = flux_state(self.loop, self.geometry, c["loop.wire_radius_m"],
                                   c["loop.n0"], c["loop.n1"])
        return self._fls

    def modes(self, notes):
        c = self.cfg
        d, s0 = c["interferometry.d_m"], c["interferometry.sigma0_m"]
        if FROM_TRAP in (d, s0):
            be = branch_energetics(self.geometry, self.flux, CondensateSpec(self.atom, c["condensate.n"]))
            if d == FROM_TRAP:
                d = be.minima_separation
                notes.append(f"well separation taken from the branch minima: {d:.6g} m")
            if s0 == FROM_TRAP:
                s0 = ground_width(be.trap0.frequencies, self.atom)[0]
                notes.append(f"sigma0 taken from the weakest branch-0 trap axis: {s0:.6g} m")
        return mode_pair(d, s0, c["interferometry.t_s"], self.atom)


class RunWriter:
    """Write-once outputs sharing one run id; the id depends only on inputs."""

    def __init__(self, out: Path, command: str, cfg: SimulationConfig, seed, shots=None):
        self.out = out
        self.command = command
        self.cfg = cfg
        self.seed = seed
        self.started = _dt.datetime.now(_dt.timezone.utc)
        blob = json.dumps({"command": command, "config": cfg.echo(), "seed": seed,
                           "shots": shots, "version": __version__}, sort_keys=True)
        self.run_id = hashlib.sha256(blob.encode()).hexdigest()[:16]
        self.files = []
        out.mkdir(parents=True, exist_ok=True)

    def _open(self, name):
        path = self.out / name
        try:
            fh = open(path, "x", newline="")
        except FileExistsError:
            raise SimulationError(f"output {path} already exists; outputs are write-once") from None
        self.files.append(name)
        return fh

    def csv(self, name, header, rows):
        with self._open(name) as fh:
            fh.write(f"# run_id={self.run_id}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])

    def metadata(self, notes, results=None):
        meta = {
            "run_id": self.run_id,
            "command": self.command,
            "software_version": __version__,
            "config_source": self.cfg.source,
            "config": self.cfg.echo(),
            "constants": CONSTANTS,
            "atom_mass_kg": self.cfg.atom.mass,
            "seed": self.seed,
            "started_utc": self.started.isoformat(),
            "finished_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "warnings": notes,
            "geometric_phases": "gamma0 = gamma1 = 0 (not computed)",
            "files": self.files,
            "results": results or {},
        }
        with self._open("metadata.json") as fh:
            json.dump(meta, fh, indent=2, default=_json_default)
            fh.write("\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def cmd_field_profile(sc: Scenario, w: RunWriter, notes, args):
    c = sc.cfg
    fls = sc.flux
    prof = axial_profile(sc.geometry, fls.branch_loops(), sc.trap.minimum,
                         half_width=c["profile.half_width_m"], n=c["profile.points"])
    _critical(sc, notes)
    w.csv("profile.csv", ["x_m", "B_unperturbed_T", "B_branch0_T", "B_branch1_T"],
          zip(prof.positions, prof.B_unperturbed, prof.B_branch0, prof.B_branch1))
    d0 = prof.B_branch0 - prof.B_unperturbed
    d1 = prof.B_branch1 - prof.B_unperturbed
    return {"max_perturbation_T": float(max(np.abs(d0).max(), np.abs(d1).max()))}


def _critical(sc, notes):
    rep = critical_field_check(sc.geometry, sc.loop, sc.cfg["loop.critical_field_t"])
    if not rep.passed:
        notes.append(f"field at the loop {rep.max_field:.3g} T exceeds the critical field "
                     f"{rep.B_crit:.3g} T")
    return rep


def cmd_trap(sc: Scenario, w: RunWriter, notes, args):
    c = sc.cfg
    t = sc.trap
    spec = CondensateSpec(sc.atom, c["condensate.n"])
    rows = [("minimum_x", t.minimum[0], "m"), ("minimum_y", t.minimum[1], "m"),
            ("minimum_z", t.minimum[2], "m"), ("B_min", t.B_min, "T"),
            ("infinite_wire_height", infinite_wire_height(c["wire.current_a"], c["bias.y_t"]), "m")]
    rows += [(f"omega_{i}", f, "rad/s") for i, f in enumerate(t.frequencies)]
    rows += [(f"frequency_{i}", f / (2 * math.pi), "Hz") for i, f in enumerate(t.frequencies)]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mu = thomas_fermi_mu(spec, t.frequencies)
        be = branch_energetics(sc.geometry, sc.flux, spec)
    notes.extend(str(x.message) for x in caught)
    rows += [("mu_TF", mu, "J"), ("mu_TF_field", mu / sc.atom.moment, "T"),
             ("mu_TF_field_coefficient", mu / sc.atom.moment / spec.N ** 0.4, "T"),
             ("mu_branch0", be.mu0, "J"), ("mu_branch1", be.mu1, "J"),
             ("branch_minima_separation", be.minima_separation, "m")]
    w.csv("trap.csv", ["quantity", "value", "unit"], rows)
    return {"minimum_z_m": t.minimum[2]}


def cmd_flux(sc: Scenario, w: RunWriter, notes, args):
    f = sc.flux
    rep = _critical(sc, notes)
    rows = [("L", f.self_inductance, "H"), ("wire_radius", f.wire_radius, "m"),
            ("Phi_ext", f.external_flux, "Wb"), ("Phi_ext_over_Phi0", f.external_flux / PHI_0, "1"),
            ("half_flux_bias", half_flux_bias(sc.loop.radius), "T"),
            ("zbias", sc.cfg.zbias, "T"),
            ("branch_n0", f.branch_n0, "1"), ("branch_n1", f.branch_n1, "1"),
            ("I_branch0", f.I_branch0, "A"), ("I_branch1", f.I_branch1, "A"),
            ("B_loop_max", rep.max_field, "T"), ("critical_field", rep.B_crit, "T")]
    w.csv("flux.csv", ["quantity", "value", "unit"], rows)
    return {"I_branch0_A": f.I_branch0, "I_branch1_A": f.I_branch1}


def cmd_entangle(sc: Scenario, w: RunWriter, notes, args):
    c = sc.cfg
    ramp = RampSchedule(c["ramp.duration_s"], c["ramp.steps"], c["ramp.start_separation_m"],
                        c["ramp.end_separation_m"], c["ramp.shape"])
    g = sc.geometry
    # the loop is fixed at the configured separation below the unperturbed trap
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        s = run_protocol(g, sc.flux, CondensateSpec(sc.atom, c["condensate.n"]), ramp)
    notes.extend(str(x.message) for x in caught)
    rows = ((t, sep, m0, m1, phi, mg) for (t, m0, m1), sep, phi, mg in
            zip(s.mu_trace, s.separations, s.phi_trace, s.margin_trace))
    w.csv("protocol.csv", ["t_s", "separation_m", "mu0_J", "mu1_J", "Phi_rad", "adiabatic_margin"],
          rows)
    return {"Phi_rad": s.Phi, "adiabatic_margin": s.adiabatic_margin}


def cmd_interfere(sc: Scenario, w: RunWriter, notes, args):
    c = sc.cfg
    modes = sc.modes(notes)
    N = c["interferometry.n"]
    a = modes[0]
    Lam = fringe_period(a.t, a.atom, modes[1].center - a.center, a.sigma0)
    span = 4.0 * a.sigma_t
    x = np.linspace(-span, span, int(math.ceil(2 * span / (Lam / N / 32))) + 1)
    w.csv("com_density.csv", ["x_m", "density_per_m"],
          zip(x, com_distribution(N, c["interferometry.phi_rad"], modes, x)))
    w.csv("reference_density.csv", ["x_m", "density_per_m"],
          zip(x, two_condensate_reference(N, modes, x)))
    return {"Lambda_m": Lam, "period_com_m": Lam / N}


def cmd_montecarlo(sc: Scenario, w: RunWriter, notes, args):
    c = sc.cfg
    modes = sc.modes(notes)
    N = c["interferometry.n"]
    shots = args.shots if args.shots is not None else c["interferometry.shots"]
    seed = args.seed if args.seed is not None else c["interferometry.seed"]
    sigma = c["interferometry.sigma_phi_rad"]
    if sigma > math.pi / (2 * N):
        notes.append(f"phase noise {sigma:.3g} rad exceeds the stability bound pi/(2N) = "
                     f"{math.pi / (2 * N):.3g} rad")
    rec = sample_shots(N, c["interferometry.phi_rad"], modes, shots, seed, sigma,
                       c["interferometry.efficiency"])
    w.csv("shots.csv", ["shot_index", "phi_shot_rad", "detected", "com_m"] +
          [f"x{i + 1}_m" for i in range(N)],
          ([s.index, s.phi, int(s.detected), s.com if s.detected else ""] +
           (list(s.positions) if s.detected else [""] * N) for s in rec.shots))
    results = {"retained_shots": len(rec.retained), "Lambda_m": rec.Lambda}
    if len(rec.retained) >= 10:
        period, vis = extract_period(rec)
        h, p = rec.histogram, rec.periodogram
        w.csv("histogram.csv", ["bin_center_m", "count"], zip(h.centers, h.counts.astype(int)))
        w.csv("periodogram.csv", ["spatial_frequency_per_m", "power"], zip(p.frequencies, p.power))
        results.update(period_com_m=period, visibility=vis, bins_per_period=BINS_PER_PERIOD)
    else:
        notes.append("fewer than 10 retained shots: no histogram or periodogram written")
    return results


COMMANDS = {
    "field-profile": cmd_field_profile,
    "trap": cmd_trap,
    "flux": cmd_flux,
    "entangle": cmd_entangle,
    "interfere": cmd_interfere,
    "montecarlo": cmd_montecarlo,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scatomchip",
                                description="Atom-chip BEC coupled to a superconducting flux loop")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="config file or shipped preset name")
        s.add_argument("--out", required=True, type=Path, help="output directory")
        s.add_argument("--seed", type=int, help="override interferometry.seed")
        s.add_argument("--shots", type=int, help="override interferometry.shots")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.shots is not None and args.shots < 1:
        print("error: --shots must be positive", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg["interferometry.seed"]
        writer = RunWriter(args.out, args.command, cfg, seed, args.shots)
        notes = []
        results = COMMANDS[args.command](Scenario(cfg), writer, notes, args)
        writer.metadata(notes, results)
    except (SimulationError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for n in notes:
        print(f"warning: {n}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

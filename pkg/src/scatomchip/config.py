"""Flat ``section.key = value`` run configuration with unit-suffixed keys."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
import math
from pathlib import Path

from .errors import SimulationError
from .fluxloop import half_flux_bias
from .trap import SPECIES, AtomSpecies

FROM_TRAP = "from-trap"
HALF_FLUX = "half-flux-quantum"


class ConfigError(SimulationError):
    def __init__(self, message, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


def _real(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("value must be finite")
    return v


def _positive(text):
    v = _real(text)
    if v <= 0:
        raise ValueError("value must be positive")
    return v


def _count(text):
    v = int(text)
    if v < 1:
        raise ValueError("value must be a positive integer")
    return v


def _integer(text):
    return int(text)


def _or_keyword(parse, keyword):
    def f(text):
        return keyword if text.strip().lower() == keyword else parse(text)
    return f


def _vector(text):
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise ValueError("expected three components")
    return tuple(_real(p) for p in parts)


def _shape(text):
    if text not in ("linear", "smoothstep"):
        raise ValueError("shape must be linear or smoothstep")
    return text


def _species(text):
    key = text.strip().lower()
    if key not in SPECIES:
        raise ValueError(f"unknown species; known: {', '.join(sorted(SPECIES))}")
    return key


# key -> (parser, default); a default of None marks the key mandatory
SCHEMA = {
    "wire.bar_length_m": (_positive, None),
    "wire.lead_length_m": (_positive, 2e-3),
    "wire.current_a": (_real, None),
    "bias.x_t": (_real, 1e-4),
    "bias.y_t": (_real, None),
    "loop.radius_m": (_positive, None),
    "loop.wire_radius_m": (_positive, 5e-7),
    "loop.separation_m": (_positive, 1e-5),
    "loop.offset_x_m": (_real, 0.0),
    "loop.offset_y_m": (_real, 0.0),
    "loop.normal": (_vector, (0.0, 0.0, 1.0)),
    "loop.zbias_t": (_or_keyword(_real, HALF_FLUX), HALF_FLUX),
    "loop.n0": (_integer, 0),
    "loop.n1": (_integer, 1),
    "loop.critical_field_t": (_positive, 1e-2),
    "atom.species": (_species, "rb87"),
    "atom.mass_kg": (_positive, None),
    "atom.gf": (_real, None),
    "atom.mf": (_integer, None),
    "atom.scattering_length_m": (_positive, None),
    "condensate.n": (_count, 1000),
    "profile.half_width_m": (_positive, 3e-5),
    "profile.points": (_count, 601),
    "ramp.duration_s": (_positive, 0.1),
    "ramp.steps": (_count, 512),
    "ramp.start_separation_m": (_positive, 1e-4),
    "ramp.end_separation_m": (_positive, 1e-5),
    "ramp.shape": (_shape, "smoothstep"),
    "interferometry.t_s": (_positive, 1e-2),
    "interferometry.d_m": (_or_keyword(_positive, FROM_TRAP), 1e-5),
    "interferometry.sigma0_m": (_or_keyword(_positive, FROM_TRAP), 5e-7),
    "interferometry.n": (_count, 2),
    "interferometry.phi_rad": (_real, 0.0),
    "interferometry.shots": (_count, 20000),
    "interferometry.seed": (_integer, 0),
    "interferometry.sigma_phi_rad": (_real, 0.0),
    "interferometry.efficiency": (_positive, 1.0),
}
ALIASES = {"loop.zbias": "loop.zbias_t"}
_ATOM_EXPLICIT = ("atom.mass_kg", "atom.gf", "atom.mf", "atom.scattering_length_m")
_OPTIONAL = set(_ATOM_EXPLICIT)


@dataclass(frozen=True)
class SimulationConfig:
    values: dict
    source: str = ""

    def __getitem__(self, key):
        return self.values[key]

    def echo(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.values.items()}

    @property
    def atom(self) -> AtomSpecies:
        v = self.values
        if v.get("atom.mass_kg") is None:
            return SPECIES[v["atom.species"]]
        return AtomSpecies(v["atom.mass_kg"], v["atom.gf"], v["atom.mf"],
                           v["atom.scattering_length_m"], "custom")

    @property
    def zbias(self) -> float:
        z = self.values["loop.zbias_t"]
        return half_flux_bias(self.values["loop.radius_m"]) if z == HALF_FLUX else z


def parse_config(text: str, source: str = "<string>") -> SimulationConfig:
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'section.key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = ALIASES.get(key, key)
        if key not in SCHEMA:
            raise ConfigError("unknown key", key, lineno)
        if key in seen:
            raise ConfigError("duplicate key", key, lineno)
        if not value:
            raise ConfigError("missing value", key, lineno)
        try:
            seen[key] = SCHEMA[key][0](value)
        except ValueError as err:
            raise ConfigError(f"invalid value {value!r} ({err})", key, lineno) from None
    explicit = [k for k in _ATOM_EXPLICIT if k in seen]
    if explicit and len(explicit) != len(_ATOM_EXPLICIT):
        missing = next(k for k in _ATOM_EXPLICIT if k not in seen)
        raise ConfigError("explicit atom constants must all be given", missing)
    values = {}
    for key, (_, default) in SCHEMA.items():
        if key in seen:
            values[key] = seen[key]
        elif default is None and key not in _OPTIONAL:
            raise ConfigError("missing mandatory key", key)
        else:
            values[key] = default
    cfg = SimulationConfig(values, source)
    try:
        cfg.atom
    except ValueError as err:
        raise ConfigError(str(err), "atom.gf") from None
    if values["interferometry.efficiency"] > 1.0:
        raise ConfigError("efficiency must lie in (0, 1]", "interferometry.efficiency")
    if values["interferometry.sigma_phi_rad"] < 0:
        raise ConfigError("must be non-negative", "interferometry.sigma_phi_rad")
    if values["interferometry.n"] > 8:
        raise ConfigError("Monte-Carlo sampling supports at most 8 atoms", "interferometry.n")
    return cfg


def preset_names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("scatomchip").joinpath("presets").iterdir()
                  if p.name.endswith(".cfg"))


def load_config(path) -> SimulationConfig:
    """Read a config file, or a shipped preset when ``path`` names one."""
    p = Path(path)
    if not p.exists() and str(path) in preset_names():
        res = resources.files("scatomchip").joinpath("presets", f"{path}.cfg")
        return parse_config(res.read_text(), f"preset:{path}")
    try:
        text = p.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    return parse_config(text, str(p))

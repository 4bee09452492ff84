"""BEC in a Z-wire atom-chip trap coupled to a superconducting flux loop."""
__version__ = "0.1.0"

from .errors import SimulationError
from .kernels import BACKEND
from .magnetostatics import ChipGeometry, CurrentLoop, WireSegment, z_trap_geometry
from .trap import RB87, AtomSpecies, TrapCharacterization, characterize, find_minimum
from .fluxloop import FluxLoopState, QubitState, flux_state, half_flux_bias
from .condensate import CondensateSpec, branch_energetics, thomas_fermi_mu
from .entangler import EntangledSystemState, RampSchedule, run_protocol
from .interferometry import (ExpandedMode, InterferenceRecord, com_distribution, extract_period,
                             fringe_period, mode_pair, sample_shots)
from .config import SimulationConfig, load_config

__all__ = [
    "SimulationError", "BACKEND",
    "ChipGeometry", "CurrentLoop", "WireSegment", "z_trap_geometry",
    "RB87", "AtomSpecies", "TrapCharacterization", "characterize", "find_minimum",
    "FluxLoopState", "QubitState", "flux_state", "half_flux_bias",
    "CondensateSpec", "branch_energetics", "thomas_fermi_mu",
    "EntangledSystemState", "RampSchedule", "run_protocol",
    "ExpandedMode", "InterferenceRecord", "com_distribution", "extract_period",
    "fringe_period", "mode_pair", "sample_shots",
    "SimulationConfig", "load_config",
]

"""Physical constants (CODATA 2018), kept in one table so every run can echo them."""
import math

PLANCK = 6.62607015e-34         # J s, exact
HBAR = PLANCK / (2.0 * math.pi)  # J s, 1.054571817...e-34
E_CHARGE = 1.602176634e-19      # C
MU_B = 9.2740100783e-24         # J/T
MU_0 = 1.25663706212e-6         # T m / A
PHI_0 = PLANCK / (2.0 * E_CHARGE)  # Wb, 2.067833848e-15
RB87_MASS = 1.44316e-25         # kg
RB87_SCATTERING_LENGTH = 5.2e-9  # m, |F=2, mF=2>

#: distance below which an evaluation point counts as sitting on a filament
SINGULAR_GUARD = 1e-12          # m

CONSTANTS = {
    "hbar_J_s": HBAR,
    "h_J_s": PLANCK,
    "e_C": E_CHARGE,
    "mu_B_J_per_T": MU_B,
    "mu_0_T_m_per_A": MU_0,
    "Phi_0_Wb": PHI_0,
    "m_Rb87_kg": RB87_MASS,
    "a_s_Rb87_m": RB87_SCATTERING_LENGTH,
}

"""Shared parameter points for the tests."""

from mollow_cavity.quantum_core import GHZ, MHZ, SystemParams


def small_params(n_max=6, rabi_mhz=3.0, detuning_mhz=0.0, g_mhz=12.0, kappa_mhz=5.2, gamma_mhz=4.8):
    """Cheap parameter point for unit tests (lab frequencies near 8.778 GHz)."""
    omega_r = 8.778 * GHZ
    return SystemParams(
        omega_r=omega_r,
        omega_a=omega_r + detuning_mhz * MHZ,
        g=g_mhz * MHZ,
        kappa=kappa_mhz * MHZ,
        gamma1=gamma_mhz * MHZ,
        omega_drive=omega_r,
        rabi_omega=rabi_mhz * MHZ,
        n_max=n_max,
    )


def rel(a, b):
    return abs(a - b) / abs(b)


# acceptance lines collected during the run, echoed in the terminal summary
CRITERIA_LINES = []

"""Operator algebra for a two-level atom coupled to one truncated cavity mode.

Product states are ordered photon-major: the basis index of |n>|s> is
``2 * n + s`` with s = 0 (ground) or 1 (excited). Operators are returned as
``scipy.sparse.csr_matrix`` with complex128 entries; ``.toarray()`` gives the
dense form without loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, InvalidDimensionError, InvalidParameterError

TWO_PI = 2.0 * math.pi
MHZ = TWO_PI * 1e6  # rad/s per MHz of ordinary frequency
GHZ = TWO_PI * 1e9

RWA_RATIO_LIMIT = 1e-2


@dataclass(frozen=True)
class SystemParams:
    """Physical rates and frequencies, all angular (rad/s).

    Attributes:
        omega_r: cavity frequency.
        omega_a: atom transition frequency.
        g: atom-cavity coupling.
        kappa: cavity energy decay rate (Lorentzian FWHM).
        gamma1: atomic relaxation rate.
        omega_drive: drive frequency; the simulation frame rotates at it.
        rabi_omega: drive amplitude Omega applied to the cavity.
        n_max: Fock truncation; photon numbers 0 .. n_max - 1 are kept.
    """

    omega_r: float
    omega_a: float
    g: float
    kappa: float
    gamma1: float
    omega_drive: float
    rabi_omega: float
    n_max: int = 64

    def __post_init__(self):
        names = ("omega_r", "omega_a", "g", "kappa", "gamma1", "omega_drive", "rabi_omega")
        for name in names:
            value = getattr(self, name)
            if not np.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
            if value < 0:
                raise InvalidParameterError(f"{name} must be >= 0, got {value!r}")
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise InvalidDimensionError(f"n_max must be an integer >= 2, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))
        if self.omega_r <= 0:
            raise InvalidParameterError("omega_r must be positive")
        ratio = max(self.g, self.kappa, self.gamma1, self.rabi_omega) / self.omega_r
        if ratio >= RWA_RATIO_LIMIT:
            raise InvalidParameterError(
                f"rotating-wave approximation invalid: max rate / omega_r = {ratio:.3g} "
                f">= {RWA_RATIO_LIMIT}"
            )

    @property
    def delta_r(self) -> float:
        return self.omega_r - self.omega_drive

    @property
    def delta_a(self) -> float:
        return self.omega_a - self.omega_drive

    @property
    def dim(self) -> int:
        return 2 * self.n_max

    def replace(self, **changes) -> "SystemParams":
        from dataclasses import replace

        return replace(self, **changes)

    def as_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


def device_params(rabi_mhz: float = 25.2, n_max: int = 64) -> SystemParams:
    """Device values of the resonant atom-cavity sample, driven on resonance."""
    omega_r = 8.778 * GHZ
    return SystemParams(
        omega_r=omega_r,
        omega_a=omega_r,
        g=12.0 * MHZ,
        kappa=5.2 * MHZ,
        gamma1=4.8 * MHZ,
        omega_drive=omega_r,
        rabi_omega=rabi_mhz * MHZ,
        n_max=n_max,
    )


def fock_operators(n_max: int):
    """Return ``(a, a_dag, number)`` on the truncated Fock space of size n_max."""
    if int(n_max) != n_max or n_max < 2:
        raise InvalidDimensionError(f"n_max must be an integer >= 2, got {n_max!r}")
    n_max = int(n_max)
    amplitudes = np.sqrt(np.arange(1, n_max, dtype=float)).astype(complex)
    annihilate = sp.diags(amplitudes, 1, shape=(n_max, n_max), format="csr", dtype=complex)
    create = annihilate.conj().T.tocsr()
    number = (create @ annihilate).tocsr()
    return annihilate, create, number


def atom_operators():
    """Return ``(sigma_z, sigma_x, lower, raise_)`` for the two-level atom.

    Index 0 is the ground state, index 1 the excited state;
    ``sigma_z = |0><0| - |1><1|`` and ``lower = |0><1|``.
    """
    sigma_z = sp.csr_matrix(np.array([[1, 0], [0, -1]], dtype=complex))
    sigma_x = sp.csr_matrix(np.array([[0, 1], [1, 0]], dtype=complex))
    lower = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))
    raise_ = lower.conj().T.tocsr()
    return sigma_z, sigma_x, lower, raise_


def tensor(A, B) -> sp.csr_matrix:
    """Kronecker product; the left factor's index varies slowest."""
    A = sp.csr_matrix(A, dtype=complex)
    B = sp.csr_matrix(B, dtype=complex)
    if not (np.all(np.isfinite(A.data)) and np.all(np.isfinite(B.data))):
        raise InvalidParameterError("tensor operands must be finite")
    return sp.kron(A, B, format="csr")


@dataclass(frozen=True)
class SystemOperators:
    """Cavity and atom operators embedded in the product space."""

    a: sp.csr_matrix
    a_dag: sp.csr_matrix
    number: sp.csr_matrix
    lower: sp.csr_matrix
    raise_: sp.csr_matrix
    excited: sp.csr_matrix
    identity: sp.csr_matrix = field(repr=False)


def system_operators(n_max: int) -> SystemOperators:
    a, a_dag, number = fock_operators(n_max)
    _, _, lower, raise_ = atom_operators()
    id_c = sp.identity(n_max, dtype=complex, format="csr")
    id_a = sp.identity(2, dtype=complex, format="csr")
    return SystemOperators(
        a=tensor(a, id_a),
        a_dag=tensor(a_dag, id_a),
        number=tensor(number, id_a),
        lower=tensor(id_c, lower),
        raise_=tensor(id_c, raise_),
        excited=tensor(id_c, raise_ @ lower),
        identity=sp.identity(2 * n_max, dtype=complex, format="csr"),
    )


def build_hamiltonian_rwa(p: SystemParams) -> sp.csr_matrix:
    """Driven Jaynes-Cummings Hamiltonian (divided by hbar) in the drive frame.

    H = d_r a'a + d_a |1><1| + g (a' s- + a s+) + (Omega/2)(a + a'),
    with d_r, d_a the cavity and atom detunings from the drive.
    """
    values = [p.delta_r, p.delta_a, p.g, p.rabi_omega]
    if not all(np.isfinite(v) for v in values):
        raise InvalidParameterError("Hamiltonian parameters must be finite")
    ops = system_operators(p.n_max)
    H = (
        p.delta_r * ops.number
        + p.delta_a * ops.excited
        + p.g * (ops.a_dag @ ops.lower + ops.a @ ops.raise_)
        + 0.5 * p.rabi_omega * (ops.a + ops.a_dag)
    )
    H = H.tocsr()
    H.eliminate_zeros()
    return H


@dataclass(frozen=True)
class DressedState:
    """Eigenstate |n, sign> of the resonant, undriven atom-cavity system.

    The '-' state carries the global phase (|n-1>|1> - |n>|0>)/sqrt(2); with it
    the four relaxation matrix elements come out as +1/2, -1/2, -1/2, +1/2 for
    (+,+), (-,-), (+,-), (-,+).
    """

    n: int
    sign: int
    n_max: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise DomainError(f"sign must be +1 or -1, got {self.sign!r}")
        if self.n < 1:
            raise DomainError(f"dressed states need n >= 1, got {self.n}")
        if self.n > self.n_max - 1:
            raise DomainError(f"n = {self.n} outside truncation n_max = {self.n_max}")

    @property
    def vector(self) -> np.ndarray:
        v = np.zeros(2 * self.n_max, dtype=complex)
        amp = 1.0 / math.sqrt(2.0)
        v[2 * (self.n - 1) + 1] = amp
        v[2 * self.n] = amp if self.sign > 0 else -amp
        return v


def _sign_value(sign) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise DomainError(f"unknown dressed-state sign {sign!r}")


def dressed_energy(n: int, sign, p: SystemParams) -> float:
    """Lab-frame energy / hbar of |n, sign> at resonance: n*omega_a +- g*sqrt(n)."""
    if n < 1:
        raise DomainError(f"dressed energy defined for n >= 1, got {n}")
    return n * p.omega_a + _sign_value(sign) * p.g * math.sqrt(n)


def transition_frequency(upper: DressedState, lower: DressedState, p: SystemParams) -> float:
    return dressed_energy(upper.n, upper.sign, p) - dressed_energy(lower.n, lower.sign, p)


_MATRIX_ELEMENTS = {(1, 1): 0.5, (-1, -1): -0.5, (1, -1): -0.5, (-1, 1): 0.5}


def transition_matrix_element(from_state: DressedState, to_state: DressedState) -> float:
    """<to| s- |from> for relaxation through the atom between adjacent manifolds."""
    if to_state.n != from_state.n - 1:
        raise DomainError(
            f"relaxation connects n -> n-1 only, got {from_state.n} -> {to_state.n}"
        )
    return _MATRIX_ELEMENTS[(from_state.sign, to_state.sign)]

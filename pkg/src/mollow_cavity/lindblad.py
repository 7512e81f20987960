"""Liouvillian construction, steady state and time propagation.

Density matrices are vectorized row-major, ``vec(rho) = rho.ravel()``, so that
``vec(A rho B) = kron(A, B.T) @ vec(rho)``. Dissipators follow the convention
``D(A) rho = 2 A rho A' - A'A rho - rho A'A`` and enter with the rate given
alongside each jump operator.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .errors import (
    ConvergenceError,
    InvalidDimensionError,
    InvalidParameterError,
    NoUniqueSteadyStateError,
)
from .quantum_core import SystemParams, build_hamiltonian_rwa, system_operators

log = logging.getLogger(__name__)

# unit-roundoff target for each Taylor step
TAYLOR_TOL = 2.0**-53
TAYLOR_THETA = 4.0
TAYLOR_MAX_TERMS = 80


@dataclass(frozen=True)
class DensityMatrix:
    """Validated density matrix of the atom-cavity system."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidDimensionError(f"density matrix must be square, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        return float(np.linalg.norm(self.matrix - self.matrix.conj().T))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def check(self, trace_tol=1e-10, herm_tol=1e-10, eig_tol=1e-8) -> "DensityMatrix":
        """Raise InvalidParameterError unless the state is physical."""
        if abs(self.trace - 1.0) > trace_tol:
            raise InvalidParameterError(f"trace {self.trace} differs from 1")
        if self.hermiticity_error() > herm_tol:
            raise InvalidParameterError("density matrix is not Hermitian")
        if self.min_eigenvalue() < -eig_tol:
            raise InvalidParameterError("density matrix has negative eigenvalues")
        return self

    def vec(self) -> np.ndarray:
        return self.matrix.ravel().copy()

    @classmethod
    def from_vec(cls, v, normalize=False) -> "DensityMatrix":
        v = np.asarray(v, dtype=complex)
        d = math.isqrt(v.size)
        if d * d != v.size:
            raise InvalidDimensionError(f"vector of length {v.size} is not a vectorized square matrix")
        m = v.reshape(d, d)
        if normalize:
            m = 0.5 * (m + m.conj().T)
            m = m / np.trace(m).real
        return cls(m)


@dataclass
class Liouvillian:
    """Sparse superoperator ``L`` with ``d vec(rho)/dt = L vec(rho)``."""

    superoperator: sp.csr_matrix
    dissipators: list = field(default_factory=list)
    hamiltonian: sp.csr_matrix | None = field(default=None, repr=False)

    def __post_init__(self):
        self.superoperator = sp.csr_matrix(self.superoperator, dtype=complex)
        self.superoperator.sort_indices()
        self._norm1 = None

    @property
    def dim(self) -> int:
        """Hilbert-space dimension d (the superoperator is d^2 x d^2)."""
        return math.isqrt(self.superoperator.shape[0])

    @property
    def norm1(self) -> float:
        if self._norm1 is None:
            self._norm1 = float(spla.norm(self.superoperator, 1))
        return self._norm1

    def apply(self, v) -> np.ndarray:
        return self.superoperator @ np.asarray(v, dtype=complex)

    def trace_defect(self) -> float:
        """Largest entry of vec(I)^T L; zero for a trace-preserving generator."""
        row = trace_row(self.dim) @ self.superoperator
        return float(np.abs(row).max())


def trace_row(d: int) -> np.ndarray:
    """Row vector t with ``t @ vec(rho) == Tr(rho)``."""
    return np.eye(d, dtype=complex).ravel()


def observable_row(op) -> np.ndarray:
    """Row vector o with ``o @ vec(rho) == Tr(op @ rho)``."""
    op = op.toarray() if sp.issparse(op) else np.asarray(op)
    return np.asarray(op, dtype=complex).T.ravel().copy()


def _check_square(name, M):
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidDimensionError(f"{name} must be square, got shape {M.shape}")


def build_liouvillian(H, dissipators=()) -> Liouvillian:
    """Assemble ``-i[H, .] + sum_k rate_k D(A_k)`` as a sparse superoperator.

    Args:
        H: Hamiltonian divided by hbar (rad/s), dense or sparse, Hermitian.
        dissipators: iterable of ``(A, rate)`` pairs with rate >= 0.
    """
    H = sp.csr_matrix(H, dtype=complex)
    _check_square("H", H)
    d = H.shape[0]
    herm_err = spla.norm(H - H.conj().T)
    scale = max(spla.norm(H), 1.0)
    if herm_err > 1e-12 * scale:
        raise InvalidParameterError(f"H is not Hermitian (defect {herm_err:.3g})")
    ident = sp.identity(d, dtype=complex, format="csr")
    L = -1j * (sp.kron(H, ident) - sp.kron(ident, H.T))
    kept = []
    for A, rate in dissipators:
        A = sp.csr_matrix(A, dtype=complex)
        if A.shape != (d, d):
            raise InvalidDimensionError(f"jump operator shape {A.shape} does not match H {H.shape}")
        if not np.isfinite(rate) or rate < 0:
            raise InvalidParameterError(f"dissipation rate must be finite and >= 0, got {rate!r}")
        if rate == 0:
            kept.append((A, 0.0))
            continue
        AdA = (A.conj().T @ A).tocsr()
        L = L + rate * (
            2.0 * sp.kron(A, A.conj()) - sp.kron(AdA, ident) - sp.kron(ident, AdA.T)
        )
        kept.append((A, float(rate)))
    L = sp.csr_matrix(L)
    L.eliminate_zeros()
    return Liouvillian(L, kept, H)


def default_dissipators(p: SystemParams):
    """Atomic relaxation at gamma1 and cavity loss at kappa (energy decay rates)."""
    ops = system_operators(p.n_max)
    return [(ops.lower, 0.5 * p.gamma1), (ops.a, 0.5 * p.kappa)]


def system_liouvillian(p: SystemParams) -> Liouvillian:
    return build_liouvillian(build_hamiltonian_rwa(p), default_dissipators(p))


def _bordered(M: sp.spmatrix, d: int) -> sp.csc_matrix:
    """Replace the first row (the |0><0| equation) of M by the trace functional."""
    M = sp.csr_matrix(M, copy=True)
    M.data[M.indptr[0]:M.indptr[1]] = 0.0
    border = sp.csr_matrix(
        (np.ones(d, dtype=complex), (np.zeros(d, dtype=int), np.arange(d) * (d + 1))),
        shape=M.shape,
    )
    M = M + border
    M.eliminate_zeros()
    return M.tocsc()


def steady_state(L: Liouvillian, rel_tol: float = 1e-10) -> DensityMatrix:
    """Stationary state from one sparse LU solve with the trace constraint."""
    d = L.dim
    if not any(rate > 0 for _, rate in L.dissipators):
        raise NoUniqueSteadyStateError("no dissipation: stationary state is not unique")
    M = _bordered(L.superoperator, d)
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    try:
        lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A")
        x = lu.solve(rhs)
    except RuntimeError as exc:  # exactly singular
        raise NoUniqueSteadyStateError(f"steady-state solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NoUniqueSteadyStateError("steady-state solve produced non-finite values")
    rho = x.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    residual = np.linalg.norm(L.apply(rho.ravel()))
    if residual > rel_tol * L.norm1:
        raise NoUniqueSteadyStateError(
            f"steady-state residual {residual:.3g} exceeds {rel_tol:g} * |L| = {rel_tol * L.norm1:.3g}"
        )
    log.debug("steady state: d=%d residual=%.3g |L|=%.3g", d, residual, L.norm1)
    return DensityMatrix(rho)


def steady_state_residual(L: Liouvillian, rho: DensityMatrix) -> float:
    return float(np.linalg.norm(L.apply(rho.vec())))


def _substeps(L: Liouvillian, dt: float) -> int:
    return max(1, math.ceil(L.norm1 * dt / TAYLOR_THETA))


def trajectory(L: Liouvillian, v0, obs_row, dt: float, n_steps: int, backend=None):
    """Sample ``obs_row @ exp(k dt L) v0`` for k = 0..n_steps.

    Returns ``(samples, v_final)``.
    """
    if dt < 0:
        raise InvalidParameterError("time step must be >= 0")
    S = L.superoperator
    v0 = np.asarray(v0, dtype=complex)
    if v0.shape != (S.shape[0],):
        raise InvalidDimensionError(f"state length {v0.shape} does not match generator {S.shape}")
    if dt == 0 or n_steps == 0:
        obs_row = np.asarray(obs_row, dtype=complex)
        return np.full(n_steps + 1, obs_row @ v0), v0.copy()
    samples, v, matvecs, worst = _kernels.taylor_trajectory(
        S.indptr, S.indices, S.data, v0, obs_row, float(dt), int(n_steps),
        _substeps(L, dt), TAYLOR_TOL, TAYLOR_MAX_TERMS, backend=backend,
    )
    if worst < 0:
        raise ConvergenceError(
            f"Taylor series did not converge within {TAYLOR_MAX_TERMS} terms"
        )
    log.debug("trajectory: %d steps, %d matvecs, max terms %d", n_steps, matvecs, worst)
    return samples, v


def propagate(L: Liouvillian, v, t: float, backend=None) -> np.ndarray:
    """Return ``exp(L t) v`` (matrix-free truncated Taylor series with substepping)."""
    if t < 0:
        raise InvalidParameterError(f"propagation time must be >= 0, got {t}")
    v = np.asarray(v, dtype=complex)
    if t == 0:
        return v.copy()
    _, out = trajectory(L, v, np.zeros_like(v), t, 1, backend=backend)
    return out


def expectation(op, rho) -> complex:
    """Tr(op rho)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if op.shape != m.shape:
        raise InvalidDimensionError(f"operator {op.shape} and state {m.shape} differ in dimension")
    if sp.issparse(op):
        return complex((op.multiply(m.T)).sum())
    return complex(np.einsum("ij,ji->", np.asarray(op), m))

"""Emission spectrum of the atom from the quantum regression theorem.

The first-order correlation G1(tau) = <s+(t + tau) s-(t)> in the stationary
limit is obtained as ``Tr[s+ exp(L tau)(s- rho_ss)]``. Its constant part
<s+><s->, the elastically scattered light, is kept as a separate delta weight
at the drive frequency; the psd array holds only the incoherent part:

    psd(w) = (hbar w_a Gamma1 / 2 pi) * int_{-inf}^{inf} [G1(tau) - <s+><s->] e^{-i(w - w_d) tau} dtau

With this normalization the incoherent integral plus the coherent weight
``Gamma1 |<s->|^2`` equals ``Gamma1 <s+ s->``. Powers are in units of hbar*omega_a.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import bernoulli

from .errors import InvalidDimensionError, InvalidParameterError, WindowTooShortError
from .lindblad import (
    DensityMatrix,
    Liouvillian,
    _bordered,
    expectation,
    observable_row,
    steady_state,
    system_liouvillian,
    trajectory,
)
from .quantum_core import MHZ, TWO_PI, SystemParams, system_operators

log = logging.getLogger(__name__)

DEFAULT_SPAN = 250.0 * MHZ
DEFAULT_POINTS = 801
DEFAULT_RBW = 1.0 * MHZ
# Euler-Maclaurin endpoint terms used to correct the trapezoid sum
EM_TERMS = 5
_BERNOULLI = bernoulli(2 * EM_TERMS)


@dataclass
class CorrelationTrace:
    """G1 sampled on a uniform delay grid.

    ``derivatives[j]`` holds the j-th delay derivative at tau = 0 of the
    incoherent part G1 - asymptote; they feed the endpoint correction of the
    Fourier quadrature.
    """

    tau: np.ndarray
    values: np.ndarray
    asymptote: complex
    derivatives: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    @property
    def dt(self) -> float:
        return float(self.tau[1] - self.tau[0])

    @property
    def incoherent(self) -> np.ndarray:
        return self.values - self.asymptote

    def decay_level(self, tail_fraction=0.05) -> float:
        """Largest |G1 - asymptote| over the last part of the window, relative to tau = 0."""
        inc = self.incoherent
        start = max(1, int(len(inc) * (1 - tail_fraction)))
        ref = abs(inc[0])
        if ref == 0:
            return 0.0
        return float(np.abs(inc[start:]).max() / ref)


@dataclass
class SpectrumTrace:
    """Power spectral density on an absolute angular-frequency grid.

    Attributes:
        omega: strictly increasing grid (rad/s, lab frame).
        psd: incoherent power per unit angular frequency (hbar*omega_a units).
        coherent_weight: integrated power of the elastic delta at omega_drive.
        params: parameters of the run, if any.
        method: "fft" (time domain), "resolvent", "analytic" or "external".
        failed: per-point failure mask (resolvent solver breakdowns).
        meta: scalar diagnostics (steady-state populations and the like).
    """

    omega: np.ndarray
    psd: np.ndarray
    coherent_weight: float = 0.0
    params: SystemParams | None = None
    method: str = "external"
    failed: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.psd = np.asarray(self.psd, dtype=float)
        if self.omega.shape != self.psd.shape or self.omega.ndim != 1:
            raise InvalidDimensionError("frequency grid and psd must be 1-D arrays of equal length")
        if self.omega.size > 1 and np.any(np.diff(self.omega) <= 0):
            raise InvalidParameterError("frequency grid must be strictly increasing")
        if self.failed is None:
            self.failed = np.zeros(self.omega.shape, dtype=bool)

    @property
    def omega_drive(self) -> float:
        if self.params is not None:
            return self.params.omega_drive
        return float(self.meta.get("omega_drive", 0.5 * (self.omega[0] + self.omega[-1])))

    def incoherent_power(self) -> float:
        ok = ~self.failed
        return float(np.trapezoid(self.psd[ok], self.omega[ok]))

    def total_power(self) -> float:
        return self.incoherent_power() + self.coherent_weight


@dataclass
class FrequencyTrace:
    """Spectrum over ordinary frequency: S(f) = 2 pi S(omega)."""

    freq: np.ndarray
    psd: np.ndarray
    coherent_weight: float = 0.0

    def total_power(self) -> float:
        return float(np.trapezoid(self.psd, self.freq)) + self.coherent_weight


def default_grid(p: SystemParams, span: float = DEFAULT_SPAN, points: int = DEFAULT_POINTS) -> np.ndarray:
    return p.omega_a + np.linspace(-span, span, points)


def _atom_lower(dim: int) -> sp.csr_matrix:
    if dim % 2:
        raise InvalidDimensionError(f"dimension {dim} is not atom x cavity")
    lower = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))
    return sp.kron(sp.identity(dim // 2, dtype=complex), lower, format="csr")


def _min_energy_rate(L: Liouvillian) -> float:
    rates = [2.0 * r for _, r in L.dissipators if r > 0]
    if not rates:
        raise InvalidParameterError("Liouvillian has no dissipation; correlations never decay")
    return min(rates)


def _regression_source(L: Liouvillian, rho_ss: DensityMatrix, lower):
    """Return (x0, obs, asymptote): x0 = s- rho - <s-> rho, obs pairs with s+."""
    rho = rho_ss.matrix
    lower_mean = expectation(lower, rho_ss)
    raise_mean = np.conj(lower_mean)
    x0 = (lower @ rho) - lower_mean * rho
    obs = observable_row(lower.conj().T)
    return np.asarray(x0).ravel(), obs, raise_mean * lower_mean


def correlation_g1(
    L: Liouvillian,
    rho_ss: DensityMatrix,
    tau_max: float,
    n_tau: int,
    lower=None,
    auto_extend: bool = True,
    decay_tol: float = 1e-9,
    max_extend: float = 16.0,
    backend=None,
) -> CorrelationTrace:
    """Stationary G1(tau) = Tr[s+ exp(L tau)(s- rho_ss)] on a uniform grid.

    The window starts at ``tau_max`` (at least 20 / slowest energy decay rate)
    and, with ``auto_extend``, grows in 25 % increments until the incoherent part
    falls below ``decay_tol`` of its initial value, up to ``max_extend * tau_max``.
    """
    if n_tau < 2:
        raise InvalidParameterError("need at least two delay points")
    min_window = 20.0 / _min_energy_rate(L)
    if tau_max < min_window * (1 - 1e-12):
        raise InvalidParameterError(
            f"tau_max = {tau_max:.3g} s shorter than 20 / min decay rate = {min_window:.3g} s"
        )
    lower = _atom_lower(L.dim) if lower is None else sp.csr_matrix(lower, dtype=complex)
    x0, obs, asym = _regression_source(L, rho_ss, lower)
    dt = tau_max / (n_tau - 1)

    samples, v = trajectory(L, x0, obs, dt, n_tau - 1, backend=backend)
    chunks = [samples]
    total = n_tau - 1
    ref = abs(samples[0])
    limit = int(math.ceil(max_extend * (n_tau - 1)))
    step = max(1, (n_tau - 1) // 4)

    def decayed(tail):
        return ref == 0 or np.abs(tail).max() <= decay_tol * ref

    tail_len = max(2, (n_tau - 1) // 20)
    while auto_extend and not decayed(np.concatenate(chunks)[-tail_len:]) and total < limit:
        more, v = trajectory(L, v, obs, dt, step, backend=backend)
        chunks.append(more[1:])
        total += step
    values = np.concatenate(chunks)
    trace = CorrelationTrace(
        tau=dt * np.arange(values.size),
        values=values + asym,
        asymptote=complex(asym),
        derivatives=_derivatives_at_zero(L, x0, obs, 2 * EM_TERMS),
    )
    log.debug("G1: %d delays, window %.3g s, decay %.2e", values.size, trace.tau[-1], trace.decay_level())
    return trace


def _derivatives_at_zero(L: Liouvillian, x0, obs, count):
    out = np.empty(count, dtype=complex)
    w = np.asarray(x0, dtype=complex)
    for j in range(count):
        out[j] = obs @ w
        w = L.apply(w)
    return out


def _fourier_half_line(c: CorrelationTrace, detuning: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """int_0^tau_max (G1 - asymptote) e^{-i d tau} dtau for each detuning d.

    Trapezoid rule plus Euler-Maclaurin endpoint terms at tau = 0, using the
    exact delay derivatives; the far end is assumed decayed.
    """
    f = c.incoherent
    h = c.dt
    detuning = np.asarray(detuning, dtype=float)
    acc = np.zeros(detuning.shape, dtype=complex)
    for start in range(0, f.size, chunk):
        stop = min(f.size, start + chunk)
        phase = np.exp(-1j * np.outer(detuning, c.tau[start:stop]))
        acc += phase @ f[start:stop]
    acc -= 0.5 * f[0]
    acc -= 0.5 * f[-1] * np.exp(-1j * detuning * c.tau[-1])
    total = h * acc
    ders = c.derivatives
    z = -1j * detuning
    for k in range(1, EM_TERMS + 1):
        m = 2 * k - 1
        if m >= ders.size:
            break
        dm = sum(math.comb(m, j) * ders[j] * z ** (m - j) for j in range(m + 1))
        total = total + _BERNOULLI[2 * k] * h ** (2 * k) / math.factorial(2 * k) * dm
    return total


def spectrum_from_correlation(
    c: CorrelationTrace,
    p: SystemParams,
    omega: np.ndarray | None = None,
    decay_required: float = 1e-4,
) -> SpectrumTrace:
    """Fourier-transform a correlation trace into a SpectrumTrace."""
    omega = default_grid(p) if omega is None else np.asarray(omega, dtype=float)
    level = c.decay_level()
    if level > decay_required:
        raise WindowTooShortError(
            f"correlation only decayed to {level:.2e} of its initial value (need {decay_required:g})"
        )
    half = _fourier_half_line(c, omega - p.omega_drive)
    psd = (p.gamma1 / math.pi) * half.real
    return SpectrumTrace(
        omega=omega,
        psd=psd,
        coherent_weight=p.gamma1 * abs(c.asymptote),
        params=p,
        method="fft",
        meta={"tau_max": float(c.tau[-1]), "n_tau": int(c.tau.size), "decay_level": level},
    )


def spectrum_resolvent(
    L: Liouvillian,
    rho_ss: DensityMatrix,
    p: SystemParams,
    omega: np.ndarray | None = None,
    lower=None,
) -> SpectrumTrace:
    """Spectrum from ``-(L - i d)^{-1}`` applied to the incoherent source, point by point.

    Each frequency needs one sparse LU solve of the trace-bordered shifted
    Liouvillian; a failed solve marks that point as failed (psd = NaN).
    """
    omega = default_grid(p) if omega is None else np.asarray(omega, dtype=float)
    lower = _atom_lower(L.dim) if lower is None else sp.csr_matrix(lower, dtype=complex)
    x0, obs, asym = _regression_source(L, rho_ss, lower)
    d = L.dim
    D = d * d
    base = _bordered(L.superoperator, d)
    diag = np.ones(D, dtype=complex)
    diag[0] = 0.0
    shift = sp.diags(diag, 0, format="csc")
    rhs = -x0.copy()
    rhs[0] = 0.0
    psd = np.empty(omega.size)
    failed = np.zeros(omega.size, dtype=bool)
    for i, w in enumerate(omega - p.omega_drive):
        try:
            lu = spla.splu((base - 1j * w * shift).tocsc(), permc_spec="MMD_AT_PLUS_A")
            x = lu.solve(rhs)
            if not np.all(np.isfinite(x)):
                raise RuntimeError("non-finite solution")
            psd[i] = (p.gamma1 / math.pi) * (obs @ x).real
        except RuntimeError as exc:
            log.warning("resolvent solve failed at detuning %.6g rad/s: %s", w, exc)
            psd[i] = np.nan
            failed[i] = True
    return SpectrumTrace(
        omega=omega,
        psd=psd,
        coherent_weight=p.gamma1 * abs(asym),
        params=p,
        method="resolvent",
        failed=failed,
    )


def as_frequency_density(s: SpectrumTrace) -> FrequencyTrace:
    return FrequencyTrace(freq=s.omega / TWO_PI, psd=s.psd * TWO_PI, coherent_weight=s.coherent_weight)


def as_angular_density(f: FrequencyTrace, **kwargs) -> SpectrumTrace:
    return SpectrumTrace(
        omega=f.freq * TWO_PI, psd=f.psd / TWO_PI, coherent_weight=f.coherent_weight, **kwargs
    )


def coherent_line(omega, weight: float, center: float, rbw: float = DEFAULT_RBW) -> np.ndarray:
    """The elastic delta re-broadened to a unit-area Lorentzian of FWHM ``rbw``."""
    half = 0.5 * rbw
    return weight * (half / math.pi) / ((np.asarray(omega) - center) ** 2 + half**2)


def with_coherent_line(s: SpectrumTrace, rbw: float = DEFAULT_RBW) -> np.ndarray:
    """psd with the coherent delta added back as a resolution-limited line."""
    return s.psd + coherent_line(s.omega, s.coherent_weight, s.omega_drive, rbw)


def steady_state_summary(p: SystemParams, rho: DensityMatrix) -> dict:
    ops = system_operators(p.n_max)
    lower_mean = expectation(ops.lower, rho)
    return {
        "mean_n": expectation(ops.number, rho).real,
        "excited_population": expectation(ops.excited, rho).real,
        "lower_mean_re": lower_mean.real,
        "lower_mean_im": lower_mean.imag,
    }


def fft_time_step(p: SystemParams, omega: np.ndarray) -> float:
    """Delay step resolving the widest detuning on the grid (|d dt| <= 0.8)."""
    reach = max(np.abs(np.asarray(omega) - p.omega_drive).max(), 2 * p.g, p.rabi_omega, p.gamma1)
    return 0.8 / reach


def compute_spectrum(
    p: SystemParams,
    omega: np.ndarray | None = None,
    method: str = "fft",
    backend=None,
    decay_tol: float = 1e-9,
) -> SpectrumTrace:
    """Steady state plus spectrum for one parameter point."""
    omega = default_grid(p) if omega is None else np.asarray(omega, dtype=float)
    L = system_liouvillian(p)
    rho = steady_state(L)
    if method == "fft":
        tau_max = 20.0 / min(p.kappa, p.gamma1)
        dt = fft_time_step(p, omega)
        n_tau = int(math.ceil(tau_max / dt)) + 1
        tau_max = dt * (n_tau - 1)
        c = correlation_g1(L, rho, tau_max, n_tau, decay_tol=decay_tol, backend=backend)
        trace = spectrum_from_correlation(c, p, omega)
    elif method == "resolvent":
        trace = spectrum_resolvent(L, rho, p, omega)
    else:
        raise InvalidParameterError(f"unknown spectrum method {method!r}")
    trace.meta.update(steady_state_summary(p, rho))
    return trace

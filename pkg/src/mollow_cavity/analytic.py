"""Closed-form emission spectra.

Dressed-state triplet for an atom strongly coupled to a coherently driven
cavity (Lorentzian centre of width Gamma1 plus Gaussian sidebands of standard
deviation g at +-2 g sqrt(<n>)), the standard Mollow triplet of a driven atom
in open space, and the photon-number distributions behind the sideband shape.

All spectral densities are per unit angular frequency in units of hbar*omega_a.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidParameterError

SQRT_2PI = math.sqrt(2.0 * math.pi)
LARGE_N_WARNING = 5.0


@dataclass(frozen=True)
class AnalyticTripletParams:
    omega_a: float
    gamma1: float
    g: float
    mean_n: float

    def __post_init__(self):
        if self.mean_n <= 0:
            raise InvalidParameterError(f"mean photon number must be > 0, got {self.mean_n}")
        if self.g <= 0 or self.gamma1 <= 0:
            raise InvalidParameterError("g and gamma1 must be positive")
        if self.mean_n < LARGE_N_WARNING:
            warnings.warn(
                f"<n> = {self.mean_n:g} is small; the Gaussian sideband model assumes <n> >> 1",
                stacklevel=2,
            )

    @property
    def omega_s(self) -> float:
        """Sideband offset 2 g sqrt(<n>)."""
        return 2.0 * self.g * math.sqrt(self.mean_n)


@dataclass(frozen=True)
class MollowParams:
    omega_a: float
    gamma1: float
    rabi: float

    @property
    def gamma_s(self) -> float:
        """Sideband half width 3 Gamma1 / 4."""
        return 0.75 * self.gamma1


def _sign(sign) -> int:
    if sign in (1, "+"):
        return 1
    if sign in (-1, "-"):
        return -1
    raise InvalidParameterError(f"sign must be +1 or -1, got {sign!r}")


def central_peak(params, omega):
    """Lorentzian centre line, FWHM Gamma1, integrated power Gamma1/4."""
    g1 = params.gamma1
    delta = np.asarray(omega, dtype=float) - params.omega_a
    return (1.0 / (2 * math.pi)) * (g1 / 4.0) * g1 / (delta**2 + (g1 / 2.0) ** 2)


def sideband_frequency_distribution(params: AnalyticTripletParams, omega, sign=1):
    """Photon-number distribution mapped onto sideband frequency (unit area)."""
    center = params.omega_a + _sign(sign) * params.omega_s
    x = (np.asarray(omega, dtype=float) - center) / params.g
    return np.exp(-0.5 * x**2) / (SQRT_2PI * params.g)


def side_peak(params: AnalyticTripletParams, omega, sign=1):
    """Gaussian sideband at omega_a + sign * omega_s, integrated power Gamma1/8.

    ``sign=+1`` is the upper sideband (|n,+> -> |n-1,-> transitions).
    """
    return (params.gamma1 / 8.0) * sideband_frequency_distribution(params, omega, sign)


def total_triplet(params: AnalyticTripletParams, omega):
    return central_peak(params, omega) + side_peak(params, omega, 1) + side_peak(params, omega, -1)


def mollow_triplet(params: MollowParams, omega):
    """Standard Mollow triplet of a resonantly driven atom, total power Gamma1/4."""
    g1 = params.gamma1
    gs = params.gamma_s
    d = np.asarray(omega, dtype=float) - params.omega_a
    bracket = (
        gs / ((d + params.rabi) ** 2 + gs**2)
        + g1 / (d**2 + (g1 / 2.0) ** 2)
        + gs / ((d - params.rabi) ** 2 + gs**2)
    )
    return (1.0 / (2 * math.pi)) * (g1 / 8.0) * bracket


def photon_distribution(mean_n: float, n):
    """Gaussian approximation of the coherent-state Poisson distribution."""
    if mean_n <= 0:
        raise InvalidParameterError(f"mean photon number must be > 0, got {mean_n}")
    n = np.asarray(n, dtype=float)
    return np.exp(-((n - mean_n) ** 2) / (2.0 * mean_n)) / math.sqrt(2 * math.pi * mean_n)


def _integrate_line(func, origin, offsets, scale):
    """Integral of ``func`` over the real line.

    Works in the scaled detuning u = (omega - origin) / scale so that quad
    sees O(1) abscissae, and splits the line midway between the features at
    ``origin + offsets``.
    """
    points = sorted(set(float(c) / scale for c in offsets))

    def f(u):
        return float(func(origin + scale * u)) * scale

    edges = [points[0] - 50.0]
    edges += [0.5 * (a + b) for a, b in zip(points, points[1:])]
    edges.append(points[-1] + 50.0)
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    total = integrate.quad(f, -np.inf, edges[0], **opts)[0]
    for a, b, c in zip(edges, edges[1:], points):
        total += integrate.quad(f, a, b, points=[c], **opts)[0]
    total += integrate.quad(f, edges[-1], np.inf, **opts)[0]
    return total


def triplet_power(params: AnalyticTripletParams) -> float:
    """Adaptive-quadrature integral of the dressed-state triplet over all frequencies."""
    return _integrate_line(
        lambda w: total_triplet(params, w),
        params.omega_a,
        [-params.omega_s, 0.0, params.omega_s],
        params.gamma1,
    )


def mollow_power(params: MollowParams) -> float:
    """Adaptive-quadrature integral of the Mollow triplet over all frequencies."""
    return _integrate_line(
        lambda w: mollow_triplet(params, w),
        params.omega_a,
        [-params.rabi, 0.0, params.rabi],
        params.gamma1,
    )


def analytic_trace(params, omega, kind="triplet"):
    """Wrap a closed-form spectrum as a SpectrumTrace (no coherent part)."""
    from .spectrum import SpectrumTrace

    func = {"triplet": total_triplet, "mollow": mollow_triplet}[kind]
    return SpectrumTrace(
        omega=np.asarray(omega, dtype=float),
        psd=func(params, omega),
        coherent_weight=0.0,
        method="analytic",
        meta={"omega_drive": params.omega_a, "model": kind},
    )

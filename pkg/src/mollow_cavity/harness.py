"""Drive calibration, power sweeps and sideband-width reports."""

from __future__ import annotations

import functools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import hbar
from scipy.optimize import brentq

from .errors import InvalidParameterError, MollowCavityError, SweepError
from .fitting import TripletMetrics, triplet_metrics
from .lindblad import expectation, steady_state, system_liouvillian
from .quantum_core import RWA_RATIO_LIMIT, SystemParams, system_operators
from .spectrum import DEFAULT_RBW, SpectrumTrace, compute_spectrum, default_grid

log = logging.getLogger(__name__)

# largest Hilbert dimension a sweep point may use before it is skipped
MAX_HILBERT_DIM = 256
WORKERS_ENV = "MOLLOW_CAVITY_WORKERS"


@dataclass(frozen=True)
class DriveCalibration:
    """Input power converted to an intracavity photon number and drive strength.

    ``mean_n = P / (hbar omega_r kappa')`` with ``kappa' = (kappa + Gamma1) / 2``
    and ``rabi_omega = kappa' sqrt(mean_n)``.
    """

    power_dbm: float
    power_watts: float
    kappa_prime: float
    mean_n: float
    rabi_omega: float


def dbm_to_watts(power_dbm: float) -> float:
    return 10.0 ** ((power_dbm - 30.0) / 10.0)


def calibrate(power_dbm: float, p: SystemParams) -> DriveCalibration:
    """Calibration for one input power; ``-inf`` dBm is the undriven system."""
    if p.kappa <= 0 or p.gamma1 <= 0:
        raise InvalidParameterError("calibration needs kappa > 0 and gamma1 > 0")
    if math.isnan(power_dbm) or power_dbm == math.inf:
        raise InvalidParameterError(f"power must be finite or -inf dBm, got {power_dbm}")
    watts = 0.0 if power_dbm == -math.inf else dbm_to_watts(power_dbm)
    kp = 0.5 * (p.kappa + p.gamma1)
    n = watts / (hbar * p.omega_r * kp)
    return DriveCalibration(power_dbm, watts, kp, n, kp * math.sqrt(n))


def mean_n_from_sidebands(offset: float, g: float) -> float:
    """Photon number implied by a sideband offset, (offset / 2g)^2."""
    if offset <= 0 or g <= 0:
        raise InvalidParameterError("offset and g must be positive")
    return (offset / (2.0 * g)) ** 2


def simulated_mean_n(p: SystemParams) -> float:
    rho = steady_state(system_liouvillian(p))
    return expectation(system_operators(p.n_max).number, rho).real


def drive_for_mean_n(p: SystemParams, target: float, bracket=None, xtol=1e-6) -> float:
    """Drive strength at which the simulated steady state holds ``target`` photons.

    Without an explicit ``bracket`` the search starts from
    (0, kappa' * sqrt(target)) and widens the upper end in steps of 1.5 until
    it brackets the target. Small steps keep every trial state within reach of
    the Fock cutoff; a wildly over-driven, truncated state is slow to solve.
    """
    if target <= 0:
        raise InvalidParameterError("target photon number must be positive")
    kp = 0.5 * (p.kappa + p.gamma1)

    @functools.lru_cache(maxsize=None)  # brentq re-evaluates the bracket ends
    def f(rabi):
        return simulated_mean_n(p.replace(rabi_omega=rabi)) - target

    if bracket is None:
        cap = 0.999 * RWA_RATIO_LIMIT * p.omega_r
        lo, hi = 0.0, min(kp * math.sqrt(target), cap)
        while f(hi) < 0:
            if hi >= cap:
                raise InvalidParameterError(
                    f"<n> = {target:g} is out of reach below the rotating-wave drive limit"
                )
            lo, hi = hi, min(1.5 * hi, cap)
    else:
        lo, hi = bracket
    return brentq(f, lo, hi, xtol=xtol * kp, rtol=1e-10)


def point_n_max(mean_n: float) -> int:
    """Fock cutoff ceil(<n> + 8 sqrt(<n>) + 4) for one sweep point."""
    return max(2, math.ceil(mean_n + 8.0 * math.sqrt(mean_n) + 4.0))


@dataclass
class SweepPoint:
    calibration: DriveCalibration
    trace: SpectrumTrace | None = None
    metrics: TripletMetrics | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class SweepResult:
    points: list
    params: dict = field(default_factory=dict)
    method: str = "fft"

    def __post_init__(self):
        powers = [pt.calibration.power_dbm for pt in self.points]
        if any(b <= a for a, b in zip(powers, powers[1:])):
            raise InvalidParameterError("sweep powers must be strictly increasing")

    @property
    def succeeded(self) -> list:
        return [pt for pt in self.points if pt.ok]


def _run_point(args):
    p, power_dbm, method, rbw, span, points, max_dim = args
    cal = calibrate(power_dbm, p)
    n_max = point_n_max(cal.mean_n)
    if 2 * n_max > max_dim:
        return SweepPoint(cal, error=f"Hilbert dimension {2 * n_max} exceeds the limit {max_dim}")
    q = p.replace(rabi_omega=cal.rabi_omega, n_max=n_max)
    try:
        trace = compute_spectrum(q, default_grid(q, span, points), method=method)
        metrics = triplet_metrics(trace, rbw=rbw)
    except MollowCavityError as exc:
        return SweepPoint(cal, error=f"{type(exc).__name__}: {exc}")
    return SweepPoint(cal, trace, metrics)


def resolve_workers(workers=None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise InvalidParameterError(f"worker count must be >= 1, got {workers}")
    return workers


def run_sweep(
    p: SystemParams,
    powers_dbm,
    method: str = "fft",
    rbw: float = DEFAULT_RBW,
    span: float = 250e6 * 2 * math.pi,
    points: int = 801,
    workers: int | None = None,
    max_dim: int = MAX_HILBERT_DIM,
) -> SweepResult:
    """Spectrum and triplet metrics at each input power.

    Points run independently (in parallel processes when ``workers > 1``) and
    come back in input order. A point that fails, or whose Fock cutoff would
    exceed ``max_dim``, is recorded with its error and the sweep continues.

    Raises:
        SweepError: every point failed.
    """
    powers = [float(x) for x in powers_dbm]
    if not powers:
        raise InvalidParameterError("empty power list")
    if any(b <= a for a, b in zip(powers, powers[1:])):
        raise InvalidParameterError("sweep powers must be strictly increasing")
    jobs = [(p, x, method, rbw, span, points, max_dim) for x in powers]
    workers = resolve_workers(workers)
    if workers == 1:
        results = [_run_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, jobs))
    for r in results:
        if not r.ok:
            log.warning("sweep point %.2f dBm failed: %s", r.calibration.power_dbm, r.error)
    if not any(r.ok for r in results):
        raise SweepError("all sweep points failed: " + "; ".join(r.error for r in results))
    return SweepResult(results, params=p.as_dict(), method=method)


@dataclass(frozen=True)
class WidthRow:
    power_dbm: float
    mean_n: float
    width: float
    reference: float

    @property
    def ratio(self) -> float:
        return self.width / self.reference


def width_vs_n_report(sweep: SweepResult, g: float) -> list:
    """Sideband width against the photon number read off the sideband offset.

    Raises:
        SweepError: fewer than three points with detected sidebands.
    """
    rows = []
    for pt in sweep.points:
        m = pt.metrics
        if m is None or m.degraded or not np.isfinite(m.sideband_offset) or m.sideband_offset <= 0:
            continue
        rows.append(
            WidthRow(pt.calibration.power_dbm, mean_n_from_sidebands(m.sideband_offset, g), m.sideband_width, 2.0 * g)
        )
    if len(rows) < 3:
        raise SweepError(f"only {len(rows)} points with detected sidebands, need 3")
    return rows

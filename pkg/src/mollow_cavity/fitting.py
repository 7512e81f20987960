"""Peak fitting of emission spectra.

A Lorentzian ``h (w/2)^2 / ((x - c)^2 + (w/2)^2) + b`` describes the central
line and a Gaussian ``h exp[-2 ((x - c)/D)^2] + b`` the sidebands, with D the
1/e^2 half width that is quoted as the sideband width. Both are fitted with
MINPACK's Levenberg-Marquardt (``scipy.optimize.least_squares(method="lm")``)
on data rescaled to order one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks, peak_widths

from .errors import FitError, PeakDetectionError
from .spectrum import DEFAULT_RBW, SpectrumTrace, coherent_line

MAX_ITER = 500
GRAD_RTOL = 1e-8
PEAK_FLOOR = 3.0  # a peak must exceed this multiple of the median psd
TRIPLET_PROMINENCE = 0.05
SEPARATION = 0.5
_GAUSS_FWHM = math.sqrt(2.0 * math.log(2.0))  # FWHM / D for exp[-2 (x/D)^2]


@dataclass(frozen=True)
class FitResult:
    model: str
    center: float
    width: float
    height: float
    baseline: float
    residual_norm: float
    converged: bool
    iterations: int = 0
    window: tuple = (math.nan, math.nan)

    def evaluate(self, omega):
        return _MODELS[self.model](np.asarray(omega, dtype=float), self.center, self.width, self.height, self.baseline)

    @property
    def peak_value(self) -> float:
        return self.height + self.baseline


@dataclass
class TripletMetrics:
    central: FitResult | None
    left: FitResult | None = None
    right: FitResult | None = None
    height_ratio: float = math.nan
    integrated_ratio: float = math.nan
    sideband_offset: float = math.nan
    peaks: tuple = ()
    notes: list = field(default_factory=list)

    @property
    def degraded(self) -> bool:
        return self.left is None or self.right is None

    @property
    def sideband_width(self) -> float:
        """Mean fitted sideband width, NaN when sidebands were not found."""
        if self.degraded:
            return math.nan
        return 0.5 * (self.left.width + self.right.width)


def lorentzian(x, center, fwhm, height, baseline=0.0):
    hw2 = (0.5 * fwhm) ** 2
    return height * hw2 / ((x - center) ** 2 + hw2) + baseline


def gaussian(x, center, width, height, baseline=0.0):
    return height * np.exp(-2.0 * ((x - center) / width) ** 2) + baseline


_MODELS = {"lorentzian": lorentzian, "gaussian": gaussian}


def _jacobian(model, x, p):
    c, w, h, _ = p
    J = np.empty((x.size, 4))
    if model == "lorentzian":
        hw2 = 0.25 * w * w
        den = (x - c) ** 2 + hw2
        shape = hw2 / den
        J[:, 0] = h * shape * 2.0 * (x - c) / den
        J[:, 1] = h * (0.5 * w / den) * (1.0 - shape)
        J[:, 2] = shape
    else:
        u = (x - c) / w
        e = np.exp(-2.0 * u * u)
        J[:, 0] = h * e * 4.0 * u / w
        J[:, 1] = h * e * 4.0 * u * u / w
        J[:, 2] = e
    J[:, 3] = 1.0
    return J


def _window_data(trace: SpectrumTrace, window, rbw):
    lo, hi = sorted(window)
    y = trace.psd.copy()
    if rbw is not None and trace.coherent_weight > 0:
        y = y + coherent_line(trace.omega, trace.coherent_weight, trace.omega_drive, rbw)
    mask = (trace.omega >= lo) & (trace.omega <= hi) & ~trace.failed & np.isfinite(y)
    if mask.sum() < 5:
        raise PeakDetectionError(f"fit window [{lo:.6g}, {hi:.6g}] holds fewer than 5 samples")
    floor = PEAK_FLOOR * np.median(y[~trace.failed])
    return trace.omega[mask], y[mask], floor, (lo, hi)


def _initial_guess(model, x, y, floor):
    ymax = y.max()
    peaks, _ = find_peaks(y, prominence=0.01 * (ymax - y.min()))
    # a maximum sitting on the window edge counts when the data fall away from it
    edge = [i for i in (0, y.size - 1) if y[i] == ymax]
    candidates = [i for i in list(peaks) + edge if y[i] > floor]
    if not candidates:
        raise PeakDetectionError("no peak above 3x the median psd inside the fit window")
    if len(peaks) > 1 and sum(y[i] > floor for i in peaks) > 1:
        raise PeakDetectionError("fit window contains more than one peak")
    i = int(max(candidates, key=lambda k: y[k]))
    base = float(y.min())
    height = float(y[i] - base)
    fwhm = float(peak_widths(y, [i], rel_height=0.5)[0][0]) * (x[-1] - x[0]) / max(x.size - 1, 1)
    fwhm = max(fwhm, 2.0 * (x[1] - x[0]))
    width = fwhm if model == "lorentzian" else fwhm / _GAUSS_FWHM
    return np.array([x[i], width, height, base])


def fit_peak(trace: SpectrumTrace, window, model="lorentzian", rbw=None) -> FitResult:
    """Least-squares fit of one peak plus a constant baseline inside ``window``.

    Args:
        trace: spectrum to fit.
        window: (low, high) angular-frequency interval.
        model: "lorentzian" (width is the FWHM) or "gaussian" (width is D of
            exp[-2 (x/D)^2]).
        rbw: when given, the coherent delta is added back as a Lorentzian of
            this FWHM before fitting.

    Raises:
        PeakDetectionError: no single peak inside the window.
        FitError: the optimizer failed to run.
    """
    if model not in _MODELS:
        raise ValueError(f"unknown model {model!r}")
    x, y, floor, win = _window_data(trace, window, rbw)
    p0 = _initial_guess(model, x, y, floor)

    # rescale to O(1) so the damping parameter and tolerances are meaningful
    xs = max(p0[1], x[1] - x[0])
    ys = max(np.abs(y).max(), np.finfo(float).tiny)
    u = (x - p0[0]) / xs
    v = y / ys
    q0 = np.array([0.0, p0[1] / xs, p0[2] / ys, p0[3] / ys])
    f = _MODELS[model]

    def resid(q):
        return f(u, *q) - v

    def jac(q):
        return _jacobian(model, u, q)

    g0 = np.linalg.norm(jac(q0).T @ resid(q0))
    try:
        sol = least_squares(
            resid, q0, jac=jac, method="lm", ftol=1e-15, xtol=1e-15, gtol=1e-15, max_nfev=MAX_ITER
        )
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise FitError(f"{model} fit failed: {exc}") from exc
    q = sol.x
    grad = np.linalg.norm(sol.jac.T @ sol.fun)
    scale = np.linalg.norm(sol.jac) * max(np.linalg.norm(v), 1.0)
    width = abs(q[1]) * xs
    converged = bool(
        np.all(np.isfinite(q))
        and width > 0
        and (grad <= GRAD_RTOL * g0 or grad <= 1e-10 * scale)
        and sol.status != 0
    )
    return FitResult(
        model=model,
        center=float(p0[0] + q[0] * xs),
        width=float(width),
        height=float(q[2] * ys),
        baseline=float(q[3] * ys),
        residual_norm=float(np.linalg.norm(sol.fun) * ys),
        converged=converged,
        iterations=int(sol.nfev),
        window=win,
    )


def fit_lorentzian(trace: SpectrumTrace, window, rbw=None) -> FitResult:
    return fit_peak(trace, window, "lorentzian", rbw)


def fit_gaussian(trace: SpectrumTrace, window, rbw=None) -> FitResult:
    return fit_peak(trace, window, "gaussian", rbw)


def _pick_triplet(y, peaks, prominence):
    """Global maximum plus the most prominent peak on each side of it.

    Ranking the sidebands by prominence rather than height skips shoulders
    of a structured central line, which can be taller than the sidebands.
    """
    prom = dict(zip(peaks.tolist(), prominence))
    top = int(peaks[np.argmax(y[peaks])])
    left = [int(i) for i in peaks if i < top]
    right = [int(i) for i in peaks if i > top]
    if not left or not right:
        return None
    return max(left, key=prom.get), top, max(right, key=prom.get)


def joint_refine(trace: SpectrumTrace, fits, rbw=None):
    """Refit several peaks at once over the whole trace with one shared baseline.

    ``fits`` supplies the models and starting values, typically the windowed
    fits of ``triplet_metrics``. Overlapping tails, which bias the windowed
    heights at the 1e-3 level, are then part of the model.
    """
    ok = ~trace.failed
    x = trace.omega[ok]
    y = trace.psd[ok].copy()
    if rbw is not None and trace.coherent_weight > 0:
        y = y + coherent_line(x, trace.coherent_weight, trace.omega_drive, rbw)
    xs = fits[0].width
    x0 = fits[0].center
    ys = max(np.abs(y).max(), np.finfo(float).tiny)
    u = (x - x0) / xs
    v = y / ys
    q0 = []
    for f in fits:
        q0 += [(f.center - x0) / xs, f.width / xs, f.height / ys]
    q0.append(float(np.median([f.baseline for f in fits])) / ys)
    q0 = np.array(q0)
    k = len(fits)

    def resid(q):
        out = np.full_like(u, q[-1])
        for j, f in enumerate(fits):
            out += _MODELS[f.model](u, *q[3 * j:3 * j + 3])
        return out - v

    def jac(q):
        J = np.empty((u.size, 3 * k + 1))
        for j, f in enumerate(fits):
            J[:, 3 * j:3 * j + 3] = _jacobian(f.model, u, np.append(q[3 * j:3 * j + 3], 0.0))[:, :3]
        J[:, -1] = 1.0
        return J

    g0 = np.linalg.norm(jac(q0).T @ resid(q0))
    sol = least_squares(resid, q0, jac=jac, method="lm", ftol=1e-15, xtol=1e-15, gtol=1e-15,
                        max_nfev=MAX_ITER)
    grad = np.linalg.norm(sol.jac.T @ sol.fun)
    scale = np.linalg.norm(sol.jac) * max(np.linalg.norm(v), 1.0)
    converged = bool(sol.status != 0 and (grad <= GRAD_RTOL * g0 or grad <= 1e-10 * scale))
    q = sol.x
    res = float(np.linalg.norm(sol.fun) * ys)
    return [
        FitResult(
            model=f.model,
            center=float(x0 + q[3 * j] * xs),
            width=float(abs(q[3 * j + 1]) * xs),
            height=float(q[3 * j + 2] * ys),
            baseline=float(q[-1] * ys),
            residual_norm=res,
            converged=converged,
            iterations=int(sol.nfev),
            window=(float(x[0]), float(x[-1])),
        )
        for j, f in enumerate(fits)
    ]


def triplet_metrics(trace: SpectrumTrace, rbw=DEFAULT_RBW, side_model="gaussian", joint=False) -> TripletMetrics:
    """Fit the central line and both sidebands on auto-detected windows.

    Windows split at the minima between adjacent peaks; each sideband window
    extends as far outward from its maximum as it does inward. With fewer than
    three separated peaks the sidebands are reported as absent. ``joint=True``
    follows the windowed fits with a simultaneous refinement of all three
    peaks (see ``joint_refine``); the integrated ratio is unaffected.
    """
    ok = ~trace.failed
    x = trace.omega[ok]
    # peaks are located on the incoherent density: at weak drive the
    # coherent line would push the sidebands under the prominence threshold
    yd = trace.psd[ok]
    y = yd.copy()
    if rbw is not None and trace.coherent_weight > 0:
        y = y + coherent_line(x, trace.coherent_weight, trace.omega_drive, rbw)
    if y.size < 5 or not np.any(y > 0):
        return TripletMetrics(central=None, notes=["spectrum is empty or identically zero"])
    if not np.any(yd > 0):
        yd = y
    peaks, props = find_peaks(yd, prominence=TRIPLET_PROMINENCE * yd.max())
    notes = []
    picked = _pick_triplet(yd, peaks, props["prominences"]) if peaks.size >= 3 else None
    if picked is not None:
        il, ic, ir = picked
        m1 = il + int(np.argmin(yd[il:ic + 1]))
        m2 = ic + int(np.argmin(yd[ic:ir + 1]))
        if yd[m1] >= SEPARATION * min(yd[il], yd[ic]) or yd[m2] >= SEPARATION * min(yd[ic], yd[ir]):
            notes.append("peaks are not separated by deep enough minima")
            picked = None
    else:
        notes.append(f"found {peaks.size} peaks, need 3")

    if picked is None:
        central = None
        if peaks.size:
            try:
                central = fit_lorentzian(trace, (x[0], x[-1]), rbw)
            except (PeakDetectionError, FitError) as exc:
                notes.append(f"central fit failed: {exc}")
        return TripletMetrics(central=central, peaks=tuple(x[peaks]), notes=notes)

    central = fit_lorentzian(trace, (x[m1], x[m2]), rbw)
    lo = max(0, il - (m1 - il))
    hi = min(x.size - 1, ir + (ir - m2))
    left = fit_peak(trace, (x[lo], x[m1]), side_model, rbw)
    right = fit_peak(trace, (x[m2], x[hi]), side_model, rbw)
    if joint:
        central, left, right = joint_refine(trace, [central, left, right], rbw)

    p_central = np.trapezoid(y[m1:m2 + 1], x[m1:m2 + 1])
    p_sides = np.trapezoid(y[:m1 + 1], x[:m1 + 1]) + np.trapezoid(y[m2:], x[m2:])
    return TripletMetrics(
        central=central,
        left=left,
        right=right,
        height_ratio=central.height / (0.5 * (left.height + right.height)),
        integrated_ratio=float(p_central / p_sides),
        sideband_offset=0.5 * (right.center - left.center),
        peaks=(x[il], x[ic], x[ir]),
        notes=notes,
    )

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mollow_cavity.analytic import AnalyticTripletParams, MollowParams, central_peak, mollow_triplet, side_peak, total_triplet
from mollow_cavity.errors import PeakDetectionError
from mollow_cavity.fitting import fit_gaussian, fit_lorentzian, gaussian, lorentzian, triplet_metrics
from mollow_cavity.quantum_core import GHZ, MHZ
from mollow_cavity.spectrum import SpectrumTrace

WA = 8.778 * GHZ
G1 = 4.8 * MHZ
G = 12.0 * MHZ


def trace(x, y, center=WA):
    return SpectrumTrace(x, y, meta={"omega_drive": center})


def test_synthetic_lorentzian_exact():
    x = np.linspace(-40, 40, 1601) * MHZ
    fwhm = 4.8 * MHZ
    r = fit_lorentzian(trace(x, lorentzian(x, 0.0, fwhm, 2.0, 0.1), 0.0), (x[0], x[-1]))
    assert r.converged
    assert r.width == pytest.approx(fwhm, rel=1e-6)
    assert abs(r.center) < 1e-6 * fwhm
    assert r.height == pytest.approx(2.0, rel=1e-6) and r.baseline == pytest.approx(0.1, rel=1e-6)


def test_synthetic_gaussian_exact():
    x = WA + np.linspace(-100, 100, 2001) * MHZ
    r = fit_gaussian(trace(x, gaussian(x, WA + 3 * MHZ, 24 * MHZ, 0.7, 0.0)), (x[0], x[-1]))
    assert r.converged
    assert r.width == pytest.approx(24 * MHZ, rel=1e-6)
    assert r.center - WA == pytest.approx(3 * MHZ, rel=1e-6)


def test_central_peak_width_is_gamma1():
    tp = AnalyticTripletParams(WA, G1, G, 25.4)
    x = WA + np.linspace(-30, 30, 1201) * MHZ
    r = fit_lorentzian(trace(x, central_peak(tp, x)), (x[0], x[-1]))
    assert r.width == pytest.approx(G1, rel=1e-4)


def test_side_peak_width_is_2g():
    tp = AnalyticTripletParams(WA, G1, G, 25.4)
    x = WA + tp.omega_s + np.linspace(-70, 70, 1401) * MHZ
    r = fit_gaussian(trace(x, side_peak(tp, x, 1)), (x[0], x[-1]))
    assert r.width == pytest.approx(2 * G, rel=1e-4)


def test_noise_robustness(rng):
    x = np.linspace(-40, 40, 1601) * MHZ
    y = lorentzian(x, 1 * MHZ, 5 * MHZ, 1.0, 0.0)
    r = fit_lorentzian(trace(x, y + 1e-6 * rng.normal(size=x.size), 0.0), (x[0], x[-1]))
    assert r.width == pytest.approx(5 * MHZ, rel=1e-4)
    assert r.center == pytest.approx(1 * MHZ, rel=1e-4)


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(1e-6, 1e6))
def test_rescaling_invariance(scale):
    x = np.linspace(-40, 40, 801) * MHZ
    y = lorentzian(x, 0.3 * MHZ, 6 * MHZ, 1.0, 0.02)
    a = fit_lorentzian(trace(x, y, 0.0), (x[0], x[-1]))
    b = fit_lorentzian(trace(x, scale * y, 0.0), (x[0], x[-1]))
    assert b.width == pytest.approx(a.width, rel=1e-12)
    assert b.center == pytest.approx(a.center, rel=1e-12, abs=1e-9)
    assert b.height == pytest.approx(scale * a.height, rel=1e-12)


@pytest.mark.parametrize("shift", [-0.1, 0.1])
def test_window_shift_robustness(shift):
    tp = AnalyticTripletParams(WA, G1, G, 25.4)
    x = WA + np.linspace(-250, 250, 5001) * MHZ
    t = trace(x, total_triplet(tp, x))
    lo, hi = WA + tp.omega_s - 50 * MHZ, WA + tp.omega_s + 50 * MHZ
    base = fit_gaussian(t, (lo, hi)).width
    moved = fit_gaussian(t, (lo + shift * (hi - lo), hi + shift * (hi - lo))).width
    assert abs(moved / base - 1) < 0.02


def test_no_peak_in_window():
    x = np.linspace(0, 100, 201) * MHZ
    y = lorentzian(x, 50 * MHZ, 4 * MHZ, 1.0)
    with pytest.raises(PeakDetectionError):
        fit_lorentzian(trace(x, y, 50 * MHZ), (80 * MHZ, 100 * MHZ))
    with pytest.raises(PeakDetectionError):
        fit_lorentzian(trace(x, y, 50 * MHZ), (10 * MHZ, 10.1 * MHZ))


def test_two_peaks_in_window_rejected():
    x = np.linspace(-50, 50, 1001) * MHZ
    y = lorentzian(x, -20 * MHZ, 4 * MHZ, 1.0) + lorentzian(x, 20 * MHZ, 4 * MHZ, 1.0)
    with pytest.raises(PeakDetectionError):
        fit_lorentzian(trace(x, y, 0.0), (x[0], x[-1]))


def test_triplet_metrics_on_dressed_triplet():
    tp = AnalyticTripletParams(WA, G1, G, 25.4)
    x = WA + np.linspace(-250, 250, 5001) * MHZ
    m = triplet_metrics(trace(x, total_triplet(tp, x)), rbw=None)
    assert not m.degraded
    assert m.height_ratio == pytest.approx(8.0, rel=0.01)
    assert m.sideband_offset == pytest.approx(2 * math.pi * 121e6, rel=0.01)
    assert m.sideband_width == pytest.approx(2 * G, rel=1e-3)
    joint = triplet_metrics(trace(x, total_triplet(tp, x)), rbw=None, joint=True)
    assert joint.height_ratio == pytest.approx(8 * G / (math.sqrt(2 * math.pi) * G1), rel=1e-9)
    assert joint.sideband_width == pytest.approx(2 * G, rel=1e-9)


def test_triplet_metrics_on_mollow():
    mp = MollowParams(WA, G1, 25 * MHZ)
    x = WA + np.linspace(-120, 120, 4801) * MHZ
    m = triplet_metrics(trace(x, mollow_triplet(mp, x)), rbw=None, side_model="lorentzian", joint=True)
    assert m.height_ratio == pytest.approx(3.0, rel=1e-9)
    assert m.left.width == pytest.approx(1.5 * G1, rel=1e-9)


def test_degraded_with_single_peak():
    x = WA + np.linspace(-50, 50, 1001) * MHZ
    m = triplet_metrics(trace(x, lorentzian(x, WA, 5 * MHZ, 1.0)), rbw=None)
    assert m.degraded
    assert m.central is not None and m.central.width == pytest.approx(5 * MHZ, rel=1e-6)
    assert math.isnan(m.sideband_offset)


def test_degraded_on_empty_spectrum():
    x = np.linspace(0, 1, 11)
    m = triplet_metrics(trace(x, np.zeros(11), 0.5))
    assert m.degraded and m.central is None


def test_coherent_line_included_with_rbw():
    x = WA + np.linspace(-30, 30, 6001) * MHZ
    t = SpectrumTrace(x, np.zeros_like(x), coherent_weight=1.0, meta={"omega_drive": WA})
    r = fit_lorentzian(t, (x[0], x[-1]), rbw=1 * MHZ)
    assert r.width == pytest.approx(1 * MHZ, rel=1e-6)

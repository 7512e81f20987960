import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mollow_cavity.analytic import (
    AnalyticTripletParams,
    MollowParams,
    analytic_trace,
    central_peak,
    mollow_power,
    mollow_triplet,
    photon_distribution,
    side_peak,
    sideband_frequency_distribution,
    total_triplet,
    triplet_power,
)
from mollow_cavity.errors import InvalidParameterError
from mollow_cavity.quantum_core import GHZ, MHZ

WA = 8.778 * GHZ
G1 = 4.8 * MHZ
G = 12.0 * MHZ


@pytest.fixture
def tp():
    return AnalyticTripletParams(WA, G1, G, 25.4)


def test_central_peak_maximum_and_width(tp):
    assert central_peak(tp, WA) == pytest.approx(1 / (2 * math.pi))
    assert central_peak(tp, WA + G1 / 2) == pytest.approx(0.5 / (2 * math.pi))


def test_sideband_positions_and_symmetry(tp):
    assert tp.omega_s == pytest.approx(2 * G * math.sqrt(25.4))
    d = np.linspace(0, 300, 301) * MHZ
    assert np.allclose(total_triplet(tp, WA + d), total_triplet(tp, WA - d), rtol=1e-13)
    assert side_peak(tp, WA + tp.omega_s, 1) > side_peak(tp, WA - tp.omega_s, 1) * 1e10
    assert side_peak(tp, WA + tp.omega_s, "+") == side_peak(tp, WA + tp.omega_s, 1)


def test_height_ratio_closed_form(tp):
    ratio = central_peak(tp, WA) / side_peak(tp, WA + tp.omega_s, 1)
    assert ratio == pytest.approx(8 * G / (math.sqrt(2 * math.pi) * G1), rel=1e-14)
    assert ratio == pytest.approx(7.98, abs=0.005)


def test_side_peak_is_scaled_frequency_distribution(tp):
    w = WA + tp.omega_s + np.linspace(-60, 60, 121) * MHZ
    quotient = side_peak(tp, w, 1) / sideband_frequency_distribution(tp, w, 1)
    assert np.allclose(quotient, G1 / 8, rtol=1e-14)


def test_integrals():
    tp = AnalyticTripletParams(WA, G1, G, 25.4)
    assert triplet_power(tp) == pytest.approx(G1 / 2, rel=1e-9)
    assert mollow_power(MollowParams(WA, G1, 25.0 * MHZ)) == pytest.approx(G1 / 4, rel=1e-9)


def test_sideband_distribution_normalized(tp):
    w = WA + tp.omega_s + np.linspace(-200, 200, 40001) * MHZ
    assert np.trapezoid(sideband_frequency_distribution(tp, w), w) == pytest.approx(1.0, rel=1e-10)


def test_mollow_ratio_and_gamma_s():
    mp = MollowParams(WA, G1, 500.0 * MHZ)
    assert mp.gamma_s == 0.75 * G1
    peak_c = mollow_triplet(mp, WA)
    peak_s = mollow_triplet(mp, WA + mp.rabi)
    assert peak_c / peak_s == pytest.approx(3.0, rel=1e-3)


def test_photon_distribution():
    n = np.arange(0, 200)
    p = photon_distribution(25.4, n)
    assert n[np.argmax(p)] == 25
    assert math.sqrt(25.4) == pytest.approx(5.0, abs=0.05)
    for mean in (10.0, 25.4, 80.0):
        assert photon_distribution(mean, n).sum() == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(InvalidParameterError):
        photon_distribution(0.0, n)


def test_small_photon_number_warns():
    with pytest.warns(UserWarning):
        AnalyticTripletParams(WA, G1, G, 2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        AnalyticTripletParams(WA, G1, G, 25.4)


def test_bad_sign(tp):
    with pytest.raises(InvalidParameterError):
        side_peak(tp, WA, 0)


@settings(max_examples=30, deadline=None)
@given(
    shift=st.floats(-500.0, 500.0),
    mean_n=st.floats(5.0, 200.0),
    rabi=st.floats(1.0, 300.0),
)
def test_nonnegative_and_shift_covariant(shift, mean_n, rabi):
    d = np.linspace(-400, 400, 161) * MHZ
    a = AnalyticTripletParams(WA, G1, G, mean_n)
    b = AnalyticTripletParams(WA + shift * MHZ, G1, G, mean_n)
    ya, yb = total_triplet(a, WA + d), total_triplet(b, WA + shift * MHZ + d)
    assert np.all(ya >= 0)
    assert np.allclose(ya, yb, rtol=1e-6, atol=1e-12 * ya.max())
    ma, mb = MollowParams(WA, G1, rabi * MHZ), MollowParams(WA + shift * MHZ, G1, rabi * MHZ)
    za, zb = mollow_triplet(ma, WA + d), mollow_triplet(mb, WA + shift * MHZ + d)
    assert np.all(za >= 0)
    assert np.allclose(za, zb, rtol=1e-6)


def test_analytic_trace(tp):
    w = WA + np.linspace(-10, 10, 5) * MHZ
    t = analytic_trace(tp, w)
    assert t.method == "analytic" and t.omega_drive == WA
    assert np.array_equal(t.psd, total_triplet(tp, w))

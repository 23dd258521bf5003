import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from younghom import spectra
from younghom.spectra import (
    CrossSectionFormatError,
    ElsasserParams,
    SyntheticLineSpectrum,
    TabulatedCrossSection,
    WattParams,
)


# --- Elsasser -------------------------------------------------------------


def test_elsasser_half_period_is_one():
    p = ElsasserParams(beta=1.0, epsilon=1e-4)
    assert spectra.elsasser_opacity(0.5e-4, p) == pytest.approx(1.0, abs=1e-14)


def test_elsasser_line_centre_is_c_beta():
    p = ElsasserParams(beta=1.0, epsilon=1e-4)
    ch = math.cosh(1.0)
    expected = (ch + 1) / (ch - 1)
    assert expected == pytest.approx(4.6827, abs=1e-4)
    assert spectra.elsasser_opacity(0.0, p) == pytest.approx(expected, rel=1e-14)
    assert p.c_beta == pytest.approx(expected, rel=1e-15)


def test_elsasser_quarter_period():
    p = ElsasserParams(beta=1.0, epsilon=1e-4)
    ch = math.cosh(1.0)
    assert (ch + 1) / ch == pytest.approx(1.6481, abs=1e-4)
    assert spectra.elsasser_opacity(0.25e-4, p) == pytest.approx((ch + 1) / ch, rel=1e-12)


def test_elsasser_periodic_and_bounded():
    p = ElsasserParams(beta=1.0, epsilon=1e-4)
    E = np.random.default_rng(1).uniform(0.0, 1.0, 1_000_000)
    s = spectra.elsasser_opacity(E, p)
    assert np.all(s >= 1.0 - 1e-14)
    assert np.all(s <= p.c_beta + 1e-12)


def test_elsasser_periodic():
    # E near the origin: for E ~ 1 the rounding of E + eps alone moves the
    # phase by ~1e-12 relative, which the steep line profile amplifies
    p = ElsasserParams(beta=1.0, epsilon=1e-4)
    E = np.random.default_rng(2).uniform(0.0, 10 * p.epsilon, 100_000)
    diff = spectra.elsasser_opacity(E, p) - spectra.elsasser_opacity(E + p.epsilon, p)
    assert np.max(np.abs(diff)) <= 1e-12


@pytest.mark.parametrize("beta,eps", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_elsasser_rejects_bad_params(beta, eps):
    with pytest.raises(ValueError):
        ElsasserParams(beta, eps)


# --- Watt -----------------------------------------------------------------


def test_watt_zero_energy():
    assert spectra.watt_spectrum(0.0) == 0.0


def test_watt_default_parameters_and_normalisation_constant():
    w = WattParams(a=0.988, b=2.2249)
    assert w.c == pytest.approx(math.exp(-0.988 * 2.2249 / 4) / math.sqrt(math.pi * 0.988**3 * 2.2249 / 4))


def test_watt_normalised():
    w = WattParams()
    total, _ = integrate.quad(lambda E: spectra.watt_spectrum(E, w), 0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=200)
    assert abs(total - 1) <= 1e-6
    trunc, _ = integrate.quad(lambda E: spectra.watt_spectrum(E, w), 0, 30 * w.a, epsabs=1e-12, epsrel=1e-12, limit=200)
    assert 1 - 1e-6 <= trunc <= 1 + 1e-6


def test_watt_rejects_negative_energy():
    with pytest.raises(ValueError):
        spectra.watt_spectrum(-1.0)


# --- Planck ---------------------------------------------------------------


def _planck_mpmath(nu_cm, T):
    # SI form per unit wavenumber in m^-1, converted to per cm^-1
    h, c, k = mpmath.mpf("6.62607015e-34"), mpmath.mpf(299792458), mpmath.mpf("1.380649e-23")
    nu = mpmath.mpf(nu_cm) * 100
    return float(2 * h * c**2 * nu**3 / (mpmath.exp(h * c * nu / (k * T)) - 1) * 100)


@pytest.mark.parametrize("nu,T", [(1000.0, 288.15), (1500.0, 216.65), (2000.0, 300.0), (10.0, 5.0)])
def test_planck_matches_independent_evaluation(nu, T):
    assert spectra.planck_function(nu, T) == pytest.approx(_planck_mpmath(nu, T), rel=1e-12)


@given(st.floats(1.0, 5000.0), st.floats(10.0, 2000.0))
def test_planck_increasing_in_temperature(nu, T):
    assert spectra.planck_function(nu, 2 * T) > spectra.planck_function(nu, T)


def test_planck_cold_limit():
    assert spectra.planck_function(1000.0, 1e-3) == 0.0
    assert spectra.planck_function(1000.0, 5.0) < 1e-100


@pytest.mark.parametrize("nu,T", [(0.0, 300.0), (1000.0, 0.0), (-1.0, 300.0)])
def test_planck_rejects_nonpositive(nu, T):
    with pytest.raises(ValueError):
        spectra.planck_function(nu, T)


# --- Tables ---------------------------------------------------------------


def test_interpolate_midpoint_and_nodes():
    t = TabulatedCrossSection([0.0, 1.0], [1.0, 3.0])
    assert spectra.interpolate(t, 0.5) == 2.0
    assert spectra.interpolate(t, 0.0) == 1.0
    assert spectra.interpolate(t, 1.0) == 3.0


def _brute_interp(e, v, x):
    for k in range(len(e) - 1):
        if e[k] <= x <= e[k + 1]:
            t = (x - e[k]) / (e[k + 1] - e[k])
            return v[k] + t * (v[k + 1] - v[k])
    raise AssertionError


def test_interpolate_matches_segment_search():
    rng = np.random.default_rng(3)
    e = np.cumsum(rng.uniform(0.1, 1.0, 50))
    v = rng.uniform(0, 10, 50)
    t = TabulatedCrossSection(e, v)
    xs = rng.uniform(e[0], e[-1], 500)
    got = t(xs)
    for x, g in zip(xs, got):
        assert abs(g - _brute_interp(e, v, x)) <= 1e-14 * max(1.0, abs(g))
    assert np.array_equal(t(e), v)


@given(st.lists(st.floats(0, 100), min_size=2, max_size=20), st.floats(0, 1))
def test_interpolate_within_bracketing_values(vals, frac):
    e = np.arange(len(vals), dtype=float)
    t = TabulatedCrossSection(e, vals)
    x = frac * e[-1]
    k = min(int(x), len(vals) - 2)
    y = t(x)
    assert min(vals[k], vals[k + 1]) - 1e-12 <= y <= max(vals[k], vals[k + 1]) + 1e-12


def test_interpolate_refuses_extrapolation():
    t = TabulatedCrossSection([0.0, 1.0], [1.0, 3.0])
    with pytest.raises(ValueError):
        t(1.5)
    with pytest.raises(ValueError):
        t(-0.1)


def test_table_validation():
    with pytest.raises(CrossSectionFormatError):
        TabulatedCrossSection([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(CrossSectionFormatError):
        TabulatedCrossSection([0.0, 1.0], [1.0, -1.0])
    with pytest.raises(CrossSectionFormatError):
        TabulatedCrossSection([0.0], [1.0])


def test_load_three_lines(tmp_path):
    f = tmp_path / "xs.txt"
    f.write_text("# iron-ish\n1.0 2.0\n\n2.0 3.5\n3.0 1e-3\n")
    t = spectra.load_cross_section(f)
    assert len(t) == 3
    assert t.values[-1] == 1e-3


def test_load_reports_offending_line(tmp_path):
    f = tmp_path / "xs.txt"
    f.write_text("# header\n1.0 2.0\n3.0 1.0\n2.0 3.0\n")
    with pytest.raises(CrossSectionFormatError, match=r":4:.*ascending"):
        spectra.load_cross_section(f)


@pytest.mark.parametrize("body,msg", [("1.0 -2.0\n", "negative"), ("1.0 abc\n", "parse"), ("1 2 3\n", "columns")])
def test_load_rejects_bad_lines(tmp_path, body, msg):
    f = tmp_path / "xs.txt"
    f.write_text(body)
    with pytest.raises(CrossSectionFormatError, match=msg):
        spectra.load_cross_section(f)


def test_cross_section_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    t = TabulatedCrossSection(np.cumsum(rng.uniform(0, 1, 100)) + 50.0, rng.lognormal(0, 3, 100), "rt")
    spectra.save_cross_section(t, tmp_path / "a.txt")
    back = spectra.load_cross_section(tmp_path / "a.txt")
    assert np.array_equal(back.energies, t.energies)
    assert np.array_equal(back.values, t.values)


# --- Atmosphere -------------------------------------------------------------


def test_standard_atmosphere_rows():
    layers = spectra.standard_atmosphere()
    assert len(layers) == 12
    first, last = layers[0], layers[-1]
    assert (first.height_lo, first.height_hi, first.temperature, first.pressure, first.volume_fraction) == (
        0.0,
        1.0,
        281.65,
        8.98746e4,
        0.0081,
    )
    assert (last.height_lo, last.height_hi, last.temperature, last.pressure, last.volume_fraction) == (
        12.0,
        15.0,
        216.65,
        1.20446e4,
        3.84e-6,
    )
    assert [L.temperature for L in layers] == [
        281.65, 275.15, 268.65, 262.15, 255.65, 249.15, 242.65, 236.15, 229.65, 223.15, 216.65, 216.65
    ]
    assert [L.volume_fraction for L in layers] == [
        0.0081, 0.0077, 0.0059, 0.0028, 0.0016, 0.0008, 0.0003, 7.96e-5, 3.21e-5, 1.78e-5, 6.94e-6, 3.84e-6
    ]


def test_air_density_ideal_gas():
    L = spectra.standard_atmosphere()[0]
    assert L.air_density == pytest.approx(8.98746e4 / (287.05 * 281.65), rel=1e-15)


def test_atmosphere_csv_round_trip(tmp_path):
    layers = spectra.standard_atmosphere()
    spectra.save_atmosphere(layers, tmp_path / "atm.csv")
    assert spectra.load_atmosphere(tmp_path / "atm.csv") == layers


def test_atmosphere_csv_rejects_bad_header(tmp_path):
    f = tmp_path / "atm.csv"
    f.write_text("h0,h1,T,p,r\n0,1,280,1e5,0.01\n")
    with pytest.raises(ValueError, match="header"):
        spectra.load_atmosphere(f)


# --- Synthetic lines --------------------------------------------------------


def test_no_lines_is_zero():
    s = SyntheticLineSpectrum(np.array([]), np.array([]), np.array([]))
    assert np.all(spectra.synthetic_line_opacity(s, np.linspace(1000, 2000, 11), 280.0, 1e5) == 0)


def test_single_line_peak():
    s = SyntheticLineSpectrum(np.array([1500.0]), np.array([3.0]), np.array([0.0]), reference_width=0.1)
    p = s.reference_pressure
    assert spectra.synthetic_line_opacity(s, 1500.0, 296.0, p) == pytest.approx(3.0 / (math.pi * 0.1), rel=1e-14)


def test_synthetic_is_deterministic():
    nu = np.linspace(1000, 2000, 5001)
    a = spectra.synthetic_line_opacity(SyntheticLineSpectrum.random(50, seed=7), nu, 250.0, 5e4)
    b = spectra.synthetic_line_opacity(SyntheticLineSpectrum.random(50, seed=7), nu, 250.0, 5e4)
    assert a.tobytes() == b.tobytes()


def test_synthetic_out_of_range():
    s = SyntheticLineSpectrum.random(5, seed=0)
    with pytest.raises(ValueError):
        spectra.synthetic_line_opacity(s, 999.0, 280.0, 1e5)


def test_line_integral_is_strength():
    s = SyntheticLineSpectrum(
        np.array([1500.0]), np.array([2.0]), np.array([0.0]), reference_width=0.05, nu_range=(0.0, 3000.0)
    )
    val, _ = integrate.quad(lambda v: spectra.synthetic_line_opacity(s, v, 296.0, s.reference_pressure), 0, 3000,
                            points=[1500.0], limit=500)
    # Lorentz tails outside [0, 3000] carry 2 g/(pi 1500) of the area
    assert val == pytest.approx(2.0 * (1 - 2 * 0.05 / (math.pi * 1500)), rel=1e-8)

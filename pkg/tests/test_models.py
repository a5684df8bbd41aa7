import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayespec.models import (
    AxisKind,
    ForwardModelError,
    Gamma,
    GaussianFixed,
    GaussianMixture,
    ModelSpec,
    Normal,
    PhaseRef,
    Poisson,
    Spectrum,
    Uniform,
    XpsHetero,
    XpsShirley,
    XrdPseudoVoigt,
    forward,
    gaussian_mixture_forward,
    parse_prior,
    pseudo_voigt,
    read_phase_refs,
    read_spectrum,
    shirley_background,
    sort_peaks,
    write_spectrum,
    xps_forward,
    xps_peaks,
    xrd_forward,
)
from bayespec.synthetic import gm_truth


def gm_spec_k(k):
    return ModelSpec(GaussianMixture(k), (Gamma(5, 5), Normal(1.5, 0.04), Gamma(5, 0.04)) * k,
                     GaussianFixed(0.1))


def xps_spec_k(k):
    return ModelSpec(XpsShirley(k), (Uniform(0, 1e4), Uniform(0, 100), Uniform(0.1, 15),
                                     Uniform(0, 1)) * k + (Uniform(0, 1e4),) * 2,
                     XpsHetero())


def xrd_spec_single(pos=27.4):
    ph = PhaseRef("rutile", (pos,), (1.0,))
    priors = (Gamma(1, 1),) * 13
    return ModelSpec(XrdPseudoVoigt((ph,)), priors, Poisson())


# ---- straight-line scalar transcriptions used as oracles

def pv_scalar(x, rho, gg, gl, r):
    g = math.exp(-4 * math.log(2) * ((x - rho) / gg) ** 2)
    lor = 1 / (1 + 4 * ((x - rho) / gl) ** 2)
    return (1 - r) * g + r * lor


def xrd_scalar(x, phase_params, positions, intens, bg):
    amp, shift, r, alpha, u, v, w, s, t = phase_params
    rad = math.radians(x) / 2
    total = 0.0
    for p, rel in zip(positions, intens):
        mu = p + shift
        asym = alpha if x >= mu else 1.0
        sig = asym * math.sqrt(u * math.tan(rad) ** 2 - v * math.tan(rad) + w)
        om = asym * (s / math.cos(rad) + t * math.tan(rad))
        total += rel * pv_scalar(x, mu, sig, om, r)
    a, sbg, rbg, b = bg
    return amp * total + a * pv_scalar(x, 0.0, sbg, sbg, rbg) + b


def xps_peak_scalar(x, amp, mu, sig, eta):
    sd = sig / math.sqrt(2 * math.log(2))
    g = math.exp(-((x - mu) ** 2) / (2 * sd * sd))
    return amp * (eta * g + (1 - eta) * sig * sig / (sig * sig + (x - mu) ** 2))


def shirley_scalar(xs, sig, a, b):
    cum = [0.0]
    for i in range(1, len(xs)):
        cum.append(cum[-1] + 0.5 * (sig[i] + sig[i - 1]) * (xs[i] - xs[i - 1]))
    return [a + (b - a) * c / cum[-1] for c in cum]


# ---- pseudo-Voigt

def test_pseudo_voigt_peak_is_one_at_centre():
    for r in (0.0, 0.3, 1.0):
        assert pseudo_voigt(2.5, 2.5, 0.7, 1.9, r) == 1.0


def test_pseudo_voigt_half_widths():
    assert pseudo_voigt(0.5, 0.0, 1.0, 3.0, 0.0) == pytest.approx(0.5, rel=1e-12)
    assert pseudo_voigt(1.5, 0.0, 2.0, 3.0, 1.0) == pytest.approx(0.5, rel=1e-12)


def test_pseudo_voigt_mixture_matches_components():
    g = math.exp(-4 * math.log(2) * 0.09)
    lor = 1 / (1 + 4 * 0.09)
    assert pseudo_voigt(0.3, 0.0, 1.0, 1.0, 0.65) == pytest.approx(0.35 * g + 0.65 * lor, rel=1e-14)


def test_pseudo_voigt_rejects_bad_width():
    with pytest.raises(ValueError):
        pseudo_voigt(0.0, 0.0, 0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        pseudo_voigt(0.0, 0.0, 1.0, -1.0, 0.5)


@given(st.floats(-5, 5), st.floats(0.05, 5), st.floats(0.05, 5), st.floats(0, 1))
def test_pseudo_voigt_bounded(x, gg, gl, r):
    v = pseudo_voigt(x, 0.0, gg, gl, r)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(pv_scalar(x, 0.0, gg, gl, r), rel=1e-12, abs=1e-300)


# ---- Gaussian mixture

def test_gm_single_peak_value_at_centre():
    spec = gm_spec_k(1)
    assert gaussian_mixture_forward(spec, [0.587, 1.210, 95.689], [1.210])[0] == pytest.approx(0.587)


def test_gm_zero_amplitudes():
    spec = gm_spec_k(3)
    theta = gm_truth(3).copy()
    theta[0::3] = 0.0
    assert np.all(gaussian_mixture_forward(spec, theta, np.linspace(0, 3, 50)) == 0.0)


def test_gm_three_peaks_term_by_term():
    theta = gm_truth(3)
    x = 1.455
    expect = sum(theta[3 * k] * math.exp(-theta[3 * k + 2] / 2 * (x - theta[3 * k + 1]) ** 2)
                 for k in range(3))
    got = gaussian_mixture_forward(gm_spec_k(3), theta, [x])[0]
    assert got == pytest.approx(expect, rel=1e-13)


def test_gm_truth_table_values():
    t = gm_truth(3)
    assert t.tolist() == [0.587, 1.210, 95.689, 1.522, 1.455, 146.837, 1.183, 1.703, 164.469]


# ---- XRD

XRD_THETA = [900.0, 0.02, 0.4, 1.3, 0.02, 0.01, 0.05, 0.08, 0.03]
XRD_BG = [6000.0, 10.0, 0.2, 100.0]


def test_xrd_pure_background():
    spec = xrd_spec_single()
    theta = np.array([0.0] + XRD_THETA[1:] + [60000.0, 10.0, 0.0, 100.0])
    xs = np.linspace(20, 60, 41)
    expect = 60000.0 * np.exp(-4 * math.log(2) * (xs / 10.0) ** 2) + 100.0
    np.testing.assert_allclose(xrd_forward(spec, theta, xs), expect, rtol=1e-13)


def test_xrd_matches_scalar_transcription():
    spec = xrd_spec_single()
    theta = np.array(XRD_THETA + XRD_BG)
    xs = [27.0, 27.3, 27.42, 27.6, 28.1]
    got = xrd_forward(spec, theta, xs)
    expect = [xrd_scalar(x, XRD_THETA, [27.4], [1.0], XRD_BG) for x in xs]
    np.testing.assert_allclose(got, expect, rtol=1e-12)


def test_xrd_multiple_reflections_scalar():
    ph = PhaseRef("p", (25.0, 31.0, 48.2), (1.0, 0.4, 0.25))
    spec = ModelSpec(XrdPseudoVoigt((ph,)), (Gamma(1, 1),) * 13, Poisson())
    theta = np.array(XRD_THETA + XRD_BG)
    xs = np.linspace(22, 50, 17)
    expect = [xrd_scalar(x, XRD_THETA, ph.positions, ph.intensities, XRD_BG) for x in xs]
    np.testing.assert_allclose(xrd_forward(spec, theta, xs), expect, rtol=1e-12)


def test_xrd_symmetric_when_alpha_is_one():
    # angle-independent Gaussian width (u = v = 0) and no Lorentzian part
    spec = xrd_spec_single(40.0)
    p = [500.0, 0.03, 0.0, 1.0, 0.0, 0.0, 0.04, 0.08, 0.03]
    theta = np.array(p + [0.0, 10.0, 0.0, 50.0])
    c = 40.0 + p[1]
    d = np.linspace(0.001, 0.5, 25)
    left = xrd_forward(spec, theta, c - d)
    right = xrd_forward(spec, theta, c + d)
    assert np.max(np.abs(left - right) / right) < 1e-12


def test_xrd_asymmetric_when_alpha_differs():
    spec = xrd_spec_single(40.0)
    p = [500.0, 0.0, 0.0, 1.5, 0.0, 0.0, 0.04, 0.08, 0.03]
    theta = np.array(p + [0.0, 10.0, 0.0, 50.0])
    left = xrd_forward(spec, theta, [39.9])[0]
    right = xrd_forward(spec, theta, [40.1])[0]
    assert right > left  # wider on the high-angle side


def test_xrd_caglioti_fault_reports_position():
    spec = xrd_spec_single()
    theta = np.array(XRD_THETA + XRD_BG)
    theta[4], theta[5], theta[6] = 0.0, 1.0, 0.0  # discriminant -tan(x/2) < 0
    with pytest.raises(ForwardModelError) as err:
        xrd_forward(spec, theta, [30.0, 40.0])
    assert err.value.x == 30.0


def test_phase_ref_validation_and_file(tmp_path):
    with pytest.raises(ValueError):
        PhaseRef("empty", (), ())
    with pytest.raises(ValueError):
        PhaseRef("zero", (20.0,), (0.0,))
    path = tmp_path / "refs.txt"
    path.write_text("# comment\nrutile, 27.4, 1.0\nanatase, 25.3, 1.0\nrutile, 36.1, 0.5\n")
    refs = read_phase_refs(path)
    assert [r.name for r in refs] == ["rutile", "anatase"]
    assert refs[0].positions == (27.4, 36.1)
    assert refs[0].outside(30, 60) == [27.4]


# ---- Shirley

def test_shirley_zero_signal_is_linear_ramp():
    xs = np.linspace(0, 4, 9)
    np.testing.assert_allclose(shirley_background(xs, np.zeros(9), 2.0, 6.0), 2.0 + xs, rtol=1e-15)


def test_shirley_equal_endpoints_constant():
    xs = np.linspace(0, 1, 11)
    sig = np.exp(-((xs - 0.4) ** 2) / 0.01)
    assert np.all(shirley_background(xs, sig, 3.5, 3.5) == 3.5)


def test_shirley_triangle_midpoint():
    xs = np.linspace(0, 2, 201)
    sig = np.maximum(0.0, 1.0 - abs(xs - 1.0))
    bg = shirley_background(xs, sig, 0.0, 1.0)
    assert bg[100] == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(bg, shirley_scalar(xs, sig, 0.0, 1.0), rtol=1e-12, atol=1e-15)


@settings(max_examples=50)
@given(st.lists(st.floats(0, 100), min_size=2, max_size=40), st.floats(-50, 50), st.floats(-50, 50))
def test_shirley_pinned_bounded_monotone(sig, a, b):
    xs = np.arange(len(sig), dtype=float)
    bg = shirley_background(xs, np.array(sig), a, b)
    assert bg[0] == a and bg[-1] == b
    assert np.all(bg >= min(a, b)) and np.all(bg <= max(a, b))
    steps = np.diff(bg) * (1 if b >= a else -1)
    assert np.all(steps >= 0)


def test_shirley_rejects_negative_signal():
    with pytest.raises(ValueError):
        shirley_background([0.0, 1.0], [1.0, -1.0], 0.0, 1.0)


# ---- XPS

def test_xps_without_peaks_is_ramp():
    spec = xps_spec_k(0)
    xs = np.linspace(10, 20, 11)
    np.testing.assert_allclose(xps_forward(spec, [5.0, 25.0], xs), 5.0 + 2.0 * (xs - 10), rtol=1e-14)


def test_xps_gaussian_peak_at_centre():
    spec = xps_spec_k(1)
    xs = np.linspace(0, 10, 101)
    theta = [40.0, 5.0, 1.2, 1.0, 3.0, 7.0]
    f = xps_forward(spec, theta, xs)
    bg = shirley_background(xs, xps_peaks(spec, theta, xs), 3.0, 7.0)
    assert f[50] == pytest.approx(40.0 + bg[50], rel=1e-14)


def test_xps_two_peaks_scalar_transcription():
    spec = xps_spec_k(2)
    theta = [30.0, 3.0, 0.8, 0.7, 12.0, 5.5, 1.5, 0.3, 2.0, 9.0]
    xs = [1.0, 2.5, 3.1, 4.8, 7.0]
    peaks = [xps_peak_scalar(x, *theta[0:4]) + xps_peak_scalar(x, *theta[4:8]) for x in xs]
    bg = shirley_scalar(xs, peaks, 2.0, 9.0)
    expect = [p + b for p, b in zip(peaks, bg)]
    np.testing.assert_allclose(xps_forward(spec, theta, xs), expect, rtol=1e-12)


def test_xps_decomposition_identity():
    spec = xps_spec_k(3)
    theta = [30.0, 3.0, 0.8, 0.7, 12.0, 5.5, 1.5, 0.3, 5.0, 8.0, 0.5, 0.5, 2.0, 9.0]
    xs = np.linspace(0, 10, 200)
    peaks = xps_peaks(spec, theta, xs)
    f = xps_forward(spec, theta, xs)
    np.testing.assert_allclose(f - shirley_background(xs, peaks, 2.0, 9.0), peaks,
                               rtol=1e-12, atol=1e-12)


# ---- purity and layouts

@settings(max_examples=25)
@given(st.integers(2, 30), st.integers(2, 30))
def test_forward_is_pointwise_for_peak_families(n1, n2):
    xs1 = np.linspace(0.5, 1.5, n1)
    xs2 = np.linspace(1.6, 2.5, n2)
    spec = gm_spec_k(3)
    theta = gm_truth(3)
    whole = forward(spec, theta, np.concatenate([xs1, xs2]))
    parts = np.concatenate([forward(spec, theta, xs1), forward(spec, theta, xs2)])
    np.testing.assert_array_equal(whole, parts)
    xspec = xrd_spec_single()
    xt = np.array(XRD_THETA + XRD_BG)
    a, b = np.linspace(20, 30, n1), np.linspace(31, 60, n2)
    np.testing.assert_allclose(forward(xspec, xt, np.concatenate([a, b])),
                               np.concatenate([forward(xspec, xt, a), forward(xspec, xt, b)]),
                               rtol=1e-15)


def test_layout_lengths():
    assert gm_spec_k(10).dim == 30
    assert xps_spec_k(7).dim == 30
    phases = tuple(PhaseRef(n, (30.0,), (1.0,)) for n in "abc")
    spec = ModelSpec(XrdPseudoVoigt(phases), (Gamma(1, 1),) * 31, Poisson())
    assert spec.dim == 31
    assert spec.names[:2] == ("a.A", "a.shift") and spec.names[-4:] == (
        "bg.a", "bg.sigma", "bg.r", "bg.b")
    with pytest.raises(ValueError):
        ModelSpec(GaussianMixture(2), (Gamma(1, 1),) * 5, GaussianFixed(1.0))


def test_spec_pack_unpack_and_overrides():
    spec = gm_spec_k(2)
    d = spec.unpack(np.arange(6.0))
    assert d["mu_2"] == 4.0
    np.testing.assert_array_equal(spec.pack(d), np.arange(6.0))
    spec2 = spec.with_priors({"mu_1": Normal(1.2, 0.01)})
    assert spec2.priors[1] == Normal(1.2, 0.01)
    with pytest.raises(KeyError):
        spec.index("nope")


def test_parse_prior():
    assert parse_prior("gamma(5, 5)") == Gamma(5, 5)
    assert parse_prior("Normal(0,0.0025)") == Normal(0, 0.0025)
    assert parse_prior(" uniform(0, 1) ") == Uniform(0, 1)
    for bad in ("beta(1,1)", "gamma(1)", "uniform(1, 0)"):
        with pytest.raises(ValueError):
            parse_prior(bad)


def test_sort_peaks_orders_by_centre():
    spec = gm_spec_k(3)
    s = np.array([[1, 3.0, 10, 2, 1.0, 20, 3, 2.0, 30]], dtype=float)
    out = sort_peaks(spec, s)
    assert out[0].tolist() == [2, 1.0, 20, 3, 2.0, 30, 1, 3.0, 10]


# ---- spectrum I/O

def test_spectrum_validation():
    with pytest.raises(ValueError):
        Spectrum([0.0], [1.0])
    with pytest.raises(ValueError):
        Spectrum([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        Spectrum([0.0, 1.0], [1.0, np.nan])


def test_spectrum_roundtrip(tmp_path):
    sp = Spectrum(np.linspace(0, 1, 7), np.random.default_rng(1).normal(size=7))
    path = tmp_path / "s.csv"
    write_spectrum(path, sp, header="made in a test")
    back = read_spectrum(path, AxisKind.BINDING_ENERGY)
    np.testing.assert_array_equal(back.xs, sp.xs)
    np.testing.assert_array_equal(back.ys, sp.ys)
    assert back.axis_kind is AxisKind.BINDING_ENERGY


def test_read_spectrum_formats(tmp_path):
    path = tmp_path / "w.txt"
    path.write_text("x y\n# note\n1 2\n2\t3  # trailing\n3,4\n")
    sp = read_spectrum(path)
    assert sp.xs.tolist() == [1, 2, 3] and sp.ys.tolist() == [2, 3, 4]
    path.write_text("1 2\nbad line\n")
    with pytest.raises(ValueError):
        read_spectrum(path)

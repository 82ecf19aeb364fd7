import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from rbmcouple import geometry as geo
from rbmcouple import lyapunov as L
from rbmcouple.errors import ConfigurationError, DomainValueError, InvalidCurveError
from rbmcouple.harmonic import HarmonicMeasure

TWO_PI = 2 * math.pi


def _quad_half(a, b):
    f = lambda t: abs(math.log(abs(math.cos(t)))) / math.sin(t / 2) ** 2  # noqa: E731
    return integrate.quad(f, a, b, limit=400, epsabs=1e-13)[0]


def test_half_range_integrals():
    lo, hi = L.disc_exterior_half_integrals()
    # independent adaptive quadrature and the closed forms
    assert lo == pytest.approx(_quad_half(0, math.pi / 2), abs=1e-9)
    assert hi == pytest.approx(_quad_half(math.pi / 2, math.pi), abs=1e-9)
    assert lo == pytest.approx(math.pi + 2 * math.log(2), abs=1e-9)
    assert hi == pytest.approx(math.pi - 2 * math.log(2), abs=1e-9)
    assert lo + hi == pytest.approx(TWO_PI, abs=1e-9)


def test_log_sec_branches_agree():
    t = np.linspace(1e-6, math.pi / 2 - 1e-6, 2001)
    ref = -np.log(np.cos(t))
    assert np.allclose(L.log_sec(np.cos(t), np.sin(t)), ref, rtol=1e-12, atol=1e-15)


def test_integrand_diagonal_limit_on_disc():
    # |log cos a| * omega -> nu^2 / (2 pi) as y -> x
    for delta in (1e-3, 1e-4):
        val = -math.log(math.cos(delta)) / (math.pi * (2 * math.sin(delta / 2)) ** 2)
        assert val == pytest.approx(1 / TWO_PI, rel=1e-5)


@pytest.mark.parametrize("make", [geo.disc, geo.disc_exterior])
def test_disc_cross_term_exact(make):
    d = make()
    v, err = L.cross_term(d, HarmonicMeasure(d, "exact"), 128)
    assert v == pytest.approx(TWO_PI, abs=1e-8)
    assert err < 1e-6


def test_disc_cross_term_nystrom():
    d = geo.disc()
    v, err = L.cross_term(d, HarmonicMeasure(d, "nystrom", 64), 64)
    assert v == pytest.approx(TWO_PI, abs=1e-8)


def test_disc_report():
    d = geo.disc()
    rep = L.compute_lambda(d, HarmonicMeasure(d, "exact"), 128)
    assert rep.lambda_ == pytest.approx(4 * math.pi, abs=1e-8)
    assert rep.decay_rate == pytest.approx(-2.0, abs=1e-8)
    assert rep.lambda_ == rep.curvature_term + rep.cross_term
    assert rep.chi_ok and rep.flags == []
    assert dict(zip(L.REPORT_COLUMNS, rep.row()))["lambda"] == rep.lambda_


def test_disc_exterior_report():
    d = geo.disc_exterior()
    rep = L.compute_lambda(d, HarmonicMeasure(d, "exact"), 128)
    assert abs(rep.lambda_) < 1e-6
    assert rep.decay_rate is None and rep.area == math.inf


@pytest.mark.parametrize("a", [0.2, 0.5, 0.8, 0.95])
def test_ellipse_exterior_cross_term(a):
    assert L.ellipse_exterior_cross_term(a, 128) == pytest.approx(TWO_PI, abs=1e-8)
    assert L.ellipse_inner_identity(a, 4096) == pytest.approx(TWO_PI, abs=1e-8)


@pytest.mark.parametrize("a", [0.2, 0.5])
def test_ellipse_exterior_two_routes(a):
    # boundary-parameter quadrature of the pulled-back kernel, no angle change
    d = geo.ellipse_exterior(a)
    v, _ = L.cross_term(d, HarmonicMeasure(d, "exact"), 128)
    assert v == pytest.approx(L.ellipse_exterior_cross_term(a, 128), abs=1e-7)


def test_ellipse_exterior_bad_parameter():
    with pytest.raises(DomainValueError):
        L.ellipse_exterior_cross_term(1.2)


def test_annulus_report_and_convergence():
    d = geo.annulus(0.5, 1)
    hm = HarmonicMeasure(d, "nystrom", 128)
    rep = L.compute_lambda(d, hm, 128)
    assert abs(rep.curvature_term) < 1e-10
    assert rep.cross_term > 0 and rep.lambda_ > 0
    fine, _ = L.cross_term(d, HarmonicMeasure(d, "nystrom", 256), 256)
    assert abs(fine - rep.cross_term) < rep.err_cross


def test_scaling_rate_law():
    r = L.scaling_invariance_check(geo.disc(), 2.0, "exact", 64)
    assert r["difference"] < 1e-6
    assert r["rate_scaled"] == pytest.approx(r["rate"] / 4)


def test_wos_backend_rejected_for_cross_term():
    d = geo.disc()
    with pytest.raises(ConfigurationError):
        L.cross_term(d, HarmonicMeasure(d, "wos-mc"))


def test_hole_sweep_curvature_terms():
    holes = [{"center": [0.5, 0.0], "radius": 0.02}, {"center": [-0.5, 0.0], "radius": 0.02}]
    rows = L.hole_sweep(1.0, holes, "nystrom", n_nodes=64)
    assert [r["holes"] for r in rows] == [0, 1, 2]
    for r, target in zip(rows, (TWO_PI, 0.0, -TWO_PI)):
        assert r["curvature_term"] == pytest.approx(target, abs=1e-8)
        assert r["cross_term"] > 0
        assert r["sign"] in (-1, 0, 1)
        assert np.isfinite(r["err_cross"])


def test_hole_layout_validator():
    with pytest.raises(InvalidCurveError):
        L.validate_hole_layout(1.0, [{"center": [0.1, 0], "radius": 0.02},
                                     {"center": [0.2, 0], "radius": 0.02}])
    with pytest.raises(InvalidCurveError):
        L.validate_hole_layout(1.0, [{"center": [0.99, 0], "radius": 0.02}])


@given(c=st.floats(-1, 1), flip=st.booleans())
def test_log_sec_nonnegative(c, flip):
    s = math.sqrt(max(0.0, 1 - c * c))
    v = L.log_sec(c, s) if not flip else L.log_sec(s, c)
    assert v >= 0

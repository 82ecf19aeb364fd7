import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from rbmcouple import geometry as geo
from rbmcouple import harmonic as hmod
from rbmcouple.errors import DomainValueError, SingularityError
from rbmcouple.harmonic import Arc, HarmonicMeasure, WosConfig


@pytest.fixture(scope="module")
def disc():
    return geo.disc()


@pytest.fixture(scope="module")
def disc_nystrom(disc):
    return HarmonicMeasure(disc, "nystrom", 256)


# -- closed forms ----------------------------------------------------------


def test_disc_exterior_kernel_values():
    assert hmod.density_exact_disc_exterior(math.pi, 0.0) == pytest.approx(1 / (4 * math.pi))
    assert hmod.density_exact_disc_exterior(math.pi / 2, 0.0) == pytest.approx(1 / (2 * math.pi))
    delta = np.linspace(0.1, 6.0, 25)
    d = 2 * np.sin(delta / 2)
    assert np.allclose(math.pi * d**2 * hmod.density_exact_disc_exterior(delta, 0.0), 1.0)
    with pytest.raises(SingularityError):
        hmod.density_exact_disc_exterior(1.0, 1.0)


def test_disc_interior_kernel_values(disc):
    x = disc.point(0, 0.0)
    assert hmod.density_exact_disc_interior(x, disc.point(0, 0.5)) == pytest.approx(1 / (4 * math.pi))
    assert hmod.density_exact_disc_interior(x, disc.point(0, 1 / 6)) == pytest.approx(1 / math.pi)
    with pytest.raises(SingularityError):
        hmod.density_exact_disc_interior(x, x)


def test_disc_interior_kernel_is_poisson_limit(disc):
    # (1/delta) * Poisson kernel at (1 - delta) x, extrapolated in delta
    x = np.array([1.0, 0.0])
    for uy in (0.5, 1 / 6, 0.3):
        y = disc.curves[0].position(uy)

        def pk(delta):
            w = (1 - delta) * x
            return (1 - np.sum(w * w)) / (2 * math.pi * np.sum((w - y) ** 2)) / delta

        hs = [1e-3, 5e-4, 2.5e-4]
        from rbmcouple.quadrature import richardson
        lim = richardson([pk(h) for h in hs], hs, order=2)
        exact = hmod.density_exact_disc_interior(disc.point(0, 0.0), disc.point(0, uy))
        assert lim == pytest.approx(exact, rel=1e-8)


def test_half_plane_helpers():
    assert hmod.density_half_plane(1.0) == pytest.approx(0.318310, abs=1e-6)
    assert hmod.density_half_plane(2.0) == pytest.approx(1 / (4 * math.pi))
    for a in (0.3, 1.0, 4.0):
        tail = 2 * integrate.quad(lambda y: 1 / (math.pi * y * y), a, np.inf)[0]
        assert hmod.half_plane_tail_mass(a) == pytest.approx(tail, rel=1e-10)
    assert hmod.excursion_height_law_halfplane(1.0) == 1.0
    assert hmod.excursion_height_law_halfplane(2.0) == 0.5
    assert hmod.poisson_void_probability() == pytest.approx(0.5, abs=1e-14)
    with pytest.raises(SingularityError):
        hmod.density_half_plane(0.0)
    with pytest.raises(DomainValueError):
        hmod.excursion_height_law_halfplane(0.0)


def test_ellipse_exterior_pullback_reduces_to_circle():
    # a -> 0 gives the disc exterior kernel
    u = np.array([0.1, 0.3, 0.45])
    v = hmod.ellipse_exterior_density(1e-12, 0.0, u)
    assert np.allclose(v, hmod.density_exact_disc_exterior(2 * math.pi * u, 0.0))


def test_ellipse_exterior_normalization_near_diagonal():
    d = geo.ellipse_exterior(0.5)
    hm = HarmonicMeasure(d, "exact")
    x = d.point(0, 0.13)
    for eps in (1e-3, 1e-4):
        y = d.point(0, 0.13 + eps)
        dist = np.linalg.norm(x.position - y.position)
        assert math.pi * dist**2 * hm.density(x, y)[0] == pytest.approx(1.0, abs=20 * eps)


# -- Nystrom ---------------------------------------------------------------


def test_nystrom_disc_matches_exact(disc, disc_nystrom):
    for ux, uy in [(0.0, 0.25), (0.1, 0.6), (0.37, 0.41), (0.9, 0.05)]:
        x, y = disc.point(0, ux), disc.point(0, uy)
        v, err = disc_nystrom.density(x, y)
        assert v == pytest.approx(hmod.density_exact_disc_interior(x, y), abs=1e-10)
        assert err < 1e-6


def test_nystrom_sqrt2_example(disc, disc_nystrom):
    v, _ = disc_nystrom.density(disc.point(0, 0.0), disc.point(0, 0.25))
    assert v == pytest.approx(1 / (2 * math.pi), abs=1e-12)


def test_nystrom_normalization_near_diagonal():
    d = geo.ellipse(2, 1)
    hm = HarmonicMeasure(d, "nystrom", 256)
    x = d.point(0, 0.2)
    vals = []
    eps = [0.02, 0.01, 0.005]
    for e in eps:
        y = d.point(0, 0.2 + e)
        dist = np.linalg.norm(x.position - y.position)
        vals.append(math.pi * dist**2 * hm.density(x, y)[0])
    from rbmcouple.quadrature import richardson
    assert richardson(vals, eps, order=2) == pytest.approx(1.0, abs=1e-3)


def test_nystrom_annulus_against_fourier_series():
    # mode k of the extension from the outer circle has inward derivative
    # -(k / r2) coth(k L); the k = 0 mode gives -1 / (r2 L).  Subtracting the
    # disc part sum k cos(k t) = -1 / (4 sin^2(t/2)) leaves a fast series.
    r1, r2 = 0.5, 1.0
    d = geo.annulus(r1, r2)
    hm = HarmonicMeasure(d, "nystrom", 256)
    L = math.log(r2 / r1)
    k = np.arange(1, 200)
    x = d.point(0, 0.0)
    for uy in (0.2, 0.5, 0.05):
        dth = 2 * math.pi * uy
        dist = 2 * r2 * math.sin(dth / 2)
        tail = np.sum(k * (1 / np.tanh(k * L) - 1) * np.cos(k * dth))
        oracle = 1 / (math.pi * dist**2) - 1 / (2 * math.pi * L * r2**2) - tail / (math.pi * r2**2)
        assert hm.density(x, d.point(0, uy))[0] == pytest.approx(oracle, rel=1e-9)


@given(u1=st.floats(0, 1, exclude_max=True), u2=st.floats(0, 1, exclude_max=True))
def test_disc_density_positive_and_rotation_invariant(u1, u2):
    d = _disc()
    hm = _disc_hm()
    delta = (u2 - u1) % 1.0
    if min(delta, 1 - delta) < 1e-3:
        return
    v, _ = hm.density(d.point(0, u1), d.point(0, u2))
    w, _ = hm.density(d.point(0, 0.0), d.point(0, delta))
    assert v > 0
    assert v == pytest.approx(w, rel=1e-9)


@given(u1=st.floats(0, 1, exclude_max=True), u2=st.floats(0, 1, exclude_max=True))
def test_nystrom_density_positive_on_holed_domain(u1, u2):
    d, hm = _holed()
    x = d.point(0, u1)
    y = d.point(1, u2)
    v, _ = hm.density(x, y)
    assert v > 0


# -- walk on spheres -------------------------------------------------------


def test_wos_uniform_from_centre(disc):
    n = 100_000
    s = hmod.sample_hitting_points(disc, (0.0, 0.0), WosConfig(n=n, seed=1))
    assert s.unfinished == 0
    ks = stats.kstest(s.u, "uniform").statistic
    assert ks < 1.63 / math.sqrt(n)


def test_wos_poisson_kernel_chi_square(disc):
    r = 0.6
    n = 100_000
    s = hmod.sample_hitting_points(disc, (r, 0.0), WosConfig(n=n, seed=2))
    edges = np.linspace(0, 1, 37)
    counts, _ = np.histogram(s.u, edges)

    def pk(t):
        th = 2 * math.pi * t
        return (1 - r * r) / (1 - 2 * r * math.cos(th) + r * r)

    probs = np.array([integrate.quad(pk, a, b)[0] for a, b in zip(edges[:-1], edges[1:])])
    probs /= probs.sum()
    chi2 = np.sum((counts - n * probs) ** 2 / (n * probs))
    assert stats.chi2.sf(chi2, 35) > 1e-3


def test_wos_annulus_inner_rate():
    d = geo.annulus(0.5, 1.0)
    n = 100_000
    s = hmod.sample_hitting_points(d, (0.75, 0.0), WosConfig(n=n, seed=5))
    p = np.mean(s.curve == 1)
    target = math.log(1 / 0.75) / math.log(2)
    assert abs(p - target) < 3 * math.sqrt(target * (1 - target) / n)


def test_wos_deterministic_across_workers():
    d = geo.annulus(0.5, 1.0)
    cfg = WosConfig(n=150_000, seed=9)
    a = hmod.sample_hitting_points(d, (0.75, 0.0), cfg, workers=1)
    b = hmod.sample_hitting_points(d, (0.75, 0.0), cfg, workers=3)
    assert np.array_equal(a.position, b.position)
    assert np.array_equal(a.u, b.u)


def test_wos_start_outside_rejected(disc):
    with pytest.raises(DomainValueError):
        hmod.sample_hitting_points(disc, (2.0, 0.0), WosConfig(n=10))


def test_mc_total_mass_is_one(disc):
    x = disc.point(0, 0.0)
    whole = Arc(0, 0.0, 0.999999999)
    est, _ = hmod.density_boundary_mc(disc, x, whole, 0.01, WosConfig(n=2000, seed=3))
    assert est * 0.01 == pytest.approx(1.0)


def test_mc_quarter_arc_against_exact(disc):
    x = disc.point(0, 0.0)
    arc = Arc(0, 0.375, 0.625)
    exact = arc.integrate(disc, lambda c, u: 1 / (math.pi * np.sum(
        (disc.curves[0].position(u) - x.position) ** 2, axis=-1)))
    v, se, rows = hmod.density_boundary_mc_limit(disc, x, arc, WosConfig(n=100_000, seed=4))
    assert len(rows) == 4
    assert abs(v - exact) < 3 * se


def test_nystrom_and_mc_agree_on_ellipse():
    d = geo.ellipse(2, 1)
    n = 256
    nys = HarmonicMeasure(d, "nystrom", n)
    # generic curves need a sample scan per sphere step, so keep N modest
    cfg = WosConfig(n=20_000, seed=6)
    for k, (ix, uy) in enumerate([(0, 0.5), (32, 0.4), (64, 0.9), (100, 0.2), (200, 0.55)]):
        ux = ix / n
        x = d.point(0, ux)
        arc = Arc(0, uy - 0.03, uy + 0.03)
        gx, gw = np.polynomial.legendre.leggauss(24)
        u = uy + 0.03 * gx
        w = 0.03 * gw * d.curves[0].speed(u)
        ref = np.sum(w * nys.row(0, ux, np.zeros(u.size, int), u % 1.0))
        v, se, _ = hmod.density_boundary_mc_limit(d, x, arc, cfg, stream=k)
        assert abs(v - ref) < 3 * se, (k, v, ref, se)


def test_standoff_outside_rejected(disc):
    x = disc.point(0, 0.0)
    with pytest.raises(DomainValueError):
        hmod.density_boundary_mc(disc, x, Arc(0, 0.4, 0.6), 3.0, WosConfig(n=10))


_C = {}


def _disc():
    if "d" not in _C:
        _C["d"] = geo.disc()
    return _C["d"]


def _disc_hm():
    if "hm" not in _C:
        _C["hm"] = HarmonicMeasure(_disc(), "nystrom", 128)
    return _C["hm"]


def _holed():
    if "holed" not in _C:
        d = geo.disc_with_holes(1.0, [{"center": [0.3, 0.1], "radius": 0.2}])
        _C["holed"] = (d, HarmonicMeasure(d, "nystrom", 128))
    return _C["holed"]

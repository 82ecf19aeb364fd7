import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbmcouple import geometry as geo
from rbmcouple.coupling import (
    SimConfig,
    estimate_decay_rate,
    excursion_log_cos,
    fit_log_slope,
    inverse_local_time,
    simulate_coupling,
    simulate_replicas,
    summary,
)
from rbmcouple.errors import ConfigurationError, HorizonError, InsufficientDataError
from rbmcouple.skorokhod import DrivingPath, HalfPlane, skorokhod_transform


@pytest.fixture(scope="module")
def disc_run():
    cfg = SimConfig(h=1e-4, T=2.0, x0=(0.3, 0.0), y0=(0.3, 0.2), stride=1, d_exc=0.01)
    return simulate_coupling(geo.disc(), cfg)


def test_degenerate_start():
    cfg = SimConfig(h=1e-4, T=1.0, x0=(0.2, 0.1), y0=(0.2, 0.1))
    s = simulate_coupling(geo.disc(), cfg)
    assert s.degenerate
    assert np.all(s.d == 0.0)
    assert summary(s)["slope"] is None
    with pytest.raises(InsufficientDataError):
        estimate_decay_rate(s)


def test_fit_exact_line():
    t = np.linspace(0, 10, 500)
    slope, se = fit_log_slope(t, 3.0 - 2.0 * t)
    assert slope == pytest.approx(-2.0, abs=1e-12)
    assert se < 1e-10


def test_fit_with_noise_within_three_se():
    rng = np.random.default_rng(11)
    t = np.linspace(0, 10, 2000)
    slope, se = fit_log_slope(t, -2.0 * t + 0.1 * rng.standard_normal(t.size))
    assert abs(slope + 2.0) < 3 * se


def test_fit_needs_enough_points():
    t = np.linspace(0, 1, 50)
    with pytest.raises(InsufficientDataError):
        fit_log_slope(t, t)


@pytest.mark.parametrize("domain", [geo.disc(), geo.ellipse(2, 1)], ids=["disc", "ellipse"])
def test_distance_never_increases_in_convex_domain(domain):
    cfg = SimConfig(h=1e-4, T=2.0, x0=(0.3, 0.0), y0=(-0.3, 0.2), stride=1)
    s = simulate_coupling(domain, cfg)
    assert np.max(np.diff(s.d)) <= 1e-12
    assert s.LX[-1] > 0


def test_separation_frozen_between_contacts(disc_run):
    s = disc_run
    quiet = (np.diff(s.LX) == 0) & (np.diff(s.LY) == 0)
    assert quiet.sum() > 100
    assert np.max(np.abs(np.diff(s.log_d)[quiet])) == 0.0


def test_replicas_independent_of_worker_count():
    d = geo.annulus(0.5, 1.0)
    cfg = SimConfig(h=1e-4, T=0.5, x0=(0.7, 0.0), y0=(-0.7, 0.1))
    a = simulate_replicas(d, cfg, 3, workers=1)
    b = simulate_replicas(d, cfg, 3, workers=3)
    for u, v in zip(a, b):
        assert np.array_equal(u.series, v.series)
        assert np.array_equal(u.excursions, v.excursions)
    assert not np.array_equal(a[0].series, a[1].series)


def test_step_guard():
    with pytest.raises(ConfigurationError):
        simulate_coupling(geo.disc(), SimConfig(h=1e-2, T=1.0))
    with pytest.raises(ConfigurationError):
        simulate_coupling(geo.disc(), SimConfig(h=1e-4, T=1.0, x0=(2.0, 0.0)))
    with pytest.raises(ConfigurationError):
        simulate_coupling(geo.disc_exterior(), SimConfig())
    with pytest.raises(ConfigurationError):
        SimConfig(functionals=("nope",))


def test_excursion_threshold_monotone(disc_run):
    counts = [excursion_log_cos(disc_run, d)[2] for d in (0.01, 0.02, 0.05, 0.1)]
    assert counts == sorted(counts, reverse=True)
    with pytest.raises(ConfigurationError):
        excursion_log_cos(disc_run, 0.001)


def test_no_excursions_gives_zero(disc_run):
    t, run, n = excursion_log_cos(disc_run, 10.0)
    assert n == 0 and np.all(run == 0.0)


def test_excursion_rows_are_consistent(disc_run):
    e = disc_run.excursions
    assert e.shape[1] == 8 and len(e) == disc_run.final["excursions"]
    assert np.all(e[:, 1] > 0.01)
    assert np.all((e[:, 2] >= 0) & (e[:, 2] <= math.pi / 2))
    assert np.all(np.diff(e[:, 0]) >= 0)
    # both ends on the unit circle
    assert np.allclose(np.hypot(e[:, 4], e[:, 5]), 1.0, atol=1e-9)
    assert np.allclose(np.hypot(e[:, 6], e[:, 7]), 1.0, atol=1e-9)


def test_inverse_local_time_basics():
    t = np.linspace(0, 1, 11)
    lt = np.array([0, 0, 0.1, 0.1, 0.3, 0.3, 0.3, 0.5, 0.6, 0.6, 0.7])
    assert inverse_local_time(t, lt, 0.0, start_on_boundary=True) == 0.0
    assert inverse_local_time(t, lt, 0.0) == pytest.approx(0.2)
    taus = [inverse_local_time(t, lt, x) for x in (0.05, 0.1, 0.2, 0.5, 0.7)]
    assert taus == sorted(taus)
    with pytest.raises(HorizonError):
        inverse_local_time(t, lt, 1.0)


@settings(max_examples=25)
@given(seed=st.integers(0, 2**32 - 1), level=st.floats(0.01, 1.0))
def test_inverse_local_time_half_plane(seed, level):
    # local time of the reflected walk is minus the running minimum
    rng = np.random.default_rng(seed)
    n = 2000
    x = np.vstack([[0.0, 0.0], 0.05 * rng.standard_normal((n, 2))]).cumsum(axis=0)
    t = np.arange(n + 1) * 1e-3
    rp = skorokhod_transform(HalfPlane(), DrivingPath(t, x), 1.0)
    ell = -np.minimum.accumulate(np.minimum(x[:, 1], 0.0))
    hit = np.nonzero(ell >= level)[0]
    if hit.size == 0:
        with pytest.raises(HorizonError):
            inverse_local_time(t, rp.local_time, level, start_on_boundary=True)
    else:
        got = inverse_local_time(t, rp.local_time, level, start_on_boundary=True)
        assert abs(got - t[hit[0]]) <= 1e-3 + 1e-12


def test_summary_keys(disc_run):
    s = summary(disc_run, lam=4 * math.pi)
    assert list(s)[:6] == ["domain_id", "replica", "seed", "h", "T", "degenerate"]
    assert s["target_slope"] == pytest.approx(-2.0)
    assert s["local_time_target"] == pytest.approx(1.0)
    assert s["phi_one_target"] == pytest.approx(1.0)

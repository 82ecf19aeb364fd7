import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rbmcouple import geometry as geo
from rbmcouple.errors import ConfigurationError, StepTooLargeError
from rbmcouple.skorokhod import (
    DrivingPath,
    HalfPlane,
    read_path_csv,
    reflected_step,
    skorokhod_transform,
    variation_gap_check,
    write_path_csv,
)

HP = HalfPlane()
DISC = geo.disc()


def test_inward_drive_is_cancelled():
    t = np.linspace(0, 2, 21)
    path = DrivingPath(t, np.column_stack([np.zeros_like(t), -t]))
    rp = skorokhod_transform(HP, path, h_max=0.1)
    assert np.allclose(rp.x, 0.0)
    assert np.allclose(rp.local_time, t)


def test_disc_outward_push():
    path = DrivingPath(np.array([0.0, 1.0]), np.array([[0.9, 0.0], [1.2, 0.0]]))
    rp = skorokhod_transform(DISC, path, h_max=0.1)
    assert np.allclose(rp.x[-1], [1.0, 0.0])
    assert rp.local_time[-1] == pytest.approx(0.2)
    with pytest.raises(StepTooLargeError):
        skorokhod_transform(DISC, path, h_max=1.0)


def test_reflected_step_examples():
    x, dl, push = reflected_step(DISC, (0.2, 0.1), (0.01, -0.02))
    assert np.allclose(x, [0.21, 0.08]) and dl == 0.0 and not push.any()
    x, dl, _ = reflected_step(HP, (0.0, 0.1), (0.0, -0.3))
    assert np.allclose(x, [0, 0]) and dl == pytest.approx(0.2)
    x, dl, push = reflected_step(DISC, (0.99, 0.0), (0.02, 0.0))
    assert np.allclose(x, [1, 0]) and dl == pytest.approx(0.01)
    assert np.allclose(push, [-0.01, 0.0])


def test_v_path_gap():
    path = DrivingPath(np.array([0.0, 1.0, 2.0]), np.array([[0, 0], [0, -1.0], [0, 0]]))
    vg, vb, gap = variation_gap_check(HP, path, h_max=1.0)
    assert (vg, vb, gap) == (2.0, 1.0, 1.0)


def test_gap_zero_without_contact():
    rng = np.random.default_rng(1)
    x = 0.01 * rng.standard_normal((50, 2)).cumsum(axis=0)
    path = DrivingPath(np.arange(50.0), x)
    _, _, gap = variation_gap_check(DISC, path)
    assert gap == 0.0


def test_gap_positive_with_contact():
    rng = np.random.default_rng(2)
    x = np.vstack([[0.8, 0.0], 0.02 * rng.standard_normal((400, 2))]).cumsum(axis=0)
    path = DrivingPath(np.arange(401.0), x)
    rp = skorokhod_transform(DISC, path, h_max=1.0)
    assert rp.local_time[-1] > 0
    _, _, gap = variation_gap_check(DISC, path, reflected=rp)
    assert gap > 0


def test_first_order_convergence_under_refinement():
    # smooth driving path that spends time pressed against the circle;
    # errors from successive halvings shrink like h
    T = 1.0
    f = lambda t: np.column_stack([0.7 + 0.6 * np.sin(3 * t), 0.5 * np.sin(5 * t)])  # noqa: E731
    hs = [4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4]
    ends = []
    for h in hs:
        t = np.linspace(0, T, int(round(T / h)) + 1)
        ends.append(skorokhod_transform(DISC, DrivingPath(t, f(t)), h).x[-1])
    errs = [np.linalg.norm(a - b) for a, b in zip(ends[:-1], ends[1:])]
    slope = np.polyfit(np.log(hs[:-1]), np.log(errs), 1)[0]
    assert slope >= 0.9


def test_pure_function():
    rng = np.random.default_rng(3)
    x = np.vstack([[0.5, 0.0], 0.02 * rng.standard_normal((100, 2))]).cumsum(axis=0)
    path = DrivingPath(np.arange(101.0), x)
    a = skorokhod_transform(DISC, path, 1.0)
    b = skorokhod_transform(DISC, path, 1.0)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.local_time, b.local_time)


def test_bad_paths():
    with pytest.raises(ConfigurationError):
        DrivingPath(np.array([0.0, 0.0]), np.zeros((2, 2)))
    with pytest.raises(ConfigurationError):
        skorokhod_transform(DISC, DrivingPath(np.array([0.0]), np.array([[3.0, 0.0]])), 0.1)


def test_csv_roundtrip():
    buf = io.StringIO("t,x,y\n0,0,0\n1,0,-1\n2,0.5,0.5\n")
    path = read_path_csv(buf)
    rp = skorokhod_transform(HP, path, 1.0)
    out = io.StringIO()
    write_path_csv(out, rp)
    lines = out.getvalue().splitlines()
    assert lines[0] == "t,x,y,local_time"
    assert len(lines) == 4 and out.getvalue().endswith("\n")
    with pytest.raises(ConfigurationError):
        read_path_csv(io.StringIO("time,x\n0,1\n"))


# -- properties ------------------------------------------------------------

increments = arrays(np.float64, st.tuples(st.integers(5, 60), st.just(2)),
                    elements=st.floats(-1, 1, allow_nan=False))


@given(inc=increments, x0=st.floats(-1, 1))
def test_half_plane_closed_form(inc, x0):
    x = np.vstack([[x0, 0.0], inc]).cumsum(axis=0)
    path = DrivingPath(np.arange(len(x), dtype=float), x)
    rp = skorokhod_transform(HP, path, 1.0)
    ell = -np.minimum(np.minimum.accumulate(x[:, 1]), 0.0)
    assert np.max(np.abs(rp.x[:, 1] - (x[:, 1] + ell))) <= 1e-12
    assert np.max(np.abs(rp.local_time - ell)) <= 1e-12
    assert variation_gap_check(HP, path, reflected=rp)[2] >= 0


@given(inc=arrays(np.float64, st.tuples(st.integers(5, 80), st.just(2)),
                  elements=st.floats(-0.09, 0.09, allow_nan=False)),
       r=st.floats(0, 0.99), th=st.floats(0, 2 * math.pi))
def test_contraction_and_local_time_support(inc, r, th):
    beta = np.array([r * math.cos(th), r * math.sin(th)])
    for db in inc / math.sqrt(2):
        nb, dl, push = reflected_step(DISC, beta, db)
        # |d beta| <= |d gamma| per substep
        assert np.linalg.norm(db + push) <= np.linalg.norm(db) + 1e-15
        if dl > 0:
            # local time only grows on the boundary
            assert abs(np.linalg.norm(nb) - 1.0) < 1e-12
            assert dl == pytest.approx(np.linalg.norm(push))
        beta = nb
    assert np.linalg.norm(beta) <= 1 + 1e-12

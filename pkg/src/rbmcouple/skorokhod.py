"""Deterministic Skorokhod reflection by nearest-point projection.

Each substep proposes ``z = beta + d_gamma``.  A proposal in the closed
domain is accepted; otherwise ``beta`` moves to the nearest boundary point
of ``z`` and the local time grows by the push distance ``|z - beta'|``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, StepTooLargeError
from .geometry import BoundaryPoint

STEP_GUARD = 0.1


class HalfPlane:
    """The upper half-plane ``{y > 0}``; flat boundary, unbounded."""

    name = "half_plane"
    is_bounded = False
    exterior = ("half-plane",)
    feature_size = math.inf
    tau_bdry = 0.0
    holes = 0

    def classify(self, z):
        z = np.asarray(z, dtype=float)
        y = z[..., 1]
        out = np.where(y > 0, "inside", np.where(y < 0, "outside", "boundary")).astype(object)
        return out if out.ndim else out.item()

    def contains(self, z):
        return np.asarray(z, dtype=float)[..., 1] > 0

    def project(self, z):
        x, y = float(z[0]), float(z[1])
        return self.point(0, x), abs(y)

    def point(self, curve, u):
        return BoundaryPoint(0, float(u), np.array([float(u), 0.0]), np.array([0.0, 1.0]),
                             np.array([1.0, 0.0]), 0.0)


@dataclass(frozen=True)
class DrivingPath:
    """Piecewise-linear driving path on a strictly increasing time grid."""

    t: np.ndarray
    x: np.ndarray  # (n, 2)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if t.ndim != 1 or x.shape != (t.size, 2):
            raise ConfigurationError("path needs times (n,) and positions (n, 2)")
        if t.size < 1 or np.any(np.diff(t) <= 0):
            raise ConfigurationError("time grid must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)

    @property
    def variation(self):
        return float(np.sum(np.hypot(*np.diff(self.x, axis=0).T)))


@dataclass(frozen=True)
class ReflectedPath:
    t: np.ndarray
    x: np.ndarray  # reflected positions on the input grid
    local_time: np.ndarray
    push: np.ndarray  # total push vector per grid step, shape (n-1, 2)
    variation: float  # total variation summed over substeps
    driving_variation: float  # same summation order, for an exact comparison
    substeps: int
    on_boundary: np.ndarray  # per grid point


def reflected_step(domain, x, db, feature_size=None):
    """One projection substep.

    Returns ``(x_new, dl, push)`` where ``push = x_new - (x + db)`` points
    along the inward normal at ``x_new`` and ``dl = |push|``.
    """
    x = np.asarray(x, dtype=float)
    db = np.asarray(db, dtype=float)
    fs = domain.feature_size if feature_size is None else feature_size
    step = math.hypot(db[0], db[1])
    if step >= STEP_GUARD * fs:
        raise StepTooLargeError(
            f"increment {step:.3g} exceeds {STEP_GUARD} x feature size {fs:.3g}; use a smaller step"
        )
    z = x + db
    if domain.classify(z) != "outside":
        return z, 0.0, np.zeros(2)
    bp, dist = domain.project(z)
    xn = np.asarray(bp.position, dtype=float)
    push = xn - z
    return xn, float(math.hypot(push[0], push[1])), push


def skorokhod_transform(domain, path: DrivingPath, h_max) -> ReflectedPath:
    """Reflect ``path`` in ``domain`` using substeps of duration <= ``h_max``."""
    if not h_max > 0:
        raise ConfigurationError("h_max must be positive")
    fs = domain.feature_size
    beta = path.x[0].copy()
    if domain.classify(beta) == "outside":
        raise ConfigurationError("path must start in the closed domain")
    n = path.t.size
    xs = np.empty((n, 2))
    lt = np.zeros(n)
    pushes = np.zeros((max(n - 1, 0), 2))
    onb = np.zeros(n, dtype=bool)
    xs[0] = beta
    onb[0] = domain.classify(beta) == "boundary"
    ell = 0.0
    var = 0.0
    var_g = 0.0
    total_sub = 0
    for k in range(n - 1):
        dt = path.t[k + 1] - path.t[k]
        m = max(1, int(math.ceil(dt / h_max - 1e-12)))
        dg = (path.x[k + 1] - path.x[k]) / m
        last_push = False
        for _ in range(m):
            beta_new, dl, push = reflected_step(domain, beta, dg, fs)
            # increment form keeps |d_beta| <= |d_gamma| exact in rounding
            dbeta = dg + push
            var += math.hypot(dbeta[0], dbeta[1])
            var_g += math.hypot(dg[0], dg[1])
            pushes[k] += push
            ell += dl
            beta = beta_new
            last_push = dl > 0
        total_sub += m
        xs[k + 1] = beta
        lt[k + 1] = ell
        onb[k + 1] = last_push or domain.classify(beta) == "boundary"
    return ReflectedPath(path.t, xs, lt, pushes, var, var_g, total_sub, onb)


def variation_gap_check(domain, path: DrivingPath, h_max=None, reflected: ReflectedPath | None = None):
    """Total variations of the driving and reflected paths and their gap."""
    if reflected is None:
        h = h_max if h_max is not None else float(np.min(np.diff(path.t)))
        reflected = skorokhod_transform(domain, path, h)
    vg = reflected.driving_variation
    vb = reflected.variation
    return vg, vb, vg - vb


def read_path_csv(fp) -> DrivingPath:
    """Read a path file with header ``t,x,y``."""
    rows = list(csv.DictReader(fp))
    if not rows or set(rows[0]) != {"t", "x", "y"}:
        raise ConfigurationError("path CSV needs exactly the columns t, x, y")
    try:
        t = [float(r["t"]) for r in rows]
        xy = [[float(r["x"]), float(r["y"])] for r in rows]
    except ValueError as exc:
        raise ConfigurationError(f"non-numeric path entry: {exc}") from exc
    return DrivingPath(np.array(t), np.array(xy))


def write_path_csv(fp, rp: ReflectedPath):
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(["t", "x", "y", "local_time"])
    for t, (x, y), ell in zip(rp.t, rp.x, rp.local_time):
        w.writerow([repr(float(t)), repr(float(x)), repr(float(y)), repr(float(ell))])

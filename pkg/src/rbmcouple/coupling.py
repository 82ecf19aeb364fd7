"""Synchronous coupling of two reflected Brownian motions.

Both particles take the same Gaussian increment; they differ only through
their boundary pushes.  The simulator stores ``X`` and the separation
``Y - X``, so the separation is bit-for-bit constant while neither particle
touches the boundary.  Once the separation falls below ``d_lin`` it is
carried as a direction plus ``log d`` and evolved by the derivative of the
projection step, which keeps the decay measurable far below the
floating-point resolution of positions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numba import njit

from . import _kernels as K
from .errors import (
    ConfigurationError,
    HorizonError,
    InsufficientDataError,
    NumericalFailureError,
)
from .geometry import Domain

TWO_PI = 2.0 * math.pi
STREAM_SIM = 1
STEP_GUARD = 0.05
SUBSTEP_GUARD = 0.1
PHI_GRID = 4096
MAX_ROWS = 100_000
MIN_FIT_POINTS = 100

# boundary functionals, tabulated per curve before a run
_FUNCTIONALS: dict[str, Callable] = {
    "one": lambda curve, u: np.ones_like(u),
    "curvature": lambda curve, u: curve.curvature(u),
}


def register_functional(name, func):
    """Register ``func(curve, u) -> values`` for use as a boundary functional."""
    _FUNCTIONALS[name] = func


def functional_names():
    return tuple(_FUNCTIONALS)


@dataclass(frozen=True)
class SimConfig:
    h: float = 1e-4
    T: float = 50.0
    x0: tuple = (0.5, 0.0)
    y0: tuple = (0.5, 0.01)
    seed: int = 0
    stride: int | None = None  # None picks 100, coarsened to cap the row count
    d_exc: float | None = None  # None means 50 sqrt(h)
    functionals: tuple = ("one", "curvature")
    d_lin_rel: float = 1e-8

    def __post_init__(self):
        if not (0 < self.h <= self.T):
            raise ConfigurationError("need 0 < h <= T")
        if self.stride is not None and self.stride < 1:
            raise ConfigurationError("stride must be >= 1")
        if self.d_exc is not None and not self.d_exc > 0:
            raise ConfigurationError("d_exc must be positive")
        for f in self.functionals:
            if f not in _FUNCTIONALS:
                raise ConfigurationError(f"unknown boundary functional {f!r}")

    @property
    def n_steps(self):
        return int(round(self.T / self.h))

    @property
    def excursion_threshold(self):
        return 50.0 * math.sqrt(self.h) if self.d_exc is None else self.d_exc

    @property
    def thinning(self):
        if self.stride is not None:
            return self.stride
        return max(100, -(-self.n_steps // MAX_ROWS))


@dataclass
class CouplingStats:
    """Output of one coupled run.

    ``series`` columns: t, log_d, LX, LY, one running column per functional
    (``(1/t) int phi dL^X``) and the running excursion statistic.
    """

    config: SimConfig
    domain_id: str
    area: float
    boundary_length: float
    series: np.ndarray
    columns: tuple
    excursions: np.ndarray  # rows: t_end, max displacement, alpha, duration, sx, sy, ex, ey
    final: dict
    degenerate: bool
    targets: dict = field(default_factory=dict)
    replica: int = 0

    @property
    def t(self):
        return self.series[:, 0]

    @property
    def log_d(self):
        return self.series[:, 1]

    @property
    def d(self):
        with np.errstate(under="ignore"):
            return np.exp(self.log_d)

    @property
    def LX(self):
        return self.series[:, 2]

    @property
    def LY(self):
        return self.series[:, 3]

    def column(self, name):
        return self.series[:, self.columns.index(name)]


# ---------------------------------------------------------------------------
# kernel


@njit(cache=True, nogil=True)
def _phi_at(tab, c, u):
    G = tab.shape[2]
    s = u * G
    j = int(math.floor(s))
    f = s - j
    j0 = j % G
    j1 = (j + 1) % G
    out = np.empty(tab.shape[0])
    for k in range(tab.shape[0]):
        out[k] = (1.0 - f) * tab[k, c, j0] + f * tab[k, c, j1]
    return out


@njit(cache=True, nogil=True)
def _log_sec(c, s):
    c = abs(c)
    s = abs(s)
    if c * c < 0.5:
        return -math.log(c) if c > 0 else np.inf
    return -0.5 * math.log1p(-s * s)


@njit(cache=True, nogil=True)
def _run(rng, n_steps, h, x0, sep0, feature, d_lin, stride, d_exc, tab,
         coef, freq, nterm, kind, orient, center, radius, phase, samples, spacing):
    nc = samples.shape[0]
    ws_d = np.empty(nc)
    ws_j = np.empty(nc, dtype=np.int64)
    nphi = tab.shape[0]
    n_rows = n_steps // stride + 1
    rows = np.zeros((n_rows, 5 + nphi))
    exc_cap = 1024
    exc = np.zeros((exc_cap, 8))
    n_exc = 0

    sq = math.sqrt(h)
    x = x0
    sep = sep0
    degenerate = sep0 == 0j
    linear = False
    ldir = 1.0 + 0j
    logd = math.log(abs(sep0)) if not degenerate else -np.inf
    lx = 0.0
    ly = 0.0
    phi_int = np.zeros(nphi)
    exc_sum = 0.0
    safe_x = 0.0
    safe_y = 0.0
    have_contact = False
    last_p = 0j
    last_n = 0j
    last_t = 0.0
    max_disp = 0.0
    status = 0
    fail_step = -1

    # record row 0
    rows[0, 0] = 0.0
    rows[0, 1] = logd
    r = 1
    for step in range(1, n_steps + 1):
        db = sq * complex(rng.standard_normal(), rng.standard_normal())
        adb = abs(db)
        m = 1
        if adb > SUBSTEP_GUARD * feature:
            m = int(math.ceil(adb / (SUBSTEP_GUARD * feature)))
        dbs = db / m
        for sub in range(m):
            # ---- X ----
            zx = x + dbs
            push_x = 0j
            safe_x -= adb / m
            pushed = False
            if safe_x <= 0.0:
                c, u, p, nrm, nu, d, st = K.project_ws(zx, coef, freq, nterm, kind, orient, center,
                                                       radius, phase, samples, spacing, ws_d, ws_j)
                if st != 0:
                    status = 1
                    fail_step = step
                    break
                w = zx - p
                if w.real * nrm.real + w.imag * nrm.imag >= 0.0:
                    safe_x = d
                else:
                    pushed = True
                    push_x = p - zx
                    lx += d
                    safe_x = 0.0
                    vals = _phi_at(tab, c, u)
                    for k in range(nphi):
                        phi_int[k] += vals[k] * d
                    if have_contact and max_disp > d_exc:
                        q = last_n.real * nrm.real + last_n.imag * nrm.imag
                        s_ = last_n.real * nrm.imag - last_n.imag * nrm.real
                        a = _log_sec(q, s_)
                        exc_sum += a
                        if n_exc == exc_cap:
                            grown = np.zeros((2 * exc_cap, 8))
                            grown[:exc_cap] = exc
                            exc = grown
                            exc_cap *= 2
                        tnow = step * h
                        exc[n_exc, 0] = tnow
                        exc[n_exc, 1] = max_disp
                        exc[n_exc, 2] = math.atan2(abs(s_), abs(q))
                        exc[n_exc, 3] = tnow - last_t
                        exc[n_exc, 4] = last_p.real
                        exc[n_exc, 5] = last_p.imag
                        exc[n_exc, 6] = p.real
                        exc[n_exc, 7] = p.imag
                        n_exc += 1
                    have_contact = True
                    last_p = p
                    last_n = nrm
                    last_t = step * h
                    max_disp = 0.0
                    if linear:
                        # derivative of the projection: tangential part
                        # shrinks by 1/(1 + nu s), normal part is killed
                        tan = -1j * nrm
                        comp = ldir.real * tan.real + ldir.imag * tan.imag
                        if comp == 0.0:
                            logd = -np.inf
                        else:
                            logd += math.log(abs(comp)) - math.log1p(nu * d)
                            ldir = tan if comp > 0 else -tan
            xn = zx + push_x
            if have_contact and not pushed:
                dd = abs(xn - last_p)
                if dd > max_disp:
                    max_disp = dd
            # ---- Y ----
            if not linear and not degenerate:
                zy = x + sep + dbs
                safe_y -= adb / m
                push_y = 0j
                pushed_y = False
                if safe_y <= 0.0:
                    c, u, p, nrm, nu, d, st = K.project_ws(zy, coef, freq, nterm, kind, orient,
                                                           center, radius, phase, samples,
                                                           spacing, ws_d, ws_j)
                    if st != 0:
                        status = 1
                        fail_step = step
                        break
                    w = zy - p
                    if w.real * nrm.real + w.imag * nrm.imag >= 0.0:
                        safe_y = d
                    else:
                        pushed_y = True
                        push_y = p - zy
                        ly += d
                        safe_y = 0.0
                # the separation only changes through pushes
                if pushed or pushed_y:
                    sep = sep + (push_y - push_x)
                    ad = abs(sep)
                    logd = math.log(ad) if ad > 0.0 else -np.inf
                    if 0.0 < ad < d_lin:
                        linear = True
                        ldir = sep / ad
            elif linear:
                ly = lx
                if logd > math.log(10.0 * d_lin):
                    linear = False
                    sep = ldir * math.exp(logd)
                    safe_y = 0.0
            else:
                ly = lx
            x = xn
        if status != 0:
            break
        if step % stride == 0:
            t = step * h
            rows[r, 0] = t
            rows[r, 1] = logd
            rows[r, 2] = lx
            rows[r, 3] = ly
            for k in range(nphi):
                rows[r, 4 + k] = phi_int[k] / t
            rows[r, 4 + nphi] = exc_sum / t
            r += 1
    final = np.array([x.real, x.imag, (x + sep).real, (x + sep).imag, lx, ly, logd,
                      exc_sum, float(n_exc)])
    return rows[:r], exc[:n_exc], final, phi_int, status, fail_step


# ---------------------------------------------------------------------------


def _tabulate(domain: Domain, names):
    nc = len(domain.curves)
    tab = np.zeros((len(names), nc, PHI_GRID))
    u = np.arange(PHI_GRID) / PHI_GRID
    for k, name in enumerate(names):
        for c, curve in enumerate(domain.curves):
            tab[k, c] = _FUNCTIONALS[name](curve, u)
    return tab


def functional_target(domain: Domain, name):
    """Ergodic limit ``(1/(2|D|)) int phi dy`` of a running functional."""
    tot = 0.0
    for curve in domain.curves:
        u = curve.nodes()
        tot += float(np.mean(_FUNCTIONALS[name](curve, u) * curve.speed(u)))
    return tot / (2.0 * domain.area)


def sim_rng(seed, replica):
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAM_SIM, int(replica)))
    return np.random.Generator(np.random.Philox(ss))


def simulate_coupling(domain: Domain, config: SimConfig, replica=0, cross_term=None) -> CouplingStats:
    """Run one synchronous coupling.

    ``cross_term`` (optional) fills the excursion-statistic target
    ``cross_term / (2|D|)``.
    """
    if not domain.is_bounded:
        raise ConfigurationError("coupling simulation needs a bounded domain")
    feature = domain.feature_size
    if math.sqrt(config.h) >= STEP_GUARD * feature:
        raise ConfigurationError(
            f"sqrt(h) = {math.sqrt(config.h):.3g} must be below {STEP_GUARD} x feature size {feature:.3g}"
        )
    for name, p in (("x0", config.x0), ("y0", config.y0)):
        if domain.classify(np.asarray(p, dtype=float)) == "outside":
            raise ConfigurationError(f"{name} = {tuple(p)} is outside the domain")
    x0 = complex(*config.x0)
    sep0 = complex(*config.y0) - x0
    names = tuple(config.functionals)
    tab = _tabulate(domain, names)
    rows, exc, final, phi_int, status, fail_step = _run(
        sim_rng(config.seed, replica), config.n_steps, config.h, x0, sep0, feature,
        config.d_lin_rel * domain.diameter, config.thinning, config.excursion_threshold, tab,
        *domain.pack,
    )
    if status != 0:
        raise NumericalFailureError(f"projection failed at step {fail_step}", best=fail_step)
    columns = ("t", "log_d", "LX", "LY") + tuple(f"phi_{n}" for n in names) + ("excursion",)
    targets = {
        "decay_rate": None,
        "local_time_rate": domain.boundary_length / (2.0 * domain.area),
    }
    for n in names:
        targets[f"phi_{n}"] = functional_target(domain, n)
    if cross_term is not None:
        targets["excursion"] = cross_term / (2.0 * domain.area)
    fin = dict(zip(("xx", "xy", "yx", "yy", "LX", "LY", "log_d", "excursion_sum", "excursions"),
                   map(float, final)))
    return CouplingStats(
        config=config, domain_id=domain.name, area=domain.area,
        boundary_length=domain.boundary_length, series=rows, columns=columns,
        excursions=exc, final=fin, degenerate=sep0 == 0, targets=targets, replica=replica,
    )


def simulate_replicas(domain: Domain, config: SimConfig, replicas, workers=1, cross_term=None):
    """Independent runs ``0 .. replicas-1``, each with its own counter-derived stream."""
    domain.pack  # build shared caches before threads start
    domain.feature_size

    def run(k):
        return simulate_coupling(domain, config, k, cross_term)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(run, range(replicas)))
    return [run(k) for k in range(replicas)]


# ---------------------------------------------------------------------------
# statistics


def fit_log_slope(t, y):
    """OLS slope of ``y`` on ``t`` with a serial-correlation-aware std error.

    ``y`` is modelled as a line plus Brownian noise (variance ``s_w^2`` per
    unit time) plus independent noise (``s_e^2``).  Both variances come from
    a variogram fit of the detrended increments, and the standard error is
    ``sqrt(6 s_w^2 / (5 T) + 12 s_e^2 / (n T^2))``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    n = t.size
    if n < MIN_FIT_POINTS:
        raise InsufficientDataError(f"fit window has {n} points; need {MIN_FIT_POINTS}")
    tc = t - t.mean()
    slope = float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))
    T = float(t[-1] - t[0])
    resid = y - slope * t
    lags = np.unique(np.geomspace(1, max(2, n // 10), 12).astype(int))
    dt = T / (n - 1)
    gam = np.array([np.mean((resid[k:] - resid[:-k]) ** 2) for k in lags])
    A = np.column_stack([lags * dt, np.full(lags.size, 2.0)])
    coef, *_ = np.linalg.lstsq(A, gam, rcond=None)
    s_w2 = max(float(coef[0]), 0.0)
    s_e2 = max(float(coef[1]), 0.0)
    if s_w2 == 0.0 and s_e2 == 0.0:
        s_e2 = float(np.var(resid - resid.mean()))
    se = math.sqrt(6.0 * s_w2 / (5.0 * T) + 12.0 * s_e2 / (n * T * T))
    return slope, se


def estimate_decay_rate(stats: CouplingStats, burn_in=0.1):
    """Fitted slope of ``log d`` against ``t`` after the burn-in fraction."""
    if stats.degenerate:
        raise InsufficientDataError("degenerate run: the particles coincide, the slope is undefined")
    t = stats.t
    y = stats.log_d
    keep = (t >= burn_in * t[-1]) & np.isfinite(y)
    return fit_log_slope(t[keep], y[keep])


def boundary_functional(stats: CouplingStats, name):
    """Running ``(1/t) int phi(X) dL^X`` and its ergodic target."""
    col = f"phi_{name}"
    if col not in stats.columns:
        raise ConfigurationError(f"functional {name!r} was not recorded in this run")
    return stats.t, stats.column(col), stats.targets.get(col)


def excursion_log_cos(stats: CouplingStats, d_exc=None):
    """Running ``(1/u) sum |log cos alpha(e)|`` over excursions above ``d_exc``.

    Thresholds at or above the simulation threshold are applied after the
    fact using the recorded displacement of each excursion.
    """
    base = stats.config.excursion_threshold
    if d_exc is None or d_exc == base:
        return stats.t, stats.column("excursion"), len(stats.excursions)
    if d_exc < base:
        raise ConfigurationError(f"threshold {d_exc} is below the recorded threshold {base}")
    e = stats.excursions
    keep = e[:, 1] > d_exc
    te = e[keep, 0]
    vals = -np.log(np.cos(e[keep, 2]))
    csum = np.concatenate([[0.0], np.cumsum(vals)])
    t = stats.t
    idx = np.searchsorted(te, t, side="right")
    with np.errstate(invalid="ignore", divide="ignore"):
        run = np.where(t > 0, csum[idx] / t, 0.0)
    return t, run, int(keep.sum())


def inverse_local_time(times, local_time, level, start_on_boundary=False):
    """First grid time at which the local time reaches ``level``.

    Level 0 maps to time 0 for a start on the boundary and to the first
    contact otherwise.
    """
    times = np.asarray(times, dtype=float)
    lt = np.asarray(local_time, dtype=float)
    if level < 0:
        raise ConfigurationError("level must be non-negative")
    if level == 0:
        if start_on_boundary:
            return float(times[0])
        hit = np.nonzero(lt > 0)[0]
    else:
        hit = np.nonzero(lt >= level)[0]
    if hit.size == 0:
        raise HorizonError(f"local time level {level} not reached by t = {times[-1]:g}")
    return float(times[hit[0]])


def summary(stats: CouplingStats, burn_in=0.1, lam=None):
    """Flat record with stable key order."""
    out = {
        "domain_id": stats.domain_id,
        "replica": stats.replica,
        "seed": stats.config.seed,
        "h": stats.config.h,
        "T": stats.config.T,
        "degenerate": stats.degenerate,
    }
    if stats.degenerate:
        out["slope"] = None
        out["slope_stderr"] = None
    else:
        slope, se = estimate_decay_rate(stats, burn_in)
        out["slope"] = slope
        out["slope_stderr"] = se
    out["target_slope"] = None if lam is None else -lam / (2 * stats.area)
    out["local_time_rate"] = stats.final["LX"] / stats.config.T
    out["local_time_target"] = stats.targets["local_time_rate"]
    for c in stats.columns[4:]:
        out[c] = float(stats.series[-1, stats.columns.index(c)])
        out[c + "_target"] = stats.targets.get(c)
    out["excursion_count"] = int(stats.final["excursions"])
    return out

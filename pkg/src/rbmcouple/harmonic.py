"""Boundary-to-boundary harmonic measure.

The density ``omega(x, y)`` is normalised so that ``pi d(x, y)^2 omega(x, y)``
tends to 1 as ``y -> x``.  Three backends are available:

``exact``
    Closed forms for the disc (interior or exterior, any radius), which both
    reduce to ``1 / (pi d^2)``, and for the exterior of ``g(unit circle)``
    with ``g(z) = z + a/z``, obtained by conformal pullback.
``nystrom``
    Second normal derivative of the Dirichlet Green function,
    ``omega = 2 K2 - DtN[g_y]``, with the Dirichlet-to-Neumann map built from
    a Kress-quadrature single-layer equation.  Spectrally accurate.
``wos-mc``
    Walk-on-spheres estimate of ``(1/delta) P^{x + delta n(x)}(hit A)``,
    extrapolated to ``delta -> 0``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from . import _kernels as K
from .errors import (
    ConfigurationError,
    DomainValueError,
    NonConvergenceError,
    NumericalFailureError,
    SingularityError,
)
from .geometry import BoundaryPoint, Domain, as_complex
from .quadrature import gauss_legendre, weighted_linear_extrapolation

TWO_PI = 2.0 * np.pi
WOS_CHUNK = 65536
# same-curve points closer than this use the diagonal limit of g_y
COINCIDE = 1e-6


# ---------------------------------------------------------------------------
# closed forms


def density_exact_disc_exterior(theta, theta_prime):
    """Harmonic-measure density for the exterior of the unit disc."""
    s = np.sin((np.asarray(theta) - np.asarray(theta_prime)) / 2.0)
    if np.any(np.abs(s) < 1e-15):
        raise SingularityError("coincident angles")
    return 1.0 / (4.0 * np.pi * s * s)


def density_exact_disc_interior(x: BoundaryPoint, y: BoundaryPoint):
    d = float(np.hypot(*(np.asarray(x.position) - np.asarray(y.position))))
    if d == 0.0:
        raise SingularityError("coincident boundary points")
    return 1.0 / (np.pi * d * d)


def density_half_plane(y_offset):
    y = np.asarray(y_offset, dtype=float)
    if np.any(y == 0):
        raise SingularityError("zero offset")
    return 1.0 / (np.pi * y * y)


def half_plane_tail_mass(a):
    """Mass of ``1/(pi y^2)`` outside ``[-a, a]``."""
    if a <= 0:
        raise DomainValueError("a must be positive")
    return 2.0 / (np.pi * a)


def excursion_height_law_halfplane(a):
    """Excursion-law mass of paths from the origin reaching height ``a``."""
    if a <= 0:
        raise DomainValueError("height must be positive")
    return 1.0 / a


def poisson_void_probability(rate=lambda s: 1.0 / (1.0 + s), horizon=1.0):
    """``exp(-int_0^horizon rate)``; equals 1/2 for the default rate."""
    val, _ = integrate.quad(rate, 0.0, horizon, epsabs=1e-14, epsrel=1e-14)
    return math.exp(-val)


def _pair_arrays(x, y):
    px = as_complex(np.asarray(x.position))
    py = as_complex(np.asarray(y.position))
    return px, py


def ellipse_exterior_density(a, ux, uy, scale=1.0):
    """Density on the boundary of the mapped-ellipse exterior, by pullback."""
    wx = np.exp(1j * TWO_PI * np.asarray(ux))
    wy = np.exp(1j * TWO_PI * np.asarray(uy))
    d2 = np.abs(wx - wy) ** 2
    jx = np.abs(1 - a / wx**2)
    jy = np.abs(1 - a / wy**2)
    return 1.0 / (np.pi * d2 * jx * jy * scale * scale)


# ---------------------------------------------------------------------------
# Nystrom


def _kress_log_weights(N):
    """Circulant weights R_k for int log(4 sin^2((t - s)/2)) f(s) ds."""
    n = N // 2
    k = np.arange(N)
    m = np.arange(1, n)
    t = np.pi * k / n
    r = -(TWO_PI / n) * (np.cos(np.outer(t, m)) / m).sum(axis=1)
    r -= (np.pi / n**2) * np.cos(n * t)
    return r


class NystromSolver:
    """Dirichlet-to-Neumann matrix of a bounded smooth domain.

    Nodes are the ``n`` equispaced parameters of every boundary curve
    (``n`` even).  Row ``i`` of :attr:`dtn` maps boundary values at the
    nodes to the inward normal derivative of their harmonic extension at
    node ``i``.
    """

    def __init__(self, domain: Domain, n=None):
        if not domain.is_bounded:
            raise ConfigurationError("the Nystrom backend needs a bounded domain")
        n = int(n or max(c.n_quad for c in domain.curves))
        if n % 2:
            n += 1
        self.domain = domain
        self.n = n
        cid, us, pos, nrm, nus, sp = [], [], [], [], [], []
        for i, c in enumerate(domain.curves):
            u = c.nodes(n)
            z = c._z(u)
            dz = c._z(u, 1)
            cid.append(np.full(n, i))
            us.append(u)
            pos.append(z)
            nrm.append(1j * c.orientation * dz / np.abs(dz))
            nus.append(c.curvature(u))
            sp.append(np.abs(dz))
        self.curve = np.concatenate(cid)
        self.u = np.concatenate(us)
        self.z = np.concatenate(pos)
        self.normal = np.concatenate(nrm)
        self.nu = np.concatenate(nus)
        self.speed = np.concatenate(sp)  # |dz/du|
        self.weights = self.speed / n

    @cached_property
    def dtn(self):
        n = self.n
        M = self.z.size
        w = self.weights
        r = self.z[:, None] - self.z[None, :]
        r2 = np.abs(r) ** 2
        no = -self.normal
        np.fill_diagonal(r2, 1.0)
        S = -np.log(r2) / (4 * np.pi) * w[None, :]
        Kd = np.real(r * np.conj(no[None, :])) / (TWO_PI * r2) * w[None, :]
        rk = _kress_log_weights(n)
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        R = rk[idx]
        tt = TWO_PI * np.arange(n) / n
        dt = tt[:, None] - tt[None, :]
        for c in range(len(self.domain.curves)):
            sl = slice(c * n, (c + 1) * n)
            sp_t = self.speed[sl] / TWO_PI
            with np.errstate(divide="ignore", invalid="ignore"):
                smooth = -np.log(r2[sl, sl] / (4 * np.sin(dt / 2) ** 2)) / (4 * np.pi)
            smooth[np.diag_indices(n)] = -np.log(sp_t**2) / (4 * np.pi)
            S[sl, sl] = -R * sp_t[None, :] / (4 * np.pi) + smooth * w[sl][None, :]
            blk = Kd[sl, sl]
            blk[np.diag_indices(n)] = -self.nu[sl] / (4 * np.pi) * w[sl]
            Kd[sl, sl] = blk
        # the appended constant removes the capacity null space
        A = np.zeros((M + 1, M + 1))
        A[:M, :M] = S
        A[:M, M] = 1.0
        A[M, :M] = w
        B = np.zeros((M + 1, M))
        B[:M] = 0.5 * np.eye(M) + Kd
        try:
            X = np.linalg.solve(A, B)[:M]
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError(
                f"Nystrom system is singular (cond ~ {np.linalg.cond(A):.3g})"
            ) from exc
        if not np.all(np.isfinite(X)):
            raise NumericalFailureError(f"Nystrom solve produced non-finite values (cond ~ {np.linalg.cond(A):.3g})")
        return -X

    def source_values(self, y, ny, nuy, cy):
        """Boundary trace of ``g_y(z) = <z - y, n_y> / (pi |z - y|^2)``.

        ``y``, ``ny``, ``nuy``, ``cy`` are arrays of length P; returns (P, M).
        """
        rz = self.z[None, :] - y[:, None]
        d2 = np.abs(rz) ** 2
        close = (d2 < COINCIDE**2) & (self.curve[None, :] == cy[:, None])
        d2 = np.where(close, 1.0, d2)
        g = np.real(rz * np.conj(ny[:, None])) / (np.pi * d2)
        return np.where(close, (nuy / TWO_PI)[:, None], g)

    def node_row(self, i, y, ny, nuy, cy):
        """Density from node ``i`` to the boundary points ``y``."""
        return K.poisson_row(self.z[i], self.normal[i], np.ascontiguousarray(self.dtn[i]), self.z,
                             self.curve, np.ascontiguousarray(y, dtype=complex),
                             np.ascontiguousarray(ny, dtype=complex),
                             np.ascontiguousarray(nuy, dtype=float),
                             np.ascontiguousarray(cy, dtype=np.int64), COINCIDE)

    def density(self, x: BoundaryPoint, y: BoundaryPoint):
        xz, xn = _pt(x)
        yz, yn = _pt(y)
        if abs(xz - yz) == 0:
            raise SingularityError("coincident boundary points")
        ny = np.array([yn])
        g = self.source_values(np.array([yz]), ny, np.array([y.curvature]), np.array([y.curve]))[0]
        q = self.dtn @ g
        sl = slice(x.curve * self.n, (x.curve + 1) * self.n)
        qx = _trig_interp(q[sl], x.u)
        return float(2.0 * _k2(xz, xn, np.array([yz]), ny)[0] - qx)


def _pt(p: BoundaryPoint):
    z = complex(*np.asarray(p.position, dtype=float))
    n = complex(*np.asarray(p.normal, dtype=float))
    return z, n


def _k2(x, nx, y, ny):
    """Second mixed normal derivative of ``-log|x - y| / (2 pi)``."""
    r = x - y
    r2 = np.abs(r) ** 2
    a = np.real(nx * np.conj(ny))
    b = np.real(r * np.conj(nx)) * np.real(r * np.conj(ny))
    return (a / r2 - 2.0 * b / (r2 * r2)) / TWO_PI


def _trig_interp(vals, u):
    n = vals.size
    c = np.fft.fft(vals) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    c[n // 2] *= 0.5  # split the Nyquist mode symmetrically
    val = np.sum(c * np.exp(1j * TWO_PI * k * u))
    val += c[n // 2] * np.exp(-1j * TWO_PI * (n // 2) * u)
    return float(np.real(val))


# ---------------------------------------------------------------------------
# walk on spheres


@dataclass(frozen=True)
class WosConfig:
    n: int = 100_000
    eps: float = 1e-6
    max_steps: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("walker count must be >= 1")
        if not self.eps > 0:
            raise ConfigurationError("absorption tolerance must be positive")
        if self.max_steps < 1:
            raise ConfigurationError("step cap must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class HitSample:
    """Absorption record for a batch of walkers."""

    curve: np.ndarray
    u: np.ndarray
    position: np.ndarray  # complex
    steps: np.ndarray
    unfinished: int


def chunk_rng(seed, stream, chunk):
    """Independent Philox stream for one chunk of work."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(chunk)))
    return np.random.Generator(np.random.Philox(ss))


def _walk_chunk(pack, starts, eps, max_steps, rng):
    return K.wos_walk(starts, eps, max_steps, rng, *pack)


def sample_hitting_points(domain: Domain, start, config: WosConfig, stream=0, workers=1):
    """Run ``config.n`` walkers from ``start`` until they are absorbed.

    Work is split into fixed chunks with their own counter-derived streams,
    so results do not depend on ``workers``.
    """
    if not domain.is_bounded:
        raise ConfigurationError("walk on spheres needs a bounded domain")
    z0 = complex(*np.asarray(start, dtype=float))
    if domain.classify(np.array([z0.real, z0.imag])) != "inside":
        raise DomainValueError("walkers must start inside the domain")
    pack = domain.pack
    sizes = [min(WOS_CHUNK, config.n - s) for s in range(0, config.n, WOS_CHUNK)]

    def run(k):
        rng = chunk_rng(config.seed, stream, k)
        return _walk_chunk(pack, np.full(sizes[k], z0), config.eps, config.max_steps, rng)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    cur = np.concatenate([p[0] for p in parts])
    return HitSample(
        curve=cur,
        u=np.concatenate([p[1] for p in parts]),
        position=np.concatenate([p[2] for p in parts]),
        steps=np.concatenate([p[3] for p in parts]),
        unfinished=int(sum(p[4] for p in parts)),
    )


def sample_hitting_point(domain: Domain, start, config: WosConfig) -> BoundaryPoint:
    s = sample_hitting_points(domain, start, WosConfig(1, config.eps, config.max_steps, config.seed))
    if s.unfinished:
        raise NonConvergenceError(f"walker exceeded {config.max_steps} steps", best=1)
    return domain.point(int(s.curve[0]), s.u[0])


@dataclass(frozen=True)
class Arc:
    """Boundary arc ``{u : u0 <= u <= u1}`` on one curve, wrapping at 1."""

    curve: int
    u0: float
    u1: float

    def contains(self, curve, u):
        span = (self.u1 - self.u0) % 1.0
        return (np.asarray(curve) == self.curve) & (((np.asarray(u) - self.u0) % 1.0) <= span)

    def length(self, domain: Domain, order=20, panels=16):
        c = domain.curves[self.curve]
        return float(self.integrate(domain, lambda cc, u: np.ones_like(u), order, panels))

    def integrate(self, domain: Domain, f, order=20, panels=16):
        """Arc-length integral of ``f(curve, u)``."""
        span = (self.u1 - self.u0) % 1.0
        x, w = gauss_legendre(order)
        e = self.u0 + span * np.linspace(0, 1, panels + 1)
        h = np.diff(e)
        u = (e[:-1, None] + h[:, None] * x[None, :]).ravel()
        wt = (h[:, None] * w[None, :]).ravel()
        c = domain.curves[self.curve]
        return float(np.sum(wt * c.speed(u % 1.0) * f(self.curve, u % 1.0)))


def density_boundary_mc(domain: Domain, x: BoundaryPoint, arc: Arc, delta, config: WosConfig,
                        stream=0, workers=1):
    """``(1/delta) P^{x + delta n(x)}(hit arc)`` with its binomial std error."""
    start = np.asarray(x.position) + delta * np.asarray(x.normal)
    if domain.classify(start) != "inside" or domain.project(start)[1] < 0.5 * delta:
        raise DomainValueError(f"standoff {delta:g} leaves the domain or is not resolved")
    s = sample_hitting_points(domain, start, config, stream, workers)
    if s.unfinished:
        raise NonConvergenceError(f"{s.unfinished} walkers exceeded the step cap", best=s)
    p = float(np.mean(arc.contains(s.curve, s.u)))
    se = math.sqrt(max(p * (1 - p), 1.0 / config.n) / config.n)
    return p / delta, se / delta


def density_boundary_mc_limit(domain: Domain, x: BoundaryPoint, arc: Arc, config: WosConfig,
                              delta0=None, levels=4, stream=0, workers=1):
    """Standoff sequence ``delta_j = delta0 / 2**j`` extrapolated to zero.

    Returns ``(value, std_error, per_level)`` where ``per_level`` lists
    ``(delta, estimate, std_error)``.
    """
    if delta0 is None:
        delta0 = 1e-2 * min(1.0, domain.feature_size)
    rows = []
    for j in range(levels):
        d = delta0 / 2**j
        est, se = density_boundary_mc(domain, x, arc, d, config, stream=stream * 64 + j, workers=workers)
        rows.append((d, est, se))
    ds, es, ss = map(np.array, zip(*rows))
    v, se = weighted_linear_extrapolation(es, ss, ds)
    return v, se, rows


# ---------------------------------------------------------------------------


class HarmonicMeasure:
    """Harmonic-measure density of a domain under a chosen backend.

    Parameters
    ----------
    domain : Domain
    backend : {"auto", "exact", "nystrom", "wos-mc"}
        ``auto`` picks ``exact`` when a closed form exists, else ``nystrom``.
    n_nodes : int, optional
        Nystrom nodes per curve (defaults to the curves' ``n_quad``).
    wos : WosConfig, optional
    deltas : sequence of float, optional
        Standoff sequence for ``wos-mc``.
    """

    def __init__(self, domain: Domain, backend="auto", n_nodes=None, wos=None, deltas=None):
        if backend == "auto":
            backend = "exact" if has_exact_kernel(domain) else "nystrom"
        if backend not in ("exact", "nystrom", "wos-mc"):
            raise ConfigurationError(f"unknown backend {backend!r}")
        if backend == "exact" and not has_exact_kernel(domain):
            raise ConfigurationError(f"no closed-form harmonic measure for {domain.name}")
        if backend != "exact" and not domain.is_bounded:
            raise ConfigurationError("numerical backends need a bounded domain")
        self.domain = domain
        self.backend = backend
        self.n_nodes = int(n_nodes or max(c.n_quad for c in domain.curves))
        self.wos = wos or WosConfig()
        self.deltas = deltas
        self._solvers = {}

    def solver(self, n=None) -> NystromSolver:
        n = int(n or self.n_nodes)
        if n not in self._solvers:
            self._solvers[n] = NystromSolver(self.domain, n)
        return self._solvers[n]

    def density(self, x: BoundaryPoint, y: BoundaryPoint, arc_halfwidth=0.02):
        """Return ``(value, error_estimate)``.

        For ``wos-mc`` the value is the average density over the arc of
        parameter half-width ``arc_halfwidth`` centred at ``y``.
        """
        if np.allclose(x.position, y.position, rtol=0, atol=0):
            raise SingularityError("coincident boundary points")
        if self.backend == "exact":
            return float(self._exact(x.curve, x.u, np.array([y.curve]), np.array([y.u]),
                                     x.position, np.array([y.position]))[0]), 0.0
        if self.backend == "nystrom":
            v = self.solver().density(x, y)
            v2 = self.solver(self.n_nodes // 2).density(x, y)
            return v, abs(v - v2)
        arc = Arc(y.curve, (y.u - arc_halfwidth) % 1.0, (y.u + arc_halfwidth) % 1.0)
        v, se, _ = density_boundary_mc_limit(self.domain, x, arc, self.wos,
                                             delta0=None if self.deltas is None else self.deltas[0],
                                             levels=4 if self.deltas is None else len(self.deltas))
        return v / arc.length(self.domain), se / arc.length(self.domain)

    def _exact(self, xc, xu, ycs, yus, xpos, ypos):
        tag = self.domain.exterior
        if tag is not None and tag[0] == "ellipse":
            c = self.domain.curves[0]
            scale = abs(c.coeffs[c.freqs == 1][0])
            return ellipse_exterior_density(tag[1], xu, yus, scale)
        d = np.hypot(*(np.asarray(xpos)[None, :] - np.asarray(ypos)).T)
        return 1.0 / (np.pi * d * d)

    def row(self, xc, xu, ycs, yus, n=None):
        """Densities from boundary node ``(xc, xu)`` to many points.

        Used by the cross-term quadrature; for ``nystrom`` the point
        ``(xc, xu)`` must be a node of the ``n``-point grid.
        """
        dom = self.domain
        ycs = np.asarray(ycs)
        yus = np.asarray(yus)
        if self.backend == "exact":
            xpos = dom.curves[xc].position(xu)
            ypos = np.empty((yus.size, 2))
            for c in np.unique(ycs):
                m = ycs == c
                ypos[m] = dom.curves[c].position(yus[m])
            return self._exact(xc, xu, ycs, yus, xpos, ypos)
        if self.backend != "nystrom":
            raise ConfigurationError("row evaluation supports the exact and nystrom backends")
        s = self.solver(n)
        k = xu * s.n
        ki = int(round(k))
        if abs(k - ki) > 1e-9:
            raise ConfigurationError("x must be a Nystrom node")
        i = xc * s.n + (ki % s.n)
        y = np.empty(yus.size, dtype=complex)
        ny = np.empty(yus.size, dtype=complex)
        nuy = np.empty(yus.size)
        for c in np.unique(ycs):
            m = ycs == c
            cv = dom.curves[c]
            y[m] = cv._z(yus[m])
            dz = cv._z(yus[m], 1)
            ny[m] = 1j * cv.orientation * dz / np.abs(dz)
            nuy[m] = cv.curvature(yus[m])
        return s.node_row(i, y, ny, nuy, ycs)


def has_exact_kernel(domain: Domain):
    if domain.exterior is not None:
        return True
    return len(domain.curves) == 1 and domain.curves[0].is_circle

"""Lyapunov exponent of the synchronous coupling.

``lambda(D) = int nu dx + int int |log cos alpha(x, y)| omega_x(dy) dx`` and the
distance between coupled particles decays like ``exp(-lambda t / (2|D|))``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geometry as geo
from .errors import ConfigurationError, DomainValueError, InvalidCurveError
from .harmonic import HarmonicMeasure
from .quadrature import graded_rule, pairwise_sum, periodic_roots, periodic_rule

TWO_PI = 2.0 * np.pi
CHI_TOL = 1e-6
ERR_FLOOR = 1e-10

REPORT_COLUMNS = (
    "domain_id", "holes", "curvature_term", "cross_term", "lambda", "area",
    "decay_rate", "err_curv", "err_cross", "backend", "nodes", "seed",
)


def log_sec(c, s):
    """``|log cos alpha|`` from ``|cos alpha|`` and ``|sin alpha|``.

    Uses whichever of the two is better conditioned.
    """
    c = np.abs(c)
    s = np.abs(s)
    small = c * c < 0.5
    with np.errstate(divide="ignore"):
        return np.where(small, -np.log(np.where(small, c, 1.0)),
                        -0.5 * np.log1p(-np.minimum(s * s, 0.5)))


def _dot_cross(nx, ny):
    p = np.conj(nx) * ny
    return p.real, p.imag


# ---------------------------------------------------------------------------
# quadrature of the double integral


def _inner_integral(domain, hm, xc, xu, n_nodes):
    """``int |log cos alpha(x, y)| omega_x(dy)`` for one boundary node x."""
    cx = domain.curves[xc]
    dzx = cx._z(xu, 1)
    nx = 1j * cx.orientation * dzx / abs(dzx)
    total = []
    for c, curve in enumerate(domain.curves):

        def dot(u, curve=curve):
            dz = curve._z(u, 1)
            return np.real(np.conj(nx) * 1j * dz / np.abs(dz))

        roots = periodic_roots(dot, n=max(64, curve.n_quad // 4))
        brk = list(roots)
        sing = [True] * len(brk)
        if c == xc:
            brk.append(xu)
            sing.append(False)
        u, w = periodic_rule(brk, sing)
        dz = curve._z(u, 1)
        sp = np.abs(dz)
        ny = 1j * curve.orientation * dz / sp
        cth, sth = _dot_cross(nx, ny)
        om = hm.row(xc, xu, np.full(u.size, c), u, n=n_nodes)
        total.append(np.sum(w * sp * log_sec(cth, sth) * om))
    return float(sum(total))


def _outer(domain, hm, n_nodes, n_outer, workers):
    jobs = []
    for c, curve in enumerate(domain.curves):
        u = np.arange(n_outer) / n_outer
        w = curve.speed(u) / n_outer
        jobs += [(c, ui, wi) for ui, wi in zip(u, w)]

    def run(job):
        c, ui, wi = job
        return wi * _inner_integral(domain, hm, c, ui, n_nodes)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            vals = list(ex.map(run, jobs))
    else:
        vals = [run(j) for j in jobs]
    return pairwise_sum(vals)


def cross_term(domain: geo.Domain, hm: HarmonicMeasure | None = None, n_nodes=None, workers=1):
    """Double integral of ``|log cos alpha|`` against harmonic measure.

    The outer integral is the periodic trapezoid rule over ``n_nodes`` nodes
    per curve; the inner one is Gauss-Legendre split at the diagonal and
    graded toward the points where the tangents are perpendicular.  The
    error estimate compares against a run with half the nodes (half the
    Nystrom resolution as well).

    Returns
    -------
    value, error : float
    """
    hm = hm or HarmonicMeasure(domain)
    if hm.backend == "wos-mc":
        raise ConfigurationError("cross_term needs the exact or nystrom backend")
    n = int(n_nodes or hm.n_nodes)
    n -= n % 2
    value = _outer(domain, hm, n, n, workers)
    coarse = _outer(domain, hm, n // 2, n // 2, workers)
    err = max(abs(value - coarse), ERR_FLOOR * max(1.0, abs(value)))
    return value, err


# ---------------------------------------------------------------------------


@dataclass
class LyapunovReport:
    domain_id: str
    holes: int
    curvature_term: float
    cross_term: float
    lambda_: float
    chi: int
    chi_deviation: float
    area: float
    decay_rate: float | None
    err_curv: float
    err_cross: float
    backend: str
    nodes: int
    seed: int | None = None
    flags: list = field(default_factory=list)

    @property
    def chi_ok(self):
        return self.chi_deviation < CHI_TOL

    def row(self):
        """Values in :data:`REPORT_COLUMNS` order."""
        d = self.record()
        return [d[k] for k in REPORT_COLUMNS]

    def record(self):
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return {
            "domain_id": d["domain_id"],
            "holes": d["holes"],
            "curvature_term": d["curvature_term"],
            "cross_term": d["cross_term"],
            "lambda": d["lambda"],
            "area": d["area"],
            "decay_rate": d["decay_rate"],
            "err_curv": d["err_curv"],
            "err_cross": d["err_cross"],
            "backend": d["backend"],
            "nodes": d["nodes"],
            "seed": d["seed"],
            "chi": d["chi"],
            "chi_deviation": d["chi_deviation"],
            "flags": list(d["flags"]),
        }


def compute_lambda(domain: geo.Domain, hm: HarmonicMeasure | None = None, n_nodes=None,
                   workers=1) -> LyapunovReport:
    """Assemble the Lyapunov exponent and its decay rate for ``domain``."""
    hm = hm or HarmonicMeasure(domain)
    n = int(n_nodes or hm.n_nodes)
    curv, err_curv = geo.curvature_integral(domain, max(n, max(c.n_quad for c in domain.curves)))
    tag = domain.exterior
    if tag is not None and tag[0] == "ellipse" and hm.backend == "exact":
        # normal-angle coordinates keep the outer integrand smooth even for
        # very eccentric ellipses; see ellipse_exterior_cross_term
        cross = ellipse_exterior_cross_term(tag[1], n)
        err_cross = max(abs(cross - ellipse_exterior_cross_term(tag[1], n // 2)),
                        ERR_FLOOR * max(1.0, abs(cross)))
    else:
        cross, err_cross = cross_term(domain, hm, n, workers)
    lam = curv + cross
    chi = domain.euler_characteristic
    dev = abs(curv - domain.gauss_bonnet_target)
    area = domain.area if domain.is_bounded else math.inf
    rate = -lam / (2 * area) if domain.is_bounded else None
    flags = []
    if dev >= CHI_TOL:
        flags.append("gauss-bonnet")
    if cross <= 0:
        flags.append("cross-term-not-positive")
    if domain.is_bounded and domain.holes <= 1 and lam <= 0:
        flags.append("nonpositive-lambda-with-at-most-one-hole")
    return LyapunovReport(
        domain_id=domain.name, holes=domain.holes, curvature_term=curv, cross_term=cross,
        lambda_=lam, chi=chi, chi_deviation=dev, area=area, decay_rate=rate,
        err_curv=err_curv, err_cross=err_cross, backend=hm.backend, nodes=n, flags=flags,
    )


# ---------------------------------------------------------------------------
# closed-form anchors


def disc_exterior_half_integrals():
    """``int |log cos t| / sin^2(t/2)`` over [0, pi/2] and [pi/2, pi]."""

    def f(t):
        return log_sec(np.cos(t), np.sin(t)) / np.sin(t / 2) ** 2

    x, w = graded_rule(0.0, np.pi / 2, False, True)
    lo = float(w @ f(x))
    x, w = graded_rule(np.pi / 2, np.pi, True, False)
    return lo, float(w @ f(x))


def _circle_angle(a, psi):
    """Circle parameter whose image under ``z + a/z`` has normal angle ``psi``."""
    return np.arctan2((1 - a) * np.sin(psi), (1 + a) * np.cos(psi))


def _circle_angle_rate(a, psi):
    return (1 - a * a) / ((1 + a) ** 2 * np.cos(psi) ** 2 + (1 - a) ** 2 * np.sin(psi) ** 2)


def ellipse_exterior_cross_term(a, n=256):
    """Cross term for the exterior of ``g(unit circle)``, ``g(z) = z + a/z``.

    The pulled-back kernel ``1 / (pi |e^{it} - e^{is}|^2)`` is integrated
    against ``|log |cos(phi(t) - phi(s))||`` with ``phi`` the normal angle
    of the image curve.  Both variables are then changed to normal angles,
    which pins the log singularities to ``psi' = psi +- pi/2``; the outer
    integrand is then smooth and the trapezoid rule converges spectrally.
    """
    if not 0 < a < 1:
        raise DomainValueError("map parameter must lie in (0, 1)")
    psis = TWO_PI * np.arange(n) / n
    vals = []
    for p1 in psis:
        b = p1 / TWO_PI
        u, w = periodic_rule([b, (b + 0.25) % 1.0, (b + 0.75) % 1.0], [False, True, True])
        p2 = TWO_PI * u
        d = p1 - p2
        t1 = _circle_angle(a, p1)
        t2 = _circle_angle(a, p2)
        ker = 1.0 / (4.0 * np.pi * np.sin((t1 - t2) / 2) ** 2)
        jac = _circle_angle_rate(a, p1) * _circle_angle_rate(a, p2)
        f = log_sec(np.cos(d), np.sin(d)) * ker * jac
        vals.append(float(np.sum(w * TWO_PI * f)))
    return TWO_PI * pairwise_sum(np.array(vals) / n)


def ellipse_inner_identity(a, n=512):
    """``int_0^{2pi} (1 - a^2) / |1 - a e^{2it}|^2 dt``; equals 2 pi."""
    t = TWO_PI * np.arange(n) / n
    return float(np.mean((1 - a * a) / np.abs(1 - a * np.exp(2j * t)) ** 2) * TWO_PI)


# ---------------------------------------------------------------------------


def scaling_invariance_check(domain: geo.Domain, a, backend="auto", n_nodes=None):
    """Compare the exponent of ``domain`` and ``a * domain``."""
    if a <= 0:
        raise DomainValueError("scale must be positive")
    r1 = compute_lambda(domain, HarmonicMeasure(domain, backend, n_nodes), n_nodes)
    scaled = domain.scaled(a)
    r2 = compute_lambda(scaled, HarmonicMeasure(scaled, backend, n_nodes), n_nodes)
    return {
        "lambda": r1.lambda_,
        "lambda_scaled": r2.lambda_,
        "difference": abs(r1.lambda_ - r2.lambda_),
        "error_estimate": r1.err_cross + r2.err_cross + r1.err_curv + r2.err_curv,
        "rate": r1.decay_rate,
        "rate_scaled": r2.decay_rate,
    }


def validate_hole_layout(radius, holes):
    """Holes must sit inside and be separated by > 10 max hole diameters."""
    if not holes:
        return
    diam = 2 * max(h["radius"] * max(1.0, h.get("aspect", 1.0)) for h in holes)
    cs = [complex(*h["center"]) for h in holes]
    rs = [h["radius"] * max(1.0, h.get("aspect", 1.0)) for h in holes]
    for i in range(len(holes)):
        if abs(cs[i]) + rs[i] >= radius:
            raise InvalidCurveError(f"hole {i} crosses the outer boundary")
        for j in range(i):
            gap = abs(cs[i] - cs[j]) - rs[i] - rs[j]
            if gap <= 10 * diam:
                raise InvalidCurveError(
                    f"holes {j} and {i} are {gap:.3g} apart; need > {10 * diam:.3g}"
                )


def hole_sweep(radius, holes, backend="nystrom", n_nodes=256, workers=1):
    """Exponent of the disc with its first ``k`` holes, ``k = 0..len(holes)``.

    Each row carries the separated-sum estimate: the outer disc's exponent
    plus zero per hole (disc and ellipse exteriors have exponent zero), and
    the deviation from it.
    """
    validate_hole_layout(radius, holes)
    rows = []
    base = None
    for k in range(len(holes) + 1):
        dom = geo.disc_with_holes(radius, holes[:k], n_quad=n_nodes)
        be = "exact" if k == 0 and backend == "auto" else ("nystrom" if backend == "auto" else backend)
        rep = compute_lambda(dom, HarmonicMeasure(dom, be, n_nodes), n_nodes, workers)
        if base is None:
            base = rep.lambda_
        rows.append({
            **rep.record(),
            "sign": int(np.sign(rep.lambda_)),
            "separated_sum": base,
            "decomposition_error": rep.lambda_ - base,
        })
    return rows

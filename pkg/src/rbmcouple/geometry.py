"""Smooth planar domains bounded by truncated Fourier curves.

Sign conventions: ``normal`` is the unit normal pointing into the domain and
``curvature`` is positive where the boundary bends toward that normal (a
disc of radius r has curvature 1/r, its exterior -1/r).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from shapely.geometry import LinearRing, Polygon

from . import _kernels as K
from .errors import (
    InfiniteAreaError,
    InvalidCurveError,
    NumericalFailureError,
)

TWO_PI = 2.0 * np.pi
MIN_NQUAD = 64


class BoundaryPack(NamedTuple):
    """Flat arrays consumed by the compiled kernels."""

    coef: np.ndarray
    freq: np.ndarray
    nterm: np.ndarray
    kind: np.ndarray
    orient: np.ndarray
    center: np.ndarray
    radius: np.ndarray
    phase: np.ndarray
    samples: np.ndarray
    spacing: np.ndarray


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """Closed curve ``z(u) = sum_k c_k exp(2 pi i k u)``, ``u`` in [0, 1).

    ``orientation`` is +1 when the domain lies to the left of increasing
    ``u`` and -1 when it lies to the right.
    """

    coeffs: np.ndarray
    freqs: np.ndarray
    orientation: int
    kind: str = "fourier"
    n_quad: int = 512

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        k = np.asarray(self.freqs, dtype=np.int64).ravel()
        if c.shape != k.shape or c.size == 0:
            raise InvalidCurveError("coefficient and frequency arrays must match")
        if self.orientation not in (1, -1):
            raise InvalidCurveError("orientation must be +1 or -1")
        if int(self.n_quad) < MIN_NQUAD:
            raise InvalidCurveError(f"n_quad must be >= {MIN_NQUAD}")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "freqs", k)
        object.__setattr__(self, "n_quad", int(self.n_quad))

    # -- evaluation (complex form) -------------------------------------
    def _z(self, u, order=0):
        u = np.asarray(u, dtype=float)
        w = TWO_PI * self.freqs
        e = np.exp(1j * np.multiply.outer(u, w))
        return e @ (self.coeffs * (1j * w) ** order)

    def position(self, u):
        """Cartesian position(s), shape ``u.shape + (2,)``."""
        return as_xy(self._z(u))

    def derivative(self, u, order=1):
        return as_xy(self._z(u, order))

    def speed(self, u):
        return np.abs(self._z(u, 1))

    def tangent(self, u):
        dz = self._z(u, 1)
        return as_xy(dz / np.abs(dz))

    def normal(self, u):
        dz = self._z(u, 1)
        return as_xy(1j * self.orientation * dz / np.abs(dz))

    def curvature(self, u):
        dz = self._z(u, 1)
        ddz = self._z(u, 2)
        sp = np.abs(dz)
        if np.any(sp == 0):
            raise InvalidCurveError("curve has zero speed")
        return self.orientation * np.imag(np.conj(dz) * ddz) / sp**3

    def nodes(self, n=None):
        n = self.n_quad if n is None else int(n)
        return np.arange(n) / n

    # -- geometry ------------------------------------------------------
    @property
    def is_circle(self):
        return self.kind == "circle"

    def signed_area(self, n=None):
        """Area enclosed by the curve, positive for counterclockwise."""
        u = self.nodes(n)
        z = self._z(u)
        dz = self._z(u, 1)
        return float(np.mean(np.imag(np.conj(z) * dz)) / 2.0)

    def length(self, n=None):
        return float(np.mean(self.speed(self.nodes(n))))

    def scaled(self, a):
        return BoundaryCurve(self.coeffs * a, self.freqs, self.orientation, self.kind, self.n_quad)

    def with_nquad(self, n):
        return BoundaryCurve(self.coeffs, self.freqs, self.orientation, self.kind, n)

    def polygon(self, n=None):
        return self.position(self.nodes(n))

    def validate(self):
        u = self.nodes(4 * self.n_quad)
        if np.min(self.speed(u)) <= 1e-12 * max(1.0, self.length()):
            raise InvalidCurveError("curve is not regular (zero speed)")
        ring = LinearRing(self.polygon(4 * self.n_quad))
        if not ring.is_simple:
            raise InvalidCurveError("curve self-intersects")


@dataclass(frozen=True)
class BoundaryPoint:
    """A point of the boundary with its local frame."""

    curve: int
    u: float
    position: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature: float


def as_xy(z):
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1)


def as_complex(p):
    p = np.asarray(p, dtype=float)
    return p[..., 0] + 1j * p[..., 1]


# ---------------------------------------------------------------------------
# curve constructors


def circle_curve(center=(0.0, 0.0), radius=1.0, orientation=1, n_quad=512):
    if radius <= 0:
        raise InvalidCurveError("radius must be positive")
    c0 = complex(center[0], center[1])
    return BoundaryCurve(np.array([c0, radius]), np.array([0, 1]), orientation, "circle", n_quad)


def ellipse_curve(a, b, center=(0.0, 0.0), angle=0.0, orientation=1, n_quad=512):
    """Ellipse with semi-axes ``a`` (along ``angle``) and ``b``."""
    if a <= 0 or b <= 0:
        raise InvalidCurveError("semi-axes must be positive")
    rot = np.exp(1j * angle)
    c0 = complex(center[0], center[1])
    coeffs = np.array([c0, rot * (a + b) / 2, rot * (a - b) / 2])
    freqs = np.array([0, 1, -1])
    keep = np.abs(coeffs) > 0
    keep[0] = True
    return BoundaryCurve(coeffs[keep], freqs[keep], orientation, "ellipse", n_quad)


def fourier_curve(a, b, orientation=1, n_quad=512):
    """Curve ``p(u) = sum_k a_k cos(2 pi k u) + b_k sin(2 pi k u)``.

    ``a`` and ``b`` are ``(K+1, 2)`` arrays of planar vectors; ``b[0]`` is
    ignored.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape != b.shape or a.shape[1] != 2:
        raise InvalidCurveError("a and b must both have shape (K+1, 2)")
    ac = a[:, 0] + 1j * a[:, 1]
    bc = b[:, 0] + 1j * b[:, 1]
    coeffs = [ac[0]]
    freqs = [0]
    for k in range(1, len(ac)):
        coeffs += [(ac[k] - 1j * bc[k]) / 2, (ac[k] + 1j * bc[k]) / 2]
        freqs += [k, -k]
    return BoundaryCurve(np.array(coeffs), np.array(freqs), orientation, "fourier", n_quad)


def radial_curve(r0, modes, center=(0.0, 0.0), orientation=1, n_quad=512):
    """Star-shaped curve ``r(t) = r0 (1 + sum amp cos(k t + phase))``.

    ``modes`` is a sequence of ``(k, amp, phase)``.
    """
    c0 = complex(center[0], center[1])
    terms = {0: c0, 1: complex(r0)}
    for k, amp, ph in modes:
        k = int(k)
        half = r0 * amp / 2
        # r(t) e^{it} splits each cosine into frequencies 1+k and 1-k
        terms[1 + k] = terms.get(1 + k, 0) + half * np.exp(1j * ph)
        terms[1 - k] = terms.get(1 - k, 0) + half * np.exp(-1j * ph)
    freqs = np.array(sorted(terms))
    coeffs = np.array([terms[k] for k in freqs])
    return BoundaryCurve(coeffs, freqs, orientation, "fourier", n_quad)


def mapped_ellipse_curve(a, scale=1.0, n_quad=512):
    """Image of the unit circle under ``g(z) = z + a/z`` (ellipse exterior)."""
    if not 0 < a < 1:
        raise InvalidCurveError("map parameter must lie in (0, 1)")
    return BoundaryCurve(np.array([scale, scale * a]), np.array([1, -1]), -1,
                         "mapped-ellipse-exterior", n_quad)


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Domain:
    """Bounded domain (outer curve plus holes) or a tagged exterior.

    ``exterior`` is ``None`` for bounded domains, or ``("disc", r)`` /
    ``("ellipse", a)``; exterior domains carry exactly one curve.
    """

    curves: tuple
    exterior: tuple | None = None
    name: str = "domain"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "curves", tuple(self.curves))
        if not self.curves:
            raise InvalidCurveError("a domain needs at least one curve")
        if self.exterior is not None and len(self.curves) != 1:
            raise InvalidCurveError("exterior domains have a single boundary curve")

    # -- bookkeeping -------------------------------------------------------
    @property
    def is_bounded(self):
        return self.exterior is None

    @property
    def holes(self):
        return 0 if self.exterior is not None else len(self.curves) - 1

    @property
    def euler_characteristic(self):
        if self.exterior is not None:
            return 0
        return 1 - self.holes

    @property
    def gauss_bonnet_target(self):
        """2 pi chi for bounded domains; -2 pi for the tagged exteriors."""
        if self.exterior is not None:
            return -TWO_PI
        return TWO_PI * self.euler_characteristic

    @property
    def area(self):
        if not self.is_bounded:
            return np.inf
        if "area" not in self._cache:
            # holes are traversed with the domain on the right, so their
            # signed contribution enters with the orientation flag
            tot = 0.0
            for c in self.curves:
                sa = c.signed_area()
                tot += c.orientation * sa
            self._cache["area"] = tot
        return self._cache["area"]

    @property
    def boundary_length(self):
        return sum(c.length() for c in self.curves)

    @property
    def diameter(self):
        if "diam" not in self._cache:
            pts = np.concatenate([c.polygon() for c in self.curves])
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            self._cache["diam"] = float(np.hypot(*(hi - lo)))
        return self._cache["diam"]

    @property
    def tau_bdry(self):
        return 1e-12 * self.diameter

    @property
    def feature_size(self):
        """min(curvature radius, gaps between boundary components)."""
        if "feature" not in self._cache:
            fs = np.inf
            for c in self.curves:
                kmax = np.max(np.abs(c.curvature(c.nodes(4 * c.n_quad))))
                if kmax > 0:
                    fs = min(fs, 1.0 / kmax)
            polys = [c.polygon() for c in self.curves]
            for i in range(len(polys)):
                for j in range(i + 1, len(polys)):
                    d = np.abs(as_complex(polys[i])[:, None] - as_complex(polys[j])[None, :])
                    fs = min(fs, float(d.min()))
            self._cache["feature"] = fs
        return self._cache["feature"]

    @property
    def pack(self) -> BoundaryPack:
        if "pack" not in self._cache:
            self._cache["pack"] = _make_pack(self.curves)
        return self._cache["pack"]

    def validate(self):
        for c in self.curves:
            c.validate()
        if self.exterior is None:
            outer = Polygon(self.curves[0].polygon())
            holes = [Polygon(c.polygon()) for c in self.curves[1:]]
            for i, h in enumerate(holes):
                if not outer.contains(h):
                    raise InvalidCurveError(f"hole {i} is not strictly inside the outer curve")
                for j in range(i):
                    if h.intersects(holes[j]):
                        raise InvalidCurveError(f"holes {j} and {i} overlap")
            if self.area <= 0:
                raise InvalidCurveError("domain area is not positive")
        return self

    def scaled(self, a):
        tag = self.exterior
        if tag is not None and tag[0] == "disc":
            tag = ("disc", tag[1] * a)
        return Domain(tuple(c.scaled(a) for c in self.curves), tag, f"{self.name}*{a:g}")

    def with_nquad(self, n):
        return Domain(tuple(c.with_nquad(n) for c in self.curves), self.exterior, self.name)

    # -- points ------------------------------------------------------------
    def point(self, curve, u) -> BoundaryPoint:
        c = self.curves[curve]
        u = float(u) % 1.0
        return BoundaryPoint(
            curve=int(curve),
            u=u,
            position=c.position(u),
            normal=c.normal(u),
            tangent=c.tangent(u),
            curvature=float(c.curvature(u)),
        )

    def nodes(self, n=None):
        """All quadrature nodes: (curve index, u, arc-length weight)."""
        cid, us, ws = [], [], []
        for i, c in enumerate(self.curves):
            u = c.nodes(n)
            cid.append(np.full(u.size, i))
            us.append(u)
            ws.append(c.speed(u) / u.size)
        return np.concatenate(cid), np.concatenate(us), np.concatenate(ws)

    # -- projection and membership ------------------------------------------
    def project_many(self, z):
        """Vectorised nearest-point query; ``z`` is complex."""
        z = np.ascontiguousarray(np.atleast_1d(z), dtype=np.complex128)
        return K.project_many(z, *self.pack)

    def project(self, z):
        """Nearest boundary point and distance for a planar point ``z``."""
        zc = complex(*np.asarray(z, dtype=float))
        cs, us, ps, ns, nus, ds, st = self.project_many(np.array([zc]))
        bp = self.point(int(cs[0]), us[0])
        if st[0] != K.STATUS_OK:
            raise NumericalFailureError("nearest-point refinement did not converge", best=(bp, ds[0]))
        return bp, float(ds[0])

    def classify(self, z):
        """Return 'inside', 'outside' or 'boundary' for each point."""
        zc = np.atleast_1d(as_complex(np.asarray(z, dtype=float)))
        inside = self._winding_inside(zc)
        out = np.where(inside, "inside", "outside").astype(object)
        # the polygonal winding number is only trusted a few sample spacings
        # away from the boundary; closer than that the normal side decides
        cs, us, ps, ns, nus, ds, st = self.project_many(zc)
        near = ds < 4.0 * self.pack.spacing.max()
        side = np.real(np.conj(zc - ps) * ns) > 0
        out[near] = np.where(side[near], "inside", "outside")
        out[ds <= self.tau_bdry] = "boundary"
        return out if np.ndim(z) > 1 else out[0]

    def contains(self, z):
        r = self.classify(z)
        return r == "inside" if isinstance(r, np.ndarray) else r == "inside"

    def _winding_inside(self, zc):
        wind = np.zeros(zc.shape)
        for c in self.curves:
            poly = as_complex(c.polygon())
            d = poly[None, :] - zc[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                # points on a vertex are settled by the normal-side test
                ang = np.nan_to_num(np.angle(np.roll(d, -1, axis=1) / d))
            w = np.rint(ang.sum(axis=1) / TWO_PI)
            sign = 1 if c.signed_area() > 0 else -1
            wind += np.abs(w) if self.exterior is None and c is self.curves[0] else 0
            if c is not self.curves[0] or self.exterior is not None:
                wind -= np.abs(w * sign)
        if self.exterior is not None:
            return wind == 0
        return wind > 0.5


def _make_pack(curves) -> BoundaryPack:
    nc = len(curves)
    mt = max(c.coeffs.size for c in curves)
    ns = max(c.n_quad for c in curves)
    coef = np.zeros((nc, mt), dtype=np.complex128)
    freq = np.zeros((nc, mt))
    nterm = np.zeros(nc, dtype=np.int64)
    kind = np.zeros(nc, dtype=np.int64)
    orient = np.zeros(nc)
    center = np.zeros(nc, dtype=np.complex128)
    radius = np.zeros(nc)
    phase = np.zeros(nc)
    samples = np.zeros((nc, ns), dtype=np.complex128)
    spacing = np.zeros(nc)
    for i, c in enumerate(curves):
        m = c.coeffs.size
        coef[i, :m] = c.coeffs
        freq[i, :m] = c.freqs
        nterm[i] = m
        orient[i] = c.orientation
        if c.is_circle:
            kind[i] = K.KIND_CIRCLE
            center[i] = c.coeffs[c.freqs == 0][0]
            c1 = c.coeffs[c.freqs == 1][0]
            radius[i] = abs(c1)
            phase[i] = np.angle(c1)
        u = np.arange(ns) / ns
        samples[i] = c._z(u)
        spacing[i] = np.max(np.abs(np.diff(np.append(samples[i], samples[i][0]))))
    return BoundaryPack(coef, freq, nterm, kind, orient, center, radius, phase, samples, spacing)


# ---------------------------------------------------------------------------
# catalog


def disc(radius=1.0, center=(0.0, 0.0), n_quad=512):
    return Domain((circle_curve(center, radius, 1, n_quad),), name=f"disc({radius:g})")


def ellipse(a, b, center=(0.0, 0.0), angle=0.0, n_quad=512):
    return Domain((ellipse_curve(a, b, center, angle, 1, n_quad),), name=f"ellipse({a:g},{b:g})")


def annulus(r_inner, r_outer, n_quad=512):
    if not 0 < r_inner < r_outer:
        raise InvalidCurveError("annulus needs 0 < r_inner < r_outer")
    return Domain(
        (circle_curve((0, 0), r_outer, 1, n_quad), circle_curve((0, 0), r_inner, -1, n_quad)),
        name=f"annulus({r_inner:g},{r_outer:g})",
    )


def disc_exterior(radius=1.0, n_quad=512):
    return Domain((circle_curve((0, 0), radius, -1, n_quad),), exterior=("disc", radius),
                  name=f"disc_exterior({radius:g})")


def ellipse_exterior(a, scale=1.0, n_quad=512):
    """Exterior of the ellipse ``g(unit circle)`` with ``g(z) = z + a/z``."""
    return Domain((mapped_ellipse_curve(a, scale, n_quad),), exterior=("ellipse", a),
                  name=f"ellipse_exterior({a:g})")


def fourier_domain(outer: BoundaryCurve, holes: Sequence[BoundaryCurve] = (), name="fourier"):
    """Bounded domain from arbitrary curves; orientation flags are set here."""
    curves = [_oriented(outer, hole=False)] + [_oriented(h, hole=True) for h in holes]
    return Domain(tuple(curves), name=name).validate()


def _oriented(c: BoundaryCurve, hole):
    ccw = c.signed_area() > 0
    o = (1 if ccw else -1) * (-1 if hole else 1)
    return BoundaryCurve(c.coeffs, c.freqs, o, c.kind, c.n_quad)


def disc_with_holes(radius=1.0, holes=(), n_quad=512):
    """Disc with holes; each hole is a dict with ``center``, ``radius`` and
    optional ``shape`` ('circle' or 'ellipse' with ``aspect`` and ``angle``).
    """
    curves = [circle_curve((0, 0), radius, 1, n_quad)]
    for h in holes:
        shape = h.get("shape", "circle")
        if shape == "circle":
            curves.append(circle_curve(h["center"], h["radius"], -1, n_quad))
        elif shape == "ellipse":
            asp = h.get("aspect", 1.0)
            curves.append(ellipse_curve(h["radius"], h["radius"] * asp, h["center"],
                                        h.get("angle", 0.0), -1, n_quad))
        else:
            raise InvalidCurveError(f"unknown hole shape {shape!r}")
    return Domain(tuple(curves), name=f"disc_with_holes({len(holes)})").validate()


# ---------------------------------------------------------------------------
# module-level operations


def curvature(domain: Domain, point: BoundaryPoint) -> float:
    return float(domain.curves[point.curve].curvature(point.u))


def curvature_integral(domain: Domain, n_quad=None):
    """Arc-length integral of the curvature over all boundary components.

    Returns ``(value, error)``; the error compares against half the nodes.
    """
    def total(n):
        s = 0.0
        for c in domain.curves:
            m = c.n_quad if n is None else n
            u = c.nodes(m)
            s += float(np.mean(c.curvature(u) * c.speed(u)))
        return s

    v = total(n_quad)
    half = total((n_quad or max(c.n_quad for c in domain.curves)) // 2)
    return v, abs(v - half)


def tangent_angle_alpha(x: BoundaryPoint, y: BoundaryPoint) -> float:
    """Angle between the tangent lines at two boundary points, in [0, pi/2]."""
    return float(alpha_from_normals(x.normal, y.normal))


def alpha_from_normals(nx, ny):
    nx = np.asarray(nx, dtype=float)
    ny = np.asarray(ny, dtype=float)
    c = np.abs(np.sum(nx * ny, axis=-1))
    s = np.abs(nx[..., 0] * ny[..., 1] - nx[..., 1] * ny[..., 0])
    return np.arctan2(s, c)


def contains(domain: Domain, z) -> bool:
    return domain.contains(z)


def project_to_boundary(domain: Domain, z):
    return domain.project(z)


def area(domain: Domain) -> float:
    if not domain.is_bounded:
        raise InfiniteAreaError(f"{domain.name} is unbounded")
    return domain.area


def boundary_length(domain: Domain) -> float:
    return domain.boundary_length

"""Compiled boundary primitives shared by the samplers and the simulator.

Curves are packed as truncated complex Fourier series
``z(u) = sum_k c_k exp(2 pi i k u)``.  Circles (kind 1) take a closed-form
projection; every other curve uses a sample scan seeded Newton iteration on
``<z(u) - p, z'(u)> = 0``.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi

KIND_GENERIC = 0
KIND_CIRCLE = 1

NEWTON_MAXIT = 50
NEWTON_TOL = 1e-12

STATUS_OK = 0
STATUS_NEWTON_FAIL = 1


@njit(cache=True, nogil=True)
def eval_curve(coef, freq, nterm, u):
    z = 0j
    dz = 0j
    ddz = 0j
    for j in range(nterm):
        w = TWO_PI * freq[j]
        c = coef[j] * complex(math.cos(w * u), math.sin(w * u))
        z += c
        dz += 1j * w * c
        ddz -= w * w * c
    return z, dz, ddz


@njit(cache=True, nogil=True)
def frame(dz, ddz, orient):
    """Inward unit normal and signed curvature from parametric derivatives."""
    sp = abs(dz)
    n = 1j * dz / sp * orient
    kappa = (dz.real * ddz.imag - dz.imag * ddz.real) / (sp * sp * sp)
    return n, kappa * orient


@njit(cache=True, nogil=True)
def newton_foot(z, coef, freq, nterm, u0, max_du):
    u = u0
    status = STATUS_NEWTON_FAIL
    for _ in range(NEWTON_MAXIT):
        zz, dz, ddz = eval_curve(coef, freq, nterm, u)
        r = zz - z
        g = r.real * dz.real + r.imag * dz.imag
        sp2 = dz.real * dz.real + dz.imag * dz.imag
        hess = sp2 + r.real * ddz.real + r.imag * ddz.imag
        if hess <= 0.25 * sp2:
            hess = sp2
        du = -g / hess
        if du > max_du:
            du = max_du
        elif du < -max_du:
            du = -max_du
        u += du
        if abs(du) < NEWTON_TOL:
            status = STATUS_OK
            break
    u = u - math.floor(u)
    return u, status


@njit(cache=True, nogil=True)
def foot_on_curve(z, c, coef, freq, nterm, kind, orient, center, radius, phase, u0, max_du):
    """Nearest point on curve ``c``; returns (u, p, n, nu, dist, status)."""
    if kind[c] == KIND_CIRCLE:
        d = z - center[c]
        ad = abs(d)
        if ad == 0.0:
            u = 0.0
        else:
            ang = math.atan2(d.imag, d.real) - phase[c]
            u = ang / TWO_PI
            u = u - math.floor(u)
        status = STATUS_OK
    else:
        u, status = newton_foot(z, coef[c], freq[c], nterm[c], u0, max_du)
    p, dz, ddz = eval_curve(coef[c], freq[c], nterm[c], u)
    n, nu = frame(dz, ddz, orient[c])
    return u, p, n, nu, abs(z - p), status


@njit(cache=True, nogil=True)
def project_one(z, coef, freq, nterm, kind, orient, center, radius, phase, samples, spacing):
    """Global nearest boundary point over all curves.

    Ties go to the lowest curve index, then the lowest parameter.
    """
    ncurves = samples.shape[0]
    return project_ws(z, coef, freq, nterm, kind, orient, center, radius, phase, samples,
                      spacing, np.empty(ncurves), np.empty(ncurves, dtype=np.int64))


@njit(cache=True, nogil=True)
def project_ws(z, coef, freq, nterm, kind, orient, center, radius, phase, samples, spacing,
               best_sd, best_j):
    """:func:`project_one` with caller-owned scratch arrays."""
    ncurves, nsamp = samples.shape
    gmin = np.inf
    for c in range(ncurves):
        if kind[c] == KIND_CIRCLE:
            best_sd[c] = abs(abs(z - center[c]) - radius[c])
            best_j[c] = 0
        else:
            m = np.inf
            jm = 0
            for j in range(nsamp):
                s = samples[c, j] - z
                d2 = s.real * s.real + s.imag * s.imag
                if d2 < m * (1.0 - 1e-12):
                    m = d2
                    jm = j
            best_sd[c] = math.sqrt(m)
            best_j[c] = jm
        if best_sd[c] < gmin:
            gmin = best_sd[c]
    out_c = -1
    out_u = 0.0
    out_p = 0j
    out_n = 0j
    out_nu = 0.0
    out_d = np.inf
    out_s = STATUS_OK
    max_du = 0.5 / nsamp
    for c in range(ncurves):
        # a curve whose best sample trails gmin by more than a sample
        # spacing cannot own the true foot
        if best_sd[c] > gmin + spacing[c]:
            continue
        u0 = best_j[c] / nsamp
        u, p, n, nu, d, st = foot_on_curve(z, c, coef, freq, nterm, kind, orient,
                                           center, radius, phase, u0, max_du)
        if d < out_d * (1.0 - 1e-13):
            out_c = c
            out_u = u
            out_p = p
            out_n = n
            out_nu = nu
            out_d = d
            out_s = st
    return out_c, out_u, out_p, out_n, out_nu, out_d, out_s


@njit(cache=True, nogil=True)
def project_many(zs, coef, freq, nterm, kind, orient, center, radius, phase, samples, spacing):
    m = zs.shape[0]
    cs = np.empty(m, dtype=np.int64)
    us = np.empty(m)
    ps = np.empty(m, dtype=np.complex128)
    ns = np.empty(m, dtype=np.complex128)
    nus = np.empty(m)
    ds = np.empty(m)
    st = np.empty(m, dtype=np.int64)
    nc = samples.shape[0]
    ws_d = np.empty(nc)
    ws_j = np.empty(nc, dtype=np.int64)
    for i in range(m):
        c, u, p, n, nu, d, s = project_ws(zs[i], coef, freq, nterm, kind, orient, center,
                                          radius, phase, samples, spacing, ws_d, ws_j)
        cs[i] = c
        us[i] = u
        ps[i] = p
        ns[i] = n
        nus[i] = nu
        ds[i] = d
        st[i] = s
    return cs, us, ps, ns, nus, ds, st


@njit(cache=True, nogil=True)
def wos_walk(starts, eps, max_steps, rng, coef, freq, nterm, kind, orient, center, radius,
             phase, samples, spacing):
    """Walk on spheres, one walker after another from a single stream."""
    m = starts.shape[0]
    cur = np.full(m, -1, dtype=np.int64)
    uu = np.zeros(m)
    hit = np.zeros(m, dtype=np.complex128)
    steps = np.zeros(m, dtype=np.int64)
    unfinished = 0
    nc, nsamp = samples.shape
    ws_d = np.empty(nc)
    ws_j = np.empty(nc, dtype=np.int64)
    for w in range(m):
        z = starts[w]
        for step in range(max_steps + 1):
            # inlined lower bound on the boundary distance; array-heavy
            # calls are expensive in this loop
            d = np.inf
            exact_needed = False
            for c in range(nc):
                if kind[c] == KIND_CIRCLE:
                    dc = abs(abs(z - center[c]) - radius[c])
                else:
                    m2 = np.inf
                    for j in range(nsamp):
                        s = samples[c, j] - z
                        d2 = s.real * s.real + s.imag * s.imag
                        if d2 < m2:
                            m2 = d2
                    dc = math.sqrt(m2) - spacing[c]
                    if dc < 2.0 * spacing[c]:
                        exact_needed = True
                if dc < d:
                    d = dc
            if exact_needed:
                d = project_ws(z, coef, freq, nterm, kind, orient, center, radius, phase,
                               samples, spacing, ws_d, ws_j)[5]
            if d <= eps:
                c, u, p, n, nu, d, st = project_ws(z, coef, freq, nterm, kind, orient, center,
                                                   radius, phase, samples, spacing, ws_d, ws_j)
                cur[w] = c
                uu[w] = u
                hit[w] = p
                steps[w] = step
                break
            if step == max_steps:
                unfinished += 1
                steps[w] = step
                break
            th = rng.uniform(0.0, TWO_PI)
            z += d * complex(math.cos(th), math.sin(th))
    return cur, uu, hit, steps, unfinished


@njit(cache=True, nogil=True)
def poisson_row(zx, nx, dtn_row, zs, curve_ids, y, ny, nuy, cy, coincide):
    """Boundary Poisson kernel from one node: 2 K2(x, y) - DtN[g_y](x)."""
    P = y.shape[0]
    M = zs.shape[0]
    out = np.empty(P)
    c2 = coincide * coincide
    for p in range(P):
        yp = y[p]
        nyp = ny[p]
        acc = 0.0
        for j in range(M):
            r = zs[j] - yp
            d2 = r.real * r.real + r.imag * r.imag
            if d2 < c2 and curve_ids[j] == cy[p]:
                g = nuy[p] / TWO_PI
            else:
                g = (r.real * nyp.real + r.imag * nyp.imag) / (math.pi * d2)
            acc += dtn_row[j] * g
        r = zx - yp
        r2 = r.real * r.real + r.imag * r.imag
        a = nx.real * nyp.real + nx.imag * nyp.imag
        b = (r.real * nx.real + r.imag * nx.imag) * (r.real * nyp.real + r.imag * nyp.imag)
        out[p] = 2.0 * (a / r2 - 2.0 * b / (r2 * r2)) / TWO_PI - acc
    return out

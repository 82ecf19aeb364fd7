"""Quadrature rules for periodic integrands with isolated log singularities."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize_scalar

GL_ORDER = 10
GRADE_RATIO = 0.25
GRADE_LEVELS = 20


@lru_cache(maxsize=16)
def gauss_legendre(order=GL_ORDER):
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1) / 2, w / 2


def panel_rule(edges, order=GL_ORDER):
    """Composite Gauss-Legendre rule on consecutive panels."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    h = np.diff(edges)
    nodes = edges[:-1, None] + h[:, None] * x[None, :]
    weights = h[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def graded_edges(a, b, grade_a, grade_b, levels=GRADE_LEVELS, ratio=GRADE_RATIO, panels=4):
    """Panel edges on [a, b] refined geometrically toward flagged ends.

    The innermost cell next to a graded end has width ``(b-a)/2 * ratio**levels``;
    it is dropped, which is harmless for integrable log singularities.
    """
    L = b - a
    if not (grade_a or grade_b):
        return np.linspace(a, b, panels + 1)
    geo = ratio ** np.arange(levels + 1)  # 1, r, r^2, ...
    if grade_a and grade_b:
        left = a + (L / 2) * geo[::-1]
        right = b - (L / 2) * geo
        return np.concatenate([left, right[1:]])
    if grade_a:
        return a + L * geo[::-1]
    return b - L * geo


def graded_rule(a, b, grade_a, grade_b, **kw):
    order = kw.pop("order", GL_ORDER)
    return panel_rule(graded_edges(a, b, grade_a, grade_b, **kw), order)


def periodic_rule(breaks, singular, period=1.0, panels_per_period=16, **kw):
    """Rule over one period split at sorted ``breaks``.

    ``singular[i]`` marks breakpoint ``i`` as a log singularity that needs
    grading; non-singular breakpoints only stop nodes landing on them.
    """
    breaks = np.asarray(breaks, dtype=float)
    singular = np.asarray(singular, dtype=bool)
    order = np.argsort(breaks)
    breaks, singular = breaks[order], singular[order]
    if breaks.size == 0:
        return panel_rule(np.linspace(0, period, 33), kw.get("order", GL_ORDER))
    nodes, weights = [], []
    nb = breaks.size
    for i in range(nb):
        a = breaks[i]
        b = breaks[i + 1] if i + 1 < nb else breaks[0] + period
        if b - a <= 1e-14 * period:
            continue
        # uniform panels scale with subinterval length
        panels = max(2, int(np.ceil(panels_per_period * (b - a) / period)))
        x, w = graded_rule(a, b, singular[i], singular[(i + 1) % nb], panels=panels, **kw)
        nodes.append(x)
        weights.append(w)
    x = np.concatenate(nodes) % period
    return x, np.concatenate(weights)


def periodic_roots(f, period=1.0, n=256, tol=1e-14):
    """Zeros of a smooth periodic function, including touching zeros."""
    t = np.arange(n) * (period / n)
    v = f(t)
    roots = []
    v_next = np.roll(v, -1)
    f1 = lambda s: float(f(np.array([s]))[0])  # noqa: E731
    for i in np.nonzero(np.sign(v) * np.sign(v_next) < 0)[0]:
        a, b = t[i], t[i] + period / n
        fa, fb = f1(a), f1(b)
        if fa * fb > 0:
            # rounding flipped a sign sitting on the period seam
            roots.append(a if abs(fa) < abs(fb) else b)
            continue
        roots.append(brentq(f1, a, b, xtol=tol))
    roots += [t[i] for i in np.nonzero(v == 0)[0]]
    # double roots do not change sign; look for tiny local minima of |f|
    av = np.abs(v)
    scale = av.max() if av.size else 1.0
    flips = np.sign(v) * np.sign(v_next) < 0
    near_flip = flips | np.roll(flips, 1)
    is_min = (av <= np.roll(av, 1)) & (av <= np.roll(av, -1)) & (av < 1e-2 * scale) & (av > 0)
    is_min &= ~near_flip
    for i in np.nonzero(is_min)[0]:
        a, b = t[i] - period / n, t[i] + period / n
        res = minimize_scalar(lambda s: abs(f1(s)), bounds=(a, b),
                              method="bounded", options={"xatol": tol})
        if abs(res.fun) < 1e-9 * scale:
            roots.append(res.x)
    roots = np.sort(np.mod(roots, period))
    if roots.size > 1:
        keep = np.diff(np.append(roots, roots[0] + period)) > 1e-12 * period
        roots = roots[keep]
    return roots


def richardson(values, hs, order=1):
    """Extrapolate ``values`` at step sizes ``hs`` to ``h = 0``.

    Fits ``v = v0 + c1 h + ... + c_order h^order`` by least squares and
    returns ``v0``.
    """
    hs = np.asarray(hs, dtype=float)
    A = np.vander(hs, order + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(A, np.asarray(values, dtype=float), rcond=None)
    return float(coef[0])


def weighted_linear_extrapolation(values, errors, hs):
    """Weighted least-squares line in ``h``; returns (intercept, std error)."""
    hs = np.asarray(hs, dtype=float)
    w = 1.0 / np.asarray(errors, dtype=float) ** 2
    A = np.column_stack([np.ones_like(hs), hs])
    cov = np.linalg.inv(A.T @ (A * w[:, None]))
    beta = cov @ (A.T @ (w * np.asarray(values, dtype=float)))
    return float(beta[0]), float(np.sqrt(cov[0, 0]))


def pairwise_sum(x):
    """Fixed-order tree reduction, independent of how terms were produced."""
    x = np.asarray(x, dtype=float)
    while x.size > 1:
        if x.size % 2:
            x = np.append(x, 0.0)
        x = x[0::2] + x[1::2]
    return float(x[0]) if x.size else 0.0

"""Validation suite shared by ``rbmcouple validate`` and the acceptance tests.

Each check returns :class:`CheckResult` rows.  Reference values are closed
forms (Gauss-Bonnet targets, exact kernels, binomial hitting laws); none are
produced by the code under test.
"""

from __future__ import annotations

import filecmp
import io
import math
import os
import tempfile
import time
from contextlib import redirect_stdout
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import coupling as cp
from . import geometry as geo
from .harmonic import (
    Arc,
    HarmonicMeasure,
    WosConfig,
    density_half_plane,
    excursion_height_law_halfplane,
    half_plane_tail_mass,
    poisson_void_probability,
    sample_hitting_points,
)
from .lyapunov import compute_lambda, disc_exterior_half_integrals, scaling_invariance_check
from .skorokhod import DrivingPath, HalfPlane, skorokhod_transform, variation_gap_check

TWO_PI = 2.0 * math.pi


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float | None
    target: float | None
    tolerance: str
    seconds: float
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        val = "" if self.value is None else f" value={self.value:.10g}"
        tgt = "" if self.target is None else f" target={self.target:.10g}"
        return f"[{tag}] {self.name}:{val}{tgt} tol={self.tolerance} ({self.seconds:.2f}s) {self.detail}".rstrip()


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def _budget(results, seconds, limit, name):
    results.append(CheckResult(f"{name}/runtime", seconds < limit, seconds, None, f"< {limit:g} s",
                               seconds))
    return results


# ---------------------------------------------------------------------------
# geometry and exact kernels


def two_hole_disc(n_quad=512):
    holes = [{"center": [0.5, 0.0], "radius": 0.05}, {"center": [-0.5, 0.0], "radius": 0.05}]
    return geo.disc_with_holes(1.0, holes, n_quad)


def check_gauss_bonnet(n_quad=512):
    domains = [geo.disc(n_quad=n_quad), geo.ellipse(2, 1, n_quad=n_quad),
               geo.annulus(0.5, 1, n_quad=n_quad), two_hole_disc(n_quad),
               geo.disc_exterior(n_quad=n_quad)]
    out = []
    with _Timer() as tm:
        vals = [(d, geo.curvature_integral(d, n_quad)[0]) for d in domains]
    for d, v in vals:
        target = d.gauss_bonnet_target
        out.append(CheckResult(f"gauss_bonnet/{d.name}", abs(v - target) < 1e-8, v, target,
                               "1e-8", tm.seconds / len(domains)))
    return _budget(out, tm.seconds, 1.0, "gauss_bonnet")


def check_disc_exterior():
    out = []
    with _Timer() as tm:
        d = geo.disc_exterior()
        rep = compute_lambda(d, HarmonicMeasure(d, "exact"), 128)
        lo, hi = disc_exterior_half_integrals()
    out.append(CheckResult("disc_exterior/cross_term", abs(rep.cross_term - TWO_PI) < 1e-6,
                           rep.cross_term, TWO_PI, "1e-6", tm.seconds))
    for name, v, t in (("half_range_lower", lo, math.pi + 2 * math.log(2)),
                       ("half_range_upper", hi, math.pi - 2 * math.log(2))):
        out.append(CheckResult(f"disc_exterior/{name}", abs(v - t) < 1e-6, v, t, "1e-6", 0.0))
    out.append(CheckResult("disc_exterior/lambda", abs(rep.lambda_) < 1e-6, rep.lambda_, 0.0,
                           "1e-6", 0.0))
    return _budget(out, tm.seconds, 1.0, "disc_exterior")


def check_ellipse_exterior(params=(0.2, 0.5, 0.8), n=256):
    out = []
    with _Timer() as tm:
        for a in params:
            d = geo.ellipse_exterior(a)
            rep = compute_lambda(d, HarmonicMeasure(d, "exact"), n)
            out.append(CheckResult(f"ellipse_exterior({a:g})/cross_term",
                                   abs(rep.cross_term - TWO_PI) < 1e-6, rep.cross_term, TWO_PI,
                                   "1e-6", 0.0))
            out.append(CheckResult(f"ellipse_exterior({a:g})/lambda", abs(rep.lambda_) < 1e-6,
                                   rep.lambda_, 0.0, "1e-6", 0.0))
    return _budget(out, tm.seconds, 10.0, "ellipse_exterior")


def check_scaling(exact_only=False, nodes=128):
    out = []
    for a in (0.5, 2.0):
        with _Timer() as tm:
            r = scaling_invariance_check(geo.disc(), a, "exact", nodes)
        out.append(CheckResult(f"scaling/disc/a={a:g}", r["difference"] < 1e-6, r["difference"], 0.0,
                               "1e-6", tm.seconds))
    if exact_only:
        return out
    for a in (0.5, 2.0):
        with _Timer() as tm:
            r = scaling_invariance_check(geo.annulus(0.5, 1.0), a, "nystrom", nodes)
        out.append(CheckResult(f"scaling/annulus/a={a:g}", r["difference"] < r["error_estimate"],
                               r["difference"], 0.0, f"< err estimate {r['error_estimate']:.2g}",
                               tm.seconds))
    return out


def check_half_plane_identities():
    out = []
    with _Timer() as tm:
        a = 0.7
        tail = 2 * quad(lambda y: float(density_half_plane(y)), a, np.inf)[0]
    out.append(CheckResult("half_plane/tail_mass", abs(tail - half_plane_tail_mass(a)) < 1e-10,
                           tail, 2 / (math.pi * a), "1e-10", tm.seconds))
    v = excursion_height_law_halfplane(a)
    out.append(CheckResult("half_plane/excursion_height", abs(v - 1 / a) < 1e-12, v, 1 / a,
                           "1e-12", 0.0))
    p = poisson_void_probability()
    out.append(CheckResult("half_plane/poisson_void", abs(p - 0.5) < 1e-10, p, 0.5, "1e-10", 0.0))
    return out


def random_boundary_polylines(count=100, steps=200, seed=7):
    """Random-walk polylines in the plane started on the real axis."""
    rng = np.random.default_rng(seed)
    paths = []
    for _ in range(count):
        n = int(rng.integers(20, steps))
        dt = rng.uniform(0.2, 1.0, n)
        t = np.concatenate([[0.0], np.cumsum(dt)])
        inc = rng.standard_normal((n, 2)) * np.sqrt(dt)[:, None]
        x = np.vstack([[rng.uniform(-1, 1), 0.0], inc]).cumsum(axis=0)
        paths.append(DrivingPath(t, x))
    return paths


def check_skorokhod_half_plane(count=100):
    hp = HalfPlane()
    worst = 0.0
    worst_gap = math.inf
    with _Timer() as tm:
        for path in random_boundary_polylines(count):
            rp = skorokhod_transform(hp, path, h_max=float(np.max(np.diff(path.t))))
            g2 = path.x[:, 1]
            ell = -np.minimum(np.minimum.accumulate(g2), 0.0)
            err = max(np.max(np.abs(rp.x[:, 1] - (g2 + ell))),
                      np.max(np.abs(rp.local_time - ell)),
                      np.max(np.abs(rp.x[:, 0] - path.x[:, 0])))
            worst = max(worst, float(err))
            _, _, gap = variation_gap_check(hp, path, reflected=rp)
            worst_gap = min(worst_gap, gap)
    out = [CheckResult("skorokhod/half_plane_closed_form", worst <= 1e-12, worst, 0.0, "1e-12",
                       tm.seconds, f"{count} polylines"),
           CheckResult("skorokhod/variation_gap", worst_gap >= 0.0, worst_gap, 0.0, ">= 0", 0.0,
                       "minimum over polylines")]
    return _budget(out, tm.seconds, 5.0, "skorokhod")


# ---------------------------------------------------------------------------
# Monte Carlo and numerical backends


def crossval_pairs(count=20):
    """Boundary parameter pairs on the unit circle, spread over distances."""
    u = (np.arange(count) * 0.618033988749895) % 1.0
    off = 0.1 + 0.8 * (np.arange(count) + 0.5) / count
    return list(zip(u, (u + off) % 1.0))


def check_backend_crossval(count=20, halfwidth=0.02, workers=1):
    d = geo.disc()
    nys = HarmonicMeasure(d, "nystrom", 256)
    wos = HarmonicMeasure(d, "wos-mc", wos=WosConfig(n=100_000))
    curve = d.curves[0]
    out = []
    worst_n = 0.0
    worst_z = 0.0
    with _Timer() as tm:
        for i, (ux, uy) in enumerate(crossval_pairs(count)):
            x, y = d.point(0, ux), d.point(0, uy)
            dist = np.linalg.norm(x.position - y.position)
            exact = 1.0 / (math.pi * dist * dist)
            vn, _ = nys.density(x, y)
            worst_n = max(worst_n, abs(vn - exact))
            arc = Arc(0, (uy - halfwidth) % 1.0, (uy + halfwidth) % 1.0)
            ex_arc = arc.integrate(d, lambda c, u: 1.0 / (math.pi * np.sum(
                (curve.position(u) - x.position) ** 2, axis=-1))) / arc.length(d)
            vm, se = wos.density(x, y, halfwidth)
            z = abs(vm - ex_arc) / se
            worst_z = max(worst_z, z)
            out.append(CheckResult(f"crossval/pair{i:02d}/wos", z <= 3.0, vm, ex_arc, "3 se", 0.0,
                                   f"z={z:.2f}"))
    out.insert(0, CheckResult("crossval/nystrom_max_abs_error", worst_n <= 1e-3, worst_n, 0.0,
                              "1e-3", tm.seconds, f"{count} pairs"))
    out.insert(1, CheckResult("crossval/wos_max_z", worst_z <= 3.0, worst_z, 0.0, "3", 0.0))
    return _budget(out, tm.seconds, 120.0, "crossval")


def check_annulus_hitting(n=100_000, workers=1):
    d = geo.annulus(0.5, 1.0)
    target = math.log(4 / 3) / math.log(2)
    with _Timer() as tm:
        s = sample_hitting_points(d, (0.75, 0.0), WosConfig(n=n), stream=11, workers=workers)
        p = float(np.mean(s.curve == 1))
    se = math.sqrt(target * (1 - target) / n)
    out = [CheckResult("annulus_hitting/inner_rate", abs(p - target) <= 3 * se, p, target,
                       f"3 se = {3 * se:.2g}", tm.seconds, f"unfinished={s.unfinished}")]
    return _budget(out, tm.seconds, 30.0, "annulus_hitting")


# ---------------------------------------------------------------------------
# coupling


def check_decay_law(seeds=5, workers=1):
    d = geo.disc()
    target = -compute_lambda(d, HarmonicMeasure(d, "exact"), 128).lambda_ / (2 * d.area)
    cfg = cp.SimConfig(h=1e-4, T=50.0, x0=(0.5, 0.0), y0=(0.5, 0.01), seed=0)
    with _Timer() as tm:
        runs = cp.simulate_replicas(d, cfg, seeds, workers)
        fits = [cp.estimate_decay_rate(s) for s in runs]
    mean = float(np.mean([f[0] for f in fits]))
    out = [CheckResult("decay/mean_slope", -2.3 <= mean <= -1.7, mean, target, "[-2.3, -1.7]",
                       tm.seconds, f"{seeds} seeds")]
    for k, (s, se) in enumerate(fits):
        z = abs(s - target) / se
        out.append(CheckResult(f"decay/seed{k}", z <= 3.0, s, target, "3 fit se", 0.0,
                               f"se={se:.3f} z={z:.2f}"))
    return _budget(out, tm.seconds, 600.0, "decay")


def check_ergodic_functionals(replicas=64, workers=1):
    out = []
    with _Timer() as tm:
        d = geo.disc()
        runs = cp.simulate_replicas(d, cp.SimConfig(h=1e-4, T=50.0, seed=0), replicas, workers)
        lt = float(np.mean([s.final["LX"] / s.config.T for s in runs]))
        cv = float(np.mean([s.column("phi_curvature")[-1] for s in runs]))
        a = geo.annulus(0.5, 1.0)
        runs = cp.simulate_replicas(a, cp.SimConfig(h=1e-4, T=100.0, x0=(0.75, 0.0),
                                                    y0=(0.75, 0.01), seed=0), replicas, workers)
        ca = float(np.mean([s.column("phi_curvature")[-1] for s in runs]))
    pooled = f"mean of {replicas} replicas"
    out.append(CheckResult("ergodic/disc_local_time_rate", 0.95 <= lt <= 1.05, lt, 1.0,
                           "[0.95, 1.05]", tm.seconds, pooled))
    out.append(CheckResult("ergodic/disc_curvature_functional", 0.95 <= cv <= 1.05, cv, 1.0,
                           "[0.95, 1.05]", 0.0, pooled))
    out.append(CheckResult("ergodic/annulus_curvature_functional", -0.05 <= ca <= 0.05, ca, 0.0,
                           "[-0.05, 0.05]", 0.0, pooled))
    return out


def check_excursion_statistic(h=1e-6, T=200.0, seed=0):
    d = geo.disc()
    cross = compute_lambda(d, HarmonicMeasure(d, "exact"), 128).cross_term
    target = cross / (2 * d.area)
    with _Timer() as tm:
        s = cp.simulate_coupling(d, cp.SimConfig(h=h, T=T, seed=seed), cross_term=cross)
    v = s.final["excursion_sum"] / T
    return [CheckResult("excursion/disc_log_cos", abs(v - target) <= 0.15 * target, v, target,
                        "15%", tm.seconds,
                        f"d_exc={s.config.excursion_threshold:g} count={int(s.final['excursions'])}")]


def check_determinism(worker_counts=(1, 4, 8)):
    from .cli import main

    jobs = [
        ["lambda", "--domain", "annulus:0.5,1", "--nodes", "64"],
        ["simulate", "--domain", "annulus:0.5,1", "--nodes", "64", "--T", "5", "--h", "1e-4",
         "--seeds", "8"],
    ]
    out = []
    with _Timer() as tm, tempfile.TemporaryDirectory() as tmp:
        for j, job in enumerate(jobs):
            dirs = []
            for w in worker_counts:
                dd = os.path.join(tmp, f"job{j}_w{w}")
                with redirect_stdout(io.StringIO()):
                    rc = main(job + ["--workers", str(w), "--out", dd])
                if rc != 0:
                    raise RuntimeError(f"{job[0]} exited with {rc}")
                dirs.append(dd)
            names = sorted(f for f in os.listdir(dirs[0]) if f != "manifest.json")
            same = all(
                sorted(f for f in os.listdir(dd) if f != "manifest.json") == names
                and all(filecmp.cmp(os.path.join(dirs[0], f), os.path.join(dd, f), shallow=False)
                        for f in names)
                for dd in dirs[1:]
            )
            out.append(CheckResult(f"determinism/{job[0]}", same, None, None,
                                   "byte-identical", 0.0,
                                   f"{len(names)} files at workers {list(worker_counts)}"))
        # the sampler splits work into fixed chunks; check it directly too
        d = geo.annulus(0.5, 1.0)
        cfg = WosConfig(n=200_000, seed=3)
        ref = sample_hitting_points(d, (0.75, 0.0), cfg, workers=1)
        same = all(
            np.array_equal(ref.position, s.position) and np.array_equal(ref.steps, s.steps)
            for s in (sample_hitting_points(d, (0.75, 0.0), cfg, workers=w)
                      for w in worker_counts[1:])
        )
        out.append(CheckResult("determinism/walk_on_spheres", same, None, None, "bit-identical",
                               0.0))
    out[0].seconds = tm.seconds
    return out


# ---------------------------------------------------------------------------

QUICK = (
    ("gauss_bonnet", check_gauss_bonnet),
    ("disc_exterior", check_disc_exterior),
    ("ellipse_exterior", check_ellipse_exterior),
    ("scaling_exact", lambda **_: check_scaling(exact_only=True)),
    ("half_plane", check_half_plane_identities),
    ("skorokhod", check_skorokhod_half_plane),
)

FULL = QUICK[:3] + (
    ("scaling", check_scaling),
    QUICK[4],
    QUICK[5],
    ("crossval", check_backend_crossval),
    ("annulus_hitting", check_annulus_hitting),
    ("decay", check_decay_law),
    ("ergodic", check_ergodic_functionals),
    ("excursion", check_excursion_statistic),
    ("determinism", check_determinism),
)


def run_suite(quick=False, workers=1, stream=None):
    """Run the checks, print one line each, and return True if all pass."""
    ok = True
    failed = []
    for name, fn in (QUICK if quick else FULL):
        kw = {"workers": workers} if "workers" in fn.__code__.co_varnames else {}
        try:
            results = fn(**kw)
        except Exception as exc:  # a crashing check is a failed check
            results = [CheckResult(name, False, None, None, "-", 0.0, f"error: {exc!r}")]
        for r in results:
            ok &= r.passed
            if not r.passed:
                failed.append(r.name)
            if stream is not None:
                print(r.line(), file=stream, flush=True)
    if stream is not None:
        print("validation passed" if ok else "validation FAILED: " + ", ".join(failed), file=stream)
    return ok

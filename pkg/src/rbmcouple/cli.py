"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import config as cfgmod
from . import coupling as cp
from . import geometry as geo
from . import reporting as rep
from .errors import ConfigurationError, RBMError
from .harmonic import HarmonicMeasure, WosConfig
from .lyapunov import REPORT_COLUMNS, compute_lambda, hole_sweep
from .skorokhod import read_path_csv, skorokhod_transform, variation_gap_check, write_path_csv

SIM_TABLE_COLUMNS = ("replica", "seed", "slope", "slope_stderr", "target_slope", "degenerate",
                     "local_time_rate", "local_time_target", "excursion_count")
SWEEP_COLUMNS = REPORT_COLUMNS + ("sign", "separated_sum", "decomposition_error")

# three well-separated small holes; used when a sweep config gives none
DEFAULT_SWEEP_HOLES = [
    {"center": [0.5, 0.0], "radius": 0.02},
    {"center": [-0.25, 0.4330127018922193], "radius": 0.02},
    {"center": [-0.25, -0.4330127018922193], "radius": 0.02},
]


def _point(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="rbmcouple", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config; flags override its values")
    common.add_argument("--domain", help="shorthand such as disc, annulus:0.5,1, ellipse_exterior:0.5")
    common.add_argument("--n-quad", type=int, dest="n_quad")
    common.add_argument("--hm", choices=["auto", "exact", "nystrom", "wos-mc"])
    common.add_argument("--nodes", type=int, help="Nystrom nodes per curve")
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="output directory")

    sub.add_parser("lambda", parents=[common], help="Lyapunov exponent report")

    s = sub.add_parser("simulate", parents=[common], help="coupled reflected Brownian motions")
    s.add_argument("--T", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--seeds", type=int, help="number of replicas")
    s.add_argument("--x0", type=_point)
    s.add_argument("--y0", type=_point)
    s.add_argument("--d-exc", type=float, dest="d_exc")
    s.add_argument("--stride", type=int)
    s.add_argument("--shell", type=float,
                   help="truncate a disc exterior at this radius (exploratory)")

    w = sub.add_parser("sweep", parents=[common], help="disc with k = 0..n holes")
    w.add_argument("--radius", type=float)

    t = sub.add_parser("transform", parents=[common], help="reflect a path file")
    t.add_argument("--path")
    t.add_argument("--h-max", type=float, dest="h_max")

    v = sub.add_parser("validate", help="run the validation suite")
    v.add_argument("--quick", action="store_true", help="exact-kernel checks only")
    v.add_argument("--workers", type=int, default=1)
    return p


def overrides_from_args(args):
    """Flags as a partial config document."""
    o = {}

    def put(section, key, value):
        if value is not None:
            o.setdefault(section, {})[key] = value

    if getattr(args, "domain", None):
        o["domain"] = cfgmod.parse_domain_shorthand(args.domain)
    put("domain", "n_quad", getattr(args, "n_quad", None))
    put("hm", "backend", getattr(args, "hm", None))
    put("hm", "nodes", getattr(args, "nodes", None))
    put("output", "dir", getattr(args, "out", None))
    if getattr(args, "workers", None) is not None:
        o["workers"] = args.workers
    for key in ("T", "h", "seed", "seeds", "x0", "y0", "d_exc", "stride", "shell"):
        put("sim", key, getattr(args, key, None))
    put("sweep", "radius", getattr(args, "radius", None))
    put("transform", "path", getattr(args, "path", None))
    put("transform", "h_max", getattr(args, "h_max", None))
    return o


def resolve_config(args):
    file_cfg = cfgmod.load(args.config) if getattr(args, "config", None) else {}
    over = overrides_from_args(args)
    # a domain given on the command line replaces the file's domain wholesale
    if "domain" in over and "kind" in over["domain"]:
        file_cfg = {k: v for k, v in file_cfg.items() if k != "domain"}
    return cfgmod.resolve(file_cfg, over)


def _domain(cfg):
    if "domain" not in cfg:
        raise ConfigurationError("no domain given; use --domain or a config 'domain' section")
    return cfgmod.build_domain(cfg["domain"])


def _hm(cfg, domain):
    hm = cfg["hm"]
    w = hm.get("wos", {})
    wos = WosConfig(**{k: w[k] for k in ("n", "eps", "max_steps", "seed") if k in w})
    return HarmonicMeasure(domain, hm["backend"], hm.get("nodes"), wos)


def _outdir(cfg):
    d = cfg["output"]["dir"]
    os.makedirs(d, exist_ok=True)
    return d


def cmd_lambda(cfg):
    domain = _domain(cfg)
    if not isinstance(domain, geo.Domain):
        raise ConfigurationError("lambda needs a catalog domain")
    hm = _hm(cfg, domain)
    report = compute_lambda(domain, hm, cfg["hm"].get("nodes"), cfg["workers"])
    out = _outdir(cfg)
    files = []
    fmts = cfg["output"]["formats"]
    if "csv" in fmts:
        files.append(rep.write_csv(os.path.join(out, "lambda.csv"), REPORT_COLUMNS, [report.row()]))
    if "json" in fmts:
        files.append(rep.write_json(os.path.join(out, "lambda.json"), report.record()))
    print(f"{domain.name}: curvature_term={report.curvature_term:.12g} "
          f"cross_term={report.cross_term:.12g} lambda={report.lambda_:.12g} "
          f"(err {report.err_curv + report.err_cross:.2g})")
    for f in report.flags:
        print(f"flag: {f}")
    errs = {"lambda": {"err_curv": report.err_curv, "err_cross": report.err_cross}}
    return files, (), errs


def _sim_config(cfg):
    s = cfg["sim"]
    return cp.SimConfig(h=s["h"], T=s["T"], x0=tuple(s["x0"]), y0=tuple(s["y0"]), seed=s["seed"],
                        stride=s.get("stride"), d_exc=s.get("d_exc"),
                        functionals=tuple(s["functionals"]))


def cmd_simulate(cfg):
    domain = _domain(cfg)
    if not isinstance(domain, geo.Domain):
        raise ConfigurationError("simulate needs a catalog domain")
    exploratory = False
    shell = cfg["sim"].get("shell")
    if not domain.is_bounded:
        tag = domain.exterior
        if shell is None or tag[0] != "disc":
            raise ConfigurationError(
                "exterior domains have infinite area; for a disc exterior pass --shell R "
                "to simulate a truncated annulus (exploratory)"
            )
        domain = geo.annulus(tag[1], shell, domain.curves[0].n_quad)
        exploratory = True
    elif shell is not None:
        raise ConfigurationError("--shell only applies to a disc exterior")
    sc = _sim_config(cfg)
    hm = _hm(cfg, domain)
    report = compute_lambda(domain, hm, cfg["hm"].get("nodes"), cfg["workers"])
    runs = cp.simulate_replicas(domain, sc, cfg["sim"]["seeds"], cfg["workers"], report.cross_term)
    out = _outdir(cfg)
    files = []
    fmts = cfg["output"]["formats"]
    summaries = [cp.summary(s, cfg["sim"]["burn_in"], report.lambda_) for s in runs]
    if "csv" in fmts:
        for s in runs:
            cols = ("t", "d", "log_d", "LX", "LY") + s.columns[4:]
            with np.errstate(under="ignore"):
                d = np.exp(s.log_d)
            body = np.column_stack([s.t, d, s.series[:, 1:]])
            files.append(rep.write_csv(os.path.join(out, f"run_{s.replica:03d}.csv"), cols,
                                       body.tolist()))
        files.append(rep.write_csv(os.path.join(out, "simulate.csv"), SIM_TABLE_COLUMNS,
                                   [[m["replica"], m["seed"], m["slope"], m["slope_stderr"],
                                     m["target_slope"], m["degenerate"], m["local_time_rate"],
                                     m["local_time_target"], m["excursion_count"]]
                                    for m in summaries]))
    slopes = [m["slope"] for m in summaries if m["slope"] is not None]
    agg = {
        "domain_id": domain.name,
        "exploratory": exploratory,
        "lambda": report.lambda_,
        "target_slope": report.decay_rate,
        "mean_slope": float(np.mean(slopes)) if slopes else None,
        "replicas": len(runs),
        "config": cfg["sim"],
        "runs": summaries,
    }
    if "json" in fmts:
        files.append(rep.write_json(os.path.join(out, "summary.json"), agg))
    for m in summaries:
        sl = "flagged: particles coincide" if m["degenerate"] else \
            f"slope={m['slope']:.4f} +- {m['slope_stderr']:.4f}"
        print(f"replica {m['replica']}: {sl}")
    if slopes:
        print(f"mean slope {agg['mean_slope']:.4f}, target {report.decay_rate:.4f}"
              + (" (exploratory)" if exploratory else ""))
    errs = {"lambda": {"err_curv": report.err_curv, "err_cross": report.err_cross},
            "slopes": [m["slope_stderr"] for m in summaries]}
    return files, [sc.seed], errs


def cmd_sweep(cfg):
    sw = cfg.get("sweep", {})
    radius = sw.get("radius", 1.0)
    holes = sw.get("holes", DEFAULT_SWEEP_HOLES)
    nodes = cfg["hm"].get("nodes") or 256
    rows = hole_sweep(radius, holes, cfg["hm"]["backend"], nodes, cfg["workers"])
    out = _outdir(cfg)
    files = []
    if "csv" in cfg["output"]["formats"]:
        files.append(rep.write_csv(os.path.join(out, "sweep.csv"), SWEEP_COLUMNS,
                                   [[r[c] for c in SWEEP_COLUMNS] for r in rows]))
    if "json" in cfg["output"]["formats"]:
        files.append(rep.write_json(os.path.join(out, "sweep.json"), {"rows": rows}))
    for r in rows:
        print(f"holes={r['holes']} curvature_term={r['curvature_term']:.6f} "
              f"lambda={r['lambda']:.6f} +- {r['err_curv'] + r['err_cross']:.2g} sign={r['sign']:+d}")
    errs = {"rows": [[r["err_curv"], r["err_cross"]] for r in rows]}
    return files, (), errs


def cmd_transform(cfg):
    tr = cfg.get("transform", {})
    if "path" not in tr:
        raise ConfigurationError("transform needs --path")
    domain = _domain(cfg)
    try:
        with open(tr["path"], encoding="utf-8") as fh:
            path = read_path_csv(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read path file: {exc}") from None
    h_max = tr.get("h_max")
    if h_max is None:
        h_max = float(np.min(np.diff(path.t))) if path.t.size > 1 else 1.0
    rp = skorokhod_transform(domain, path, h_max)
    vg, vb, gap = variation_gap_check(domain, path, reflected=rp)
    out = _outdir(cfg)
    files = []
    p = os.path.join(out, "reflected.csv")
    with open(p, "w", encoding="utf-8", newline="") as fh:
        write_path_csv(fh, rp)
    files.append(p)
    info = {"driving_variation": vg, "reflected_variation": vb, "gap": gap,
            "local_time": float(rp.local_time[-1]), "substeps": rp.substeps}
    if "json" in cfg["output"]["formats"]:
        files.append(rep.write_json(os.path.join(out, "transform.json"), info))
    print(f"local_time={info['local_time']:.12g} variation gap={gap:.3g}")
    return files, (), {}


COMMANDS = {"lambda": cmd_lambda, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "transform": cmd_transform}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            from .validation import run_suite

            ok = run_suite(quick=args.quick, workers=args.workers, stream=sys.stdout)
            return 0 if ok else 4
        cfg = resolve_config(args)
        t0 = time.perf_counter()
        files, seeds, errs = COMMANDS[args.command](cfg)
        rep.write_manifest(cfg["output"]["dir"], args.command, cfg, files, seeds, errs,
                           wall_clock=time.perf_counter() - t0, workers=cfg["workers"])
        return 0
    except RBMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

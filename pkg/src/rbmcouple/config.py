"""Experiment configuration: YAML documents checked against a JSON schema.

A config has up to seven top-level sections; every one is optional and
unknown keys anywhere are rejected::

    domain:     {kind: annulus, r_inner: 0.5, r_outer: 1.0, n_quad: 512}
    hm:         {backend: nystrom, nodes: 256, wos: {n: 100000, eps: 1.0e-6, seed: 0}}
    sim:        {h: 1.0e-4, T: 50, x0: [0.5, 0], y0: [0.5, 0.01], seed: 0, seeds: 5}
                # shell: R simulates a disc exterior truncated at radius R (exploratory)
    sweep:      {radius: 1.0, holes: [{center: [0.5, 0], radius: 0.02}]}
    transform:  {path: walk.csv, h_max: 1.0e-3}
    output:     {dir: out, formats: [csv, json]}
    workers: 4
"""

from __future__ import annotations

import copy

import jsonschema
import yaml

from . import geometry as geo
from .errors import ConfigurationError, InvalidCurveError
from .skorokhod import HalfPlane

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT_POS = {"type": "integer", "minimum": 1}
_POINT = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_VEC_LIST = {"type": "array", "items": _POINT, "minItems": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_HOLE = _obj({
    "center": _POINT,
    "radius": _POS,
    "shape": {"enum": ["circle", "ellipse"]},
    "aspect": _POS,
    "angle": _NUM,
}, ["center", "radius"])

_FOURIER_CURVE = _obj({"a": _VEC_LIST, "b": _VEC_LIST}, ["a", "b"])

DOMAIN_SCHEMA = _obj({
    "kind": {"enum": ["disc", "ellipse", "annulus", "disc_exterior", "ellipse_exterior",
                      "fourier", "disc_with_holes", "half_plane"]},
    "radius": _POS,
    "center": _POINT,
    "a": _POS,
    "b": _POS,
    "angle": _NUM,
    "r_inner": _POS,
    "r_outer": _POS,
    "scale": _POS,
    "outer": _FOURIER_CURVE,
    "inner": {"type": "array", "items": _FOURIER_CURVE},
    "holes": {"type": "array", "items": _HOLE},
    "n_quad": {"type": "integer", "minimum": 64},
}, ["kind"])

SCHEMA = _obj({
    "domain": DOMAIN_SCHEMA,
    "hm": _obj({
        "backend": {"enum": ["auto", "exact", "nystrom", "wos-mc"]},
        "nodes": {"type": "integer", "minimum": 16},
        "wos": _obj({"n": _INT_POS, "eps": _POS, "max_steps": _INT_POS,
                     "seed": {"type": "integer", "minimum": 0}}),
    }),
    "sim": _obj({
        "h": _POS,
        "T": _POS,
        "x0": _POINT,
        "y0": _POINT,
        "seed": {"type": "integer", "minimum": 0},
        "seeds": _INT_POS,
        "stride": _INT_POS,
        "d_exc": _POS,
        "burn_in": {"type": "number", "minimum": 0, "maximum": 0.9},
        "functionals": {"type": "array", "items": {"type": "string"}},
        "shell": _POS,
    }),
    "sweep": _obj({"radius": _POS, "holes": {"type": "array", "items": _HOLE}}),
    "transform": _obj({"path": {"type": "string"}, "h_max": _POS}),
    "output": _obj({
        "dir": {"type": "string"},
        "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "minItems": 1},
    }),
    "workers": _INT_POS,
})

DEFAULTS = {
    "hm": {"backend": "auto", "nodes": 256},
    "sim": {"h": 1e-4, "T": 50.0, "x0": [0.5, 0.0], "y0": [0.5, 0.01], "seed": 0, "seeds": 1,
            "burn_in": 0.1, "functionals": ["one", "curvature"]},
    "output": {"dir": "out", "formats": ["csv", "json"]},
    "workers": 1,
}


def validate(cfg):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config error at {where}: {exc.message}") from None
    return cfg


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from None
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigurationError("config document must be a mapping")
    return validate(cfg)


def merge(base, over):
    """Recursive dict merge; values in ``over`` win."""
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(file_cfg, overrides):
    """Defaults, then the file, then command-line overrides; validated."""
    return validate(merge(merge(DEFAULTS, file_cfg or {}), overrides))


_SHORTHAND = {
    "disc": ("radius",),
    "ellipse": ("a", "b"),
    "annulus": ("r_inner", "r_outer"),
    "disc_exterior": ("radius",),
    "ellipse_exterior": ("a", "scale"),
    "half_plane": (),
}


def parse_domain_shorthand(text):
    """``annulus:0.5,1`` -> ``{"kind": "annulus", "r_inner": 0.5, "r_outer": 1.0}``."""
    kind, _, args = text.partition(":")
    kind = kind.strip()
    if kind not in _SHORTHAND:
        raise ConfigurationError(
            f"unknown domain {kind!r}; shorthand supports {', '.join(_SHORTHAND)} "
            "(use a config file for fourier and disc_with_holes)"
        )
    out = {"kind": kind}
    if args.strip():
        try:
            vals = [float(v) for v in args.split(",")]
        except ValueError:
            raise ConfigurationError(f"bad domain parameters in {text!r}") from None
        names = _SHORTHAND[kind]
        if len(vals) > len(names):
            raise ConfigurationError(f"{kind} takes at most {len(names)} parameters")
        out.update(zip(names, vals))
    return out


def _need(spec, *keys):
    missing = [k for k in keys if k not in spec]
    if missing:
        raise ConfigurationError(f"domain kind {spec['kind']!r} needs {', '.join(missing)}")


def build_domain(spec):
    """Catalog domain from a validated ``domain`` section.

    ``half_plane`` is only meaningful for path transforms.
    """
    kind = spec["kind"]
    nq = spec.get("n_quad", 512)
    try:
        if kind == "disc":
            return geo.disc(spec.get("radius", 1.0), spec.get("center", (0.0, 0.0)), nq)
        if kind == "ellipse":
            _need(spec, "a", "b")
            return geo.ellipse(spec["a"], spec["b"], spec.get("center", (0.0, 0.0)),
                               spec.get("angle", 0.0), nq)
        if kind == "annulus":
            return geo.annulus(spec.get("r_inner", 0.5), spec.get("r_outer", 1.0), nq)
        if kind == "disc_exterior":
            return geo.disc_exterior(spec.get("radius", 1.0), nq)
        if kind == "ellipse_exterior":
            _need(spec, "a")
            return geo.ellipse_exterior(spec["a"], spec.get("scale", 1.0), nq)
        if kind == "disc_with_holes":
            return geo.disc_with_holes(spec.get("radius", 1.0), spec.get("holes", []), nq)
        if kind == "half_plane":
            return HalfPlane()
        if kind == "fourier":
            _need(spec, "outer")
            outer = geo.fourier_curve(spec["outer"]["a"], spec["outer"]["b"], n_quad=nq)
            inner = [geo.fourier_curve(c["a"], c["b"], n_quad=nq) for c in spec.get("inner", [])]
            return geo.fourier_domain(outer, inner)
    except InvalidCurveError as exc:
        raise ConfigurationError(f"invalid domain: {exc}") from None
    raise ConfigurationError(f"unknown domain kind {kind!r}")

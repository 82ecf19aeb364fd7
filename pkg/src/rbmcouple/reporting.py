"""CSV, JSON and manifest writers.

Everything except the manifest is a pure function of the resolved config,
so rerunning a manifest reproduces every digest it lists.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform

import numpy as np

from . import __version__

# bumped whenever a column is added, removed or reordered
CSV_SCHEMA_VERSION = 1


def _plain(v):
    """JSON-safe scalar; non-finite floats become strings."""
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(obj), fh, indent=2, allow_nan=False)
        fh.write("\n")
    return path


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir, command, config, files, seeds=(), errors=None, wall_clock=None,
                   workers=1):
    """Manifest listing every output with its sha256 digest."""
    man = {
        "tool": "rbmcouple",
        "version": __version__,
        "command": command,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "config": config,
        "seeds": list(seeds),
        "error_estimates": errors or {},
        "files": {os.path.basename(f): sha256(f) for f in files},
        "wall_clock_seconds": wall_clock,
        "workers": workers,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    return write_json(os.path.join(out_dir, "manifest.json"), man)

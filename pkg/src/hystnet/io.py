"""Configuration parsing and deterministic file outputs.

Configs are JSON documents checked against a JSON Schema. Unknown keys are
rejected and defaults are materialized so the resolved config can be echoed
into a manifest and replayed. Node indices are 1-based in every file.
"""
from __future__ import annotations

import copy
import csv
import json
import os
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__
from .errors import ValidationError

FLOAT_FORMAT = ".17g"

_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

_BURST = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "node": {"type": "integer", "minimum": 1},
        "amplitude": {"type": "number", "default": 3.0},
        "f": {"type": "array", "items": {"type": "number"}},
        "frequency": {"type": ["number", "null"], "exclusiveMinimum": 0, "default": None},
        "duration": dict(_NONNEG, default=1.0),
    },
}

_FORCING = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "node": {"type": "integer", "minimum": 1},
        "amplitude": {"type": "number", "default": 1.0},
        "f": {"type": "array", "items": {"type": "number"}},
    },
}

_INLINE_NETWORK = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "edges", "Q"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "edges": {"type": "array", "items": {
            "type": "array", "items": {"type": "integer", "minimum": 1},
            "minItems": 2, "maxItems": 2}},
        "Q": {"type": "integer", "minimum": 1},
        "nu": _POS, "eta": _POS, "epsilon": _POS,
        "regime": {"enum": ["small", "large"]},
        "name": {"type": "string"},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["network"],
    "properties": {
        "network": {"type": ["string", "object"], "if": {"type": "object"}, "then": _INLINE_NETWORK},
        "Q": {"type": "integer", "minimum": 1},
        "nu": _POS,
        "eta": _POS,
        "epsilon": _POS,
        "regime": {"enum": ["small", "large"]},
        "seed": {"type": "integer", "minimum": 0, "default": 0},
        "simulate": {
            "type": "object", "additionalProperties": False, "default": {},
            "properties": {
                "delta": dict(_POS, default=0.1),
                "tau": dict(_POS, default=20.0),
                "burst": dict(_BURST, default={}),
                "noise": dict(_NONNEG, default=1e-3),
                "dt": {"type": ["number", "null"], "exclusiveMinimum": 0, "default": None},
                "t_end": dict(_POS, default=100.0),
                "sample_every": {"type": "integer", "minimum": 1, "default": 10},
            },
        },
        "slowflow": {
            "type": "object", "additionalProperties": False, "default": {},
            "properties": {
                "delta": dict(_POS, default=0.1),
                "tau": dict(_POS, default=20.0),
                "A0": dict(_NONNEG, default=1.5),
                "zeta0": {"type": ["number", "null"], "default": None},
                "s_end": dict(_POS, default=100.0),
                "n_out": {"type": "integer", "minimum": 2, "default": 2001},
            },
        },
        "bifurcate": {
            "type": "object", "additionalProperties": False, "default": {},
            "properties": {
                "free": {"type": "string", "default": "mu"},
                "range": {"type": "array", "items": {"type": "number"},
                          "minItems": 2, "maxItems": 2, "default": [0.1, 10.0]},
                "template": {"type": ["array", "null"], "items": {"type": "number"},
                             "default": None},
                "n_grid": {"type": "integer", "minimum": 2, "default": 200},
                "ds_max": dict(_POS, default=0.2),
                "max_points": {"type": "integer", "minimum": 2, "default": 400},
                "periodic": {"type": "boolean", "default": True},
            },
        },
        "sweep": {
            "type": "object", "additionalProperties": False, "default": {},
            "properties": {
                "eps_grid": {"type": "array", "items": {"type": "number"},
                             "minItems": 3, "maxItems": 3, "default": [0.001, 0.05, 5]},
                "spacing": {"enum": ["log", "linear"], "default": "log"},
                "mu_range": {"type": "array", "items": {"type": "number"},
                             "minItems": 2, "maxItems": 2, "default": [0.1, 1000.0]},
                "n_grid": {"type": "integer", "minimum": 2, "default": 160},
                "fold_bisections": {"type": "integer", "minimum": 0, "default": 0},
                "workers": {"type": "integer", "minimum": 1, "default": 1},
            },
        },
        "trigger": {
            "type": "object", "additionalProperties": False, "default": {},
            "properties": {
                "delta": dict(_POS, default=0.2),
                "forcing": dict(_FORCING, default={}),
                "scales": {"type": "array", "items": _POS,
                           "default": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]},
            },
        },
        "design": {
            "type": "object", "additionalProperties": False, "default": {},
            "properties": {
                "delta": dict(_POS, default=0.1),
                "forcing_amplitude": dict(_POS, default=3.0),
            },
        },
    },
}

_VALIDATOR = Draft202012Validator(CONFIG_SCHEMA)


def _fill_defaults(schema, instance):
    if not isinstance(instance, dict):
        return
    for key, sub in schema.get("properties", {}).items():
        if key not in instance and "default" in sub:
            instance[key] = copy.deepcopy(sub["default"])
        if key in instance and isinstance(instance[key], dict):
            _fill_defaults(sub, instance[key])


def _error_path(err):
    path = "/".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def parse_config(text) -> dict:
    """Validate a JSON config and return it with every default filled in.

    A run manifest is accepted too; its resolved config is used.
    """
    try:
        data = json.loads(text) if isinstance(text, (str, bytes)) else copy.deepcopy(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from None
    if isinstance(data, dict) and "resolved_config" in data and "subcommand" in data:
        data = data["resolved_config"]
    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        lines = [f"{_error_path(e)}: {e.message}" for e in errors]
        raise ValidationError("invalid config:\n  " + "\n  ".join(lines))
    _fill_defaults(CONFIG_SCHEMA, data)
    return data


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def config_network(config: dict):
    """Network model described by a resolved config, with top-level overrides applied."""
    from .network import load_network, network_from_dict

    overrides = {k: config[k] for k in ("Q", "nu", "eta", "epsilon", "regime") if k in config}
    src = config["network"]
    if isinstance(src, dict):
        data = {"nu": 1.0, "eta": 10.0, "epsilon": 0.01, **src, **overrides}
        return network_from_dict(data)
    try:
        return load_network(src, **overrides)
    except OSError as exc:
        raise ValidationError(f"network: cannot read {src}: {exc.strerror}") from None


def forcing_vector(spec: dict, n: int, default_node: int) -> np.ndarray:
    """Amplitude vector from ``{"f": [...]}`` or ``{"node": k, "amplitude": a}``."""
    if "f" in spec:
        f = np.asarray(spec["f"], dtype=float)
        if f.shape != (n,):
            raise ValidationError(f"forcing vector must have {n} entries")
        return f
    node = spec.get("node", default_node)
    if not 1 <= node <= n:
        raise ValidationError(f"forcing node {node} outside 1..{n}")
    f = np.zeros(n)
    f[node - 1] = spec.get("amplitude", 1.0)
    return f


# ---------------------------------------------------------------- writers

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), FLOAT_FORMAT)


def write_csv(path, header, rows):
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_csv(path):
    """Header and rows; numeric fields become floats, everything else stays text."""
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = []
        for row in r:
            out = []
            for v in row:
                try:
                    out.append(float(v))
                except ValueError:
                    out.append(v)
            rows.append(out)
    return header, rows


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, data):
    path = Path(path)
    try:
        path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def trace_header(n):
    return (["t"] + [f"u_{k}" for k in range(1, n + 1)] + [f"v_{k}" for k in range(1, n + 1)]
            + [f"zeta_{k}" for k in range(1, n + 1)] + [f"A_{k}" for k in range(1, n + 1)])


def write_trace(trace, path):
    """Trace CSV plus a JSON sidecar with the outcome label and thresholds."""
    path = Path(path)
    data = np.column_stack([trace.t, trace.u, trace.v, trace.zeta, trace.A])
    write_csv(path, trace_header(trace.n_nodes), data)
    side = path.with_suffix(".json")
    write_json(side, {"outcome": trace.outcome, **trace.meta})
    return [path, side]


BRANCH_COLUMNS = ("param", "period", "stable", "event")


def branch_header(n):
    return ["param"] + [f"max_u_{k}" for k in range(1, n + 1)] + ["period", "stable", "event"]


def write_branch(branch, path, n):
    """Branch CSV; the event column names the event nearest each point."""
    marks = {}
    for ev in branch.events:
        idx = ev.detail.get("index")
        if idx is None:
            params = branch.params
            idx = int(np.argmin(np.abs(params - ev.param))) if len(params) else None
        if idx is not None:
            marks[idx] = ev.kind
    rows = []
    for i, p in enumerate(branch.points):
        rows.append([p.param, *p.max_u, p.period, bool(p.stable), marks.get(i, "")])
    return write_csv(path, branch_header(n), rows)


def read_branch(path):
    """Columns of a branch CSV as arrays (``event`` stays text)."""
    header, rows = read_csv(path)
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in rows]
        if name == "event":
            cols[name] = ["" if v == "" else v for v in vals]
        else:
            cols[name] = np.array(vals, dtype=float)
    return cols


def write_events(rows, path):
    """Event rows ``(kind, eps, mu, freq)``."""
    return write_csv(path, ["kind", "eps", "mu", "freq"], rows)


def write_manifest(out_dir, subcommand, config, seed, outputs):
    paths = sorted(os.path.relpath(Path(p), out_dir) for p in outputs)
    manifest = {
        "subcommand": subcommand,
        "resolved_config": config,
        "tool_version": __version__,
        "seed": seed,
        "outputs": paths,
    }
    return write_json(Path(out_dir) / f"{subcommand}.manifest.json", manifest)


def write_outputs(kind, obj, out_dir, **extra):
    """Write a trace, branch list, event table or report into ``out_dir``.

    Returns the list of written paths; the caller adds the manifest.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if kind == "trace":
        return write_trace(obj, out_dir / extra.get("name", "trace.csv"))
    if kind == "branches":
        n = extra["n"]
        paths = []
        events = []
        eps = extra.get("epsilon", float("nan"))
        for i, br in enumerate(obj):
            name = "equilibria.csv" if br.kind == "equilibrium" else f"periodic_{i}.csv"
            paths.append(write_branch(br, out_dir / name, n))
            events += [(k, eps, mu, fr) for k, mu, fr in br.event_rows()]
        paths.append(write_events(events, out_dir / "events.csv"))
        return paths
    if kind == "map":
        paths = [write_events(list(obj.event_rows()), out_dir / "events.csv")]
        asym = obj.asymptotes._asdict() if obj.asymptotes is not None else None
        paths.append(write_json(out_dir / "sweep.json", {
            "eps": obj.eps, "asymptotes": asym, "fold_eps": obj.fold_eps,
            "gaps": [list(g) for g in obj.gaps]}))
        return paths
    if kind == "table":
        header, rows = obj
        return [write_csv(out_dir / extra["name"], header, rows)]
    raise ValidationError(f"unknown output kind {kind!r}")

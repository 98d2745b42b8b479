"""Command-line entry point: ``hystnet <subcommand> [options]``.

Every run writes its outputs plus a manifest holding the fully resolved
config; passing that manifest back through ``--config`` replays the run.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .continuation import (
    ParameterSpec,
    continue_equilibria,
    continue_periodic,
    seed_periodic_orbit,
    two_parameter_map,
)
from .errors import HystnetError, NumericalFailure, ValidationError
from .io import (
    config_network,
    forcing_vector,
    load_config,
    parse_config,
    write_csv,
    write_json,
    write_manifest,
    write_outputs,
)
from .network import LARGE, modal_decompose
from .report import DESIGN_COLUMNS, design_report
from .simulator import ScenarioConfig, run_scenario
from .slowflow import (
    bifurcation_values,
    coupled_equilibria,
    hopf_tau,
    integrate_coupled,
    make_slow_flow,
    nullcline,
    required_trigger_time,
    trigger_threshold,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _range(text):
    try:
        a, b = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b, got {text!r}") from None
    return [a, b]


def _grid(text):
    try:
        a, b, n = text.split(":")
        return [float(a), float(b), int(n)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:n, got {text!r}") from None


def _add_globals(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="JSON config or run manifest")
    p.add_argument("--network", default=d(None),
                   help="bundled network name or JSON file (used when no config is given)")
    p.add_argument("--out-dir", default=d("."), help="directory for outputs")
    p.add_argument("--seed", type=int, default=d(None), help="RNG seed override")
    p.add_argument("--svg", nargs="?", const="", default=d(None),
                   help="also write SVG figures (optionally to this path)")


def build_parser():
    parser = argparse.ArgumentParser(prog="hystnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a triggered-hysteresis scenario")
    _add_globals(p, suppress=True)
    p.add_argument("--out", help="trace CSV path")
    p.add_argument("--sample-every", type=int)

    p = sub.add_parser("slowflow", help="planar slow flow, equilibria and bifurcation values")
    _add_globals(p, suppress=True)
    p.add_argument("--out")

    p = sub.add_parser("bifurcate", help="one-parameter continuation")
    _add_globals(p, suppress=True)
    p.add_argument("--free", help='free parameter: "mu" or "zeta_<k>"')
    p.add_argument("--range", type=_range, help="parameter range a:b")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("sweep", help="two-parameter (eps, mu) map")
    _add_globals(p, suppress=True)
    p.add_argument("--eps-grid", type=_grid, help="eps grid a:b:n")
    p.add_argument("--range", type=_range, help="mu range a:b")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("trigger", help="burst time needed to ignite oscillation")
    _add_globals(p, suppress=True)
    p.add_argument("--out")

    p = sub.add_parser("design", help="rank nonlinear-node placements")
    _add_globals(p, suppress=True)
    p.add_argument("--out")
    return parser


def _resolve_config(args):
    if args.config:
        cfg = load_config(args.config)
    elif args.network:
        cfg = parse_config({"network": args.network})
    else:
        raise ValidationError("either --config or --network is required")
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _svg_path(args, out_dir, default_name):
    if args.svg is None:
        return None
    return Path(args.svg) if args.svg else out_dir / default_name


def cmd_simulate(args, cfg, out_dir):
    if args.sample_every is not None:
        cfg["simulate"]["sample_every"] = args.sample_every
    sim = cfg["simulate"]
    net = config_network(cfg)
    burst = sim["burst"]
    f = forcing_vector(burst, net.n_nodes, net.q)
    scenario = ScenarioConfig(
        network=net, delta=sim["delta"], tau=sim["tau"], burst_f=f,
        burst_frequency=burst["frequency"], burst_duration=burst["duration"],
        noise=sim["noise"], dt=sim["dt"], t_end=sim["t_end"],
        sample_every=sim["sample_every"], seed=cfg["seed"],
    )
    trace = run_scenario(scenario)
    csv_path = Path(args.out) if args.out else out_dir / "trace.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    outputs = write_outputs("trace", trace, csv_path.parent, name=csv_path.name)
    svg = _svg_path(args, out_dir, "trace_phase.svg")
    if svg is not None:
        from .plotting import plot_trace
        outputs += plot_trace(trace, svg, svg.with_name(svg.stem + "_history.svg"))
    print(f"outcome: {trace.outcome}")
    return outputs


def cmd_slowflow(args, cfg, out_dir):
    sc = cfg["slowflow"]
    net = config_network(cfg)
    sf = make_slow_flow(net)
    bv = bifurcation_values(sf)
    zeta0 = sc["zeta0"] if sc["zeta0"] is not None else bv.zeta_hb + sc["delta"]
    traj = integrate_coupled(sf, sc["A0"], zeta0, sc["delta"], sc["tau"], sc["s_end"],
                             sc["n_out"])
    csv_path = Path(args.out) if args.out else out_dir / "slowflow.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    outputs = [write_csv(csv_path, ["s", "zeta", "A"], traj)]
    eqs = coupled_equilibria(sf, sc["delta"], sc["tau"])
    try:
        a_bar = trigger_threshold(sf, sc["delta"])
    except NumericalFailure:
        a_bar = None
    summary = {
        "regime": sf.regime, "mode": sf.mode, "omega": sf.omega, "p": sf.p,
        "zeta_hb": bv.zeta_hb, "zeta_sn": bv.zeta_sn, "a_sn": bv.a_sn,
        "trigger_threshold": a_bar, "hopf_tau": hopf_tau(sc["delta"]),
        "equilibria": [{"zeta": e.zeta, "A": e.A, "kind": e.kind} for e in eqs],
    }
    outputs.append(write_json(csv_path.with_suffix(".json"), summary))
    svg = _svg_path(args, out_dir, "slowflow.svg")
    if svg is not None:
        from .plotting import plot_slowflow
        zs = np.linspace(0, 2 * bv.zeta_sn, 400)
        pts = np.array([(z, a) for z in zs for a in nullcline(sf, z)])
        outputs.append(plot_slowflow(traj, pts, svg))
    return outputs


def _spec_from(cfg, free):
    sec = cfg["bifurcate"]
    tmpl = tuple(sec["template"]) if sec["template"] is not None else None
    return ParameterSpec.parse(free, template=tmpl)


def cmd_bifurcate(args, cfg, out_dir):
    sec = cfg["bifurcate"]
    if args.free:
        sec["free"] = args.free
    if args.range:
        sec["range"] = args.range
    net = config_network(cfg)
    spec = _spec_from(cfg, sec["free"])
    lo, hi = sec["range"]
    eq = continue_equilibria(net, spec, (lo, hi), n_grid=sec["n_grid"])
    branches = [eq]
    failures = []
    if sec["periodic"]:
        for ev in eq.events:
            if not ev.detail.get("boundary"):
                continue
            try:
                seed = seed_periodic_orbit(ev, net, spec)
                branches.append(continue_periodic(net, seed, spec, (lo, hi),
                                                  ds_max=sec["ds_max"],
                                                  max_points=sec["max_points"]))
            except NumericalFailure as exc:
                failures.append({"hopf": ev.param, "error": f"{type(exc).__name__}: {exc}"})
    target = Path(args.out) if args.out else out_dir
    outputs = write_outputs("branches", branches, target, n=net.n_nodes, epsilon=net.epsilon)
    if failures:
        outputs.append(write_json(target / "failures.json", failures))
    svg = _svg_path(args, out_dir, "branches.svg")
    if svg is not None:
        from .plotting import plot_branches
        outputs.append(plot_branches(branches, net.q, svg))
    return outputs


def cmd_sweep(args, cfg, out_dir):
    sec = cfg["sweep"]
    if args.eps_grid:
        sec["eps_grid"] = args.eps_grid
    if args.range:
        sec["mu_range"] = args.range
    a, b, n = sec["eps_grid"]
    if not (a > 0 and b > 0 and int(n) >= 1):
        raise ValidationError("sweep/eps_grid: endpoints must be positive and n >= 1")
    grid = np.geomspace(a, b, int(n)) if sec["spacing"] == "log" else np.linspace(a, b, int(n))
    net = config_network(cfg)
    spec = _spec_from(cfg, cfg["bifurcate"]["free"])
    result = two_parameter_map(net, grid, spec, tuple(sec["mu_range"]), n_grid=sec["n_grid"],
                               fold_bisections=sec["fold_bisections"], workers=sec["workers"])
    target = Path(args.out) if args.out else out_dir
    outputs = write_outputs("map", result, target)
    svg = _svg_path(args, out_dir, "sweep.svg")
    if svg is not None:
        from .plotting import plot_map
        outputs.append(plot_map(result, svg))
    return outputs


def cmd_trigger(args, cfg, out_dir):
    sec = cfg["trigger"]
    net = config_network(cfg)
    if net.regime == LARGE:
        raise ValidationError("trigger analysis needs the small-damping regime")
    sf = make_slow_flow(net)
    base = forcing_vector(sec["forcing"], net.n_nodes, net.q)
    rows = []
    for s in sec["scales"]:
        closed = required_trigger_time(sf, s * base, sec["delta"])
        integ = required_trigger_time(sf, s * base, sec["delta"], method="integrate")
        rows.append([s, closed, integ, integ / closed])
    csv_path = Path(args.out) if args.out else out_dir / "trigger.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    outputs = [write_csv(csv_path, ["scale", "t_req_closed", "t_req_integrated", "ratio"], rows)]
    arr = np.array(rows)
    slope = float(np.polyfit(np.log(arr[:, 0]), np.log(arr[:, 1]), 1)[0]) if len(rows) > 1 else math.nan
    outputs.append(write_json(csv_path.with_suffix(".json"), {
        "threshold": trigger_threshold(sf, sec["delta"]), "closed_form_loglog_slope": slope}))
    svg = _svg_path(args, out_dir, "trigger.svg")
    if svg is not None:
        from .plotting import plot_trigger
        outputs.append(plot_trigger(arr[:, 0], arr[:, 1], arr[:, 2], svg))
    return outputs


def cmd_design(args, cfg, out_dir):
    sec = cfg["design"]
    net = config_network(cfg)
    rows = design_report(net, sec["delta"], sec["forcing_amplitude"])
    csv_path = Path(args.out) if args.out else out_dir / "design.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    outputs = [write_csv(csv_path, DESIGN_COLUMNS, [r.as_list() for r in rows])]
    svg = _svg_path(args, out_dir, "design.svg")
    if svg is not None:
        from .plotting import plot_design
        outputs.append(plot_design(rows, svg))
    best = rows[0]
    print(f"best placement: Q={best.q} (eps_max estimate {best.eps_estimate:.4g})")
    return outputs


COMMANDS = {
    "simulate": cmd_simulate,
    "slowflow": cmd_slowflow,
    "bifurcate": cmd_bifurcate,
    "sweep": cmd_sweep,
    "trigger": cmd_trigger,
    "design": cmd_design,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        resolved = copy.deepcopy(cfg)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](args, cfg, out_dir)
        # subcommand flags are folded into cfg so the manifest replays them
        resolved.update({k: v for k, v in cfg.items()})
        manifest = write_manifest(out_dir, args.command, resolved, cfg["seed"], outputs)
        print(json.dumps({"manifest": str(manifest),
                          "outputs": [str(p) for p in outputs]}))
        return EXIT_OK
    except NumericalFailure as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (HystnetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

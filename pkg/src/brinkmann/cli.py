"""Command-line interface: ``brinkmann <command> ...``.

Commands: list, geodesic, scan, certify, flow, ricci.  Exit status is 0 on
success (a failing certificate or an incomplete scan is still a result), 1 on
library errors and 2 on bad arguments.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .catalog import CATALOG, build, load
from .errors import BrinkmannError
from .io import csv_text, dumps

TRAJECTORY_SAMPLES = 2000


def _param(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        return key.strip(), value


def _positive(kind):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return parse


def _parser():
    p = argparse.ArgumentParser(prog="brinkmann", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def spacetime_args(sp, required=True):
        sp.add_argument("--spacetime", choices=list(CATALOG), help="catalog key")
        sp.add_argument("--spec", metavar="FILE", help="spacetime spec JSON file instead of a catalog key")
        sp.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE",
                        help="catalog parameter (JSON value or plain string); repeatable")

    def output_args(sp, csv_ok=True):
        sp.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
        sp.add_argument("--format", choices=["json", "csv"] if csv_ok else ["json"],
                        help="output format (default: from the --out extension, else json)")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("list", help="list catalog entries")
    sp.add_argument("--out", metavar="PATH")

    sp = sub.add_parser("geodesic", help="integrate one geodesic")
    spacetime_args(sp)
    output_args(sp)
    sp.add_argument("--init", required=True, metavar="P;V", help='point and velocity, e.g. "1,0;1,0"')
    sp.add_argument("--tmax", type=_positive(float), required=True)
    sp.add_argument("--tol", type=_positive(float), default=None, help="relative tolerance")

    sp = sub.add_parser("scan", help="completeness scan over seeded random geodesics")
    spacetime_args(sp)
    output_args(sp)
    sp.add_argument("--samples", type=_positive(int), required=True)
    sp.add_argument("--tmax", type=_positive(float), required=True)
    sp.add_argument("--tol", type=_positive(float), default=None)
    sp.add_argument("--jobs", type=_positive(int), default=None, help="worker processes (env BRINKMANN_JOBS overrides)")

    sp = sub.add_parser("certify", help="Brinkmann certificate of the distinguished field")
    spacetime_args(sp)
    output_args(sp, csv_ok=False)
    sp.add_argument("--samples", type=_positive(int), default=128, help="quasi-random points (at least 100 used)")
    sp.add_argument("--full", action="store_true", help="add surface and frame-transport sub-reports")

    sp = sub.add_parser("flow", help="equicontinuity diagnostic for a vector field flow")
    spacetime_args(sp)
    output_args(sp)
    sp.add_argument("--field", default="V", help='"V" or comma-separated component expressions')
    sp.add_argument("--samples", type=_positive(int), default=50)
    sp.add_argument("--tmax", type=_positive(float), default=100.0)
    sp.add_argument("--times", type=_positive(int), default=101, help="number of sample times")
    sp.add_argument("--jobs", type=_positive(int), default=None, help="accepted for symmetry with scan")

    sp = sub.add_parser("ricci", help="pp-wave Ricci against the Laplacian of H")
    output_args(sp, csv_ok=False)
    sp.add_argument("--H", required=True, dest="H", metavar="EXPR")
    sp.add_argument("--dim", type=int, default=2, help="number of transverse coordinates (>= 2)")
    sp.add_argument("--samples", type=_positive(int), default=64)
    return p


def _spacetime(args, parser):
    if bool(args.spacetime) == bool(args.spec):
        parser.error(f"give exactly one of --spacetime (valid keys: {', '.join(CATALOG)}) or --spec")
    if args.spec:
        if args.param:
            parser.error("--param only applies to catalog entries")
        return load(args.spec), {"spec": args.spec}
    params = dict(args.param)
    return build(args.spacetime, params), {"spacetime": args.spacetime, "params": params}


def _format(args):
    if getattr(args, "format", None):
        return args.format
    if args.out and args.out.lower().endswith(".csv"):
        return "csv"
    return "json"


def _emit(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jobs(args):
    from .geodesics import default_jobs

    env = os.environ.get("BRINKMANN_JOBS")
    if env:
        return max(1, int(env))
    return args.jobs or default_jobs()


def _cmd_list(args, parser):
    entries = []
    lines = []
    for key, e in CATALOG.items():
        params = [{"name": p.name, "type": p.kind, "default": p.default, "help": p.help} for p in e.params]
        entries.append({"key": key, "description": e.description, "params": params})
        lines.append(f"{key:18s} {e.description}")
        for p in e.params:
            lines.append(f"{'':18s}   {p.name} ({p.kind}, default {json.dumps(p.default)}): {p.help}")
    if args.out:
        _emit(args, dumps({"catalog": entries}))
    else:
        sys.stdout.write("\n".join(lines) + "\n")


def _parse_init(text, dim, parser):
    try:
        p_text, v_text = text.split(";")
        p = np.array([float(c) for c in p_text.split(",")])
        v = np.array([float(c) for c in v_text.split(",")])
    except ValueError:
        parser.error(f'--init must look like "x1,...,xd;v1,...,vd", got {text!r}')
    if p.shape != (dim,) or v.shape != (dim,):
        parser.error(f"--init needs {dim} point and {dim} velocity components")
    return p, v


def _config(args):
    from .geodesics import IntegratorConfig

    return IntegratorConfig(rel_tol=args.tol) if args.tol else IntegratorConfig()


def _config_json(cfg):
    return {k: getattr(cfg, k) for k in ("rel_tol", "abs_tol", "min_step", "max_step", "blowup_speed", "max_deck_word")}


def _cmd_geodesic(args, parser):
    from .geodesics import GeodesicState, integrate_geodesic

    st, source = _spacetime(args, parser)
    p, v = _parse_init(args.init, st.dim, parser)
    cfg = _config(args)
    tr = integrate_geodesic(st, GeodesicState(p, v), args.tmax, cfg)
    keep = np.unique(np.linspace(0, len(tr.t) - 1, min(len(tr.t), TRAJECTORY_SAMPLES)).round().astype(int))
    if _format(args) == "csv":
        header = ["t"] + [f"x_{c}" for c in st.coordinates] + [f"v_{c}" for c in st.coordinates]
        rows = [[tr.t[i], *tr.x[i], *tr.v[i]] for i in keep]
        return _emit(args, csv_text(header, rows))
    doc = {
        "command": "geodesic",
        **source,
        "coordinates": list(st.coordinates),
        "init": {"point": p, "velocity": v},
        "horizon": args.tmax,
        "config": _config_json(cfg),
        "verdict": tr.verdict.to_json(),
        "conserved_drift": tr.conserved_drift,
        "growth_exponent": tr.growth_exponent,
        "n_steps": tr.n_steps,
        "n_rejected": tr.n_rejected,
        "deck_events": tr.deck_events,
        "samples": {"t": tr.t[keep], "point": tr.x[keep], "velocity": tr.v[keep]},
    }
    _emit(args, dumps(doc))


SCAN_COLUMNS = ["index", "seed", "init_point", "init_velocity", "verdict", "t_star", "energy_drift",
                "clairaut_drift", "growth_exponent", "blowup_exponent", "n_steps"]


def _cmd_scan(args, parser):
    from .geodesics import completeness_scan

    st, source = _spacetime(args, parser)
    cfg = _config(args)
    rep = completeness_scan(st, args.samples, args.tmax, cfg, seed=args.seed, jobs=_jobs(args))
    if _format(args) == "csv":
        rows = [[r["index"], args.seed, r["init_point"], r["init_velocity"], r["verdict"], r["t_star"],
                 r["energy_drift"], r["clairaut_drift"], r["growth_exponent"], r["blowup_exponent"], r["n_steps"]]
                for r in rep["trajectories"]]
        return _emit(args, csv_text(SCAN_COLUMNS, rows))
    _emit(args, dumps({"command": "scan", **source, "config": _config_json(cfg), **rep}))


def _full_reports(st, seed):
    from .verify import frame_on_E, frame_transport_along_V, ruled_surface, totally_geodesic_surface, _transversal

    out = {}
    rng = np.random.default_rng(seed)
    p = st.sample_points(1, seed=seed + 1)[0]
    g = st.metric.matrix(p)
    V = st.V(p)
    N = _transversal(g, V)
    frame = frame_on_E(st, p)
    Q = N + (frame.vectors[0] if len(frame.vectors) else 0.0)
    try:
        patch = totally_geodesic_surface(st, p, Q, check_certificate=False)
        out["surface"] = {"point": p, "Q": Q, **patch.to_json()}
    except BrinkmannError as exc:
        out["surface"] = {"error": str(exc)}
    try:
        W = rng.normal(size=st.dim)
        ctl = ruled_surface(st, p, Q, W)
        out["control_surface"] = {"point": p, "Q": Q, "W": W, **ctl.to_json()}
    except BrinkmannError as exc:
        out["control_surface"] = {"error": str(exc)}
    try:
        tr = frame_transport_along_V(st, frame, 1.0)
        out["frame_transport"] = {"t": 1.0, **tr.to_json()}
    except BrinkmannError as exc:
        out["frame_transport"] = {"error": str(exc)}
    return out


def _cmd_certify(args, parser):
    from .verify import brinkmann_certificate

    st, source = _spacetime(args, parser)
    cert = brinkmann_certificate(st, n_points=args.samples, seed=args.seed)
    doc = {"command": "certify", **source, "seed": args.seed, "certificate": cert.to_json()}
    if args.full:
        if cert.passed:
            doc.update(_full_reports(st, args.seed))
        else:
            doc["surface"] = {"error": "certificate failed; surfaces need a parallel null field"}
    _emit(args, dumps(doc))


def _cmd_flow(args, parser):
    from .dynamics import equicontinuity_diagnostic

    st, source = _spacetime(args, parser)
    rep = equicontinuity_diagnostic(st, args.field, N=args.samples, T=args.tmax, seed=args.seed, n_times=args.times)
    if _format(args) == "csv":
        header = ["t", "mean_log_norm"] + [f"orbit_{i}" for i in range(rep.log_norms.shape[0])]
        mean = np.mean(rep.log_norms, axis=0)
        rows = [[t, mean[j], *rep.log_norms[:, j]] for j, t in enumerate(rep.times)]
        return _emit(args, csv_text(header, rows))
    doc = {"command": "flow", **source, "field": args.field, "seed": args.seed, "horizon": args.tmax, **rep.to_json()}
    _emit(args, dumps(doc))


def _cmd_ricci(args, parser):
    from .verify import ppwave_ricci_harmonic

    if args.dim < 2:
        parser.error("--dim must be at least 2")
    rep = ppwave_ricci_harmonic(args.H, args.dim, samples=args.samples, seed=args.seed)
    _emit(args, dumps({"command": "ricci", "seed": args.seed, **rep.to_json()}))


COMMANDS = {
    "list": _cmd_list,
    "geodesic": _cmd_geodesic,
    "scan": _cmd_scan,
    "certify": _cmd_certify,
    "flow": _cmd_flow,
    "ricci": _cmd_ricci,
}


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        COMMANDS[args.command](args, sub)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (BrinkmannError, ValueError, OSError) as exc:
        print(f"brinkmann: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

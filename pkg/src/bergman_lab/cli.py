"""Command line entry point.

Exit codes: 0 when every verdict passes, 1 on any verdict failure, 2 on a
configuration error (missing file, bad JSON, invalid parameters, refused
inputs).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import harness, operators as op, symbols as sy, weights as wt
from .geometry import GeometryError, GlobalConfig, Mesh, whitney_radius

CONFIG_ERRORS = (harness.ConfigError, harness.RefusedError, GeometryError, wt.WeightError,
                 sy.SymbolError, op.OperatorError, json.JSONDecodeError, FileNotFoundError,
                 KeyError)


def _load(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(p) as fh:
        return json.load(fh)


def _global(args, conf: dict) -> GlobalConfig:
    g = dict(conf.get("global", {}))
    for key in ("alpha", "k_min", "k_max", "x_extent"):
        v = getattr(args, key, None)
        if v is not None:
            g[key] = v
    return GlobalConfig.from_dict(g)


def _print(obj):
    print(json.dumps(harness._jsonable(obj), indent=2, sort_keys=True))


def cmd_mesh(args) -> int:
    conf = _load(args.config)
    mesh = Mesh(_global(args, conf))
    out = {"N": mesh.N, "hash": mesh.hash(), "k_min": mesh.cfg.k_min, "k_max": mesh.cfg.k_max,
           "x_extent": mesh.cfg.x_extent, "whitney_radius": whitney_radius(mesh),
           "boxes": {s: len(mesh.family(s).levels) for s in ("D1", "D2")}}
    if args.out:
        Path(args.out).write_text(mesh.to_json())
        out["written"] = args.out
    _print(out)
    return 0


def _weight_spec(args) -> dict:
    spec = {"kind": args.kind}
    for key in ("s", "eta", "c", "file"):
        v = getattr(args, key, None)
        if v is not None:
            spec[key] = v
    return spec


def cmd_weights(args) -> int:
    conf = _load(args.config)
    mesh = Mesh(_global(args, conf))
    specs = conf.get("weights") or [_weight_spec(args)]
    out = [wt.weight_report(wt.from_config(s), mesh).to_dict() for s in specs]
    _print(out[0] if len(out) == 1 else out)
    return 0


def cmd_norms(args) -> int:
    conf = _load(args.config)
    mesh = Mesh(_global(args, conf))
    b = sy.from_config(conf.get("symbol") or {"kind": args.symbol})
    mu = wt.power_weight(args.mu_s) if args.mu_s is not None else None
    lam = wt.power_weight(args.lam_s) if args.lam_s is not None else None
    nu = wt.bloom_nu(mu, lam) if mu is not None and lam is not None else None
    r = mesh.cfg.bergman_radius
    tr = sy.vmo_nu_trace(b, nu, mesh)
    _print({"symbol": b.name, "bmo_nu": sy.bmo_nu_norm(b, nu, mesh, mode="exact").value,
            "bmo2": sy.bmo2_norm(b, mesh, mode="exact").value, "vmo_consistent": tr.verdict,
            "small_scale_trace": tr.small_scale_trace, "bo": sy.bo_norm(b, mesh, r),
            "ba": sy.ba_norm(b, mesh, r)})
    return 0


def cmd_op(args) -> int:
    conf = _load(args.config)
    mesh = Mesh(_global(args, conf))
    P = op.assemble_berezin_plus(mesh) if args.positive else op.assemble_bergman(mesh)
    T = P
    if args.kind in ("commutator", "hankel"):
        b = sy.from_config(conf.get("symbol") or {"kind": args.symbol})
        T = op.commutator(P, b) if args.kind == "commutator" else op.hankel(P, b)
    mu = wt.power_weight(args.mu_s) if args.mu_s is not None else None
    lam = wt.power_weight(args.lam_s) if args.lam_s is not None else None
    res = op.weighted_operator_norm(T, mu, lam, mesh, seed=args.seed)
    out = {"kernel": T.kernel, "N": mesh.N, "norm": res.value, "iterations": res.iterations,
           "converged": res.converged}
    if args.dump:
        out["files"] = list(op.dump_matrix(T, args.dump))
    _print(out)
    return 0 if res.converged else 1


def cmd_experiment(args) -> int:
    conf = _load(args.config)
    if args.seed is not None:
        conf["seed"] = args.seed
    for key in ("alpha", "k_max", "x_extent"):
        if getattr(args, key) is not None:
            conf.setdefault("global", {})[key] = getattr(args, key)
    if args.k_min is not None:
        conf["resolutions"] = [args.k_min]
    if args.out:
        conf["output"] = args.out
    elif "output" not in conf:
        conf["output"] = str(Path("runs") / args.id)
    cfg = harness.ExperimentConfig.from_dict(conf, args.id)
    rep = harness.run_experiment(cfg)
    _print(rep.summary())
    return 0 if rep.passed else 1


def cmd_report(args) -> int:
    paths = sorted(Path(args.dir).rglob("summary.json"))
    if not paths:
        raise FileNotFoundError(f"no summary.json under {args.dir}")
    ok = True
    for p in paths:
        s = json.loads(p.read_text())
        ok &= bool(s["passed"])
        print(f"{'PASS' if s['passed'] else 'FAIL'}  {s['experiment']:<16} {p.parent}")
        for k, v in s["verdicts"].items():
            print(f"      {'ok ' if v else 'BAD'} {k}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--alpha", type=float)
    common.add_argument("--k-min", dest="k_min", type=int)
    common.add_argument("--k-max", dest="k_max", type=int)
    common.add_argument("--x-extent", dest="x_extent", type=float)

    p = argparse.ArgumentParser(prog="bergman-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mesh", parents=[common], help="build the mesh and print its summary")
    m.add_argument("--out", help="write the mesh JSON here")
    m.set_defaults(func=cmd_mesh)

    w = sub.add_parser("weights", parents=[common], help="weight characteristics")
    w.add_argument("--kind", default="power",
                   choices=["power", "constant", "conformal", "apr_counterexample", "grid"])
    w.add_argument("--s", type=float)
    w.add_argument("--eta", type=float)
    w.add_argument("--c", type=float)
    w.add_argument("--file")
    w.set_defaults(func=cmd_weights)

    n = sub.add_parser("norms", parents=[common], help="symbol norms")
    n.add_argument("--symbol", default="holo_log")
    n.add_argument("--mu-s", dest="mu_s", type=float)
    n.add_argument("--lam-s", dest="lam_s", type=float)
    n.set_defaults(func=cmd_norms)

    o = sub.add_parser("op", parents=[common], help="assemble an operator and compute its norm")
    o.add_argument("--kind", default="bergman", choices=["bergman", "commutator", "hankel"])
    o.add_argument("--positive", action="store_true", help="use the positive kernel")
    o.add_argument("--symbol", default="holo_log")
    o.add_argument("--mu-s", dest="mu_s", type=float)
    o.add_argument("--lam-s", dest="lam_s", type=float)
    o.add_argument("--dump", help="write the matrix as binary plus a JSON sidecar")
    o.set_defaults(func=cmd_op)

    e = sub.add_parser("experiment", parents=[common], help="run a headline experiment")
    e.add_argument("id", choices=harness.EXPERIMENTS)
    e.add_argument("--out", help="output directory")
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("report", help="summarize experiment outputs")
    r.add_argument("--dir", default="runs")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and args.command != "report":
        args.seed = None if args.command == "experiment" else 0
    try:
        return args.func(args)
    except CONFIG_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

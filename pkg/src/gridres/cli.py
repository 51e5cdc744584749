"""Command-line entry point: ``gridres {optimize,dispatch,sweep,verify,report,synth}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics, myopic, opt_convex, opt_mccormick, oracle, scenario
from .problem import ProblemSpec, SocBand, SocPenalty
from .response import ResponseModel
from .qp import NonConvergence
from .timeseries import ImbalanceSeries, SynthModel, load_csv, synth, write_csv


def _add_data_args(p):
    p.add_argument("--data", required=True, help="imbalance CSV (header row required)")
    p.add_argument("--col-delta", default="delta")
    p.add_argument("--col-pg", default="p_g")
    p.add_argument("--col-time", default=None)
    p.add_argument("--pg-const", type=float, default=None,
                   help="constant scheduled generation (MW) when the CSV has no P_g column")
    p.add_argument("--step-h", type=float, default=None, help="sample spacing in hours")


def _add_problem_args(p):
    _add_data_args(p)
    p.add_argument("--battery", required=True,
                   help="battery JSON file: {energy_mwh, c_charge, c_discharge, eta_ch, eta_dis, soc0}")
    p.add_argument("--cost", choices=("linear", "quadratic"), default="linear")
    p.add_argument("--epsilon", type=float, default=None,
                   help="tolerable imbalance fraction; enables the response-aware cost")
    p.add_argument("--soc-band", default=None, help="preferred SoC band as L:U, e.g. 0.4:0.8")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="SoC penalty weight (default 1 when --soc-band is given)")
    p.add_argument("--out", required=True, help="result JSON path")


def _series(args) -> ImbalanceSeries:
    return load_csv(args.data, col_delta=args.col_delta,
                    col_pg=None if args.pg_const is not None else args.col_pg,
                    col_time=args.col_time, p_g_const=args.pg_const, step_h=args.step_h)


def _battery(path):
    bc = scenario.BatteryChoice.from_json(json.loads(Path(path).read_text()))
    if bc.is_none:
        raise ValueError("battery JSON needs a positive energy_mwh")
    return bc


def _problem(args, series=None) -> ProblemSpec:
    series = _series(args) if series is None else series
    bc = _battery(args.battery)
    bt = bc.spec()
    band = SocBand.parse(args.soc_band) if args.soc_band else None
    aware = args.epsilon is not None or band is not None
    pen = None
    if band is not None:
        pen = SocPenalty(scenario.DEFAULT_LAMBDA if args.lam is None else args.lam, band)
    return ProblemSpec(series, bt, args.cost, aware, ResponseModel(args.epsilon or 0.0), pen,
                       b0=bc.soc0 * bt.b_rated)


def _write(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True, default=_plain) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v).__name__)


def cmd_optimize(args) -> int:
    spec = _problem(args)
    if args.method == "convex":
        res = opt_convex.optimize(spec, tol=args.tol)
    else:
        res = opt_mccormick.optimize(spec, max_horizon=args.max_horizon,
                                     node_limit=args.node_limit)
    payload = res.to_dict()
    payload["variant"] = spec.variant
    if args.method == "mip":
        payload["node_log"] = res.solver_stats.get("node_log", [])
    _write(args.out, payload)
    print(f"{spec.variant} {args.method}: objective {res.objective:.6g}, "
          f"RI_eps {res.report.ri_eps_mod:.4f}", file=sys.stderr)
    return 0


def cmd_dispatch(args) -> int:
    spec = _problem(args)
    band = SocBand.parse(args.soc_band) if args.soc_band else None
    res = myopic.run_policy(args.policy, spec, band=band)
    payload = res.to_dict()
    payload["variant"] = spec.variant
    _write(args.out, payload)
    return 0


def cmd_sweep(args) -> int:
    sc = scenario.Scenario.from_json(args.scenario)
    if args.workers:
        sc.workers = args.workers
    result = scenario.run_scenario(sc)
    scenario.emit_report(result, args.out)
    for c in result.failed:
        print(f"cell {c['battery']} eps={c['epsilon']} {c['method']} failed: {c['error']}",
              file=sys.stderr)
    print(scenario.table_text(result), end="")
    return 0


def cmd_verify(args) -> int:
    """Compare the optimizers against brute force on random tiny instances."""
    cfg = oracle.OracleConfig(levels=args.levels, max_n=args.max_n)
    rng = np.random.default_rng(args.seed)
    failures = 0
    rows = []
    for k in range(args.count):
        n = int(rng.integers(1, args.max_n + 1))
        spec = oracle.random_instance(rng, n, k % 6)
        ref = oracle.brute_force(spec, cfg).objective
        tol = max(1e-6, 1e-4 * abs(ref))
        conv = opt_convex.optimize(spec)
        mip = opt_mccormick.optimize(spec)
        ok_c = conv.complementarity_violations > 0 or abs(conv.objective - ref) <= tol
        ok_m = abs(mip.objective - ref) <= tol
        failures += (not ok_c) + (not ok_m)
        rows.append(f"{k:4d} {spec.variant:9s} n={n} oracle={ref:.6g} convex={conv.objective:.6g}"
                    f"{'*' if conv.complementarity_violations else ''} mip={mip.objective:.6g} "
                    f"{'ok' if ok_c and ok_m else 'MISMATCH'}")
    print("\n".join(rows))
    print(f"{args.count} instances, {failures} mismatches "
          "(* = convex relaxation not tight, compared via mip only)")
    return 1 if failures else 0


def cmd_report(args) -> int:
    series = _series(args)
    rep = metrics.report(series, series.delta, None, args.epsilon)
    print(metrics.format_table([("no storage", rep)]), end="")
    return 0


def cmd_synth(args) -> int:
    model = SynthModel.from_json(Path(args.model).read_text()) if args.model else SynthModel()
    write_csv(synth(args.n, model, args.seed), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gridres", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="deterministic horizon dispatch")
    _add_problem_args(p)
    p.add_argument("--method", choices=("convex", "mip"), default="convex")
    p.add_argument("--max-horizon", type=int, default=opt_mccormick.DEFAULT_MAX_HORIZON)
    p.add_argument("--node-limit", type=int, default=opt_mccormick.DEFAULT_NODE_LIMIT)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("dispatch", help="myopic threshold controller")
    _add_problem_args(p)
    p.add_argument("--policy", choices=myopic.POLICIES, default="alg2")
    p.set_defaults(func=cmd_dispatch)

    p = sub.add_parser("sweep", help="battery x epsilon scenario sweep")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="cross-check solvers against brute force")
    p.add_argument("--count", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-n", type=int, default=3)
    p.add_argument("--levels", type=int, default=11)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="reliability indices of a raw series")
    _add_data_args(p)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="write a synthetic imbalance CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", default=None, help="SynthModel JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, NonConvergence) as exc:
        print(f"gridres: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

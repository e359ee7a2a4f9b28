"""Command-line interface.

    cqnls simulate CONFIG [--out DIR] [--plot]
    cqnls dispersive --N N --tmax T [--tmin T0] [--nt K] [--out DIR] [--plot]
    cqnls atlas --phase {conj2,plain2,mixed} [--dyads RANGE] [--out DIR] [--plot]
    cqnls opnorm --symbol NAME [--method {axial,qmc}]
    cqnls verify [--suite {fast,full}] [-k EXPR]
    cqnls info SNAPSHOT

Failures print a JSON object ``{"error": code, "message": ...}`` on stderr.
A missing input file exits with status 2, any other failure with 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, report
from .errors import CQNLSError


def parse_dyads(text):
    """"fast", "full", a comma list "0.5,2", or an inclusive power-of-two range "0.125:8"."""
    from . import resonance, spectral

    if text == "fast":
        return list(resonance.FAST_DYADS)
    if text == "full":
        return list(resonance.FULL_DYADS)
    if ":" in text:
        lo, hi = (float(x) for x in text.split(":", 1))
        vals = []
        for N in (lo, hi):
            if not spectral.is_dyadic(N):
                raise argparse.ArgumentTypeError(f"{N} is not a power of two")
        e = round(math.log2(lo))
        while 2.0**e <= hi * (1 + 1e-12):
            vals.append(2.0**e)
            e += 1
        return vals
    vals = [float(x) for x in text.split(",") if x]
    for N in vals:
        if not spectral.is_dyadic(N):
            raise argparse.ArgumentTypeError(f"{N} is not a power of two")
    return vals


def _parser():
    p = argparse.ArgumentParser(prog="cqnls", description="Cubic-quintic NLS spectral laboratory")
    p.add_argument("--version", action="version", version=f"cqnls {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="evolve the default or configured initial data")
    s.add_argument("config", help="TOML configuration file")
    s.add_argument("--out", help="output directory (overrides [output].dir)")
    s.add_argument("--plot", action="store_true", help="also render PNG figures next to the CSV files")

    s = sub.add_parser("dispersive", help="sup-norm decay of e^{-itH} on an LP bump")
    s.add_argument("--N", type=float, required=True, help="dyadic frequency scale, 0 < N <= 1")
    s.add_argument("--tmax", type=float, required=True)
    s.add_argument("--tmin", type=float, default=None, help="first time (default 1/N)")
    s.add_argument("--nt", type=int, default=16, help="number of log-spaced times")
    s.add_argument("--out", default="cqnls-out")
    s.add_argument("--plot", action="store_true")

    s = sub.add_parser("atlas", help="region partition, denominator and multiplier-bound audit")
    s.add_argument("--phase", choices=("conj2", "plain2", "mixed"), required=True)
    s.add_argument("--dyads", type=parse_dyads, default="fast", help='"fast", "full", "0.125:8" or "0.5,2"')
    s.add_argument("--thresholds", choices=("strict", "desk"), default="strict")
    s.add_argument("--C", type=float, default=None, help="mixed-family constant C (default: sampled)")
    s.add_argument("--beta", type=float, default=2.0)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-opnorm", action="store_true", help="skip the op-norm estimates")
    s.add_argument("--out", default="cqnls-out")
    s.add_argument("--plot", action="store_true")

    s = sub.add_parser("opnorm", help="op-norm estimate of a builtin symbol")
    s.add_argument("--symbol", required=True)
    s.add_argument("--method", choices=("axial", "qmc"), default="qmc")
    s.add_argument("--n-quad", type=int, default=2**16)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("verify", help="run the property test suites")
    s.add_argument("--suite", choices=("fast", "full"), default="fast")
    s.add_argument("-k", dest="select", default=None, help="pytest -k expression")

    s = sub.add_parser("info", help="print a snapshot header")
    s.add_argument("snapshot")
    return p


# --- subcommands -----------------------------------------------------------------------------


def cmd_simulate(args):
    from . import evolution, model, observables, snapshot
    from .config import load_config

    cfg = load_config(args.config)
    out = report.output_dir(args.out or cfg.output.dir)
    plot = args.plot or cfg.output.plot
    conf = cfg.as_dict()
    sim = cfg.sim
    grid = sim.grid()

    def on_checkpoint(solver, state):
        snapshot.write(out / f"checkpoint_{solver}_t{state.t:.6g}.cqs", snapshot.from_state(grid, state, sim.beta))

    res = evolution.run(sim, on_checkpoint=on_checkpoint if sim.checkpoint_every else None)
    written = []
    summary = {"solvers": {}}
    for name, traj in res.trajectories.items():
        cols = ["t"] + [c for c in traj.records[0] if c != "t"]
        rows = [dict(r) for r in traj.records]
        written.append(report.write_csv(out / f"diagnostics_{name}.csv", rows, conf, columns=cols))
        e = traj.series("energy")
        summary["solvers"][name] = {
            "t_end": traj.times[-1],
            "energy_drift": float(abs(e[-1] - e[0]) / abs(e[0])) if e[0] else None,
            "final": traj.records[-1],
        }
        for t, st in sorted(traj.snapshots.items()):
            snapshot.write(out / f"dyadic_{name}_t{t:g}.cqs", snapshot.from_state(grid, st, sim.beta))
    if res.cross:
        written.append(report.write_csv(out / "cross_difference.csv", [{"t": t, "rel_diff": d} for t, d in res.cross], conf))
        summary["max_cross_difference"] = max(d for _, d in res.cross)
    v0 = model.v_from_u(grid, model.default_initial_u(grid, sim.eps, sim.sigma)).v
    # past this time fast components of the data have crossed half the box and the torus differs from R^d
    summary["wraparound_horizon"] = observables.wraparound_horizon(grid, v0)
    summary["column_dictionary"] = report.DIAGNOSTIC_COLUMNS
    written.append(report.write_json(out / "summary.json", summary, conf))
    if plot:
        written.append(report.plot_diagnostics(out / "diagnostics.png", res.trajectories, conf))
    print(json.dumps({"outputs": [str(p) for p in written]}))
    return 0


def cmd_dispersive(args):
    from . import dispersive

    N = args.N
    tmin = args.tmin if args.tmin is not None else max(1.0 / N, 1e-3)
    if not args.tmax > tmin:
        raise ValueError(f"--tmax ({args.tmax}) must exceed the first time ({tmin})")
    times = np.geomspace(tmin, args.tmax, args.nt)
    conf = {"command": "dispersive", "N": N, "tmin": tmin, "tmax": args.tmax, "nt": args.nt}
    rep = dispersive.dispersive_audit(N, times)
    out = report.output_dir(args.out)
    tag = f"N{N:g}"
    written = [report.write_csv(out / f"decay_{tag}.csv", list(rep.rows()), conf)]
    summary = {"N": N, "l1": rep.l1, "slopes": rep.slopes, "ratio_spread": rep.ratio_spread(), "windows": dispersive.regime_windows(N)}
    written.append(report.write_json(out / f"decay_{tag}.json", summary, conf))
    if args.plot:
        written.append(report.plot_decay(out / f"decay_{tag}.png", [rep], conf))
    print(json.dumps({"outputs": [str(p) for p in written], "slopes": summary["slopes"]}))
    return 0


def atlas_rows(phase, dyads, thresholds, C, beta, samples, seed, opnorm):
    """Audit rows (dicts) for one phase over the dyad pairs built from ``dyads``."""
    from . import bilinear, resonance

    A = bilinear.A1_symbol(beta)
    rows, notes = [], []
    for N1, N2 in resonance.dyad_pairs(phase, dyads):
        fam = resonance.build_region_family(phase, N1, N2, thresholds, C)
        pu = resonance.partition_residual(fam, n=samples, seed=seed)
        for j, why in fam.omitted:
            notes.append({"N1": N1, "N2": N2, "region": j, "omitted": why})
        for r in resonance.audit_family(fam, A, n_samples=samples, seed=seed, opnorm=opnorm):
            d = r.as_dict()
            d["partition_residual"] = pu
            d["C"] = fam.C
            rows.append(d)
    return rows, notes


def cmd_atlas(args):
    from . import resonance

    dyads = args.dyads if isinstance(args.dyads, list) else parse_dyads(args.dyads)
    th = resonance.STRICT if args.thresholds == "strict" else resonance.DESK
    conf = {
        "command": "atlas",
        "phase": args.phase,
        "dyads": dyads,
        "thresholds": dataclasses.asdict(th),
        "C": args.C,
        "beta": args.beta,
        "samples": args.samples,
        "seed": args.seed,
        "opnorm": not args.no_opnorm,
    }
    rows, notes = atlas_rows(args.phase, dyads, th, args.C, args.beta, args.samples, args.seed, not args.no_opnorm)
    out = report.output_dir(args.out)
    flat = []
    names = []
    for r in rows:
        f = {k: r[k] for k in ("phase", "N1", "N2", "region", "kind", "samples", "min_denominator", "min_ratio_to_comparator", "partition_residual", "C")}
        for name in r["claimed"]:
            if name not in names:
                names.append(name)
            f[f"op_{name}"] = r["opnorms"].get(name)
            f[f"claimed_{name}"] = r["claimed"][name]
            f[f"ratio_{name}"] = r["ratios"].get(name)
        flat.append(f)
    cols = ["phase", "N1", "N2", "region", "kind", "samples", "min_denominator", "min_ratio_to_comparator", "partition_residual", "C"]
    for name in names:
        cols += [f"op_{name}", f"claimed_{name}", f"ratio_{name}"]
    written = [report.write_csv(out / f"atlas_{args.phase}.csv", flat, conf, columns=cols)]
    written.append(report.write_jsonl(out / f"atlas_{args.phase}.jsonl", rows + notes, conf))
    if args.plot and not args.no_opnorm:
        written.append(report.plot_atlas(out / f"atlas_{args.phase}.png", rows, conf))
    print(json.dumps({"outputs": [str(p) for p in written], "rows": len(rows), "omitted": len(notes)}))
    return 0


def cmd_opnorm(args):
    from . import bilinear

    if args.symbol not in bilinear.BUILTIN_SYMBOLS:
        raise ValueError(f"unknown symbol {args.symbol!r}; builtins are {sorted(bilinear.BUILTIN_SYMBOLS)}")
    sym = bilinear.BUILTIN_SYMBOLS[args.symbol]()
    if args.method == "axial":
        rep = bilinear.opnorm_axial(sym)
    else:
        rep = bilinear.opnorm_estimate(sym, n_quad=args.n_quad, seed=args.seed)
    print(json.dumps({"symbol": args.symbol, "method": args.method, **rep.as_dict()}, sort_keys=True))
    return 0


def tests_dir():
    return Path(__file__).resolve().parents[2] / "tests"


def cmd_verify(args):
    import pytest

    where = tests_dir()
    if not where.is_dir():
        raise FileNotFoundError(str(where))
    argv = [str(where), "-q"]
    if args.suite == "fast":
        argv += ["-m", "not slow and not acceptance"]
    if args.select:
        argv += ["-k", args.select]
    return int(pytest.main(argv))


def cmd_info(args):
    from . import snapshot

    snap = snapshot.read(args.snapshot, header_only=True)
    print(json.dumps({"path": args.snapshot, **snap.header()}, sort_keys=True))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "dispersive": cmd_dispersive,
    "atlas": cmd_atlas,
    "opnorm": cmd_opnorm,
    "verify": cmd_verify,
    "info": cmd_info,
}


def _fail(obj, status):
    sys.stderr.write(json.dumps(obj, sort_keys=True) + "\n")
    return status


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        return _fail({"error": "FileNotFound", "message": str(exc), "path": exc.filename}, 2)
    except CQNLSError as exc:
        return _fail(exc.to_json(), 1)
    except (ValueError, OSError) as exc:
        return _fail({"error": type(exc).__name__, "message": str(exc)}, 1)


if __name__ == "__main__":
    sys.exit(main())

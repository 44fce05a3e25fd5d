"""Command-line front end: ``gfmstab {eac,simulate,cct,latency-sweep}``."""
from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import eac as eac_mod
from .errors import ConfigError, ConvergenceError, NumericalError
from .scenario import EacScenario, Scenario, parse_scenario
from .simulation import cct_latency_sweep, find_cct, prepare, run, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True, help="bundled scenario name or path to a YAML file")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--override", action="append", default=[], metavar="K=V",
                   help="override a scenario field (dotted path or alias); repeatable")


def _sim_flags(p: argparse.ArgumentParser, fvb_list: bool = False) -> None:
    p.add_argument("--limiter", choices=("none", "csa", "vi", "hcl"))
    if fvb_list:
        p.add_argument("--fvb", help="booster mode, or a comma-separated list of modes")
    else:
        p.add_argument("--fvb", choices=("none", "local", "wacs"))
    p.add_argument("--tau-ms", type=float, action="append", help="communication latency (ms)")
    p.add_argument("--step-us", type=float)
    p.add_argument("--horizon-s", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gfmstab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eac", help="equal-area table for the infinite-bus case")
    _common(p)
    p.add_argument("--curves", type=int, default=0, metavar="N",
                   help="also write N samples of each power-angle curve to the output directory")

    p = sub.add_parser("simulate", help="run one time-domain simulation and write a CSV")
    _common(p)
    _sim_flags(p)

    p = sub.add_parser("cct", help="critical clearing time by bisection")
    _common(p)
    _sim_flags(p, fvb_list=True)
    p.add_argument("--resolution-ms", type=int)

    p = sub.add_parser("latency-sweep", help="CCT of the wide-area booster versus latency")
    _common(p)
    _sim_flags(p)
    p.add_argument("--resolution-ms", type=int)
    return ap


def _overrides(args, fvb: str | None = None) -> list[str]:
    ov = list(args.override)
    for flag, key in (("limiter", "limiter"), ("step_us", "step_us"), ("horizon_s", "horizon_s"),
                      ("resolution_ms", "resolution_ms")):
        val = getattr(args, flag, None)
        if val is not None:
            ov.append(f"{key}={val}")
    mode = fvb if fvb is not None else getattr(args, "fvb", None)
    if mode is not None:
        ov.append(f"fvb={mode}")
    taus = getattr(args, "tau_ms", None)
    if taus and args.command != "latency-sweep":
        ov.append(f"tau_ms={taus[-1]}")
    return ov


def _load(args, fvb: str | None = None, kind=Scenario):
    scn = parse_scenario(args.scenario, _overrides(args, fvb))
    if not isinstance(scn, kind):
        want = "an eac" if kind is EacScenario else "a simulation"
        raise ConfigError(f"subcommand {args.command!r} needs {want} scenario")
    return scn


def _outdir(args) -> Path | None:
    if args.out is None:
        return None
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def cmd_eac(args) -> int:
    scn = _load(args, kind=EacScenario)
    params = eac_mod.SmibParams.from_setpoint(scn.v_e, scn.x_e, scn.x_c, scn.p_g0, scn.q_g0)
    rows = eac_mod.table(params, list(scn.cases))
    print(f"v_f0 = {params.v_f0:.4f} pu, delta_0 = {math.degrees(params.delta_0):.2f} deg")
    print(f"{'case':<14} {'delta_cl_crit (deg)':>20} {'delta_mte_crit (deg)':>21} {'p_g_max (pu)':>13}")
    for r in rows:
        print(f"{r.case.label:<14} {math.degrees(r.delta_cl_crit):>20.2f} "
              f"{math.degrees(r.delta_mte_crit):>21.2f} {r.p_g_max:>13.3f}")
    out = _outdir(args)
    if out is not None:
        with open(out / f"{scn.name}_table.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case", "delta_cl_crit_deg", "delta_mte_crit_deg", "p_g_max_pu"])
            for r in rows:
                w.writerow([r.case.label, f"{math.degrees(r.delta_cl_crit):.6f}",
                            f"{math.degrees(r.delta_mte_crit):.6f}", f"{r.p_g_max:.6f}"])
        if args.curves > 1:
            grid = np.linspace(0.0, math.pi, args.curves)
            curves = [eac_mod.pdelta_curve(c, params) for c in scn.cases]
            with open(out / f"{scn.name}_curves.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["delta_deg"] + [c.label for c in scn.cases])
                for d in grid:
                    w.writerow([f"{math.degrees(d):.6f}"] + [f"{cv(d):.6f}" for cv in curves])
    return EXIT_OK


def cmd_simulate(args) -> int:
    scn = _load(args)
    t0 = time.perf_counter()
    res = run(prepare(scn))
    elapsed = time.perf_counter() - t0
    if res.diverged:
        print("error: simulation produced non-finite states", file=sys.stderr)
        return EXIT_NUMERICAL
    status = "stable" if res.los is None else (
        f"loss of synchronism at t = {res.los.time:.4f} s (vsc{res.los.pair[0]}, vsc{res.los.pair[1]})")
    print(f"{scn.name}: limiter={scn.limiter.kind} fvb={scn.fvb.kind} "
          f"clear_ms={scn.fault.clear_ms if scn.fault else '-'}: {status}; "
          f"peak angle difference {math.degrees(res.peak_angle_difference):.2f} deg "
          f"({elapsed:.2f} s)")
    out = _outdir(args) or Path(".")
    path = out / f"{scn.name}_{scn.limiter.kind}_{scn.fvb.kind}.csv"
    write_csv(res, path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_cct(args) -> int:
    modes = (args.fvb or "").split(",") if args.fvb else [None]
    cells = []
    first = None
    for mode in modes:
        scn = _load(args, fvb=mode.strip() if mode else None)
        first = first or scn
        cells.append((scn.fvb.kind, find_cct(scn).label()))
    header = ["scenario", "limiter"] + [f"cct_{m}_ms" for m, _ in cells]
    row = [first.name, first.limiter.kind] + [v for _, v in cells]
    _emit(args, header, [row], f"{first.name}_cct.csv")
    return EXIT_OK


def cmd_latency(args) -> int:
    scn = _load(args, fvb="wacs")
    taus = args.tau_ms if args.tau_ms else [0.0, 50.0, 100.0]
    rows = cct_latency_sweep(scn, [t / 1000.0 for t in taus])
    header = ["scenario", "limiter"] + [f"cct_tau{int(t) if float(t).is_integer() else t}_ms" for t in taus]
    row = [scn.name, scn.limiter.kind] + [r.cct.label() for r in rows]
    _emit(args, header, [row], f"{scn.name}_latency.csv")
    return EXIT_OK


def _emit(args, header, rows, filename) -> None:
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) for i, h in enumerate(header)]
    print("  ".join(str(h).ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(str(v).ljust(w) for v, w in zip(r, widths)))
    out = _outdir(args)
    if out is not None:
        with open(out / filename, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)


COMMANDS = {"eac": cmd_eac, "simulate": cmd_simulate, "cct": cmd_cct, "latency-sweep": cmd_latency}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ConvergenceError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

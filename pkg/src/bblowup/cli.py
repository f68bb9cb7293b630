"""Command-line interface.

Exit status is 0 only when every verdict computed by the command passes.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exact import BlowupDomainError, exact_table, residual_oracle, u0_sampler
from .model import PRESETS, ModelParams, Verdict, classify, load_preset
from .scenarios import (
    SWEEP_COLUMNS,
    ConfigError,
    config_template,
    load_config,
    refine,
    run,
    sweep,
    table_csv,
)


def _params(args) -> ModelParams:
    if args.preset:
        return load_preset(args.preset, T=args.T)
    values = {k: getattr(args, k) for k in ("alpha", "c0", "b", "gamma", "c1", "c2")}
    missing = [k for k, v in values.items() if v is None]
    if missing:
        raise ConfigError(f"give --preset or all of --alpha --c0 --b --gamma --c1 --c2 (missing {missing})")
    return ModelParams(T=args.T, **values)


def _add_param_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help=f"one of {sorted(PRESETS)} (aliases ch, dp, fw, kdv)")
    for name in ("alpha", "c0", "b", "gamma", "c1", "c2"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--T", type=float, default=1.0, help="blowup time (default 1)")


def cmd_classify(args) -> int:
    names = [args.preset] if args.preset or args.b is not None else sorted(PRESETS)
    rows = []
    for name in names:
        args.preset = name
        params = _params(args)
        r = classify(params)
        rows.append({
            "model": name or "custom",
            "ratio_a": r.ratio_a,
            "ratio_b": r.ratio_b,
            "verdict": r.verdict.value,
            "physical_exponent": r.physical_exponent if r.verdict is Verdict.STABLE else None,
        })
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(f"{'model':<20} {'ratioA':>10} {'ratioB':>10}  verdict")
        for r in rows:
            print(f"{r['model']:<20} {r['ratio_a']:>10.6g} {r['ratio_b']:>10.6g}  {r['verdict']}")
    return 0


def cmd_exact(args) -> int:
    params = _params(args)
    if args.check:
        rep = residual_oracle(
            params, u0_sampler(params), args.h, args.dt,
            t_window=(0.0, params.T / 2), x_window=(-args.x_max, args.x_max), levels=3,
        )
        ok = rep.max_abs_residual <= args.tol and rep.convergence_order >= 1.9
        print(f"max |residual| = {rep.max_abs_residual:.3e} (tol {args.tol:g}), "
              f"observed order = {rep.convergence_order:.3f}: {'PASS' if ok else 'FAIL'}")
        return 0 if ok else 1
    times = np.linspace(0.0, params.T * args.t_frac, args.nt)
    xs = np.linspace(-args.x_max, args.x_max, args.nx)
    table = exact_table(params, times, xs)
    print("t,x,u0,du0_dx")
    for row in table:
        print(",".join(repr(float(v)) for v in row))
    return 0


def _print_verdict(v: dict) -> None:
    rate = v.get("rate") or {}
    print(f"model={v.get('model')} regime={v.get('regime')} exit={v.get('exit_reason')} "
          f"tau_final={v.get('tau_final', math.nan):.4g}")
    if rate:
        print(f"  fitted rate {rate['fitted_rate']:.4g} (theory {rate['theoretical_rate']:.4g}) "
              f"{'PASS' if rate['passed'] else 'FAIL'}")
    phys = v.get("physical")
    if phys:
        print(f"  physical power {phys['fitted_rate']:.4g} (theory {phys['theoretical_rate']:.4g}) "
              f"{'PASS' if phys['passed'] else 'FAIL'}")
    print(f"  overall {'PASS' if v.get('passed') else 'FAIL'}")


def cmd_run(args) -> int:
    config = load_config(args.config)
    result = run(config, args.out)
    _print_verdict(result.verdict)
    print(f"outputs in {args.out or config.outputs.directory}")
    return 0 if result.verdict.get("passed") else 1


def _axis(spec: str) -> tuple[str, list[float]]:
    name, _, values = spec.partition("=")
    if name not in ("b", "c1", "c2") or not values:
        raise ConfigError(f"axis must look like b=1,2,3 or c1=0:2:5, got {spec!r}")
    if ":" in values:
        lo, hi, n = values.split(":")
        return name, list(np.linspace(float(lo), float(hi), int(n)))
    return name, [float(v) for v in values.split(",")]


def cmd_sweep(args) -> int:
    base = load_config(args.config)
    points: list[dict] = []
    for name in args.preset or []:
        p = load_preset(name)
        points.append({"b": p.b, "c1": p.c1, "c2": p.c2, "alpha": p.alpha, "c0": p.c0, "gamma": p.gamma})
    if args.axis:
        name, values = _axis(args.axis)
        points += [{name: v} for v in values]
    if not points:
        raise ConfigError("nothing to sweep: give --axis and/or --preset")
    rows = sweep(base, points, args.out, workers=args.workers)
    sys.stdout.write(table_csv(rows, SWEEP_COLUMNS))
    ok = all(
        r["error"] == "" and (
            (r["predicted"] == "Stable" and r["empirical"] == "decaying")
            or (r["predicted"] == "Unstable" and r["empirical"] == "growing")
            or r["predicted"] not in ("Stable", "Unstable")
        )
        for r in rows
    )
    return 0 if ok else 1


def cmd_refine(args) -> int:
    config = load_config(args.config)
    table = refine(config, args.levels, args.max_points)
    print("level,n_points,hs_final,fitted_rate,exit_reason")
    for r in table["rows"]:
        print(f"{r['level']},{r['n_points']},{r['hs_final']!r},{r['fitted_rate']!r},{r['exit_reason']}")
    print(f"# hs orders {table['hs_orders']}; rate spread {table['rate_spread']:.3g}")
    if table["note"]:
        print(f"# {table['note']}")
    ok = math.isfinite(table["rate_spread"]) and table["rate_spread"] < 0.05
    return 0 if ok else 1


def cmd_report(args) -> int:
    root = Path(args.directory)
    verdicts = sorted(root.rglob("verdict.json"))
    if not verdicts:
        print(f"no verdict.json under {root}", file=sys.stderr)
        return 1
    ok = True
    for path in verdicts:
        v = json.loads(path.read_text())
        print(f"[{path.parent}]")
        _print_verdict(v)
        ok &= bool(v.get("passed"))
    return 0 if ok else 1


def cmd_config_init(args) -> int:
    text = config_template(args.model)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        path = Path(args.output)
        if path.exists() and not args.force:
            print(f"{path} exists; pass --force to overwrite", file=sys.stderr)
            return 1
        path.write_text(text)
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bblowup", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="regime ratios and stability verdict")
    _add_param_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("exact", help="tabulate the blowup profile or check its residual")
    _add_param_args(p)
    p.add_argument("--check", action="store_true", help="run the finite-difference residual oracle")
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--x-max", type=float, default=5.0)
    p.add_argument("--t-frac", type=float, default=0.5, help="last tabulated time as a fraction of T")
    p.add_argument("--nt", type=int, default=3)
    p.add_argument("--nx", type=int, default=11)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("run", help="single run from a TOML config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="regime map over b, c1 or c2")
    p.add_argument("config")
    p.add_argument("--axis", help="e.g. c1=0:3:7 or b=1,2,3")
    p.add_argument("--preset", action="append", help="add a preset point (repeatable)")
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("refine", help="grid refinement study")
    p.add_argument("config")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--max-points", type=int, default=2**14 + 1)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("report", help="summarize verdict.json files under a directory")
    p.add_argument("directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("config", help="configuration helpers")
    csub = p.add_subparsers(dest="config_command", required=True)
    q = csub.add_parser("init", help="write a commented template")
    q.add_argument("output", nargs="?", default="-")
    q.add_argument("--model", default="camassa-holm")
    q.add_argument("--force", action="store_true")
    q.set_defaults(func=cmd_config_init)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BlowupDomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

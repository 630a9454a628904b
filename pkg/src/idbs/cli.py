"""Command-line entry point: ``idbs {table,run,example,bound,check}``.

Exit status is 0 on success, 2 for configuration or usage errors and 1
for numerical failures.
"""

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import posterior
from .analysis import IdealBeamModel, TAU_MODELS, q_curve, union_bound, write_curve_csv
from .beams import ConfigError
from .harness import ExperimentConfig, ROW_FIELDS, emit, run_experiment
from .posterior import QuadratureError
from .specfun import DomainError

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2
PRESETS = ("example1", "example2", "los_1024", "nlos_1024", "los_3072")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def load_preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {list(PRESETS)}")
    text = resources.files("idbs.presets").joinpath(f"{name}.json").read_text()
    return ExperimentConfig.from_dict(json.loads(text))


def _with_overrides(cfg, args):
    d = cfg.to_dict()
    if getattr(args, "trials", None):
        d["n_trials"] = args.trials
    if getattr(args, "snr_db", None):
        d["snr_db"] = args.snr_db
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    return ExperimentConfig.from_dict(d)


def _print_rows(rows, out=None):
    out = out or sys.stdout
    out.write(",".join(ROW_FIELDS) + "\n")
    for r in rows:
        out.write(",".join(_cell(getattr(r, f)) for f in ROW_FIELDS) + "\n")


def _cell(v):
    if isinstance(v, float):
        return "" if v != v else f"{v:.6g}"
    return str(v)


def _emit_outputs(rows, csv_path, json_path):
    if csv_path:
        emit(rows, "csv", csv_path)
    if json_path:
        emit(rows, "json", json_path)


def cmd_table(args):
    table = posterior.build_table(args.alpha, args.xmax, args.points)
    problems = table.check_invariants()
    if args.out:
        table.save(args.out)
    print(f"alpha={table.alpha} x_alpha={table.x_alpha:.10g} points={len(table.x_grid)} "
          f"x_max={table.x_max:g} fit_residual={table.fit_residual:.4g}")
    if problems:
        for p in problems:
            print(f"invariant violated: {p}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_run(args):
    if bool(args.config) == bool(args.preset):
        raise ConfigError("give exactly one of --config or --preset")
    cfg = ExperimentConfig.load(args.config) if args.config else load_preset(args.preset)
    cfg = _with_overrides(cfg, args)
    rows = run_experiment(cfg, workers=args.workers)
    csv_path = args.csv or cfg.outputs.get("csv")
    json_path = args.json or cfg.outputs.get("json")
    _emit_outputs(rows, csv_path, json_path)
    _print_rows(rows)
    return EXIT_OK


def cmd_example(args):
    cfg = _with_overrides(load_preset(f"example{args.id}"), args)
    rows = run_experiment(cfg, workers=args.workers)
    _emit_outputs(rows, args.csv, args.json)
    _print_rows(rows)
    return EXIT_OK


def cmd_bound(args):
    table = posterior.get_table(args.alpha, args.xmax, args.points)
    model = IdealBeamModel.from_snr_db(args.m, args.snr_db, args.alpha, table,
                                       tau_model=args.tau_model)
    value = union_bound(model, tail_tol=args.tail_tol, t_cap=args.t_cap)
    if args.curve:
        ts = list(range(1, args.curve_t + 1))
        write_curve_csv(args.curve, ts, q_curve(model, ts))
    print(f"{value:.6g}")
    return EXIT_OK


def cmd_check(args):
    failures = 0

    def report(name, ok, detail=""):
        nonlocal failures
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}{': ' + detail if detail else ''}")

    for x in (0.0, 1.0, 10.0, 100.0, 1000.0):
        v = posterior.f_series(x, x)
        report(f"f({x:g},{x:g}) = 0.5", abs(v - 0.5) <= 1e-6, f"{v:.12f}")
    for x, y in ((5.0, 1.0), (0.5, 30.0), (200.0, 180.0)):
        s = posterior.f_series(x, y) + posterior.f_series(y, x)
        report(f"f({x:g},{y:g}) + f({y:g},{x:g}) = 1", abs(s - 1.0) <= 1e-9, f"{s:.12f}")
        d = abs(posterior.f_series(x, y) - posterior.f_quadrature(x, y))
        report(f"series vs quadrature at ({x:g},{y:g})", d <= 1e-6, f"{d:.2e}")
    for alpha in args.alphas:
        table = posterior.get_table(alpha, args.xmax, args.points)
        problems = table.check_invariants(posterior.f_series if args.full else None)
        report(f"table alpha={alpha}", not problems, "; ".join(problems))
    return EXIT_OK if failures == 0 else EXIT_NUMERIC


def build_parser():
    p = _Parser(prog="idbs", description="Adaptive beam search experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("table", help="build a threshold table")
    t.add_argument("--alpha", type=float, required=True)
    t.add_argument("--xmax", type=float, default=4096.0)
    t.add_argument("--points", type=int, default=1024)
    t.add_argument("--out", type=Path)
    t.set_defaults(func=cmd_table)

    def add_run_opts(sp):
        sp.add_argument("--trials", type=int)
        sp.add_argument("--snr-db", type=float, nargs="+")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--csv", type=Path)
        sp.add_argument("--json", type=Path)

    r = sub.add_parser("run", help="run an experiment from a JSON config or a preset")
    r.add_argument("--config", type=Path)
    r.add_argument("--preset", choices=PRESETS)
    add_run_opts(r)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("example", help="single-path examples (1: centered path, 2: boundary path)")
    e.add_argument("--id", type=int, choices=(1, 2), required=True)
    add_run_opts(e)
    e.set_defaults(func=cmd_example)

    b = sub.add_parser("bound", help="union bound on deactivating the true beam")
    b.add_argument("--alpha", type=float, required=True)
    b.add_argument("--snr-db", type=float, required=True)
    b.add_argument("--m", type=int, default=16)
    b.add_argument("--tau-model", choices=TAU_MODELS, default="quadratic")
    b.add_argument("--tail-tol", type=float, default=1e-9)
    b.add_argument("--t-cap", type=int, default=100_000, help="give up after this many iterations")
    b.add_argument("--xmax", type=float, default=4096.0)
    b.add_argument("--points", type=int, default=1024)
    b.add_argument("--curve", type=Path, help="also write q(t) to this CSV")
    b.add_argument("--curve-t", type=int, default=60)
    b.set_defaults(func=cmd_bound)

    c = sub.add_parser("check", help="run the numerical invariant suite")
    c.add_argument("--alphas", type=float, nargs="+", default=[0.9, 0.95, 0.97, 0.99])
    c.add_argument("--xmax", type=float, default=4096.0)
    c.add_argument("--points", type=int, default=1024)
    c.add_argument("--full", action="store_true", help="re-verify f(x, tau) = alpha at every grid point")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, QuadratureError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

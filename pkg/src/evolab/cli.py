"""Command line entry point: ``evolab run|check|list|plot``.

Exit codes: 0 success, 1 a check did not meet its expectation, 2 invalid
configuration, 3 an integration stopped on a numeric error.
"""
import argparse
import json
import logging
import sys

from .engine import read_trajectory_csv
from .scenario import ConfigError, NumericRunError, bundled, list_registry, run_checks, run_scenario
from .svg import emit_simplex_svg

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _resolve(config):
    # bundled scenarios may be named without a path, e.g. "fig1a-bnn-hypnodisk"
    if config.endswith(".json") or "/" in config:
        return config
    try:
        return str(bundled(config))
    except ConfigError:
        return config


def _cmd_run(args):
    manifest = run_scenario(_resolve(args.config), out_dir=args.out, threads=args.threads,
                            use_kernel=not args.no_compile)
    for r in manifest.runs:
        line = (f"ic-{r['ic']}: converged={r['converged']} first_hit_t={r['first_hit_t']} "
                f"final={[round(v, 6) for v in r['final_state']]}")
        for c in r["checks"]:
            line += f" {c['check']}={c['verdict']}"
        print(line)
    for c in manifest.checks:
        print(f"{c['check']}: {c['verdict']} (worst_margin={c['worst_margin']:.3g})")
    print(f"manifest: {manifest.out_dir}/manifest.json")
    return EXIT_OK if manifest.expectations_met else EXIT_CHECK


def _cmd_check(args):
    results = run_checks(_resolve(args.config), threads=args.threads)
    ok = True
    for spec, report in results:
        expect = spec.get("expect", "pass")
        met = report.verdict == expect
        ok &= met
        print(report.summary() + ("" if met else f"  [expected {expect}]"))
        if args.json:
            print(report.to_json(sort_keys=True))
    return EXIT_OK if ok else EXIT_CHECK


def _cmd_list(args):
    sys.stdout.write(list_registry())
    return EXIT_OK


def _cmd_plot(args):
    trajs = [read_trajectory_csv(p) for p in args.csv]
    markers = [json.loads(m) for m in args.marker]
    emit_simplex_svg(trajs, markers, args.output, title=args.title)
    print(args.output)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="evolab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="integrate a scenario and write CSV/JSON/SVG outputs")
    run.add_argument("config", help="scenario JSON path or bundled scenario name")
    run.add_argument("-o", "--out", help="output directory (default runs/<name>)")
    run.add_argument("-j", "--threads", type=int, help="worker threads (default: EVOLAB_THREADS or CPU count)")
    run.add_argument("--no-compile", action="store_true", help="use the pure numpy integrator")
    run.set_defaults(func=_cmd_run)
    check = sub.add_parser("check", help="run the scenario's global checks without integrating")
    check.add_argument("config")
    check.add_argument("-j", "--threads", type=int)
    check.add_argument("--json", action="store_true", help="also print each report as JSON")
    check.set_defaults(func=_cmd_check)
    lst = sub.add_parser("list", help="list games, EDMs and checks")
    lst.set_defaults(func=_cmd_list)
    plot = sub.add_parser("plot", help="draw trajectory CSVs on the simplex")
    plot.add_argument("csv", nargs="+")
    plot.add_argument("-o", "--output", required=True)
    plot.add_argument("--marker", action="append", default=[], help="JSON state to mark, e.g. '[0.3,0.3,0.4]'")
    plot.add_argument("--title")
    plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericRunError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        print(f"partial manifest: {exc.manifest.out_dir}/manifest.json", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

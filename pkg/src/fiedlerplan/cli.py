"""Command-line entry point: ``fiedlerplan {inspect,cis,compare}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ScenarioConfig, config_from_mapping, load_config
from .exceptions import InvalidArgumentError
from .io import write_report_json, write_trace_csv
from .plotting import plot_fiedler, plot_paths, plot_runtimes
from .sim import run_scenario

log = logging.getLogger("fiedlerplan")

COMPARE_DEFAULTS = {"N": 6, "L": 2, "K": 1, "iterations": 200}


def _build_config(args: argparse.Namespace, mode: str) -> ScenarioConfig:
    """Config file (or table defaults) with command-line flags applied on top."""
    if args.config:
        config = load_config(args.config)
        if config.mode != mode:
            raise InvalidArgumentError(f"config mode {config.mode!r} does not match command {args.command!r}")
    else:
        config = config_from_mapping({"mode": mode, **(COMPARE_DEFAULTS if args.command == "compare" else {})})
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if getattr(args, "poi_radius", None) is not None:
        overrides["poi_radius"] = args.poi_radius
    if getattr(args, "no_cis", False):
        overrides["cis_enabled"] = False
    if args.command == "compare":
        overrides["K"] = 1
    elif getattr(args, "baseline", False):
        overrides.update(baseline=True, K=1)
    return config.replace(**overrides)


def _summary(label: str, report) -> str:
    rt = report.runtime_ms
    line = (f"{label}: min lambda2 {report.min_lambda2:.4f}, final {report.final_lambda2:.4f}, "
            f"min margin {report.min_margin:.3f} m, median step {rt.median:.2f} ms, "
            f"non-optimal steps {report.infeasible_steps}")
    if report.poi_errors:
        line += ", POI errors " + " ".join(f"{e:.2f}" for e in report.poi_errors)
    return line


def _run_single(args: argparse.Namespace, mode: str) -> int:
    config = _build_config(args, mode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace, report = run_scenario(config)
    write_trace_csv(trace, out / "trace.csv")
    write_report_json(report, config, out / "report.json", {"aborted": trace.aborted})
    if not args.no_plots and len(trace):
        plot_paths(trace, config, out / "paths.png")
        plot_fiedler({config.mode: trace}, config, out / "fiedler.png")
    print(_summary(mode, report))
    print(f"wrote {out}")
    return 1 if trace.aborted else 0


def _run_compare(args: argparse.Namespace) -> int:
    config = _build_config(args, "inspection")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs = {}
    for label, cfg in (("approximate", config.replace(baseline=False)),
                       ("baseline", config.replace(baseline=True))):
        trace, report = run_scenario(cfg)
        runs[label] = (trace, report)
        write_trace_csv(trace, out / f"trace_{label}.csv")
        print(_summary(label, report))
    approx, base = (runs[k][1].runtime_ms for k in ("approximate", "baseline"))
    ratio = base.median / approx.median
    write_report_json(runs["approximate"][1], config, out / "report.json", {
        "baseline_report": runs["baseline"][1],
        "median_ratio": ratio,
    })
    if not args.no_plots:
        plot_fiedler({k: v[0] for k, v in runs.items()}, config, out / "fiedler.png")
        plot_runtimes({k: v[0].column("solve_ms") for k, v in runs.items()}, out / "runtimes.png")
        plot_paths(runs["approximate"][0], config, out / "paths_approximate.png")
        plot_paths(runs["baseline"][0], config, out / "paths_baseline.png")
    print(f"median iteration time ratio (baseline / approximate): {ratio:.1f}")
    print(f"wrote {out}")
    return 1 if any(v[0].aborted for v in runs.values()) else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fiedlerplan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=str, default=None, help="YAML scenario file")
        p.add_argument("--seed", type=int, default=None, help="scenario seed")
        p.add_argument("--out", type=str, default="out", help="output directory")
        p.add_argument("--iterations", type=int, default=None, help="number of steps")
        p.add_argument("--no-plots", action="store_true", help="skip PNG figures")

    p = sub.add_parser("inspect", help="inspection task")
    common(p)
    p.add_argument("--baseline", action="store_true", help="use the nonlinear single-step planner (K = 1)")
    p.add_argument("--poi-radius", type=float, default=None, help="POI disc radius as a multiple of d50")

    p = sub.add_parser("cis", help="communication insurance filter on random-walk references")
    common(p)
    p.add_argument("--baseline", action="store_true", help="use the nonlinear single-step planner (K = 1)")
    p.add_argument("--no-cis", action="store_true", help="control run without connectivity constraints")

    p = sub.add_parser("compare", help="approximate vs nonlinear planner on one inspection scenario")
    common(p)
    p.add_argument("--poi-radius", type=float, default=None, help="POI disc radius as a multiple of d50")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "compare":
            return _run_compare(args)
        return _run_single(args, "inspection" if args.command == "inspect" else "cis")
    except (InvalidArgumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Subcommands mirror the deliverable figures and checks:

    fluxes            resource bookkeeping of the operating point
    scaling-sweep     relative noise vs resource ratio per microwave Rabi
    sensitivity-map   sensitivity over input power x beam waist (plus inset)
    quantum-sweep     relative noise for each photon statistic + boundary
    mc-validate       Monte Carlo check of the scaling law (exit 1 on fail)
    emit-svg          render a produced CSV as a cosmetic SVG

Exit codes: 0 success, 1 validation failure, 2 configuration error.  Every
data-producing command writes a ``<command>.manifest.json`` sidecar with
digests of its outputs; reruns with the same scenario and seed produce
byte-identical CSV regardless of ``--threads``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ScenarioError, ValidationFailedError, VaporNoiseError
from .manifest import RunManifest
from .scenario import Scenario, bundled_scenario_path, load_scenario
from .svg import PlotSpec, emit_svg
from .sweeps import (
    run_fluxes,
    run_mc_validation,
    run_quantum_sweep,
    run_scaling_sweep,
    run_sensitivity_map,
)
from .tableio import write_rows


def _common_flags(parser: argparse.ArgumentParser, scenario_required: bool = True):
    parser.add_argument(
        "--scenario",
        required=scenario_required,
        help="scenario file path, or the name of a bundled scenario",
    )
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario's Monte Carlo seed")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for grid/trial evaluation")
    parser.add_argument("--format", choices=("csv", "jsonl"), default="csv",
                        help="tabular output format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vapornoise",
        description="Discrete-atom noise budgets for vapor-cell sensors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("fluxes", "print and write the resource bookkeeping"),
        ("scaling-sweep", "relative noise vs resource ratio"),
        ("sensitivity-map", "sensitivity over power x waist"),
        ("quantum-sweep", "noise curves for each Mandel parameter"),
        ("mc-validate", "Monte Carlo validation of the scaling law"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        _common_flags(cmd)
        if name == "mc-validate":
            # Test hook: corrupt the analytic fluctuation parameter.
            cmd.add_argument("--fluctuation-scale", type=float, default=1.0,
                            help=argparse.SUPPRESS)

    svg_cmd = sub.add_parser("emit-svg", help="render a CSV as an SVG plot")
    svg_cmd.add_argument("--csv", required=True, help="input CSV file")
    svg_cmd.add_argument("--kind", choices=("line", "heatmap"), default="line")
    svg_cmd.add_argument("--x", required=True, help="x-axis column")
    svg_cmd.add_argument("--y", default=None,
                         help="comma-separated y columns (line) or y column (heatmap)")
    svg_cmd.add_argument("--value", default=None, help="heatmap value column")
    svg_cmd.add_argument("--group", default=None,
                         help="column that splits rows into separate lines")
    svg_cmd.add_argument("--log-x", action="store_true")
    svg_cmd.add_argument("--log-y", action="store_true")
    svg_cmd.add_argument("--title", default="")
    svg_cmd.add_argument("--out", default=".", help="output directory")
    svg_cmd.add_argument("--name", default=None, help="output file name")
    return parser


def _resolve_scenario(ref: str) -> Path:
    path = Path(ref)
    if path.exists():
        return path
    try:
        return bundled_scenario_path(ref)
    except ScenarioError:
        raise ScenarioError(
            f"scenario {ref!r} is neither a file nor a bundled scenario name"
        ) from None


def _load(args) -> tuple[Scenario, Path]:
    path = _resolve_scenario(args.scenario)
    scenario = load_scenario(path)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    return scenario, path


def _emit(args, scenario: Scenario, scenario_path: Path, command: str,
          tables: dict[str, object]) -> list[Path]:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = "csv" if args.format == "csv" else "jsonl"
    written: list[Path] = []
    for stem, result in tables.items():
        target = out_dir / f"{stem}.{suffix}"
        write_rows(target, result.fieldnames, result.rows, fmt=args.format)
        written.append(target)
    manifest = RunManifest.create(
        command=sys.argv[1:] if sys.argv[0].endswith("vapornoise") else [command],
        seed=args.seed
        if args.seed is not None
        else (scenario.mc.config.seed if scenario.mc else None),
        scenario_path=scenario_path,
        config_digest=scenario.canonical_digest(),
        output_paths=written,
        base_dir=out_dir,
    )
    manifest_path = out_dir / f"{command}.manifest.json"
    manifest.write(manifest_path)
    for path in written:
        print(f"wrote {path}")
    print(f"wrote {manifest_path}")
    return written


def _cmd_fluxes(args) -> int:
    scenario, path = _load(args)
    result = run_fluxes(scenario)
    row = result.rows[0]
    print(f"scenario: {scenario.name}")
    for key in result.fieldnames:
        print(f"  {key:>18}: {row[key]}")
    _emit(args, scenario, path, "fluxes", {"fluxes": result})
    return 0


def _cmd_scaling_sweep(args) -> int:
    scenario, path = _load(args)
    result = run_scaling_sweep(scenario, threads=args.threads)
    _emit(args, scenario, path, "scaling-sweep", {"scaling-sweep": result})
    return 0


def _cmd_sensitivity_map(args) -> int:
    scenario, path = _load(args)
    grid, inset = run_sensitivity_map(scenario, threads=args.threads)
    _emit(
        args,
        scenario,
        path,
        "sensitivity-map",
        {"sensitivity-map": grid, "sensitivity-map-inset": inset},
    )
    return 0


def _cmd_quantum_sweep(args) -> int:
    scenario, path = _load(args)
    result = run_quantum_sweep(scenario, threads=args.threads)
    _emit(args, scenario, path, "quantum-sweep", {"quantum-sweep": result})
    return 0


def _cmd_mc_validate(args) -> int:
    scenario, path = _load(args)
    report, result = run_mc_validation(
        scenario, threads=args.threads, fluctuation_scale=args.fluctuation_scale
    )
    _emit(args, scenario, path, "mc-validate", {"mc-validate": result})
    worst = max(pt.rel_deviation for pt in report.points)
    print(
        f"mc-validate: {len(report.points)} points, J={report.fluctuation_param:.6g}, "
        f"worst deviation {worst:.2%} (tolerance {report.rel_tol:.0%})"
    )
    if not report.passed:
        failing = [pt.r_target for pt in report.points if not pt.passed]
        raise ValidationFailedError(
            f"scaling validation failed at R = {failing}"
        )
    print("mc-validate: PASS")
    return 0


def _cmd_emit_svg(args) -> int:
    y_cols = tuple(part for part in (args.y or "").split(",") if part)
    try:
        spec = PlotSpec(
            kind=args.kind,
            x=args.x,
            y=y_cols,
            value=args.value,
            group=args.group,
            log_x=args.log_x,
            log_y=args.log_y,
            title=args.title,
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = args.name or (Path(args.csv).stem + ".svg")
    try:
        target = emit_svg(args.csv, spec, out_dir / name)
    except (OSError, ValueError) as exc:
        raise ScenarioError(str(exc)) from None
    print(f"wrote {target}")
    return 0


_HANDLERS = {
    "fluxes": _cmd_fluxes,
    "scaling-sweep": _cmd_scaling_sweep,
    "sensitivity-map": _cmd_sensitivity_map,
    "quantum-sweep": _cmd_quantum_sweep,
    "mc-validate": _cmd_mc_validate,
    "emit-svg": _cmd_emit_svg,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ValidationFailedError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 1
    except VaporNoiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""
cli.py — командний рядок polyvem: сітки, одиночний розв'язок, дослідження збіжності
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .config import RunConfig
from .errors import AcceptanceFailure, ConfigError, TopologyError, VEMError
from .export import export_vtk, to_json, write_json
from .logging_setup import configure_logging, log_result
from .mesh import load_mesh, parse_mesh_descriptor, save_mesh, validate
from .spaces import exact_sequence_audit
from .verify import RATE_WINDOW, get_case, run_convergence, solve_case

logger = logging.getLogger("polyvem.cli")

DEFAULT_LEVELS = {
    "test1": ["structured:4", "structured:6", "structured:8"],
    "test2": ["annulus:1", "annulus:2", "annulus:3"],
    "test3": ["electromagnet:1", "electromagnet:2"],
    "from-file": [],
}


def _emit(payload: Dict[str, Any]) -> None:
    print(to_json(payload))


def _with_seed(descriptor: str, seed: int) -> str:
    """Append the run seed to ``perturbed:n[:amp]`` descriptors that omit one."""

    parts = descriptor.split(":")
    if parts[0] == "perturbed" and len(parts) < 4:
        parts += ["0.2"] * (3 - len(parts)) + [str(seed)]
        return ":".join(parts)
    return descriptor


def _mesh_from_args(args: argparse.Namespace):
    if getattr(args, "structured", None) is not None:
        return parse_mesh_descriptor(f"structured:{args.structured}")
    if getattr(args, "mesh", None):
        return parse_mesh_descriptor(args.mesh)
    if getattr(args, "path", None):
        return load_mesh(args.path, format=getattr(args, "format", None), check=False)
    raise ConfigError("no mesh given: use --structured N, --mesh DESCRIPTOR or a file path")


# -- mesh ----------------------------------------------------------------------


def cmd_mesh(args: argparse.Namespace) -> int:
    action = args.mesh_command
    if action == "gen":
        mesh = _mesh_from_args(args)
        report = validate(mesh)
        report.raise_if_invalid()
        out = save_mesh(mesh, args.output, format=args.format)
        _emit({"status": "ok", "output": str(out), "mesh": mesh.summary(), "validation": report.summary()})
        return 0
    if action == "validate":
        mesh = load_mesh(args.path, format=args.format, check=False)
        report = validate(mesh, planarity_tol=args.planarity_tol)
        _emit({"mesh": mesh.summary(), "validation": report.summary()})
        report.raise_if_invalid()
        return 0
    if action == "convert":
        mesh = load_mesh(args.path, format=args.source_format)
        out = save_mesh(mesh, args.output, format=args.target_format)
        _emit({"status": "ok", "input": str(args.path), "output": str(out), "mesh": mesh.summary()})
        return 0
    if action == "audit":
        mesh = _mesh_from_args(args)
        audit = exact_sequence_audit(mesh, rank_check=args.rank_check)
        _emit({"mesh": mesh.summary(), "audit": audit.to_dict()})
        if not audit.ok:
            raise TopologyError("exact-sequence audit failed", code="exact_sequence")
        return 0
    raise ConfigError(f"unknown mesh command {action!r}")


# -- solve / convergence -----------------------------------------------------------


def _run_config(args: argparse.Namespace, keys: Sequence[str]) -> RunConfig:
    overrides = {key: getattr(args, key, None) for key in keys}
    return RunConfig.from_sources(args.config, overrides)


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = _run_config(
        args, ["case", "mesh", "solver", "solver_tol", "case_file", "export_vtk", "export_json", "seed", "timings"]
    )
    case = get_case(cfg.case, cfg.case_file)
    mesh = parse_mesh_descriptor(_with_seed(cfg.mesh, cfg.seed), family_alias=case.mesh_family)
    result = solve_case(case, mesh, solver=cfg.solver, tol=cfg.solver_tol)
    payload = {"status": "ok", "mesh_descriptor": cfg.mesh, **result.to_dict(timings=cfg.timings)}
    if cfg.export_vtk:
        payload["vtk"] = str(export_vtk(result, cfg.export_vtk))
    if cfg.export_json:
        payload["report"] = str(write_json(payload, cfg.export_json))
    log_result(f"solve {case.name} on {cfg.mesh}: err_H_L2={result.err_H_L2:.4e} p_inf={result.stats.p_inf:.2e}")
    _emit(payload)
    return 0


def cmd_convergence(args: argparse.Namespace) -> int:
    cfg = _run_config(
        args,
        ["case", "family", "levels", "solver", "solver_tol", "case_file", "output_dir", "export_csv", "export_json", "seed", "timings"],
    )
    case = get_case(cfg.case, cfg.case_file)
    levels = cfg.levels or DEFAULT_LEVELS.get(cfg.case, [])
    levels = [_with_seed(level, cfg.seed) for level in levels]
    report = run_convergence(case, cfg.family, levels, solver=cfg.solver, tol=cfg.solver_tol, timings=cfg.timings)
    csv_path = cfg.export_csv or cfg.output_dir / f"convergence_{case.name}.csv"
    report.to_csv(csv_path)
    summary = {"status": "ok", "csv": str(csv_path), **report.summary()}
    if cfg.export_json:
        summary["report"] = str(write_json(summary, cfg.export_json))
    log_result(f"convergence {case.name}: rate={report.rate:.3f} over {len(levels)} levels")
    _emit(summary)
    if args.assert_rate and not report.rate_within(RATE_WINDOW):
        raise AcceptanceFailure(
            f"fitted rate {report.rate:.3f} outside [{RATE_WINDOW[0]}, {RATE_WINDOW[1]}]"
        )
    return 0


# -- parser --------------------------------------------------------------------


def _add_run_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None, help="JSON/YAML run configuration")
    sub.add_argument("--case", choices=["test1", "test2", "test3", "from-file"], default=None)
    sub.add_argument("--case-file", dest="case_file", type=Path, default=None)
    sub.add_argument("--solver", choices=["direct", "minres"], default=None)
    sub.add_argument("--tol", dest="solver_tol", type=float, default=None)
    sub.add_argument("--seed", type=int, default=None, help="seed for perturbed meshes without one")
    sub.add_argument("--export-json", dest="export_json", type=Path, default=None)
    sub.add_argument(
        "--no-timings",
        dest="timings",
        action="store_const",
        const=False,
        default=None,
        help="write zero timings for byte-identical reruns",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyvem", description="Lowest-order virtual elements for 3-D magnetostatics")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    commands = parser.add_subparsers(dest="command", required=True)

    mesh = commands.add_parser("mesh", help="generate, validate, convert or audit meshes")
    mesh_commands = mesh.add_subparsers(dest="mesh_command", required=True)

    gen = mesh_commands.add_parser("gen", help="generate a mesh and write it")
    source = gen.add_mutually_exclusive_group(required=True)
    source.add_argument("--structured", type=int, help="n for an n×n×n hexahedral grid of the unit cube")
    source.add_argument("--mesh", help="descriptor such as perturbed:4:0.2:7 or annulus:2")
    gen.add_argument("-o", "--output", type=Path, required=True)
    gen.add_argument("--format", choices=["native-json", "vtk-polyhedral"], default=None)

    val = mesh_commands.add_parser("validate", help="check mesh invariants")
    val.add_argument("path", type=Path)
    val.add_argument("--format", choices=["native-json", "vtk-polyhedral"], default=None)
    val.add_argument("--planarity-tol", dest="planarity_tol", type=float, default=None)

    conv = mesh_commands.add_parser("convert", help="convert between native JSON and VTK polyhedra")
    conv.add_argument("path", type=Path)
    conv.add_argument("-o", "--output", type=Path, required=True)
    conv.add_argument("--from", dest="source_format", choices=["native-json", "vtk-polyhedral"], default=None)
    conv.add_argument("--to", dest="target_format", choices=["native-json", "vtk-polyhedral"], default=None)

    audit = mesh_commands.add_parser("audit", help="exact-sequence report for a mesh")
    audit.add_argument("path", type=Path, nargs="?", default=None)
    audit.add_argument("--mesh", default=None, help="descriptor instead of a file")
    audit.add_argument("--format", choices=["native-json", "vtk-polyhedral"], default=None)
    audit.add_argument("--rank-check", dest="rank_check", action="store_true", default=None)

    solve = commands.add_parser("solve", help="solve one case on one mesh")
    _add_run_options(solve)
    solve.add_argument("--mesh", default=None, help="mesh descriptor, e.g. structured:6 or extruded:2")
    solve.add_argument("--export-vtk", dest="export_vtk", type=Path, default=None)

    study = commands.add_parser("convergence", help="refinement study with fitted rate")
    _add_run_options(study)
    study.add_argument("--family", default=None, help="mesh family for bare integer levels")
    study.add_argument("--levels", nargs="+", default=None, help="levels or full descriptors")
    study.add_argument("--output-dir", dest="output_dir", type=Path, default=None)
    study.add_argument("--output-csv", dest="export_csv", type=Path, default=None)
    study.add_argument("--assert-rate", dest="assert_rate", action="store_true")
    return parser


HANDLERS = {"mesh": cmd_mesh, "solve": cmd_solve, "convergence": cmd_convergence}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return HANDLERS[args.command](args)
    except VEMError as exc:
        logger.error("%s: %s", exc.reason, exc)
        print(json.dumps(exc.to_payload(), ensure_ascii=False), file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - last-resort mapping
        logger.exception("unexpected failure")
        print(
            json.dumps({"status": "error", "reason": "unexpected", "message": str(exc)}, ensure_ascii=False),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())

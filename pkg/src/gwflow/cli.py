"""Command-line entry point.

Subcommands: ``run`` (case simulation), ``validate`` (built-in checks),
``bench`` (strong-scaling harness), ``convert-vtk`` (legacy-VTK
ingestion), ``mesh-info`` (mesh summary). Thread count comes from
``--threads``, falling back to the GWFLOW_THREADS environment variable,
then to hardware parallelism.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .case_io import CaseError, parse_case_file
from .linsolve import LinearSolveError
from .mesh import mesh_summary
from .parallel import default_thread_count, set_thread_count
from .simulation import RunAborted, run_case
from .vtk_legacy import VtkError, load_patch_rules, read_vtk_legacy, write_vtk_legacy

log = logging.getLogger("gwflow")


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--threads", type=int, default=None,
        help="worker threads (default: GWFLOW_THREADS or hardware)",
    )


def _activate_threads(args) -> int:
    n = args.threads if args.threads is not None else default_thread_count()
    return set_thread_count(n)


def _cmd_run(args) -> int:
    case_path = Path(args.case)
    cfg = parse_case_file(case_path, overrides=args.set)
    threads = _activate_threads(args)
    out_dir = args.output if args.output else cfg.output_dir
    log.info("running case %s (%s threads), output -> %s", cfg.name, threads, out_dir)
    result = run_case(cfg, base_dir=case_path.parent, output_dir=out_dir)
    print(
        f"{cfg.name}: {result.steps} steps to t={result.time:g} s, "
        f"{result.warned_steps} hard-cap warnings, "
        f"cumulative mass-balance error {result.cumulative_mass_error:.3e}"
    )
    for path in result.outputs:
        print(f"  wrote {path}")
    return 0


def _cmd_validate(args) -> int:
    from .validate import ALPHA, run_validation

    _activate_threads(args)
    alpha = ALPHA * args.perturb_alpha
    checks = run_validation(alpha=alpha)
    for check in checks:
        print(check.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} validation checks passed")
    return 1 if failed else 0


def _cmd_bench(args) -> int:
    from .bench import bench_case

    case_path = Path(args.case)
    cfg = parse_case_file(case_path, overrides=args.set)
    try:
        threads = [int(tok) for tok in args.threads_list.split(",") if tok.strip()]
    except ValueError:
        print(f"error: bad thread list {args.threads_list!r}", file=sys.stderr)
        return 2
    report = bench_case(
        cfg, base_dir=case_path.parent, threads=threads,
        steps=args.steps, repeats=args.repeats,
    )
    print(report.table())
    print(f"bit-identical across thread counts: {report.deterministic()}")
    return 0


def _cmd_convert_vtk(args) -> int:
    rules = load_patch_rules(args.sidecar) if args.sidecar else None
    mesh = read_vtk_legacy(args.input, rules)
    print(f"{mesh.n_cells} cells, {mesh.n_internal} interior faces, "
          f"{mesh.n_boundary} boundary faces")
    for name, faces in mesh.patches.items():
        print(f"  patch {name}: {faces.size} faces")
    write_vtk_legacy(mesh, args.output, title=f"converted from {args.input}")
    assignment = Path(args.output).with_suffix(".patches")
    lines = [
        f"{name}: " + " ".join(str(int(f)) for f in faces)
        for name, faces in mesh.patches.items()
    ]
    assignment.write_text("\n".join(lines) + "\n")
    print(f"wrote {args.output} and {assignment}")
    return 0


def _cmd_mesh_info(args) -> int:
    path = Path(args.path)
    if path.suffix == ".vtk":
        rules = load_patch_rules(args.sidecar) if args.sidecar else None
        mesh = read_vtk_legacy(path, rules)
    else:
        from .simulation import build_mesh

        cfg = parse_case_file(path)
        mesh = build_mesh(cfg.mesh, path.parent)
    print(mesh_summary(mesh))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gwflow",
        description="Finite-volume saturated/unsaturated groundwater flow solver",
    )
    parser.add_argument("--version", action="version", version=f"gwflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a case file")
    p_run.add_argument("case")
    p_run.add_argument("--output", default=None, help="output directory")
    p_run.add_argument(
        "--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override a case entry (repeatable)",
    )
    _add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="run the built-in validation checks")
    p_val.add_argument(
        "--perturb-alpha", type=float, default=1.0, metavar="FACTOR",
        help="multiply alpha by FACTOR (negative control; expect failure when != 1)",
    )
    _add_common(p_val)
    p_val.set_defaults(func=_cmd_validate)

    p_bench = sub.add_parser("bench", help="strong-scaling measurement on a case")
    p_bench.add_argument("case")
    p_bench.add_argument(
        "--threads", dest="threads_list", default="1,2,4",
        help="comma-separated thread counts (default 1,2,4)",
    )
    p_bench.add_argument("--steps", type=int, default=50, help="time steps per run")
    p_bench.add_argument("--repeats", type=int, default=3, help="runs per thread count")
    p_bench.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p_bench.set_defaults(func=_cmd_bench)

    p_conv = sub.add_parser("convert-vtk", help="ingest a legacy VTK mesh")
    p_conv.add_argument("input")
    p_conv.add_argument("output")
    p_conv.add_argument("--sidecar", default=None, help="patch sidecar file")
    p_conv.set_defaults(func=_cmd_convert_vtk)

    p_info = sub.add_parser("mesh-info", help="print mesh summary for a case or VTK file")
    p_info.add_argument("path")
    p_info.add_argument("--sidecar", default=None)
    p_info.set_defaults(func=_cmd_mesh_info)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CaseError, VtkError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RunAborted, LinearSolveError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

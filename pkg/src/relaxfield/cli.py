"""Command-line front end: solve | field | bench | section."""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import io
from .field import DEFAULT_NODES_PER_LINE, field_midpoint, field_polynomial, line_nodes
from .grid import GridError, GridSpec, build_grid
from .solver import SolverError, solve

log = logging.getLogger("relaxfield")

EXIT_OK, EXIT_NONCONVERGED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def load_config(path: str | None, overrides: list[str], out_dir: str | None) -> io.RunConfig:
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise io.ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        raw = io.load_json(text)
        if not isinstance(raw, dict):
            raise io.ConfigValidationError(f"{path}: top level must be an object")
    raw = io.apply_overrides(raw, overrides)
    if out_dir is not None:
        raw = io.apply_overrides(raw, [f"output.dir={json.dumps(out_dir)}"])
    return io.config_from_dict(raw)


def _out_path(config: io.RunConfig, name: str) -> Path:
    return io.ensure_dir(config.output.dir) / name


def run_solve(config: io.RunConfig):
    grid = build_grid(config.layout, config.grid)
    return solve(grid, config.solver)


def format_report(config: io.RunConfig, report, trace) -> str:
    betas = trace.betas
    spec = config.grid
    lines = [
        f"method          {report.method}",
        f"grid            n={spec.n} ({spec.n + 1} x {spec.n + 1} nodes), h=({spec.hx:g}, {spec.hy:g})",
        f"monitor         {report.monitor}  V = {report.monitor_value:.6f}",
        f"converged       {'yes' if report.converged else 'no'}",
        f"iterations      {report.iterations}",
        f"final epsilon   {report.final_epsilon:.3e} V (threshold {report.threshold:.3e} V)",
        f"final residual  {report.final_residual:.3e} V",
        f"beta            first {betas[0]:.4f}  last {betas[-1]:.4f}  "
        f"min {betas.min():.4f}  max {betas.max():.4f}  mean {betas.mean():.4f}",
        f"wall time       {report.wall_time:.3f} s",
    ]
    return "\n".join(lines) + "\n"


def cmd_solve(args, config: io.RunConfig) -> int:
    grid, report, trace = run_solve(config)
    io.export_grid_csv(grid, _out_path(config, config.output.grid_csv))
    io.export_trace_csv(trace, _out_path(config, config.output.trace_csv))
    text = format_report(config, report, trace)
    try:
        _out_path(config, config.output.report).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise io.WriteFailure(str(exc)) from exc
    sys.stdout.write(text)
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def _grid_for(args, config: io.RunConfig):
    """Solve per config, or load a previously exported grid CSV."""
    if getattr(args, "from_grid", None):
        return io.read_grid_csv(args.from_grid, config.grid.x_max, config.grid.y_max), True
    grid, report, _ = run_solve(config)
    log.info("solved: %d iterations, converged=%s", report.iterations, report.converged)
    return grid, report.converged


def cmd_field(args, config: io.RunConfig) -> int:
    grid, converged = _grid_for(args, config)
    method = config.field.method
    m = config.field.nodes_per_line or min(DEFAULT_NODES_PER_LINE, grid.n + 1)
    if method == "midpoint":
        fld = field_midpoint(grid)
    else:
        scheme = "equidistant" if method == "poly-equidistant" else "chebyshev"
        if m > grid.n + 1:
            raise UsageError(f"nodes_per_line {m} exceeds the {grid.n + 1} nodes per line")
        log.info("%s nodes (m=%d): %s", scheme, m, line_nodes(grid.n, scheme, m))
        fld = field_polynomial(grid, scheme, m)
    io.export_grid_csv(fld, _out_path(config, config.output.field_csv))
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_section(args, config: io.RunConfig) -> int:
    grid, converged = _grid_for(args, config)
    values = io.extract_section(grid, args.axis, args.index)
    target = _out_path(config, config.output.section)
    try:
        target.write_text(io.format_section(values, "lines") + "\n", encoding="utf-8")
    except OSError as exc:
        raise io.WriteFailure(str(exc)) from exc
    label = f"V({args.index},i)" if args.axis == "column" else f"V(i,{args.index})"
    print(f"{label}={io.format_section(values, args.format)}" if args.format == "list"
          else io.format_section(values, "lines"))
    return EXIT_OK if converged else EXIT_NONCONVERGED


def bench_cells(config: io.RunConfig) -> list[tuple[str, int, float | None]]:
    """(method, n, beta) in cross-product order; beta is None for unrelaxed methods."""
    cells = []
    for n, method in itertools.product(config.bench.sizes, config.bench.methods):
        if method in ("jacobi", "gauss_seidel"):
            cells.append((method, n, None))
        else:
            cells.extend((method, n, beta) for beta in config.bench.betas)
    return cells


def run_cell(config: io.RunConfig, cell) -> dict:
    method, n, beta = cell
    spec = GridSpec(n, config.grid.x_max, config.grid.y_max)
    monitor = config.solver.monitor
    if monitor is not None and not all(0 <= c <= n for c in monitor):
        monitor = None
    solver = replace(config.solver, method=method, monitor=monitor,
                     beta0=beta if beta is not None else config.solver.beta0)
    _, report, _ = solve(build_grid(config.layout, spec), solver)
    return {
        "method": method,
        "n": n,
        "beta": beta,
        "iterations": report.iterations,
        "converged": report.converged,
        "wall_time": report.wall_time,
        "final_residual": report.final_residual,
    }


def bench_threads() -> int:
    try:
        return max(1, int(os.environ.get("RELAXFIELD_THREADS", "1")))
    except ValueError:
        return 1


def cmd_bench(args, config: io.RunConfig) -> int:
    cells = bench_cells(config)
    with ThreadPoolExecutor(max_workers=bench_threads()) as pool:
        rows = list(pool.map(lambda c: run_cell(config, c), cells))
    path = _out_path(config, config.output.bench_csv)
    io.export_bench_csv(rows, path)

    print(f"{'method':<14}{'n':>6}{'beta':>8}{'iters':>8}{'conv':>6}{'time[s]':>10}{'residual':>12}")
    for r in rows:
        beta = "-" if r["beta"] is None else f"{r['beta']:.3f}"
        print(f"{r['method']:<14}{r['n']:>6}{beta:>8}{r['iterations']:>8}"
              f"{'yes' if r['converged'] else 'no':>6}{r['wall_time']:>10.3f}{r['final_residual']:>12.3e}")
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NONCONVERGED


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(t) for t in text.split(",") if t.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None
    return parse


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # accepted before and after the subcommand; the subcommand copy must not
    # reset values given before it
    default = (lambda value: argparse.SUPPRESS) if suppress else (lambda value: value)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=default(None), help="JSON run configuration")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=default([]),
                        dest="sub_overrides" if suppress else "overrides",
                        help="override a config key, e.g. solver.beta0=1.8 (repeatable)")
    common.add_argument("--out", metavar="DIR", default=default(None),
                        help="output directory (overrides output.dir)")
    common.add_argument("-v", "--verbose", action="store_true", default=default(False))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(prog="relaxfield", parents=[_global_flags(suppress=False)],
                                     description="Laplace potential and field solver for multi-electrode layouts.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("solve", parents=[common], help="solve for the potential; write grid, trace and report")

    p = sub.add_parser("field", parents=[common], help="write the electric field for a solved grid")
    p.add_argument("--method", choices=io.FIELD_METHODS)
    p.add_argument("--nodes", type=int, metavar="M", help="interpolation nodes per line")
    p.add_argument("--from-grid", metavar="CSV", help="use an exported grid instead of solving")

    p = sub.add_parser("section", parents=[common], help="print one grid line of potentials")
    p.add_argument("--axis", choices=("column", "row"), default="column")
    p.add_argument("--index", type=int, default=40)
    p.add_argument("--format", choices=("list", "lines"), default="list")
    p.add_argument("--from-grid", metavar="CSV", help="use an exported grid instead of solving")

    p = sub.add_parser("bench", parents=[common], help="iteration counts across methods, betas and sizes")
    p.add_argument("--methods", type=_csv_list(str))
    p.add_argument("--betas", type=_csv_list(float))
    p.add_argument("--sizes", type=_csv_list(int))
    return parser


def _flag_overrides(args) -> list[str]:
    extra = []
    if args.command == "field":
        if args.method:
            extra.append(f"field.method={json.dumps(args.method)}")
        if args.nodes is not None:
            extra.append(f"field.nodes_per_line={args.nodes}")
    if args.command == "bench":
        for key in ("methods", "betas", "sizes"):
            if getattr(args, key) is not None:
                extra.append(f"bench.{key}={json.dumps(getattr(args, key))}")
    return extra


COMMANDS = {"solve": cmd_solve, "field": cmd_field, "section": cmd_section, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "field" else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        overrides = args.overrides + getattr(args, "sub_overrides", []) + _flag_overrides(args)
        config = load_config(args.config, overrides, args.out)
        return COMMANDS[args.command](args, config)
    except (io.ConfigError, GridError, SolverError, io.IndexOutOfRange, UsageError) as exc:
        print(f"relaxfield: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (io.WriteFailure, io.GridFormatError, OSError) as exc:
        print(f"relaxfield: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

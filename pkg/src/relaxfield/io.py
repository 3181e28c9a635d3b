"""Run configuration parsing and CSV / section serialization."""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .field import FieldGrid
from .grid import (
    CANONICAL_RECTS,
    ROLES,
    DeviceLayout,
    ElectrodeRegion,
    GridError,
    GridSpec,
    PotentialGrid,
    canonical_layout,
)
from .solver import METHODS, ConvergenceTrace, SolverConfig, SolverError

FIELD_METHODS = ("midpoint", "poly-equidistant", "poly-chebyshev")
DEFAULT_POTENTIALS = {"source": 1.0, "drain": -3.0, "gate": 3.0, "shield": 0.0}


class ConfigError(ValueError):
    pass


class ConfigSyntaxError(ConfigError):
    pass


class ConfigValidationError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class IndexOutOfRange(IndexError):
    pass


class WriteFailure(OSError):
    pass


class GridFormatError(ValueError):
    pass


@dataclass(frozen=True)
class FieldConfig:
    method: str = "midpoint"
    nodes_per_line: int | None = None  # None: min(15, n + 1)


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    grid_csv: str = "grid.csv"
    trace_csv: str = "trace.csv"
    field_csv: str = "field.csv"
    report: str = "report.txt"
    section: str = "section.txt"
    bench_csv: str = "bench.csv"


@dataclass(frozen=True)
class BenchConfig:
    methods: tuple[str, ...] = ("jacobi", "gauss_seidel", "sor")
    betas: tuple[float, ...] = (1.9,)
    sizes: tuple[int, ...] = (50,)


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec = GridSpec(200)
    layout: DeviceLayout = field(default_factory=canonical_layout)
    solver: SolverConfig = SolverConfig(method="sor", beta0=1.9)
    field: FieldConfig = FieldConfig()
    output: OutputConfig = OutputConfig()
    bench: BenchConfig = BenchConfig()


_SECTIONS = {
    "grid": {"n", "x_max", "y_max"},
    "layout": {"shield_grounded", "potentials", "regions"},
    "solver": {"method", "beta0", "adaptive_gain", "beta_bounds", "tol", "max_iter", "monitor"},
    "field": {"method", "nodes_per_line"},
    "output": set(OutputConfig.__dataclass_fields__),
    "bench": {"methods", "betas", "sizes"},
}
_REGION_KEYS = {"role", "rect", "potential"}


def _check_keys(obj: Any, allowed: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigValidationError(f"{where}: expected an object, got {type(obj).__name__}")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise UnknownKey(f"{where}: unknown key(s) {', '.join(map(repr, extra))}")
    return obj


def _number(value: Any, where: str, integer=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValidationError(f"{where}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigValidationError(f"{where}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigValidationError(f"{where}: must be finite")
    return int(value) if integer else float(value)


def _number_list(value: Any, where: str, length=None, integer=False) -> tuple:
    if not isinstance(value, list) or (length is not None and len(value) != length):
        want = f"a list of {length} numbers" if length else "a list of numbers"
        raise ConfigValidationError(f"{where}: expected {want}, got {value!r}")
    return tuple(_number(v, f"{where}[{k}]", integer) for k, v in enumerate(value))


def _parse_grid(raw: dict) -> GridSpec:
    n = _number(raw.get("n", 200), "grid.n", integer=True)
    if n < 2:
        raise ConfigValidationError(f"grid.n: must be >= 2, got {n}")
    x_max = _number(raw.get("x_max", 1.0), "grid.x_max")
    y_max = _number(raw.get("y_max", 1.0), "grid.y_max")
    for name, val in (("x_max", x_max), ("y_max", y_max)):
        if val <= 0:
            raise ConfigValidationError(f"grid.{name}: must be > 0, got {val}")
    return GridSpec(n, x_max, y_max)


def _parse_layout(raw: dict) -> DeviceLayout:
    shield = raw.get("shield_grounded", True)
    if not isinstance(shield, bool):
        raise ConfigValidationError(f"layout.shield_grounded: expected true/false, got {shield!r}")
    potentials = dict(DEFAULT_POTENTIALS)
    for role, v in _check_keys(raw.get("potentials", {}), set(ROLES), "layout.potentials").items():
        potentials[role] = _number(v, f"layout.potentials.{role}")

    if "regions" in raw:
        if not isinstance(raw["regions"], list):
            raise ConfigValidationError("layout.regions: expected a list")
        specs = raw["regions"]
    else:
        specs = [{"role": role, "rect": list(rect)} for role, rects in CANONICAL_RECTS.items() for rect in rects]

    regions = []
    for k, spec in enumerate(specs):
        where = f"layout.regions[{k}]"
        _check_keys(spec, _REGION_KEYS, where)
        role = spec.get("role")
        if role not in ROLES:
            raise ConfigValidationError(f"{where}.role: must be one of {ROLES}, got {role!r}")
        if "rect" not in spec:
            raise ConfigValidationError(f"{where}.rect: required")
        rect = _number_list(spec["rect"], f"{where}.rect", length=4)
        potential = _number(spec["potential"], f"{where}.potential") if "potential" in spec else potentials[role]
        try:
            regions.append(ElectrodeRegion(role, rect, potential))
        except GridError as exc:
            raise ConfigValidationError(f"{where}: {exc}") from None
    return DeviceLayout(tuple(regions), shield)


def _parse_solver(raw: dict, spec: GridSpec) -> SolverConfig:
    method = raw.get("method", "sor")
    if method not in METHODS:
        raise ConfigValidationError(f"solver.method: must be one of {METHODS}, got {method!r}")
    beta0 = _number(raw.get("beta0", 1.9), "solver.beta0")
    if not 1.0 <= beta0 < 2.0:
        raise ConfigValidationError(f"solver.beta0: must lie in the interval [1, 2), got {beta0}")
    gain = _number(raw.get("adaptive_gain", 100.0), "solver.adaptive_gain")
    if gain < 0:
        raise ConfigValidationError(f"solver.adaptive_gain: must be >= 0, got {gain}")
    bounds = _number_list(raw.get("beta_bounds", [1.0, 1.99]), "solver.beta_bounds", length=2)
    if not 1.0 <= bounds[0] <= bounds[1] < 2.0:
        raise ConfigValidationError(f"solver.beta_bounds: must satisfy 1 <= lo <= hi < 2, got {list(bounds)}")
    tol = _number(raw.get("tol", 1e-4), "solver.tol")
    if tol <= 0:
        raise ConfigValidationError(f"solver.tol: must be > 0, got {tol}")
    max_iter = _number(raw.get("max_iter", 10_000), "solver.max_iter", integer=True)
    if max_iter < 1:
        raise ConfigValidationError(f"solver.max_iter: must be >= 1, got {max_iter}")
    monitor = raw.get("monitor")
    if monitor is not None:
        monitor = _number_list(monitor, "solver.monitor", length=2, integer=True)
        if not all(0 <= c <= spec.n for c in monitor):
            raise ConfigValidationError(f"solver.monitor: {list(monitor)} lies outside 0..{spec.n}")
    try:
        return SolverConfig(method, beta0, gain, bounds, tol, max_iter, monitor)
    except SolverError as exc:
        raise ConfigValidationError(f"solver: {exc}") from None


def _parse_field(raw: dict, spec: GridSpec) -> FieldConfig:
    method = raw.get("method", "midpoint")
    if method not in FIELD_METHODS:
        raise ConfigValidationError(f"field.method: must be one of {FIELD_METHODS}, got {method!r}")
    m = raw.get("nodes_per_line")
    if m is None:
        return FieldConfig(method, None)
    m = _number(m, "field.nodes_per_line", integer=True)
    if not 2 <= m <= spec.n + 1:
        raise ConfigValidationError(f"field.nodes_per_line: must lie in 2..{spec.n + 1}, got {m}")
    return FieldConfig(method, m)


def _parse_output(raw: dict) -> OutputConfig:
    values = {}
    for key, val in raw.items():
        if not isinstance(val, str) or not val:
            raise ConfigValidationError(f"output.{key}: expected a non-empty string, got {val!r}")
        values[key] = val
    return OutputConfig(**values)


def _parse_bench(raw: dict) -> BenchConfig:
    defaults = BenchConfig()
    methods = raw.get("methods", list(defaults.methods))
    if not isinstance(methods, list) or not methods or any(m not in METHODS for m in methods):
        raise ConfigValidationError(f"bench.methods: expected a non-empty list drawn from {METHODS}, got {methods!r}")
    betas = _number_list(raw.get("betas", list(defaults.betas)), "bench.betas")
    if not betas or any(not 1.0 <= b < 2.0 for b in betas):
        raise ConfigValidationError(f"bench.betas: every beta must lie in [1, 2), got {list(betas)}")
    sizes = _number_list(raw.get("sizes", list(defaults.sizes)), "bench.sizes", integer=True)
    if not sizes or any(s < 2 for s in sizes):
        raise ConfigValidationError(f"bench.sizes: every size must be >= 2, got {list(sizes)}")
    return BenchConfig(tuple(methods), betas, sizes)


def config_from_dict(raw: dict) -> RunConfig:
    _check_keys(raw, set(_SECTIONS), "config")
    sections = {name: _check_keys(raw.get(name, {}), keys, name) for name, keys in _SECTIONS.items()}
    spec = _parse_grid(sections["grid"])
    return RunConfig(
        grid=spec,
        layout=_parse_layout(sections["layout"]),
        solver=_parse_solver(sections["solver"], spec),
        field=_parse_field(sections["field"], spec),
        output=_parse_output(sections["output"]),
        bench=_parse_bench(sections["bench"]),
    )


def load_json(text: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSyntaxError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration; omitted keys take defaults."""
    return config_from_dict(load_json(text))


def config_to_dict(config: RunConfig) -> dict:
    s = config.solver
    return {
        "grid": {"n": config.grid.n, "x_max": config.grid.x_max, "y_max": config.grid.y_max},
        "layout": {
            "shield_grounded": config.layout.shield_grounded,
            "regions": [
                {"role": r.role, "rect": list(r.rect), "potential": r.potential} for r in config.layout.regions
            ],
        },
        "solver": {
            "method": s.method,
            "beta0": s.beta0,
            "adaptive_gain": s.adaptive_gain,
            "beta_bounds": list(s.beta_bounds),
            "tol": s.tol,
            "max_iter": s.max_iter,
            "monitor": list(s.monitor) if s.monitor is not None else None,
        },
        "field": {"method": config.field.method, "nodes_per_line": config.field.nodes_per_line},
        "output": dict(vars(config.output)),
        "bench": {
            "methods": list(config.bench.methods),
            "betas": list(config.bench.betas),
            "sizes": list(config.bench.sizes),
        },
    }


def serialize_config(config: RunConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2) + "\n"


def apply_overrides(raw: dict, overrides: Iterable[str]) -> dict:
    """Apply KEY=VALUE assignments (dotted keys, JSON values) to a raw config dict."""
    raw = copy.deepcopy(raw)
    for item in overrides:
        key, sep, text = item.partition("=")
        if not sep or not key:
            raise ConfigValidationError(f"override {item!r}: expected KEY=VALUE")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigValidationError(f"override {item!r}: {part!r} is not a section")
        node[parts[-1]] = value
    return raw


# -- CSV ---------------------------------------------------------------------


def _fixed6(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _sci6(x: float | None) -> str:
    return "" if x is None else f"{x:.6e}"


def _write(destination, text: str) -> int:
    data = text.encode("utf-8")
    try:
        if hasattr(destination, "write"):
            destination.write(data)
        else:
            Path(destination).write_bytes(data)
    except OSError as exc:
        raise WriteFailure(f"cannot write {destination}: {exc}") from exc
    return len(data)


def grid_csv_text(obj: PotentialGrid | FieldGrid) -> str:
    n = obj.spec.n
    if isinstance(obj, FieldGrid):
        ex, ey = obj.ex, obj.ey
        lines = ["i,j,ex,ey"]
        lines += [
            f"{i},{j},{_fixed6(ex[i, j])},{_fixed6(ey[i, j])}" for j in range(n + 1) for i in range(n + 1)
        ]
    else:
        v = obj.values
        lines = ["i,j,v"]
        lines += [f"{i},{j},{_fixed6(v[i, j])}" for j in range(n + 1) for i in range(n + 1)]
    return "\n".join(lines) + "\n"


def export_grid_csv(obj: PotentialGrid | FieldGrid, destination) -> int:
    """Write a potential grid ("i,j,v") or field ("i,j,ex,ey") as CSV; returns bytes written."""
    return _write(destination, grid_csv_text(obj))


def read_grid_csv(source, x_max: float = 1.0, y_max: float = 1.0) -> PotentialGrid:
    """Load a grid written by export_grid_csv.

    The CSV carries no fixed-node mask; the perimeter is marked fixed and
    everything else free.
    """
    try:
        text = Path(source).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise GridFormatError(f"cannot read {source}: {exc}") from None
    lines = text.splitlines()
    if not lines or lines[0].strip() != "i,j,v":
        raise GridFormatError(f"{source}: expected header 'i,j,v'")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            if len(parts) != 3:
                raise ValueError
            rows.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError:
            raise GridFormatError(f"{source}:{lineno}: malformed row {line!r}") from None
    count = len(rows)
    n = math.isqrt(count) - 1
    if n < 2 or (n + 1) ** 2 != count:
        raise GridFormatError(f"{source}: {count} rows do not form a square grid")
    values = np.full((n + 1, n + 1), np.nan)
    for i, j, val in rows:
        if not (0 <= i <= n and 0 <= j <= n):
            raise GridFormatError(f"{source}: node ({i}, {j}) outside 0..{n}")
        values[i, j] = val
    if np.isnan(values).any():
        raise GridFormatError(f"{source}: missing or non-numeric nodes")
    spec = GridSpec(n, x_max, y_max)
    fixed = np.zeros(spec.shape, dtype=bool)
    fixed[0, :] = fixed[-1, :] = fixed[:, 0] = fixed[:, -1] = True
    return PotentialGrid(spec, values, fixed)


def trace_csv_text(trace: ConvergenceTrace) -> str:
    lines = ["k,epsilon,beta,residual"]
    lines += [f"{r.k},{_sci6(r.epsilon)},{_fixed6(r.beta)},{_sci6(r.residual)}" for r in trace]
    return "\n".join(lines) + "\n"


def export_trace_csv(trace: ConvergenceTrace, destination) -> int:
    """Columns k, epsilon, beta, residual. epsilon and residual use 6-digit scientific notation."""
    return _write(destination, trace_csv_text(trace))


BENCH_COLUMNS = ("method", "n", "beta", "iterations", "converged", "wall_time", "final_residual")


def bench_csv_text(rows: Iterable[dict]) -> str:
    lines = [",".join(BENCH_COLUMNS)]
    for r in rows:
        beta = "" if r["beta"] is None else _fixed6(r["beta"])
        lines.append(
            f"{r['method']},{r['n']},{beta},{r['iterations']},{str(r['converged']).lower()},"
            f"{r['wall_time']:.6f},{_sci6(r['final_residual'])}"
        )
    return "\n".join(lines) + "\n"


def export_bench_csv(rows: Iterable[dict], destination) -> int:
    return _write(destination, bench_csv_text(rows))


# -- sections ------------------------------------------------------------------


def extract_section(grid: PotentialGrid, axis: str, index: int) -> list[float]:
    """Potentials along one grid line.

    axis="column" fixes the x index (V(index, 0..n)); axis="row" fixes the y
    index (V(0..n, index)).
    """
    if axis not in ("row", "column"):
        raise ValueError(f"axis must be 'row' or 'column', got {axis!r}")
    if not 0 <= index <= grid.n:
        raise IndexOutOfRange(f"{axis} index {index} outside 0..{grid.n}")
    line = grid.values[index, :] if axis == "column" else grid.values[:, index]
    return [float(v) for v in line]


def _short(x: float) -> str:
    return "0" if x == 0 else f"{x:.6g}"


def format_section(values: Iterable[float], style: str = "list") -> str:
    """'list' gives {v0,v1,...}; 'lines' gives one value per line."""
    items = [_short(v) for v in values]
    if style == "list":
        return "{" + ",".join(items) + "}"
    if style == "lines":
        return "\n".join(items)
    raise ValueError(f"style must be 'list' or 'lines', got {style!r}")


def ensure_dir(path: str | os.PathLike) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise WriteFailure(f"cannot create output directory {p}: {exc}") from exc
    return p

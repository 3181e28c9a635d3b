"""Relaxation solvers for the five-point Laplace system.

All sweeps use the weighted stencil

    V(i,j) = wx * (V(i-1,j) + V(i+1,j)) + wy * (V(i,j-1) + V(i,j+1))

with wx = hy^2 / (2 (hx^2 + hy^2)) and wy = hx^2 / (2 (hx^2 + hy^2)), which is
the plain four-neighbour mean on a square grid.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .grid import PotentialGrid

METHODS = ("jacobi", "gauss_seidel", "sor", "adaptive_sor")
MAX_DIRECT_UNKNOWNS = 10_000
RATE_WINDOW = 10


class SolverError(ValueError):
    pass


class MonitorOnFixedNode(SolverError):
    pass


class SystemTooLarge(SolverError):
    pass


def stencil_weights(grid: PotentialGrid) -> tuple[float, float]:
    hx2, hy2 = grid.spec.hx**2, grid.spec.hy**2
    return hy2 / (2.0 * (hx2 + hy2)), hx2 / (2.0 * (hx2 + hy2))


@dataclass(frozen=True)
class SolverConfig:
    method: str = "adaptive_sor"
    beta0: float = 1.5
    adaptive_gain: float = 100.0
    beta_bounds: tuple[float, float] = (1.0, 1.99)
    tol: float = 1e-4
    max_iter: int = 10_000
    monitor: tuple[int, int] | None = None
    record_residual: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise SolverError(f"method must be one of {METHODS}, got {self.method!r}")
        if not (1.0 <= self.beta0 < 2.0):
            raise SolverError(f"beta0 must lie in [1, 2), got {self.beta0}")
        lo, hi = (float(b) for b in self.beta_bounds)
        object.__setattr__(self, "beta_bounds", (lo, hi))
        if not (1.0 <= lo <= hi < 2.0):
            raise SolverError(f"beta_bounds must satisfy 1 <= lo <= hi < 2, got {self.beta_bounds}")
        if not self.adaptive_gain >= 0:
            raise SolverError("adaptive_gain must be >= 0")
        if not self.tol > 0:
            raise SolverError("tol must be > 0")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise SolverError("max_iter must be an integer >= 1")
        if self.monitor is not None:
            object.__setattr__(self, "monitor", tuple(int(c) for c in self.monitor))

    def monitor_for(self, grid: PotentialGrid) -> tuple[int, int]:
        if self.monitor is None:
            return (grid.n // 2, grid.n // 2)
        return self.monitor


class TraceRecord(NamedTuple):
    k: int
    epsilon: float
    beta: float
    residual: float | None


@dataclass
class ConvergenceTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, k, epsilon, beta, residual=None):
        self.records.append(TraceRecord(k, epsilon, beta, residual))

    @property
    def betas(self) -> np.ndarray:
        return np.array([r.beta for r in self.records])

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([r.epsilon for r in self.records])


@dataclass(frozen=True)
class SolveReport:
    method: str
    iterations: int
    converged: bool
    final_epsilon: float
    final_beta: float
    wall_time: float
    threshold: float
    monitor: tuple[int, int]
    monitor_value: float
    final_residual: float


def jacobi_sweep(grid: PotentialGrid) -> PotentialGrid:
    wx, wy = stencil_weights(grid)
    out = np.empty_like(grid.values)
    _kernels.jacobi_into(grid.values, grid.free, wx, wy, out)
    return grid.replace(out)


def gauss_seidel_sweep(grid: PotentialGrid) -> PotentialGrid:
    """One lexicographic sweep: rows j ascending, i ascending within a row."""
    wx, wy = stencil_weights(grid)
    v = np.array(grid.values)
    _kernels.gauss_seidel_inplace(v, grid.fixed, wx, wy)
    return grid.replace(v)


def sor_sweep(grid: PotentialGrid, beta: float) -> PotentialGrid:
    """Gauss-Seidel sweep with every update extrapolated by beta.

    beta scales the whole four-neighbour average, so beta = 1 is exactly
    Gauss-Seidel.
    """
    if not (1.0 <= beta < 2.0):
        raise SolverError(f"beta must lie in [1, 2), got {beta}")
    wx, wy = stencil_weights(grid)
    v = np.array(grid.values)
    _kernels.sor_inplace(v, grid.fixed, wx, wy, float(beta))
    return grid.replace(v)


def adapt_beta(beta0, eps_prev, eps_curr, gain, bounds=(1.0, 1.99)) -> float:
    """beta0 + gain * (eps_curr - eps_prev), clamped to bounds."""
    if gain < 0:
        raise SolverError("gain must be >= 0")
    lo, hi = bounds
    raw = beta0 + gain * (eps_curr - eps_prev)
    if math.isnan(raw):
        return float(beta0)
    return float(min(max(raw, lo), hi))


def residual_norm(grid: PotentialGrid) -> float:
    """Largest five-point defect |V - neighbour average| over free nodes."""
    wx, wy = stencil_weights(grid)
    return _kernels.defect(grid.values, grid.free, wx, wy)


def direct_solve(grid: PotentialGrid) -> PotentialGrid:
    """Exact discrete solution by dense Gaussian elimination with partial pivoting.

    Used as an oracle for the relaxation methods on small grids.
    """
    free = grid.free
    count = int(free.sum())
    if count > MAX_DIRECT_UNKNOWNS:
        raise SystemTooLarge(f"{count} free nodes exceeds the direct-solve limit {MAX_DIRECT_UNKNOWNS}")
    if count == 0:
        return grid
    wx, wy = stencil_weights(grid)
    v = grid.values
    index = np.full(grid.spec.shape, -1, dtype=np.int64)
    nodes = np.argwhere(free)
    index[free] = np.arange(count)

    A = np.zeros((count, count))
    b = np.zeros(count)
    for row, (i, j) in enumerate(nodes):
        A[row, row] = 1.0
        for (ii, jj), w in (((i - 1, j), wx), ((i + 1, j), wx), ((i, j - 1), wy), ((i, j + 1), wy)):
            col = index[ii, jj]
            if col >= 0:
                A[row, col] -= w
            else:
                b[row] += w * v[ii, jj]

    # LAPACK gesv: LU factorisation with partial pivoting
    x = np.linalg.solve(A, b)
    out = np.array(v)
    out[free] = x
    return grid.replace(out)


def solve(grid: PotentialGrid, config: SolverConfig | None = None):
    """Iterate the configured method until the monitor node settles.

    After sweep k the monitor change eps_k = V_k(m) - V_{k-1}(m) is recorded.
    tol is a precision goal relative to scale = max(1, max |fixed potential|):
    the run stops once |eps_k|, the largest update of the sweep, and the
    estimated remaining error |eps_k| * rho / (1 - rho) are all within
    tol * scale, rho being the observed per-sweep contraction.

    Returns (grid, SolveReport, ConvergenceTrace). Hitting max_iter is reported
    with converged=False, not raised.
    """
    config = config or SolverConfig()
    monitor = config.monitor_for(grid)
    i_m, j_m = monitor
    if not (0 <= i_m <= grid.n and 0 <= j_m <= grid.n):
        raise MonitorOnFixedNode(f"monitor {monitor} lies outside the grid")
    if grid.fixed[i_m, j_m]:
        raise MonitorOnFixedNode(f"monitor {monitor} is a fixed node")

    wx, wy = stencil_weights(grid)
    fixed = np.ascontiguousarray(grid.fixed)
    free = ~fixed
    v = np.array(grid.values)
    spare = np.empty_like(v) if config.method == "jacobi" else None
    threshold = config.tol * grid.fixed_scale()
    trace = ConvergenceTrace()

    beta = 1.0 if config.method in ("jacobi", "gauss_seidel") else float(config.beta0)
    if config.method == "adaptive_sor":
        beta = min(max(beta, config.beta_bounds[0]), config.beta_bounds[1])
    eps_prev = None
    updates: list[float] = []
    converged = False
    eps = float("nan")
    residual = None
    started = time.perf_counter()

    for k in range(1, config.max_iter + 1):
        before = v[i_m, j_m]
        if config.method == "jacobi":
            update = _kernels.jacobi_into(v, free, wx, wy, spare)
            v, spare = spare, v
        elif config.method == "gauss_seidel":
            update = _kernels.gauss_seidel_inplace(v, fixed, wx, wy)
        else:
            update = _kernels.sor_inplace(v, fixed, wx, wy, beta)
        eps = float(v[i_m, j_m] - before)
        if config.record_residual:
            residual = _kernels.defect(v, free, wx, wy)
        trace.append(k, eps, beta, residual)

        updates.append(update)
        if _settled(updates, eps, threshold):
            converged = True
            break
        if config.method == "adaptive_sor" and eps_prev is not None:
            beta = adapt_beta(config.beta0, eps_prev, eps, config.adaptive_gain, config.beta_bounds)
        eps_prev = eps

    wall = time.perf_counter() - started
    out = grid.replace(v)
    final_residual = residual if residual is not None else _kernels.defect(v, free, wx, wy)
    report = SolveReport(
        method=config.method,
        iterations=len(trace),
        converged=converged,
        final_epsilon=eps,
        final_beta=trace.records[-1].beta,
        wall_time=wall,
        threshold=threshold,
        monitor=monitor,
        monitor_value=float(v[i_m, j_m]),
        final_residual=float(final_residual),
    )
    return out, report, trace


def contraction_rate(updates: list[float], window: int = RATE_WINDOW) -> float:
    """Per-sweep contraction of the largest update, geometric mean over `window` sweeps."""
    if len(updates) < 2:
        return math.inf
    lag = min(window, len(updates) - 1)
    then, now = updates[-1 - lag], updates[-1]
    if then == 0.0:
        return 0.0 if now == 0.0 else math.inf
    return (now / then) ** (1.0 / lag)


def _settled(updates: list[float], eps: float, threshold: float) -> bool:
    update = updates[-1]
    if update == 0.0:
        return True
    # the monitor test alone stops early while the monitor is still outside the
    # region reached by the boundary data, or at a zero crossing of an
    # oscillating SOR iterate; require the whole sweep to have settled as well
    if update > threshold or abs(eps) > threshold:
        return False
    rate = contraction_rate(updates)
    if rate >= 1.0:
        return False
    return abs(eps) * rate / (1.0 - rate) <= threshold

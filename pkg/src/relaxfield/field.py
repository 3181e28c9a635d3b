"""Electric field E = -grad V from a solved potential grid.

Two routes: midpoint differences, and global polynomial interpolation along
each grid line with analytic differentiation of the power-basis expansion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .grid import GridSpec, PotentialGrid

SCHEMES = ("equidistant", "chebyshev")
DEFAULT_NODES_PER_LINE = 15


class DuplicateNodes(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FieldGrid:
    spec: GridSpec
    ex: np.ndarray
    ey: np.ndarray

    def __post_init__(self):
        for name in ("ex", "ey"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != self.spec.shape:
                raise ValueError(f"{name} shape {arr.shape} does not match {self.spec.shape}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.ex, self.ey)


@dataclass(frozen=True, eq=False)
class PolyCoeffs:
    """Power-basis coefficients, lowest order first: p(x) = sum_k coeffs[k] x**k."""

    coeffs: np.ndarray
    nodes: np.ndarray

    def __call__(self, x):
        return P.polyval(x, self.coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


def field_midpoint(grid: PotentialGrid) -> FieldGrid:
    """Central differences inside, second-order one-sided differences on the edges."""
    v = grid.values
    hx, hy = grid.spec.hx, grid.spec.hy
    dx = np.empty_like(v)
    dy = np.empty_like(v)

    dx[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2 * hx)
    dx[0, :] = (-3 * v[0, :] + 4 * v[1, :] - v[2, :]) / (2 * hx)
    dx[-1, :] = (3 * v[-1, :] - 4 * v[-2, :] + v[-3, :]) / (2 * hx)

    dy[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * hy)
    dy[:, 0] = (-3 * v[:, 0] + 4 * v[:, 1] - v[:, 2]) / (2 * hy)
    dy[:, -1] = (3 * v[:, -1] - 4 * v[:, -2] + v[:, -3]) / (2 * hy)

    return FieldGrid(grid.spec, -dx, -dy)


def lagrange_basis_matrix(nodes: Sequence[float]) -> np.ndarray:
    """Matrix L with L @ values = power-basis coefficients of the interpolant.

    Column i holds the expanded Lagrange basis polynomial
    prod_{k != i} (x - x_k) / (x_i - x_k).
    """
    x = np.asarray(nodes, dtype=np.float64)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("need at least two interpolation nodes")
    if len(np.unique(x)) != len(x):
        raise DuplicateNodes("interpolation nodes must be distinct")
    m = len(x)
    L = np.empty((m, m))
    for i in range(m):
        others = np.delete(x, i)
        L[:, i] = P.polyfromroots(others) / np.prod(x[i] - others)
    return L


def lagrange_interpolate(samples: Sequence[tuple[float, float]]) -> PolyCoeffs:
    """Interpolating polynomial through (coordinate, value) pairs, expanded in powers of x."""
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("samples must be (coordinate, value) pairs")
    nodes, values = pts[:, 0], pts[:, 1]
    return PolyCoeffs(lagrange_basis_matrix(nodes) @ values, nodes)


def poly_derivative(coeffs: PolyCoeffs | Sequence[float], at):
    c = np.asarray(coeffs.coeffs if isinstance(coeffs, PolyCoeffs) else coeffs, dtype=np.float64)
    if len(c) < 2:
        return np.zeros_like(np.asarray(at, dtype=np.float64))[()]
    return P.polyval(at, c[1:] * np.arange(1, len(c)))


def chebyshev_nodes(n: int, m: int) -> list[int]:
    """Grid indices floor((n/2) (1 - cos((2k-1) pi / (2m)))), k = 1..m, deduplicated."""
    if not (2 <= m <= n + 1):
        raise ValueError(f"need 2 <= m <= n+1, got m={m}, n={n}")
    idx = {
        min(max(math.floor(0.5 * n * (1.0 - math.cos((2 * k - 1) * math.pi / (2 * m)))), 0), n)
        for k in range(1, m + 1)
    }
    if len(idx) < 2:
        idx |= {0, n}
    return sorted(idx)


def chebyshev_nodes_unscaled(n: int, m: int) -> list[int]:
    """The map floor(n (1 - cos((2k-1) pi / (2m)))) without rescaling.

    It spans [0, 2n] and so escapes the grid; kept only for comparison.
    """
    return [math.floor(n * (1.0 - math.cos((2 * k - 1) * math.pi / (2 * m)))) for k in range(1, m + 1)]


def equidistant_nodes(n: int, m: int) -> list[int]:
    if not (2 <= m <= n + 1):
        raise ValueError(f"need 2 <= m <= n+1, got m={m}, n={n}")
    return sorted({int(round(t)) for t in np.linspace(0, n, m)})


def line_nodes(n: int, scheme: str, m: int) -> list[int]:
    if scheme == "equidistant":
        return equidistant_nodes(n, m)
    if scheme == "chebyshev":
        return chebyshev_nodes(n, m)
    raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")


def _line_derivatives(v: np.ndarray, idx: list[int], n: int) -> np.ndarray:
    """d/dt of each column's interpolant through rows idx, evaluated at every row.

    t = 2 i / n - 1 maps the index range onto [-1, 1]; the power basis is
    expanded in t.
    """
    t = 2.0 * np.arange(n + 1) / n - 1.0
    L = lagrange_basis_matrix(t[idx])
    coeffs = L @ v[idx, :]  # (m, lines)
    m = len(idx)
    powers = np.arange(1, m)
    dvander = np.zeros((n + 1, m))
    dvander[:, 1:] = powers * t[:, None] ** (powers - 1)
    return dvander @ coeffs


def field_polynomial(
    grid: PotentialGrid, scheme: str = "chebyshev", nodes_per_line: int | None = None
) -> FieldGrid:
    """Field from line-by-line polynomial interpolation.

    Each grid row is interpolated through the selected node subset, the
    power-basis interpolant is differentiated analytically at every x_i and
    negated; columns give E_y the same way. Interpolants are expanded in
    raw powers on purpose, so accuracy collapses for many nodes.
    """
    n = grid.n
    m = min(DEFAULT_NODES_PER_LINE, n + 1) if nodes_per_line is None else int(nodes_per_line)
    idx = line_nodes(n, scheme, m)
    v = grid.values
    # dt/dx = 2 / x_max
    ex = -_line_derivatives(v, idx, n) * (2.0 / grid.spec.x_max)
    ey = -_line_derivatives(v.T, idx, n).T * (2.0 / grid.spec.y_max)
    return FieldGrid(grid.spec, ex, ey)

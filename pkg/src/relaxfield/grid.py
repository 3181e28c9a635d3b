"""Domain, electrode geometry and Dirichlet rasterization onto a node lattice."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

ROLES = ("source", "drain", "gate", "shield")


class GridError(ValueError):
    """Base class for layout and grid construction failures."""


class OverlapConflict(GridError):
    pass


class EmptyInterior(GridError):
    pass


class FreeBoundaryNode(GridError):
    """A perimeter node was left free; only Dirichlet boundaries are supported."""


@dataclass(frozen=True)
class GridSpec:
    n: int
    x_max: float = 1.0
    y_max: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise GridError(f"n must be an integer >= 2, got {self.n!r}")
        if not (self.x_max > 0 and self.y_max > 0):
            raise GridError("x_max and y_max must be positive")
        if not (math.isfinite(self.x_max) and math.isfinite(self.y_max)):
            raise GridError("x_max and y_max must be finite")

    @property
    def hx(self) -> float:
        return self.x_max / self.n

    @property
    def hy(self) -> float:
        return self.y_max / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n + 1, self.n + 1)

    def x(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.hx

    def y(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.hy


@dataclass(frozen=True)
class ElectrodeRegion:
    role: str
    rect: tuple[float, float, float, float]
    potential: float

    def __post_init__(self):
        if self.role not in ROLES:
            raise GridError(f"unknown electrode role {self.role!r}; expected one of {ROLES}")
        rect = tuple(float(c) for c in self.rect)
        if len(rect) != 4:
            raise GridError("rect must be (x0, y0, x1, y1)")
        object.__setattr__(self, "rect", rect)
        x0, y0, x1, y1 = rect
        if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
            raise GridError(f"rect {rect} must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1")
        if not math.isfinite(self.potential):
            raise GridError(f"{self.role} potential must be finite")
        object.__setattr__(self, "potential", float(self.potential))


@dataclass(frozen=True)
class DeviceLayout:
    regions: tuple[ElectrodeRegion, ...] = ()
    shield_grounded: bool = True

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))

    def scaled(self, factor: float) -> "DeviceLayout":
        """Same geometry with every electrode potential multiplied by `factor`."""
        return DeviceLayout(
            tuple(ElectrodeRegion(r.role, r.rect, r.potential * factor) for r in self.regions),
            self.shield_grounded,
        )

    def with_potentials(self, **by_role: float) -> "DeviceLayout":
        regions = tuple(
            ElectrodeRegion(r.role, r.rect, by_role.get(r.role, r.potential)) for r in self.regions
        )
        return DeviceLayout(regions, self.shield_grounded)


CANONICAL_RECTS: dict[str, tuple[tuple[float, float, float, float], ...]] = {
    "source": ((0.05, 0.40, 0.15, 0.60),),
    "drain": ((0.85, 0.40, 0.95, 0.60),),
    "gate": ((0.45, 0.05, 0.55, 0.35), (0.45, 0.65, 0.55, 0.95)),
}


def canonical_layout(v_source=1.0, v_drain=-3.0, v_gate=3.0, shield_grounded=True) -> DeviceLayout:
    """Coplanar source/drain with a split gate mirrored about the source-drain axis."""
    potentials = {"source": v_source, "drain": v_drain, "gate": v_gate}
    regions = [
        ElectrodeRegion(role, rect, potentials[role])
        for role, rects in CANONICAL_RECTS.items()
        for rect in rects
    ]
    return DeviceLayout(tuple(regions), shield_grounded)


def _axis_range(lo: float, hi: float, n: int) -> tuple[int, int]:
    # node k is inside when lo <= k / n <= hi, evaluated exactly as written
    first = math.ceil(lo * n)
    while first > 0 and (first - 1) / n >= lo:
        first -= 1
    while first / n < lo:
        first += 1
    last = math.floor(hi * n)
    while last < n and (last + 1) / n <= hi:
        last += 1
    while last / n > hi:
        last -= 1
    if first > last:
        # thinner than a cell: claim the node line nearest the rect centre
        first = last = int(math.floor(0.5 * (lo + hi) * n + 0.5))
    return max(first, 0), min(last, n)


def region_slices(region: ElectrodeRegion, spec: GridSpec) -> tuple[slice, slice]:
    x0, y0, x1, y1 = region.rect
    i0, i1 = _axis_range(x0, x1, spec.n)
    j0, j1 = _axis_range(y0, y1, spec.n)
    return slice(i0, i1 + 1), slice(j0, j1 + 1)


def rasterize_region(region: ElectrodeRegion, spec: GridSpec) -> frozenset[tuple[int, int]]:
    """Node indices (i, j) covered by the region, boundary nodes included.

    A node belongs to the region when its normalized coordinates fall inside the
    rect. A rect thinner than one cell along an axis claims the node line nearest
    its centre, so the result is never empty.
    """
    si, sj = region_slices(region, spec)
    return frozenset(
        (i, j) for i in range(si.start, si.stop) for j in range(sj.start, sj.stop)
    )


@dataclass(frozen=True, eq=False)
class PotentialGrid:
    """Node potentials V[i, j] at (x_i, y_j) with a fixed-node mask.

    Arrays are indexed [i, j] (x index first) and stored read-only; sweeps
    return new grids.
    """

    spec: GridSpec
    values: np.ndarray
    fixed: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        fixed = np.array(self.fixed, dtype=bool)
        if values.shape != self.spec.shape or fixed.shape != self.spec.shape:
            raise GridError(
                f"values {values.shape} and mask {fixed.shape} must both be {self.spec.shape}"
            )
        if not (fixed[0, :].all() and fixed[-1, :].all() and fixed[:, 0].all() and fixed[:, -1].all()):
            raise FreeBoundaryNode(
                "perimeter nodes must be fixed: ground the shield or cover the edges with electrodes"
            )
        values.flags.writeable = False
        fixed.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "fixed", fixed)

    @property
    def free(self) -> np.ndarray:
        return ~self.fixed

    @property
    def n(self) -> int:
        return self.spec.n

    def replace(self, values: np.ndarray) -> "PotentialGrid":
        return PotentialGrid(self.spec, values, self.fixed)

    def fixed_range(self) -> tuple[float, float]:
        fixed_values = self.values[self.fixed]
        return float(fixed_values.min()), float(fixed_values.max())

    def fixed_scale(self) -> float:
        """max(1, largest |fixed potential|); the unit used by relative tolerances."""
        if not self.fixed.any():
            return 1.0
        return max(1.0, float(np.abs(self.values[self.fixed]).max()))

    @classmethod
    def from_boundary(
        cls, spec: GridSpec, func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ) -> "PotentialGrid":
        """Perimeter fixed to func(x, y), interior free at 0 V."""
        X, Y = np.meshgrid(spec.x(), spec.y(), indexing="ij")
        fixed = np.zeros(spec.shape, dtype=bool)
        fixed[0, :] = fixed[-1, :] = fixed[:, 0] = fixed[:, -1] = True
        values = np.where(fixed, func(X, Y), 0.0)
        return cls(spec, values, fixed)

    def __eq__(self, other):
        if not isinstance(other, PotentialGrid):
            return NotImplemented
        return (
            self.spec == other.spec
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.fixed, other.fixed)
        )

    __hash__ = None


def _claims(layout: DeviceLayout, spec: GridSpec) -> Iterable[tuple[str, float, tuple[slice, slice]]]:
    if layout.shield_grounded:
        n = spec.n
        for edge in (
            (slice(0, n + 1), slice(0, 1)),
            (slice(0, n + 1), slice(n, n + 1)),
            (slice(0, 1), slice(0, n + 1)),
            (slice(n, n + 1), slice(0, n + 1)),
        ):
            yield "shield", 0.0, edge
    for region in layout.regions:
        yield region.role, region.potential, region_slices(region, spec)


def build_grid(layout: DeviceLayout, spec: GridSpec) -> PotentialGrid:
    """Rasterize electrodes and the grounded shield into a PotentialGrid.

    Whole electrode domains (interior and boundary nodes) are fixed. Free nodes
    start at 0 V.
    """
    values = np.zeros(spec.shape)
    fixed = np.zeros(spec.shape, dtype=bool)
    owner = np.full(spec.shape, -1, dtype=np.int64)
    potentials: list[float] = []
    roles: list[str] = []

    for k, (role, potential, (si, sj)) in enumerate(_claims(layout, spec)):
        taken = fixed[si, sj] & (values[si, sj] != potential)
        if taken.any():
            ii, jj = np.argwhere(taken)[0]
            node = (si.start + int(ii), sj.start + int(jj))
            other = int(owner[node])
            raise OverlapConflict(
                f"{role} ({potential:g} V) and {roles[other]} ({potentials[other]:g} V) "
                f"both claim node {node}"
            )
        values[si, sj] = potential
        fixed[si, sj] = True
        owner[si, sj] = k
        potentials.append(potential)
        roles.append(role)

    if fixed.all():
        raise EmptyInterior("no free nodes remain after rasterizing the layout")
    return PotentialGrid(spec, values, fixed)

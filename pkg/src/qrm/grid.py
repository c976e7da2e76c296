"""Uniform structured grids on boxes and space-time cylinders."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

MIN_NODES = 5


class ConfigurationError(ValueError):
    """Raised when a grid, weight or problem description violates a precondition."""


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    n: int
    role: str = "space"  # "space" or "time"

    def __post_init__(self):
        if self.role not in ("space", "time"):
            raise ConfigurationError(f"axis {self.name!r}: role must be 'space' or 'time', got {self.role!r}")
        if int(self.n) != self.n or self.n < MIN_NODES:
            raise ConfigurationError(
                f"axis {self.name!r}: needs at least {MIN_NODES} nodes, got {self.n}"
            )
        if not self.hi > self.lo:
            raise ConfigurationError(f"axis {self.name!r}: max ({self.hi}) must exceed min ({self.lo})")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def coords(self) -> np.ndarray:
        # endpoints pinned exactly; interior by index * spacing
        c = self.lo + np.arange(self.n) * self.spacing
        c[-1] = self.hi
        return c


@dataclass(frozen=True, eq=False)
class Grid:
    axes: tuple[Axis, ...]

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate axis names: {names}")
        if sum(a.role == "time" for a in self.axes) > 1:
            raise ConfigurationError("at most one time axis is allowed")
        if not self.axes:
            raise ConfigurationError("a grid needs at least one axis")

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(a.spacing for a in self.axes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def time_axis(self) -> int | None:
        for i, a in enumerate(self.axes):
            if a.role == "time":
                return i
        return None

    @property
    def space_axes(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.axes) if a.role == "space")

    def axis_index(self, name: str) -> int:
        return self.names.index(name)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*(a.coords for a in self.axes), indexing="ij"))

    def coords(self) -> dict[str, np.ndarray]:
        """Node coordinates keyed by axis name, each shaped like the grid."""
        return dict(zip(self.names, self.mesh))

    @cached_property
    def weights(self) -> np.ndarray:
        """Dual-cell volume of every node (trapezoidal: halved on each boundary face)."""
        w = np.ones(self.shape)
        for d, a in enumerate(self.axes):
            w1 = np.full(a.n, a.spacing)
            w1[0] *= 0.5
            w1[-1] *= 0.5
            shape = [1] * self.ndim
            shape[d] = a.n
            w = w * w1.reshape(shape)
        return w

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def ravel(self, multi_index) -> np.ndarray:
        return np.ravel_multi_index(multi_index, self.shape)

    def unravel(self, linear) -> tuple[np.ndarray, ...]:
        return np.unravel_index(linear, self.shape)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        for d in range(self.ndim):
            idx = [slice(None)] * self.ndim
            idx[d] = 0
            m[tuple(idx)] = True
            idx[d] = -1
            m[tuple(idx)] = True
        return m

    def sub_grid(self, keep: Sequence[int]) -> "Grid":
        return Grid(tuple(self.axes[i] for i in keep))

    def describe(self) -> list[dict]:
        return [dict(name=a.name, min=a.lo, max=a.hi, n=a.n, role=a.role) for a in self.axes]


def build_grid(spec: Sequence[dict | Axis]) -> Grid:
    """Build a grid from axis descriptors (dicts with name/min/max/n[/role] or Axis)."""
    axes = []
    for i, s in enumerate(spec):
        if isinstance(s, Axis):
            axes.append(s)
            continue
        try:
            axes.append(
                Axis(
                    name=s.get("name", f"x{i + 1}"),
                    lo=float(s["min"]),
                    hi=float(s["max"]),
                    n=int(s["n"]),
                    role=s.get("role", "space"),
                )
            )
        except KeyError as exc:
            raise ConfigurationError(f"axis {i}: missing field {exc.args[0]!r}") from None
    return Grid(tuple(axes))


class Tag(enum.IntEnum):
    INTERIOR = 0
    ACCESSIBLE = 1
    INACCESSIBLE = 2
    INITIAL = 3
    FINAL = 4


@dataclass(frozen=True, eq=False)
class BoundaryClassification:
    grid: Grid
    tags: np.ndarray  # Tag per node, INTERIOR off the boundary
    normal_axis: np.ndarray  # -1 for interior nodes
    normal_sign: np.ndarray  # +1 outward along increasing coordinate, -1 decreasing, 0 interior
    faces: dict = field(default_factory=dict)  # (axis, side) -> accessible nodes whose normal is that face

    @property
    def accessible(self) -> np.ndarray:
        return self.tags == Tag.ACCESSIBLE

    def count(self, tag: Tag) -> int:
        return int(np.count_nonzero(self.tags == tag))

    def accessible_faces(self) -> list[tuple[int, int]]:
        return [k for k, m in self.faces.items() if m.any()]


def classify_boundary(grid: Grid, accessible: Callable[..., np.ndarray]) -> BoundaryClassification:
    """Tag boundary nodes.

    ``accessible`` receives node coordinates as keyword arrays (one per axis name)
    and returns a boolean array. Accessible tagging wins over the time planes;
    remaining nodes on t=min / t=max become initial / final, the rest inaccessible.
    A node on several faces takes its normal from the first spatial face it lies on
    (time faces last).
    """
    coords = grid.coords()
    bnd = grid.boundary_mask
    acc = np.asarray(accessible(**coords), dtype=bool)
    acc = np.broadcast_to(acc, grid.shape) & bnd

    tags = np.full(grid.shape, Tag.INTERIOR, dtype=np.int8)
    tags[bnd] = Tag.INACCESSIBLE
    t_ax = grid.time_axis
    if t_ax is not None:
        idx = [slice(None)] * grid.ndim
        idx[t_ax] = -1
        tags[tuple(idx)] = Tag.FINAL
        idx[t_ax] = 0
        tags[tuple(idx)] = Tag.INITIAL
    tags[acc] = Tag.ACCESSIBLE

    normal_axis = np.full(grid.shape, -1, dtype=np.int8)
    normal_sign = np.zeros(grid.shape, dtype=np.int8)
    order = list(grid.space_axes) + ([t_ax] if t_ax is not None else [])
    faces = {}
    for d in reversed(order):  # earlier axes overwrite later ones
        for side, pos in ((-1, 0), (1, -1)):
            idx = [slice(None)] * grid.ndim
            idx[d] = pos
            idx = tuple(idx)
            normal_axis[idx] = d
            normal_sign[idx] = side
    for d in order:
        for side in (-1, 1):
            faces[(d, side)] = acc & (normal_axis == d) & (normal_sign == side)
    return BoundaryClassification(grid, tags, normal_axis, normal_sign, faces)

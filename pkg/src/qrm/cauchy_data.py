"""Cauchy data on boundary faces, the cutoff-based extension F and calibrated noise."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from . import expressions
from .fields import ScalarField, discrete_norm
from .grid import BoundaryClassification, ConfigurationError, Grid, Tag

NOISE_MODES = 8


@dataclass(frozen=True)
class Cutoff:
    """C^2 cutoff: 1 for s <= lo, 0 for s >= hi, quintic smoothstep between."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError(f"cutoff needs lo < hi, got lo={self.lo}, hi={self.hi}")

    def _tau(self, s):
        return np.clip((np.asarray(s, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def __call__(self, s):
        t = self._tau(s)
        # two algebraically equal forms, each free of cancellation near its own end
        out = np.where(t < 0.5, 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t), (1.0 - t) ** 3 * (1.0 + 3.0 * t + 6.0 * t * t))
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, s, order: int = 1):
        t = self._tau(s)
        L = self.hi - self.lo
        if order == 1:
            out = -30.0 * t**2 * (1.0 - t) ** 2 / L
        elif order == 2:
            out = -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / L**2
        else:
            raise ValueError("order must be 1 or 2")
        return float(out) if np.ndim(out) == 0 else out


def cutoff_1d(lo: float, hi: float) -> Cutoff:
    return Cutoff(float(lo), float(hi))


@dataclass(frozen=True, eq=False)
class CauchyData:
    """Prescribed values on boundary nodes.

    ``g0`` is the Dirichlet trace on ``dirichlet`` nodes, ``g1`` the outward
    normal derivative on ``neumann`` nodes (a subset of the Dirichlet nodes).
    Both are stored as full-grid arrays that are zero off their masks.
    """

    bc: BoundaryClassification
    dirichlet: np.ndarray
    g0: np.ndarray
    neumann: np.ndarray
    g1: np.ndarray
    f: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = self.bc.grid.shape
        for name in ("dirichlet", "neumann"):
            object.__setattr__(self, name, np.broadcast_to(np.asarray(getattr(self, name), bool), shape).copy())
        for name in ("g0", "g1", "f"):
            v = np.broadcast_to(np.asarray(getattr(self, name), float), shape).copy()
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, v)
        self.g0[~self.dirichlet] = 0.0
        self.g1[~self.neumann] = 0.0
        if (self.neumann & ~self.dirichlet).any():
            raise ConfigurationError("normal-derivative data given on nodes without Dirichlet data")
        if (self.dirichlet & ~self.bc.grid.boundary_mask).any():
            raise ConfigurationError("Dirichlet data given on interior nodes")

    @property
    def grid(self) -> Grid:
        return self.bc.grid

    @classmethod
    def from_functions(
        cls,
        bc: BoundaryClassification,
        g0,
        g1=None,
        f=None,
        dirichlet_tags: Iterable[Tag] = (Tag.ACCESSIBLE,),
        meta: dict | None = None,
    ) -> "CauchyData":
        """Sample traces given as expressions, callables, constants or full-grid arrays."""
        grid = bc.grid
        dmask = np.isin(bc.tags, [int(t) for t in dirichlet_tags])
        nmask = bc.accessible.copy() if g1 is not None else np.zeros(grid.shape, bool)
        return cls(
            bc,
            dmask,
            _sample(g0, grid),
            nmask,
            _sample(g1, grid) if g1 is not None else 0.0,
            _sample(f, grid) if f is not None else 0.0,
            dict(meta or {}),
        )

    def faces(self, mask: np.ndarray | None = None) -> dict[tuple[int, int], np.ndarray]:
        """Split ``mask`` (default: Dirichlet nodes) by the face that owns each node's normal."""
        mask = self.dirichlet if mask is None else mask
        out = {}
        for d in range(self.grid.ndim):
            for side in (-1, 1):
                m = mask & (self.bc.normal_axis == d) & (self.bc.normal_sign == side)
                if m.any():
                    out[(d, side)] = m
        return out


def _sample(value, grid: Grid) -> np.ndarray:
    if isinstance(value, ScalarField):
        return value.values
    if isinstance(value, np.ndarray):
        return np.broadcast_to(value, grid.shape).astype(float)
    if callable(value):
        return np.broadcast_to(np.asarray(value(**grid.coords()), float), grid.shape).copy()
    return expressions.evaluate(value, grid.coords())


# ----------------------------------------------------------------------------- extension


@dataclass(frozen=True, eq=False)
class ExtensionField:
    field: ScalarField
    construction: str
    sigma: dict


def _face_index(ndim: int, axis: int, side: int):
    idx = [slice(None)] * ndim
    idx[axis] = 0 if side < 0 else -1
    return tuple(idx)


def build_extension(data: CauchyData, sigma: float | dict | None = None) -> ExtensionField:
    """F = sum over data faces of rho(d) (g0 - d g1), d = inward distance from the face.

    ``sigma`` is the cutoff scale (rho = 1 for d <= sigma, 0 for d >= 2 sigma),
    either one number or a per-axis mapping; default a quarter of the axis extent.
    Dirichlet nodes are then overwritten with g0 so the trace is exact.
    """
    grid = data.grid
    F = np.zeros(grid.shape)
    used = {}
    for (axis, side), _ in sorted(data.faces().items()):
        ax = grid.axes[axis]
        extent = ax.hi - ax.lo
        s = sigma.get(axis, sigma.get(ax.name)) if isinstance(sigma, dict) else sigma
        s = extent / 4 if s is None else float(s)
        if not 0 < s < extent / 2:
            raise ConfigurationError(f"sigma = {s} must lie in (0, {extent / 2:.6g}) on axis {ax.name!r}")
        if s < 2 * ax.spacing:
            raise ConfigurationError(f"sigma = {s} is narrower than two grid layers on axis {ax.name!r}")
        used[ax.name] = s
        rho = cutoff_1d(s, 2 * s)
        coord = grid.mesh[axis]
        dist = coord - ax.lo if side < 0 else ax.hi - coord
        fidx = _face_index(grid.ndim, axis, side)
        g0_face = np.where(data.dirichlet[fidx], data.g0[fidx], 0.0)
        own = (data.bc.normal_axis[fidx] == axis) & (data.bc.normal_sign[fidx] == side)
        g1_face = np.where(data.neumann[fidx] & own, data.g1[fidx], 0.0)
        g0_b = np.expand_dims(g0_face, axis)
        g1_b = np.expand_dims(g1_face, axis)
        F = F + rho(dist) * (g0_b - dist * g1_b)
    F[data.dirichlet] = data.g0[data.dirichlet]
    return ExtensionField(ScalarField(grid, F), "cutoff-normal", used)


# ----------------------------------------------------------------------------- noise


def _modal_field(rng: np.random.Generator, grid: Grid, modes: int) -> np.ndarray:
    """Random combination of low cosine modes (total mode index below ``modes``)."""
    coords = [(a.coords - a.lo) / (a.hi - a.lo) for a in grid.axes]
    out = np.zeros(grid.shape)
    ks = [k for k in np.ndindex(*([modes] * grid.ndim)) if sum(k) < modes]
    coef = rng.standard_normal(len(ks))
    for c, k in zip(coef, ks):
        term = np.ones(grid.shape)
        for d, kd in enumerate(k):
            shape = [1] * grid.ndim
            shape[d] = -1
            term = term * np.cos(np.pi * kd * coords[d]).reshape(shape)
        out += c * term
    return out


def _trace_perturbation(rng, data: CauchyData, mask: np.ndarray, order: str, modes: int):
    """Smooth perturbation on the nodes of ``mask`` and its discrete norm over the faces."""
    grid = data.grid
    pert = np.zeros(grid.shape)
    sq = 0.0
    for (axis, side), m in sorted(data.faces(mask).items()):
        fidx = _face_index(grid.ndim, axis, side)
        face_mask = m[fidx]
        keep = [i for i in range(grid.ndim) if i != axis]
        if not keep:
            v = rng.choice([-1.0, 1.0])
            pert[fidx] = v
            sq += 1.0
            continue
        fgrid = grid.sub_grid(keep)
        vals = _modal_field(rng, fgrid, modes) * face_mask
        sq += discrete_norm(ScalarField(fgrid, vals), order) ** 2
        pert[fidx] = np.where(face_mask, vals, pert[fidx])
    return pert, float(np.sqrt(sq))


def trace_norm(data: CauchyData, values: np.ndarray, mask: np.ndarray, order: str) -> float:
    """Discrete norm of a trace over the faces of ``mask`` (the one used to calibrate noise)."""
    grid = data.grid
    sq = 0.0
    for (axis, side), m in sorted(data.faces(mask).items()):
        fidx = _face_index(grid.ndim, axis, side)
        keep = [i for i in range(grid.ndim) if i != axis]
        v = np.where(m[fidx], values[fidx], 0.0)
        if not keep:
            sq += float(np.sum(v**2))
            continue
        sq += discrete_norm(ScalarField(grid.sub_grid(keep), v), order) ** 2
    return float(np.sqrt(sq))


def add_noise(
    data: CauchyData, delta: float, seed: int, *, modes: int = NOISE_MODES, perturb_f: bool = True
) -> CauchyData:
    """Perturb g0 (H1 over the data faces), g1 and f (L2) by exactly ``delta`` each."""
    if delta < 0:
        raise ValueError(f"noise level must be nonnegative, got {delta}")
    if delta == 0:
        return data
    rng = np.random.default_rng(seed)
    g0, g1, f = data.g0.copy(), data.g1.copy(), data.f.copy()
    p, nrm = _trace_perturbation(rng, data, data.dirichlet, "H1", modes)
    if nrm > 0:
        g0 = g0 + (delta / nrm) * p
    if data.neumann.any():
        p, nrm = _trace_perturbation(rng, data, data.neumann, "L2", modes)
        if nrm > 0:
            g1 = g1 + (delta / nrm) * p
    if perturb_f:
        p = _modal_field(rng, data.grid, modes)
        nrm = discrete_norm(ScalarField(data.grid, p), "L2")
        f = f + (delta / nrm) * p
    meta = {**data.meta, "noise_delta": float(delta), "noise_seed": int(seed)}
    return replace(data, g0=g0, g1=g1, f=f, meta=meta)

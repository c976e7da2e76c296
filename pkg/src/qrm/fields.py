"""Scalar fields, second-order finite-difference PDE operators and discrete Sobolev norms.

All operators are assembled as sparse matrices acting on lexicographically
flattened node values, so ``apply_operator`` and the solver share one stencil
definition. Interior rows are centered; the first/last node of every axis uses
second-order one-sided differences. The optional ``mirror_time`` closure
replaces the one-sided rows at t = t_min by the even reflection u(-h) = u(h).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from . import expressions
from .grid import Grid

KINDS = ("elliptic", "parabolic", "reversed-parabolic", "hyperbolic")
NORM_ORDERS = ("L2", "H1", "H2")

CoefficientValue = Union[float, str, np.ndarray, Callable[..., np.ndarray]]


class GridKindMismatch(ValueError):
    pass


class DegenerateCoefficientsError(ValueError):
    pass


class EmptyMaskError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise ValueError(f"field has {v.size} values, grid has {self.grid.size} nodes")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray] | str | float) -> "ScalarField":
        coords = grid.coords()
        if callable(fn):
            vals = np.broadcast_to(np.asarray(fn(**coords), dtype=float), grid.shape)
        else:
            vals = expressions.evaluate(fn, coords)
        return cls(grid, np.array(vals))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other))

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * _vals(c))

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, ScalarField) else x


def resolve(value: CoefficientValue, grid: Grid) -> np.ndarray:
    """Turn a constant, expression, callable or array into a per-node array."""
    if isinstance(value, ScalarField):
        return value.values
    if isinstance(value, np.ndarray):
        return np.broadcast_to(value, grid.shape).astype(float)
    if callable(value):
        return np.broadcast_to(np.asarray(value(**grid.coords()), dtype=float), grid.shape).copy()
    return expressions.evaluate(value, grid.coords())


@dataclass(eq=False)
class CoefficientSet:
    """Coefficients of a second-order operator.

    ``principal[i][j]`` multiplies u_{x_i x_j} over the spatial axes (defaults to
    the identity), ``drift[j]`` multiplies u_{x_j}, ``b0`` multiplies u and ``a``
    multiplies u_tt for the hyperbolic kind.
    """

    kind: str
    principal: Sequence[Sequence[CoefficientValue]] | None = None
    drift: Sequence[CoefficientValue] | None = None
    b0: CoefficientValue = 0.0
    a: CoefficientValue = 1.0
    a_bounds: tuple[float, float] | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}; expected one of {KINDS}")

    def resolved(self, grid: Grid) -> dict:
        key = id(grid)
        if key in self._cache:
            return self._cache[key]
        ns = len(grid.space_axes)
        if self.principal is None:
            principal = [[1.0 if i == j else 0.0 for j in range(ns)] for i in range(ns)]
        else:
            principal = self.principal
        if len(principal) != ns or any(len(row) != ns for row in principal):
            raise GridKindMismatch(f"principal part must be {ns}x{ns} for this grid")
        drift = self.drift if self.drift is not None else [0.0] * ns
        if len(drift) != ns:
            raise GridKindMismatch(f"need {ns} first-order coefficients, got {len(drift)}")
        out = dict(
            principal=[[resolve(principal[i][j], grid) for j in range(ns)] for i in range(ns)],
            drift=[resolve(b, grid) for b in drift],
            b0=resolve(self.b0, grid),
            a=resolve(self.a, grid),
        )
        for i in range(ns):
            for j in range(i):
                if not np.allclose(out["principal"][i][j], out["principal"][j][i], rtol=0, atol=1e-14):
                    raise DegenerateCoefficientsError(f"principal part not symmetric at ({i},{j})")
        if self.kind == "hyperbolic" and self.a_bounds is not None:
            lo, hi = self.a_bounds
            if out["a"].min() < lo or out["a"].max() > hi:
                raise DegenerateCoefficientsError(
                    f"a(x) leaves [{lo}, {hi}]: range [{out['a'].min()}, {out['a'].max()}]"
                )
        self._cache[key] = out
        return out


def laplacian(kind: str = "elliptic", **kw) -> CoefficientSet:
    return CoefficientSet(kind, **kw)


# ----------------------------------------------------------------------------- stencils


def diff_matrix_1d(n: int, h: float, order: int, lo: str = "one-sided") -> sp.csr_matrix:
    """Second-order accurate 1-D derivative matrix (order 1 or 2)."""
    if n < 4:
        raise ValueError("need at least 4 nodes for one-sided second-order stencils")
    rows, cols, vals = [], [], []

    def put(i, js, ws):
        rows.extend([i] * len(js))
        cols.extend(js)
        vals.extend(ws)

    if order == 1:
        for i in range(1, n - 1):
            put(i, [i - 1, i + 1], [-0.5 / h, 0.5 / h])
        put(n - 1, [n - 1, n - 2, n - 3], [1.5 / h, -2.0 / h, 0.5 / h])
        if lo == "mirror":
            pass  # u_t(0) = 0 under even reflection
        else:
            put(0, [0, 1, 2], [-1.5 / h, 2.0 / h, -0.5 / h])
    elif order == 2:
        h2 = h * h
        for i in range(1, n - 1):
            put(i, [i - 1, i, i + 1], [1 / h2, -2 / h2, 1 / h2])
        put(n - 1, [n - 1, n - 2, n - 3, n - 4], [2 / h2, -5 / h2, 4 / h2, -1 / h2])
        if lo == "mirror":
            put(0, [0, 1], [-2 / h2, 2 / h2])
        else:
            put(0, [0, 1, 2, 3], [2 / h2, -5 / h2, 4 / h2, -1 / h2])
    else:
        raise ValueError("order must be 1 or 2")
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def axis_derivative(grid: Grid, axis: int, order: int, mirror_time: bool = False) -> sp.csr_matrix:
    """Derivative along one axis acting on flattened fields."""
    mats = []
    for d, ax in enumerate(grid.axes):
        if d == axis:
            lo = "mirror" if (mirror_time and d == grid.time_axis) else "one-sided"
            mats.append(diff_matrix_1d(ax.n, ax.spacing, order, lo))
        else:
            mats.append(sp.identity(ax.n, format="csr"))
    return reduce(lambda A, B: sp.kron(A, B, format="csr"), mats)


def mixed_derivative(grid: Grid, i: int, j: int, mirror_time: bool = False) -> sp.csr_matrix:
    """u_{x_i x_j} for i != j; the centered product is the 4-point cross stencil."""
    return (axis_derivative(grid, i, 1, mirror_time) @ axis_derivative(grid, j, 1, mirror_time)).tocsr()


def second_derivative(grid: Grid, i: int, j: int, mirror_time: bool = False) -> sp.csr_matrix:
    if i == j:
        return axis_derivative(grid, i, 2, mirror_time)
    return mixed_derivative(grid, i, j, mirror_time)


def _check_kind(kind: str, grid: Grid) -> None:
    has_time = grid.time_axis is not None
    if kind == "elliptic" and has_time:
        raise GridKindMismatch("elliptic operator on a grid with a time axis")
    if kind != "elliptic" and not has_time:
        raise GridKindMismatch(f"{kind} operator needs a time axis")
    if not grid.space_axes:
        raise GridKindMismatch("grid has no spatial axis")


def operator_matrix(
    coeffs: CoefficientSet, grid: Grid, *, principal_only: bool = False, mirror_time: bool = False
) -> sp.csr_matrix:
    """Sparse matrix of the PDE operator declared by ``coeffs.kind``."""
    _check_kind(coeffs.kind, grid)
    c = coeffs.resolved(grid)
    sa = grid.space_axes
    N = grid.size
    diag = lambda arr: sp.diags(np.ravel(arr))  # noqa: E731

    L = sp.csr_matrix((N, N))
    for p, i in enumerate(sa):
        for q, j in enumerate(sa):
            if q < p:
                continue
            coef = c["principal"][p][q]
            if not np.any(coef):
                continue
            mult = 1.0 if p == q else 2.0
            L = L + diag(mult * coef) @ second_derivative(grid, i, j, mirror_time)
    if not principal_only:
        for p, i in enumerate(sa):
            if np.any(c["drift"][p]):
                L = L + diag(c["drift"][p]) @ axis_derivative(grid, i, 1, mirror_time)
        if np.any(c["b0"]):
            L = L + diag(c["b0"])

    kind = coeffs.kind
    if kind == "elliptic":
        A = L
    else:
        t = grid.time_axis
        if kind == "parabolic":
            A = axis_derivative(grid, t, 1, mirror_time) - L
        elif kind == "reversed-parabolic":
            A = axis_derivative(grid, t, 1, mirror_time) + L
        else:
            A = diag(c["a"]) @ axis_derivative(grid, t, 2, mirror_time) - L
    return sp.csr_matrix(A)


def apply_operator(
    coeffs: CoefficientSet, u: ScalarField, *, principal_only: bool = False, mirror_time: bool = False
) -> ScalarField:
    A = operator_matrix(coeffs, u.grid, principal_only=principal_only, mirror_time=mirror_time)
    return ScalarField(u.grid, A @ u.flat)


def validate_ellipticity(coeffs: CoefficientSet, grid: Grid, directions: int = 64) -> tuple[float, float]:
    """Tightest (mu1, mu2) over nodes and sampled unit directions of the principal form."""
    c = coeffs.resolved(grid)
    ns = len(grid.space_axes)
    if ns == 1:
        dirs = np.ones((1, 1))
    elif ns == 2:
        th = np.pi * np.arange(directions) / directions
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        rng = np.random.default_rng(0)
        d = rng.standard_normal((directions, ns))
        dirs = np.vstack([np.eye(ns), d / np.linalg.norm(d, axis=1, keepdims=True)])
    mats = np.stack([np.stack([np.ravel(c["principal"][i][j]) for j in range(ns)], -1) for i in range(ns)], -2)
    q = np.einsum("ki,nij,kj->nk", dirs, mats, dirs)
    mu1, mu2 = float(q.min()), float(q.max())
    if mu1 <= 0:
        raise DegenerateCoefficientsError(f"principal form not positive definite (min {mu1:g})")
    return mu1, mu2


# ----------------------------------------------------------------------------- norms


def norm_components(
    grid: Grid, order: str, mirror_time: bool = False, axes: Sequence[int] | None = None
) -> list[tuple[str, sp.csr_matrix]]:
    """Operators whose weighted squares sum to the squared norm of the given order.

    ``axes`` restricts the derivatives to a subset of axes (all axes by default).
    """
    if order not in NORM_ORDERS:
        raise ValueError(f"norm order must be one of {NORM_ORDERS}")
    axes = tuple(range(grid.ndim)) if axes is None else tuple(axes)
    names = grid.names
    comps = [("u", sp.identity(grid.size, format="csr"))]
    if order in ("H1", "H2"):
        comps += [(f"d{names[d]}", axis_derivative(grid, d, 1, mirror_time)) for d in axes]
    if order == "H2":
        for p, i in enumerate(axes):
            for j in axes[p:]:
                comps.append((f"d{names[i]}{names[j]}", second_derivative(grid, i, j, mirror_time)))
    return comps


def effective_mask(
    grid: Grid, mask: np.ndarray, order: str, mirror_time: bool = False, axes: Sequence[int] | None = None
) -> np.ndarray:
    """Shrink ``mask`` to nodes whose derivative stencils stay inside it."""
    mask = np.asarray(mask, dtype=bool).reshape(grid.shape)
    if order == "L2":
        return mask.copy()
    flat = mask.ravel()
    keep = flat.copy()
    for _, D in norm_components(grid, order, mirror_time, axes)[1:]:
        D = D.tocsr()
        outside = (~flat).astype(float)
        touches = (abs(D) @ outside) > 0
        keep &= ~touches
    return keep.reshape(grid.shape)


@dataclass(frozen=True)
class NormResult:
    value: float
    nodes: int


def norm_with_count(
    u: ScalarField,
    order: str = "L2",
    mask: np.ndarray | None = None,
    *,
    mirror_time: bool = False,
    axes: Sequence[int] | None = None,
) -> NormResult:
    grid = u.grid
    if mask is None:
        m = np.ones(grid.shape, dtype=bool)
    else:
        m = effective_mask(grid, mask, order, mirror_time, axes)
    count = int(np.count_nonzero(m))
    if count == 0:
        raise EmptyMaskError(f"no nodes left in the mask for the {order} norm")
    w = (grid.weights * m).ravel()
    total = 0.0
    for _, D in norm_components(grid, order, mirror_time, axes):
        g = D @ u.flat
        total += float(np.sum(w * g * g))
    return NormResult(float(np.sqrt(total)), count)


def discrete_norm(
    u: ScalarField,
    order: str = "L2",
    mask: np.ndarray | None = None,
    *,
    mirror_time: bool = False,
    axes: Sequence[int] | None = None,
) -> float:
    return norm_with_count(u, order, mask, mirror_time=mirror_time, axes=axes).value

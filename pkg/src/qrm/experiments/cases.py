"""Manufactured cases: closed-form exact solutions with consistent Cauchy data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..carleman import CarlemanWeight, SubdomainMasks, build_masks
from ..cauchy_data import CauchyData, add_noise, build_extension
from ..fields import CoefficientSet, ScalarField, operator_matrix
from ..grid import Axis, BoundaryClassification, Grid, Tag, classify_boundary
from ..solver import CauchyProblem


@dataclass(eq=False)
class ManufacturedCase:
    """An exact solution u* with everything needed to pose its Cauchy problem.

    ``gradient`` returns the partial derivatives of u* per grid axis (used for the
    Neumann trace along each node's outward normal). ``data_override`` may replace
    the sampled Dirichlet values (e.g. with forward-solver output).
    """

    name: str
    axes: tuple[Axis, ...]
    coeffs: CoefficientSet
    exact: Callable[..., np.ndarray]
    gradient: Callable[..., tuple]
    accessible: Callable[..., np.ndarray]
    weight: CarlemanWeight
    eps: float
    rhs: Callable[..., np.ndarray] | None = None
    neumann: bool = True
    dirichlet_tags: tuple[Tag, ...] = (Tag.ACCESSIBLE,)
    mirror_time: bool = False
    sigma: float | dict | None = None
    designated: str = "error_h1_subdomain"
    data_override: Callable[[Grid], np.ndarray] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.coeffs.kind

    def grid(self) -> Grid:
        return Grid(self.axes)

    def setup(self) -> "CaseSetup":
        grid = self.grid()
        bc = classify_boundary(grid, self.accessible)
        coords = grid.coords()
        u = np.broadcast_to(np.asarray(self.exact(**coords), float), grid.shape).copy()
        grads = [np.broadcast_to(np.asarray(gd, float), grid.shape) for gd in self.gradient(**coords)]
        g1 = np.zeros(grid.shape)
        nb = bc.normal_axis >= 0
        for d in range(grid.ndim):
            sel = nb & (bc.normal_axis == d)
            g1[sel] = bc.normal_sign[sel] * grads[d][sel]
        f = np.zeros(grid.shape) if self.rhs is None else np.broadcast_to(self.rhs(**coords), grid.shape).copy()
        g0 = self.data_override(grid) if self.data_override is not None else u
        data = CauchyData.from_functions(
            bc,
            g0,
            g1 if self.neumann else None,
            f,
            dirichlet_tags=self.dirichlet_tags,
            meta={"case": self.name},
        )
        masks = build_masks(self.weight, grid, bc, eps=self.eps)
        return CaseSetup(self, grid, bc, data, masks, ScalarField(grid, u))

    def stencil_floor(self) -> float:
        """L2 norm of the stencil residual A u* - f* on the case grid."""
        s = self.setup()
        A = operator_matrix(self.coeffs, s.grid, mirror_time=self.mirror_time)
        r = A @ s.exact.flat - s.data.f.ravel()
        return float(np.sqrt(np.sum(s.grid.weights.ravel() * r * r)))


@dataclass(eq=False)
class CaseSetup:
    case: ManufacturedCase
    grid: Grid
    bc: BoundaryClassification
    data: CauchyData
    masks: SubdomainMasks
    exact: ScalarField

    def problem(self, delta: float = 0.0, seed: int = 0) -> CauchyProblem:
        data = add_noise(self.data, delta, seed) if delta > 0 else self.data
        ext = build_extension(data, self.case.sigma)
        return CauchyProblem(
            data,
            self.case.coeffs,
            ext.field,
            self.masks,
            mirror_time=self.case.mirror_time,
            label=self.case.name,
            meta={"designated": self.case.designated, **self.case.meta},
        )


# ----------------------------------------------------------------------------- library


def _on(value, tol=1e-12):
    return lambda arr: np.abs(arr - value) <= tol


def elliptic_exp(n1: int = 51, n2: int = 101) -> ManufacturedCase:
    """u* = exp(x1) cos(x2), harmonic; data on x1 = 0."""
    return ManufacturedCase(
        name="elliptic-exp",
        axes=(Axis("x1", 0.0, 0.5, n1), Axis("x2", -0.5, 0.5, n2)),
        coeffs=CoefficientSet("elliptic"),
        exact=lambda x1, x2: np.exp(x1) * np.cos(x2),
        gradient=lambda x1, x2: (np.exp(x1) * np.cos(x2), -np.exp(x1) * np.sin(x2)),
        accessible=lambda x1, x2: _on(0.0)(x1),
        weight=CarlemanWeight("elliptic", a=0.1, c=0.6, X=0.5, nu=3.0),
        eps=0.05,
        sigma={"x1": 0.125},
    )


def elliptic_quadratic(n1: int = 51, n2: int = 101) -> ManufacturedCase:
    """u* = x1^2 - x2^2, harmonic; data on x1 = 0."""
    c = elliptic_exp(n1, n2)
    c.name = "elliptic-quadratic"
    c.exact = lambda x1, x2: x1**2 - x2**2
    c.gradient = lambda x1, x2: (2 * x1, -2 * x2)
    return c


def parabolic_lateral(nx: int = 41, nt: int = 61, T: float = 0.5) -> ManufacturedCase:
    """u* = exp(-t) sin(x) solves u_t - u_xx = 0; lateral data on x = 0, t in (-T, T)."""
    return ManufacturedCase(
        name="parabolic-lateral",
        axes=(Axis("x", 0.0, 1.0, nx), Axis("t", -T, T, nt, "time")),
        coeffs=CoefficientSet("parabolic"),
        exact=lambda x, t: np.exp(-t) * np.sin(x),
        gradient=lambda x, t: (np.exp(-t) * np.cos(x), -np.exp(-t) * np.sin(x)),
        accessible=lambda x, t: _on(0.0)(x),
        weight=CarlemanWeight("parabolic-lateral", a=0.1, c=0.6, X=1.0, nu=3.0, T=T),
        eps=0.05,
        sigma={"x": 0.25},
    )


def backward_heat(
    nx: int = 61,
    nt: int = 21,
    T: float = 0.05,
    modes: tuple[tuple[int, float], ...] = ((1, 1.0), (2, 0.3)),
    eps: float = 0.02,
    synthesize: bool = True,
) -> ManufacturedCase:
    """u_t + u_xx = 0 on (0, pi) x (0, T) with u(., T) = sum r_n sin(n x).

    Data: u(., 0) and zero lateral values. With ``synthesize`` the initial slice is
    produced by the forward heat solver run on the reversed time axis.
    """

    def exact(x, t):
        return sum(r * np.exp(n * n * (t - T)) * np.sin(n * x) for n, r in modes)

    def grad(x, t):
        ux = sum(r * n * np.exp(n * n * (t - T)) * np.cos(n * x) for n, r in modes)
        ut = sum(r * n * n * np.exp(n * n * (t - T)) * np.sin(n * x) for n, r in modes)
        return ux, ut

    def synthesized(grid: Grid) -> np.ndarray:
        from .forward import forward_heat

        xa = grid.axes[0]
        fine = Grid((xa, Axis("s", 0.0, T, 401, "time")))
        u_T = lambda x: sum(r * np.sin(n * x) for n, r in modes)  # noqa: E731
        w = forward_heat(CoefficientSet("parabolic"), u_T, 0.0, fine, scheme="crank-nicolson", substeps=4)
        out = np.broadcast_to(exact(*grid.mesh), grid.shape).copy()
        out[:, 0] = w.values[:, -1]  # w(s = T) = u(t = 0)
        return out

    return ManufacturedCase(
        name="backward-heat",
        axes=(Axis("x", 0.0, math.pi, nx), Axis("t", 0.0, T, nt, "time")),
        coeffs=CoefficientSet("reversed-parabolic"),
        exact=exact,
        gradient=grad,
        accessible=lambda x, t: _on(0.0)(x) | _on(math.pi)(x),
        weight=CarlemanWeight("reversed-time", lam=2.0, T=T),
        eps=eps,
        neumann=False,
        dirichlet_tags=(Tag.ACCESSIBLE, Tag.INITIAL),
        sigma={"x": math.pi / 8, "t": T / 4},
        designated="error_l2_final",
        data_override=synthesized if synthesize else None,
        meta={"constraints": "initial slice and lateral Dirichlet values"},
    )


def gaussian(center: float, width: float, amp: float = 1.0):
    return lambda s: amp * np.exp(-(((s - center) / width) ** 2))


def dgaussian(center: float, width: float, amp: float = 1.0):
    return lambda s: -2 * (s - center) / width**2 * amp * np.exp(-(((s - center) / width) ** 2))


def hyperbolic_bump(nx: int = 81, nt: int = 121, T: float = 1.5, width: float = 0.25) -> ManufacturedCase:
    """d'Alembert solution u* = (b(x - t) + b(x + t))/2 of u_tt - u_xx = 0 on (-1, 1) x (-T, T)."""
    b, db = gaussian(0.0, width), dgaussian(0.0, width)
    return ManufacturedCase(
        name="hyperbolic-bump",
        axes=(Axis("x", -1.0, 1.0, nx), Axis("t", -T, T, nt, "time")),
        coeffs=CoefficientSet("hyperbolic", a_bounds=(1.0, 1.0)),
        exact=lambda x, t: 0.5 * (b(x - t) + b(x + t)),
        gradient=lambda x, t: (0.5 * (db(x - t) + db(x + t)), 0.5 * (-db(x - t) + db(x + t))),
        accessible=lambda x, t: _on(-1.0)(x) | _on(1.0)(x),
        weight=CarlemanWeight("hyperbolic", lam=1.0, eta=0.5, x0=(0.0,)),
        eps=0.01,
        sigma={"x": 0.25},
        designated="error_h1_cylinder",
    )


CASES = {
    "elliptic-exp": elliptic_exp,
    "elliptic-quadratic": elliptic_quadratic,
    "parabolic-lateral": parabolic_lateral,
    "backward-heat": backward_heat,
    "hyperbolic-bump": hyperbolic_bump,
}

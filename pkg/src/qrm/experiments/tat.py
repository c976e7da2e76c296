"""Thermoacoustic tomography in one dimension: recover u(., 0) from lateral traces."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..cauchy_data import CauchyData, add_noise, build_extension
from ..fields import CoefficientSet, ScalarField
from ..grid import Axis, Grid, classify_boundary
from ..solver import CauchyProblem, assemble, diagnostics, solve
from .forward import forward_wave


class TheoryHypothesisWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TatConfig:
    nx: int = 201
    nt: int = 151
    T: float = 1.5
    centers: tuple[float, ...] = (-0.3, 0.35)
    widths: tuple[float, ...] = (0.1, 0.08)
    amps: tuple[float, ...] = (1.0, 0.6)
    delta: float = 1e-2
    gamma: float | None = None  # defaults to delta^2
    seed: int = 0
    sigma: float = 0.25
    tol: float = 1e-10

    def phantom(self, x):
        x = np.asarray(x, float)
        return sum(a * np.exp(-(((x - c) / w) ** 2)) for c, w, a in zip(self.centers, self.widths, self.amps))


@dataclass(eq=False)
class TatResult:
    recovered: np.ndarray
    truth: np.ndarray
    x: np.ndarray
    errors: dict
    gamma: float
    iterations: int
    flags: dict = field(default_factory=dict)


def tat_grid(cfg: TatConfig) -> Grid:
    return Grid((Axis("x", -1.0, 1.0, cfg.nx), Axis("t", 0.0, cfg.T, cfg.nt, "time")))


def tat_data(cfg: TatConfig, traces: tuple[np.ndarray, np.ndarray] | None = None) -> CauchyData:
    """Exact lateral Dirichlet and Neumann data, from the forward solver unless ``traces`` given."""
    grid = tat_grid(cfg)
    bc = classify_boundary(grid, lambda x, t: (np.abs(x + 1) < 1e-12) | (np.abs(x - 1) < 1e-12))
    if traces is None:
        wave = forward_wave(1.0, cfg.phantom, grid)
        p, pbar = wave.p, wave.p_bar
    else:
        p, pbar = traces
    g0 = np.zeros(grid.shape)
    g1 = np.zeros(grid.shape)
    g0[0], g0[-1] = p[0], p[1]
    g1[0], g1[-1] = pbar[0], pbar[1]
    return CauchyData(bc, bc.accessible, g0, bc.accessible, g1, 0.0, {"case": "tat"})


def tat_reconstruct(cfg: TatConfig, traces=None) -> TatResult:
    """QRM with lateral Dirichlet + Neumann data and u_t(., 0) = 0 folded into the stencils."""
    flags = {}
    R = 1.0
    if cfg.T <= R:
        warnings.warn(f"T = {cfg.T} <= R = {R}: uniqueness hypotheses not met", TheoryHypothesisWarning)
        flags["T_le_R"] = True
    grid = tat_grid(cfg)
    data = tat_data(cfg, traces)
    if cfg.delta > 0:
        data = add_noise(data, cfg.delta, cfg.seed, perturb_f=False)
    gamma = cfg.gamma if cfg.gamma is not None else max(cfg.delta, 1e-5) ** 2
    ext = build_extension(data, {"x": cfg.sigma})
    prob = CauchyProblem(
        data,
        CoefficientSet("hyperbolic", a_bounds=(1.0, 1.0)),
        ext.field,
        mirror_time=True,
        label="tat",
        meta={"designated": "initial-slice"},
    )
    sol = solve(assemble(prob, gamma), cfg.tol)
    X, Tm = grid.mesh
    ref = ScalarField(grid, 0.5 * (cfg.phantom(X - Tm) + cfg.phantom(X + Tm)))
    rep = diagnostics(sol, prob, ref)
    x = grid.axes[0].coords
    return TatResult(
        sol.u.values[:, 0].copy(),
        cfg.phantom(x),
        x,
        {k: v for k, v in rep.items() if "error" in k},
        gamma,
        sol.iterations,
        flags,
    )

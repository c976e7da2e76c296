"""Integral Carleman check for the elliptic weight with polynomial bump test functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..carleman import CarlemanDiagnostic, CarlemanWeight, carleman_ratio_diagnostic
from ..fields import CoefficientSet, ScalarField
from ..grid import Axis, ConfigurationError, Grid

Box = tuple[float, float, float, float]  # (p, q, r, s): x1 in [p, q], x2 in [r, s]


@dataclass(frozen=True)
class CarlemanCheckConfig:
    a: float = 0.5
    c: float = 0.9
    X: float = 1.0
    nu: float = 3.0
    lambdas: tuple[float, ...] = (10.0, 20.0, 40.0, 80.0)
    lam_cut: float | None = None
    boxes: tuple[Box, ...] = ((0.05, 0.25, -0.2, 0.2), (0.02, 0.12, -0.3, 0.3), (0.1, 0.3, -0.1, 0.15))
    h1: float = 5e-5
    n2: int = 121


def bump(box: Box):
    p, q, r, s = box

    def u(x1, x2):
        inside = (x1 > p) & (x1 < q) & (x2 > r) & (x2 < s)
        return np.where(inside, ((x1 - p) * (q - x1) * (x2 - r) * (s - x2)) ** 2, 0.0)

    return u


def check_grid(cfg: CarlemanCheckConfig) -> Grid:
    """Tensor grid covering every box plus a margin of three cells."""
    boxes = np.asarray(cfg.boxes, float)
    lo1, hi1 = boxes[:, 0].min(), boxes[:, 1].max()
    lo2, hi2 = boxes[:, 2].min(), boxes[:, 3].max()
    n1 = int(np.ceil((hi1 - lo1) / cfg.h1)) + 1
    h1 = (hi1 - lo1) / (n1 - 1)
    h2 = (hi2 - lo2) / (cfg.n2 - 1)
    return Grid(
        (
            Axis("x1", lo1 - 3 * h1, hi1 + 3 * h1, n1 + 6),
            Axis("x2", lo2 - 3 * h2, hi2 + 3 * h2, cfg.n2 + 6),
        )
    )


def carleman_check(cfg: CarlemanCheckConfig) -> CarlemanDiagnostic:
    w = CarlemanWeight("elliptic", a=cfg.a, c=cfg.c, X=cfg.X, nu=cfg.nu)
    for box in cfg.boxes:
        p, q, r, s = box
        if not (p > 0 and p < q and r < s):
            raise ConfigurationError(f"bad box {box}")
        corner = max(abs(r), abs(s))
        if q + corner**2 / cfg.X**2 + cfg.a >= cfg.c:
            raise ConfigurationError(f"box {box} is not inside Omega_c")
    grid = check_grid(cfg)
    tests = [ScalarField.from_function(grid, bump(b)) for b in cfg.boxes]
    x1, x2 = grid.mesh
    omega = (x1 > 0) & (w.psi([x1, x2]) < cfg.c)
    return carleman_ratio_diagnostic(
        CoefficientSet("elliptic"), w, tests, list(cfg.lambdas), lam_cut=cfg.lam_cut, omega=omega
    )

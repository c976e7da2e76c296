"""Convergence-rate studies: noise sweep, gamma = delta^(2 alpha), slope fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..carleman import rate_parameters
from ..grid import ConfigurationError
from ..solver import assemble, diagnostics, solve
from .cases import ManufacturedCase

BASELINE_GAMMA = 1e-10
FLOOR_FACTOR = 2.0


@dataclass(frozen=True)
class StudyRow:
    delta: float
    gamma: float
    errors: dict
    cg_iters: int
    seed: int


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    r2: float
    n: int


@dataclass(eq=False)
class ConvergenceReport:
    case: str
    kind: str
    alpha: float
    rows: list[StudyRow]
    baseline: dict  # errors with exact data and gamma = BASELINE_GAMMA
    designated: str
    slopes: dict  # error key -> Fit of ln(error) on ln(delta), floor rows excluded
    theory_exponent: float
    beta: float
    beta_in_range: bool = True
    beta_consistent: float | None = None
    log_fit: Fit | None = None  # final-slice error against 1/sqrt(ln(1/delta))
    loglog_fit_final: Fit | None = None
    stencil_floor: float = math.nan
    meta: dict = field(default_factory=dict)

    def errors(self, key: str | None = None) -> list[float]:
        key = key or self.designated
        return [r.errors[key] for r in self.rows]

    @property
    def slope(self) -> float:
        fit = self.slopes.get(self.designated)
        return fit.slope if fit else math.nan


def linear_fit(x, y) -> Fit:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if len(x) < 2:
        return Fit(math.nan, math.nan, math.nan, len(x))
    A = np.vstack([x, np.ones_like(x)]).T
    (k, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - (k * x + c)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return Fit(float(k), float(c), r2, len(x))


def _check_deltas(deltas) -> list[float]:
    ds = [float(d) for d in deltas]
    if any(not 0 <= d < 1 for d in ds):
        raise ConfigurationError("every delta must lie in [0, 1)")
    if any(b >= a for a, b in zip(ds, ds[1:])):
        raise ConfigurationError("delta list must be strictly decreasing")
    return ds


def convergence_study(
    case: ManufacturedCase,
    deltas,
    alpha: float = 1.0,
    seed: int = 0,
    *,
    tol: float = 1e-10,
    preconditioner: str = "lu",
    max_iter: int | None = None,
) -> ConvergenceReport:
    """Solve the case for each noise level and fit observed rates.

    Row i uses seed ``seed + i``. A zero delta only contributes to the exact-data
    baseline; rows whose designated error is within a factor 2 of the baseline
    are treated as discretization-floor rows and excluded from the slope fits.
    """
    if not 0 < alpha <= 1:
        raise ConfigurationError(f"alpha must lie in (0, 1], got {alpha}")
    ds = _check_deltas(deltas)
    setup = case.setup()
    rp = rate_parameters(case.weight, setup.masks, case.eps, alpha)

    def run(delta, gamma, s):
        prob = setup.problem(delta, s)
        try:
            sol = solve(assemble(prob, gamma), tol, max_iter, preconditioner=preconditioner)
        except Exception as exc:  # annotate with the offending noise level
            raise RuntimeError(f"solve failed at delta={delta}: {exc}") from exc
        rep = diagnostics(sol, prob, setup.exact)
        return {k: v for k, v in rep.items() if k.startswith("error")}, sol.iterations

    baseline, _ = run(0.0, BASELINE_GAMMA, seed)
    rows = []
    for i, d in enumerate(ds):
        if d == 0:
            continue
        gamma = d ** (2 * alpha)
        errs, its = run(d, gamma, seed + i)
        rows.append(StudyRow(d, gamma, errs, its, seed + i))

    slopes = {}
    for key in baseline:
        pts = [(r.delta, r.errors[key]) for r in rows if r.errors[key] > FLOOR_FACTOR * baseline[key]]
        if len(pts) >= 2:
            slopes[key] = linear_fit([math.log(d) for d, _ in pts], [math.log(e) for _, e in pts])
    log_fit = loglog = None
    if "error_l2_final" in baseline:
        pts = [(r.delta, r.errors["error_l2_final"]) for r in rows]
        if len(pts) >= 2:
            log_fit = linear_fit([1 / math.sqrt(math.log(1 / d)) for d, _ in pts], [e for _, e in pts])
            loglog = linear_fit([math.log(d) for d, _ in pts], [math.log(e) for _, e in pts])
    return ConvergenceReport(
        case=case.name,
        kind=case.kind,
        alpha=alpha,
        rows=rows,
        baseline=baseline,
        designated=case.designated,
        slopes=slopes,
        theory_exponent=rp.exponent,
        beta=rp.beta,
        beta_in_range=rp.beta_in_range,
        beta_consistent=rp.beta_consistent,
        log_fit=log_fit,
        loglog_fit_final=loglog,
        stencil_floor=case.stencil_floor(),
        meta={"rate_rule": rp.rule, "m": rp.m, **case.meta},
    )

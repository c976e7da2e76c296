"""Command-line driver: ``qrm <subcommand> --config run.toml``.

Exit status 0 on success, 2 on configuration errors, 1 on runtime errors.
Set QRM_OUTPUT_DIR to override the output directory named in the config.
"""

from __future__ import annotations

import argparse
import dataclasses
import inspect
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import io
from .carleman import CarlemanWeight, check_eps
from .cauchy_data import CauchyData, build_extension
from .expressions import ExpressionError, compile_expression
from .fields import KINDS, CoefficientSet, ScalarField
from .grid import ConfigurationError, Tag, build_grid, classify_boundary
from .solver import PRECONDITIONERS, CauchyProblem, assemble, diagnostics, solve

SUBCOMMANDS = ("solve", "study", "tat", "carleman-check", "instability-demo")
OUTPUT_ENV = "QRM_OUTPUT_DIR"


class ConfigError(Exception):
    """Configuration problem; message names the offending section/field."""


@dataclass
class RunConfig:
    subcommand: str
    path: Path
    raw: dict
    output_dir: Path
    resolved: dict = field(default_factory=dict)
    plan: Any = None


# ----------------------------------------------------------------------------- helpers


def _section(raw: dict, name: str, required: bool = False) -> dict:
    sec = raw.get(name, {})
    if required and name not in raw:
        raise ConfigError(f"[{name}]: section missing")
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}]: expected a table")
    return sec


def _num(sec: dict, sect: str, key: str, default=None, *, lo=None, hi=None, lo_open=False, hi_open=False):
    if key not in sec:
        if default is None:
            raise ConfigError(f"[{sect}] {key}: required field missing")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"[{sect}] {key}: expected a number, got {v!r}")
    v = float(v)
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(f"[{sect}] {key}: {v} below the admissible range")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise ConfigError(f"[{sect}] {key}: {v} above the admissible range")
    return v


def _guard(where: str, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (ConfigurationError, ExpressionError, ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


# ----------------------------------------------------------------------------- plans


def _plan_study(raw: dict, solve_mode: bool = False) -> dict:
    from .experiments.cases import CASES

    prob = _section(raw, "problem", required=True)
    if "case" not in prob:
        if solve_mode:
            return _plan_custom(raw)
        raise ConfigError("[problem] case: required field missing")
    name = prob["case"]
    if name not in CASES:
        raise ConfigError(f"[problem] case: unknown case {name!r}; expected one of {sorted(CASES)}")
    factory = CASES[name]
    params = inspect.signature(factory).parameters
    grid_kw = dict(_section(raw, "grid"))
    for k in grid_kw:
        if k not in params:
            raise ConfigError(f"[grid] {k}: not a parameter of case {name!r} (have {list(params)})")
    case = _guard("[grid]", factory, **grid_kw)
    wsec = _section(raw, "weight")
    allowed = {f.name for f in dataclasses.fields(CarlemanWeight)} | {"eps"}
    for k in wsec:
        if k not in allowed:
            raise ConfigError(f"[weight] {k}: unknown weight parameter")
    wkw = {k: v for k, v in wsec.items() if k != "eps"}
    if "x0" in wkw:
        wkw["x0"] = tuple(np.atleast_1d(wkw["x0"]))
    case.weight = _guard("[weight]", dataclasses.replace, case.weight, **wkw)
    if "eps" in wsec:
        case.eps = _num(wsec, "weight", "eps")
    try:
        check_eps(case.weight, case.eps)
    except ConfigurationError as exc:
        raise ConfigError(f"[weight] eps: {exc}") from None
    solver = _solver_opts(raw)
    plan = dict(case=case, solver=solver)
    if solve_mode:
        s = _section(raw, "solve")
        plan["delta"] = _num(s, "solve", "delta", 0.0, lo=0.0, hi=1.0, hi_open=True)
        plan["gamma"] = _num(s, "solve", "gamma", 1e-8, lo=0.0, hi=1.0, lo_open=True)
        plan["seed"] = int(_num(s, "solve", "seed", 0.0))
    else:
        s = _section(raw, "study", required=True)
        deltas = s.get("deltas")
        if not isinstance(deltas, list) or not deltas:
            raise ConfigError("[study] deltas: expected a nonempty list of numbers")
        ds = [float(d) for d in deltas]
        if any(not 0 <= d < 1 for d in ds):
            raise ConfigError("[study] deltas: every value must lie in [0, 1)")
        if any(b >= a for a, b in zip(ds, ds[1:])):
            raise ConfigError("[study] deltas: list must be strictly decreasing")
        plan["deltas"] = ds
        plan["alpha"] = _num(s, "study", "alpha", 1.0, lo=0.0, hi=1.0, lo_open=True)
        plan["seed"] = int(_num(s, "study", "seed", 0.0))
    return plan


def _solver_opts(raw: dict) -> dict:
    s = _section(raw, "solver")
    tol = _num(s, "solver", "tol", 1e-10, lo=0.0, hi=1e-4, lo_open=True)
    pc = s.get("preconditioner", "lu")
    if pc not in PRECONDITIONERS:
        raise ConfigError(f"[solver] preconditioner: {pc!r} not one of {PRECONDITIONERS}")
    out = dict(tol=tol, preconditioner=pc)
    if "max_iter" in s:
        out["max_iter"] = int(_num(s, "solver", "max_iter", lo=1))
    return out


def _face_predicate(specs: list, names: tuple, grid):
    preds = []
    for i, spec in enumerate(specs):
        if not isinstance(spec, str) or "=" not in spec:
            raise ConfigError(f"[data] accessible[{i}]: expected 'axis=min' or 'axis=max', got {spec!r}")
        ax, side = (s.strip() for s in spec.split("=", 1))
        if ax not in names or side not in ("min", "max"):
            raise ConfigError(f"[data] accessible[{i}]: bad face {spec!r}")
        a = grid.axes[names.index(ax)]
        val = a.lo if side == "min" else a.hi
        tol = 1e-9 * (a.hi - a.lo)
        preds.append((ax, val, tol))
    return lambda **c: np.logical_or.reduce([np.abs(c[ax] - v) <= t for ax, v, t in preds])


def _plan_custom(raw: dict) -> dict:
    """A problem given by expressions (or CSV traces) rather than a named case."""
    prob = _section(raw, "problem")
    kind = prob.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"[problem] kind: expected one of {KINDS}, got {kind!r}")
    gsec = _section(raw, "grid", required=True)
    axes = gsec.get("axes")
    if not isinstance(axes, list):
        raise ConfigError("[grid] axes: expected an array of tables")
    grid = _guard("[grid] axes", build_grid, axes)
    names = grid.names
    csec = _section(raw, "coefficients")
    for key in ("b0", "a"):
        if isinstance(csec.get(key), str):
            _guard(f"[coefficients] {key}", compile_expression, csec[key], names)
    coeffs = _guard(
        "[coefficients]",
        CoefficientSet,
        kind,
        principal=csec.get("principal"),
        drift=csec.get("drift"),
        b0=csec.get("b0", 0.0),
        a=csec.get("a", 1.0),
        a_bounds=tuple(csec["a_bounds"]) if "a_bounds" in csec else None,
    )
    _guard("[coefficients]", coeffs.resolved, grid)
    dsec = _section(raw, "data", required=True)
    acc = dsec.get("accessible")
    if not isinstance(acc, list) or not acc:
        raise ConfigError("[data] accessible: expected a nonempty list of faces")
    pred = _face_predicate(acc, names, grid)
    tags = dsec.get("dirichlet_tags", ["accessible"])
    try:
        tag_vals = tuple(Tag[t.upper()] for t in tags)
    except KeyError as exc:
        raise ConfigError(f"[data] dirichlet_tags: unknown tag {exc.args[0]!r}") from None
    source = dsec.get("source", "expressions")
    exprs = {}
    if source == "expressions":
        if "g0" not in dsec:
            raise ConfigError("[data] g0: required field missing")
        for key in ("g0", "g1", "f", "exact"):
            if key in dsec:
                v = dsec[key]
                if isinstance(v, str):
                    _guard(f"[data] {key}", compile_expression, v, names)
                exprs[key] = v
    elif source == "csv":
        path = dsec.get("csv")
        if not path:
            raise ConfigError("[data] csv: required when source = 'csv'")
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"[data] csv: file not found: {path}")
        cols, arr = io.read_csv(p)
        missing = [c for c in list(names) + ["g0"] if c not in cols]
        if missing:
            raise ConfigError(f"[data] csv: missing columns {missing}")
        exprs["csv"] = (cols, arr)
    else:
        raise ConfigError(f"[data] source: expected 'expressions' or 'csv', got {source!r}")
    s = _section(raw, "solve")
    return dict(
        custom=True,
        grid=grid,
        coeffs=coeffs,
        predicate=pred,
        tags=tag_vals,
        exprs=exprs,
        mirror_time=bool(dsec.get("mirror_time", False)),
        sigma=dsec.get("sigma"),
        gamma=_num(s, "solve", "gamma", 1e-8, lo=0.0, hi=1.0, lo_open=True),
        delta=_num(s, "solve", "delta", 0.0, lo=0.0, hi=1.0, hi_open=True),
        seed=int(_num(s, "solve", "seed", 0.0)),
        solver=_solver_opts(raw),
    )


def _plan_tat(raw: dict) -> dict:
    from .experiments.tat import TatConfig

    sec = dict(_section(raw, "tat"))
    sweep = sec.pop("gamma_sweep", None)
    traces = sec.pop("traces_csv", None)
    allowed = {f.name for f in dataclasses.fields(TatConfig)}
    for k in sec:
        if k not in allowed:
            raise ConfigError(f"[tat] {k}: unknown field")
    for k in ("centers", "widths", "amps"):
        if k in sec:
            sec[k] = tuple(float(v) for v in sec[k])
    cfg = _guard("[tat]", TatConfig, **sec)
    if not cfg.delta >= 0:
        raise ConfigError("[tat] delta: must be nonnegative")
    if cfg.gamma is not None and not 0 < cfg.gamma <= 1:
        raise ConfigError("[tat] gamma: must lie in (0, 1]")
    if not 0 < cfg.sigma < 1:
        raise ConfigError("[tat] sigma: must lie in (0, 1)")
    if sweep is not None and (not isinstance(sweep, list) or any(not 0 < g <= 1 for g in sweep)):
        raise ConfigError("[tat] gamma_sweep: expected a list of values in (0, 1]")
    tr = None
    if traces is not None:
        p = Path(traces)
        if not p.is_file():
            raise ConfigError(f"[tat] traces_csv: file not found: {traces}")
        cols, arr = io.read_csv(p)
        need = ["p_left", "p_right", "pbar_left", "pbar_right"]
        if any(c not in cols for c in need):
            raise ConfigError(f"[tat] traces_csv: needs columns {need}")
        if arr.shape[0] != cfg.nt:
            raise ConfigError(f"[tat] traces_csv: {arr.shape[0]} rows, expected nt = {cfg.nt}")
        col = {c: arr[:, i] for i, c in enumerate(cols)}
        tr = (np.stack([col["p_left"], col["p_right"]]), np.stack([col["pbar_left"], col["pbar_right"]]))
    return dict(cfg=cfg, sweep=sweep, traces=tr)


def _plan_carleman(raw: dict) -> dict:
    from .experiments.carleman_check import CarlemanCheckConfig

    sec = dict(_section(raw, "carleman"))
    allowed = {f.name for f in dataclasses.fields(CarlemanCheckConfig)}
    for k in sec:
        if k not in allowed:
            raise ConfigError(f"[carleman] {k}: unknown field")
    if "lambdas" in sec:
        sec["lambdas"] = tuple(float(v) for v in sec["lambdas"])
    if "boxes" in sec:
        sec["boxes"] = tuple(tuple(float(v) for v in b) for b in sec["boxes"])
    cfg = _guard("[carleman]", CarlemanCheckConfig, **sec)
    _guard("[carleman]", CarlemanWeight, "elliptic", a=cfg.a, c=cfg.c, X=cfg.X, nu=cfg.nu)
    if not cfg.lambdas:
        raise ConfigError("[carleman] lambdas: empty list")
    return dict(cfg=cfg)


def _plan_instability(raw: dict) -> dict:
    sec = _section(raw, "instability")
    modes = sec.get("modes", [1, 2, 3])
    if not isinstance(modes, list) or any(not isinstance(m, int) or m < 1 for m in modes):
        raise ConfigError("[instability] modes: expected a list of positive integers")
    return dict(
        modes=modes,
        T=_num(sec, "instability", "T", 0.1, lo=0.0),
        nx=int(_num(sec, "instability", "nx", 21.0, lo=5)),
        dt=_num(sec, "instability", "dt", 1e-3, lo=0.0, lo_open=True),
    )


PLANNERS = {
    "solve": lambda raw: _plan_study(raw, solve_mode=True),
    "study": _plan_study,
    "tat": _plan_tat,
    "carleman-check": _plan_carleman,
    "instability-demo": _plan_instability,
}


def load_config(subcommand: str, path: str) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out = _section(raw, "output")
    out_dir = Path(os.environ.get(OUTPUT_ENV) or out.get("dir", "qrm-output"))
    rc = RunConfig(subcommand, p, raw, out_dir)
    rc.plan = PLANNERS[subcommand](raw)
    rc.resolved = {"subcommand": subcommand, **raw}
    return rc


# ----------------------------------------------------------------------------- runners


def _run_study(rc: RunConfig) -> list[Path]:
    from .experiments.study import convergence_study

    pl = rc.plan
    rep = convergence_study(pl["case"], pl["deltas"], pl["alpha"], pl["seed"], **pl["solver"])
    fixed = ["delta", "gamma", "error_h1_subdomain", "error_l2_final", "cg_iters", "seed"]
    extra = sorted(k for k in rep.baseline if k not in fixed)
    rows = []
    for r in rep.rows:
        rows.append(
            [r.delta, r.gamma, r.errors.get("error_h1_subdomain", math.nan), r.errors.get("error_l2_final", math.nan),
             r.cg_iters, r.seed] + [r.errors.get(k, math.nan) for k in extra]
        )
    csv = io.write_csv(rc.output_dir / "study.csv", fixed + extra, rows, rc.resolved)

    def fit(f):
        return None if f is None else dataclasses.asdict(f)

    payload = dict(
        case=rep.case,
        kind=rep.kind,
        alpha=rep.alpha,
        designated=rep.designated,
        baseline=rep.baseline,
        rows=[dataclasses.asdict(r) for r in rep.rows],
        slopes={k: fit(v) for k, v in rep.slopes.items()},
        theory_exponent=rep.theory_exponent,
        beta=rep.beta,
        beta_in_range=rep.beta_in_range,
        beta_consistent=rep.beta_consistent,
        log_fit_final=fit(rep.log_fit),
        loglog_fit_final=fit(rep.loglog_fit_final),
        stencil_floor=rep.stencil_floor,
        meta=rep.meta,
    )
    js = io.write_json(rc.output_dir / "study.json", payload, rc.resolved)
    return [csv, js]


def _custom_problem(pl: dict):
    grid = pl["grid"]
    bc = classify_boundary(grid, pl["predicate"])
    ex = pl["exprs"]
    if "csv" in ex:
        cols, arr = ex["csv"]
        col = {c: arr[:, i] for i, c in enumerate(cols)}
        g0 = np.zeros(grid.shape)
        g1 = np.zeros(grid.shape) if "g1" in col else None
        for k in range(arr.shape[0]):
            idx = tuple(
                int(round((col[a.name][k] - a.lo) / a.spacing)) for a in grid.axes
            )
            g0[idx] = col["g0"][k]
            if g1 is not None:
                g1[idx] = col["g1"][k]
        data = CauchyData.from_functions(bc, g0, g1, None, dirichlet_tags=pl["tags"])
        exact = None
    else:
        data = CauchyData.from_functions(bc, ex["g0"], ex.get("g1"), ex.get("f"), dirichlet_tags=pl["tags"])
        exact = ScalarField.from_function(grid, ex["exact"]) if "exact" in ex else None
    if pl["delta"] > 0:
        from .cauchy_data import add_noise

        data = add_noise(data, pl["delta"], pl["seed"])
    sigma = pl["sigma"]
    ext = build_extension(data, sigma)
    prob = CauchyProblem(data, pl["coeffs"], ext.field, None, mirror_time=pl["mirror_time"], label="custom")
    return prob, exact


def _run_solve(rc: RunConfig) -> list[Path]:
    pl = rc.plan
    if pl.get("custom"):
        prob, exact = _custom_problem(pl)
    else:
        setup = pl["case"].setup()
        prob, exact = setup.problem(pl["delta"], pl["seed"]), setup.exact
    sol = solve(assemble(prob, pl["gamma"]), **pl["solver"])
    rep = diagnostics(sol, prob, exact)
    out = rc.output_dir
    paths = [
        io.write_field_csv(out / "solution.csv", sol.u, rc.resolved),
        io.write_qrm1(out / "solution.qrm1", sol.u),
        io.write_json(out / "solve.json", {"diagnostics": rep, "grid": prob.grid.describe()}, rc.resolved),
    ]
    if not sol.converged:
        print(f"warning: CG stopped at relative residual {sol.residual:.3e}", file=sys.stderr)
    return paths


def _run_tat(rc: RunConfig) -> list[Path]:
    from .experiments.tat import tat_reconstruct

    pl = rc.plan
    cfg = pl["cfg"]
    res = tat_reconstruct(cfg, pl["traces"])
    out = rc.output_dir
    paths = [io.write_csv(out / "tat.csv", ["x", "recovered", "truth"], zip(res.x, res.recovered, res.truth), rc.resolved)]
    sweep = []
    for g in pl["sweep"] or []:
        r = tat_reconstruct(dataclasses.replace(cfg, delta=0.0, gamma=float(g)), pl["traces"])
        sweep.append({"gamma": float(g), **r.errors})
    payload = dict(errors=res.errors, gamma=res.gamma, cg_iterations=res.iterations, flags=res.flags, sweep=sweep)
    paths.append(io.write_json(out / "tat.json", payload, rc.resolved))
    return paths


def _run_carleman(rc: RunConfig) -> list[Path]:
    from .experiments.carleman_check import carleman_check

    diag = carleman_check(rc.plan["cfg"])
    out = rc.output_dir
    rows = [(r["lam"], r["c_fit"], r["test"]) for r in diag.rows()]
    return [
        io.write_csv(out / "carleman.csv", ["lambda", "c_fit", "test"], rows, rc.resolved),
        io.write_json(out / "carleman.json", {"rows": diag.rows(), "floor": diag.floor, "lam_cut": diag.lam_cut}, rc.resolved),
    ]


def _run_instability(rc: RunConfig) -> list[Path]:
    from .experiments.instability import backward_instability_demo

    pl = rc.plan
    rows = backward_instability_demo(pl["modes"], pl["T"], nx=pl["nx"], dt=pl["dt"])
    return [
        io.write_csv(
            rc.output_dir / "instability.csv",
            ["n", "analytic", "observed", "relative_gap"],
            [(r.n, r.analytic, r.observed, r.relative_gap) for r in rows],
            rc.resolved,
        )
    ]


RUNNERS = {
    "solve": _run_solve,
    "study": _run_study,
    "tat": _run_tat,
    "carleman-check": _run_carleman,
    "instability-demo": _run_instability,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def run(argv: list[str] | None = None) -> int:
    parser = _Parser(prog="qrm", description="Quasi-reversibility solvers and rate studies")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", "-c", required=True)
    try:
        args = parser.parse_args(argv)
        rc = load_config(args.subcommand, args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        rc.output_dir.mkdir(parents=True, exist_ok=True)
        paths = RUNNERS[rc.subcommand](rc)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Quasi-reversibility solver.

Minimizes  J(u) = ||A u - f||^2 + gamma ||u - F||_{H^2}^2  over grid functions that
reproduce the Cauchy data. Constrained nodes are eliminated: Dirichlet nodes are
fixed, and the first layer behind each Neumann node is tied to its neighbours by
the one-sided second-order difference. With u = P x + u0 the normal equations

    P^T (A^T W A + gamma R^T W R) P x = P^T (A^T W (f - A u0) + gamma R^T W R (F - u0))

are solved by preconditioned conjugate gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .carleman import SubdomainMasks
from .cauchy_data import CauchyData
from .fields import CoefficientSet, ScalarField, discrete_norm, norm_components, operator_matrix
from .grid import ConfigurationError, Grid

PRECONDITIONERS = ("lu", "jacobi", "none")


class NoAccessibleDataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Constraints:
    """u[E] = C u + d on eliminated nodes E; every other node is free."""

    eliminated: np.ndarray  # sorted node indices
    dirichlet: np.ndarray  # subset of eliminated, values fixed
    C: sp.csr_matrix  # N x N, nonzero rows only on Neumann-layer nodes
    d: np.ndarray  # length N

    @property
    def n_free(self) -> int:
        return self.C.shape[0] - len(self.eliminated)


def build_constraints(data: CauchyData) -> Constraints:
    """Dirichlet nodes plus one-sided Neumann relations on the first interior layer.

    For a boundary node u0 with outward normal derivative g1, layer nodes u1, u2
    along the inward normal satisfy u1 = (3 u0 + u2 - 2 h g1) / 4. A layer node
    claimed by several faces takes the average of its relations; a layer node that
    is itself a Dirichlet node keeps its Dirichlet value.
    """
    grid = data.grid
    N = grid.size
    dflat = data.dirichlet.ravel()
    if not dflat.any():
        raise NoAccessibleDataError("no constrained boundary nodes: the problem carries no data")
    d = np.where(dflat, data.g0.ravel(), 0.0)
    rows, cols, vals, rhs = [], [], [], {}
    counts: dict[int, int] = {}
    bc = data.bc
    for node in np.flatnonzero(data.neumann.ravel()):
        mi = list(np.unravel_index(node, grid.shape))
        ax = int(bc.normal_axis[tuple(mi)])
        sign = int(bc.normal_sign[tuple(mi)])
        step = -sign  # inward
        h = grid.axes[ax].spacing
        m1, m2 = list(mi), list(mi)
        m1[ax] += step
        m2[ax] += 2 * step
        i1 = int(np.ravel_multi_index(m1, grid.shape))
        i2 = int(np.ravel_multi_index(m2, grid.shape))
        if dflat[i1]:
            continue
        g1 = data.g1.ravel()[node]
        rows += [i1, i1]
        cols += [int(node), i2]
        vals += [0.75, 0.25]
        rhs[i1] = rhs.get(i1, 0.0) - 0.5 * h * g1
        counts[i1] = counts.get(i1, 0) + 1
    C = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    if counts:
        scale = np.ones(N)
        for i, c in counts.items():
            scale[i] = 1.0 / c
            d[i] = rhs[i] / c
        C = sp.diags(scale) @ C
    layer = np.zeros(N, bool)
    layer[list(counts)] = True
    eliminated = np.flatnonzero(dflat | layer)
    return Constraints(eliminated, np.flatnonzero(dflat), C.tocsr(), d)


def prolongation(con: Constraints) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """P, u0 and the free index list with u = P x + u0 satisfying every relation.

    Layer relations may reference other eliminated nodes; they are resolved by
    fixed-point substitution (each layer reference carries weight 1/4, so the
    iteration contracts).
    """
    N = con.C.shape[0]
    elim = con.eliminated
    free = np.setdiff1d(np.arange(N), elim)
    Cee = con.C[elim][:, elim].tocsr()
    Cef = con.C[elim][:, free].tocsr()
    de = con.d[elim]
    Pe, ue = Cef.copy(), de.copy()
    for _ in range(200):
        Pn = (Cef + Cee @ Pe).tocsr()
        un = de + Cee @ ue
        done = abs(Pn - Pe).max() == 0 and np.array_equal(un, ue)
        Pe, ue = Pn, un
        if done:
            break
    else:
        raise RuntimeError("constraint substitution did not settle")
    Pe.eliminate_zeros()
    Pf = sp.csr_matrix((np.ones(len(free)), (free, np.arange(len(free)))), shape=(N, len(free)))
    coo = Pe.tocoo()
    Pe_scatter = sp.csr_matrix((coo.data, (elim[coo.row], coo.col)), shape=(N, len(free)))
    u0 = np.zeros(N)
    u0[elim] = ue
    u0[con.dirichlet] = con.d[con.dirichlet]
    return (Pf + Pe_scatter).tocsr(), u0, free


@dataclass(eq=False)
class CauchyProblem:
    """Everything needed to assemble the functional for one data set."""

    data: CauchyData
    coeffs: CoefficientSet
    F: ScalarField
    masks: SubdomainMasks | None = None
    mirror_time: bool = False
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.data.grid

    @property
    def kind(self) -> str:
        return self.coeffs.kind


@dataclass(eq=False)
class LinearSystem:
    problem: CauchyProblem
    gamma: float
    M: sp.csr_matrix
    b: np.ndarray
    P: sp.csr_matrix
    u0: np.ndarray
    free: np.ndarray
    A: sp.csr_matrix
    W: np.ndarray
    R: list
    constraints: Constraints
    _factor: object = None

    @property
    def n_free(self) -> int:
        return len(self.free)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.M @ x

    def lift(self, x: np.ndarray) -> np.ndarray:
        u = self.P @ x + self.u0
        dn = self.constraints.dirichlet
        u[dn] = self.constraints.d[dn]  # bit-exact data reproduction
        return u


def assemble(problem: CauchyProblem, gamma: float) -> LinearSystem:
    if not gamma > 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    if not problem.data.bc.accessible.any():
        raise NoAccessibleDataError("no accessible Cauchy nodes")
    grid = problem.grid
    A = operator_matrix(problem.coeffs, grid, mirror_time=problem.mirror_time)
    W = grid.weights.ravel()
    R = [D for _, D in norm_components(grid, "H2", problem.mirror_time)]
    Wd = sp.diags(W)
    AtWA = A.T @ Wd @ A
    RtWR = sum(D.T @ Wd @ D for D in R)
    con = build_constraints(problem.data)
    P, u0, free = prolongation(con)
    K = (AtWA + gamma * RtWR).tocsr()
    M = (P.T @ K @ P).tocsr()
    M = ((M + M.T) * 0.5).tocsr()  # remove round-off asymmetry of the triple product
    f = problem.data.f.ravel()
    F = problem.F.flat
    b = P.T @ (A.T @ (W * (f - A @ u0)) + gamma * (RtWR @ (F - u0)))
    return LinearSystem(problem, float(gamma), M, np.asarray(b), P, u0, free, A, W, R, con)


@dataclass(frozen=True)
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def conjugate_gradient(matvec, b, *, precond=None, x0=None, tol=1e-10, maxiter=1000) -> CGResult:
    """Preconditioned CG on an SPD operator; stops on ||b - M x|| <= tol ||b||."""
    bnorm = float(np.linalg.norm(b))
    n = len(b)
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0, True)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(x)
    z = precond(r) if precond else r
    p = z.copy()
    rz = float(r @ z)
    res = float(np.linalg.norm(r)) / bnorm
    it = 0
    while res > tol and it < maxiter:
        Mp = matvec(p)
        pMp = float(p @ Mp)
        if pMp <= 0:
            break
        step = rz / pMp
        x += step * p
        r -= step * Mp
        it += 1
        if it % 50 == 0:
            r = b - matvec(x)  # refresh against drift
        res = float(np.linalg.norm(r)) / bnorm
        z = precond(r) if precond else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = float(np.linalg.norm(b - matvec(x))) / bnorm
    return CGResult(x, it, res, res <= tol)


def make_preconditioner(system: LinearSystem, kind: str = "lu"):
    if kind not in PRECONDITIONERS:
        raise ConfigurationError(f"unknown preconditioner {kind!r}; expected one of {PRECONDITIONERS}")
    if kind == "none":
        return None
    if kind == "jacobi":
        dinv = 1.0 / system.M.diagonal()
        return lambda r: dinv * r
    if system._factor is None:
        system._factor = spla.splu(system.M.tocsc())
    return system._factor.solve


@dataclass(eq=False)
class QrmSolution:
    u: ScalarField
    gamma: float
    iterations: int
    residual: float
    converged: bool
    misfit: float  # ||A u - f||_L2
    penalty: float  # ||u - F||_H2
    functional: float
    system: LinearSystem | None = None

    @property
    def grid(self) -> Grid:
        return self.u.grid


def functional_value(system: LinearSystem, u: np.ndarray) -> tuple[float, float, float]:
    prob = system.problem
    r = system.A @ u - prob.data.f.ravel()
    misfit2 = float(np.sum(system.W * r * r))
    e = u - prob.F.flat
    pen2 = sum(float(np.sum(system.W * (D @ e) ** 2)) for D in system.R)
    return math.sqrt(misfit2), math.sqrt(pen2), misfit2 + system.gamma * pen2


def solve(
    system: LinearSystem,
    tol: float = 1e-10,
    max_iter: int | None = None,
    *,
    preconditioner: str = "lu",
    x0: np.ndarray | None = None,
) -> QrmSolution:
    if not 0 < tol <= 1e-4:
        raise ConfigurationError(f"tol must lie in (0, 1e-4], got {tol}")
    n = system.n_free
    max_iter = int(50 * math.sqrt(max(n, 1))) if max_iter is None else int(max_iter)
    pc = make_preconditioner(system, preconditioner)
    res = conjugate_gradient(system.matvec, system.b, precond=pc, x0=x0, tol=tol, maxiter=max_iter)
    u = system.lift(res.x)
    mis, pen, J = functional_value(system, u)
    return QrmSolution(
        ScalarField(system.problem.grid, u), system.gamma, res.iterations, res.residual, res.converged,
        mis, pen, J, system,
    )


def solve_problem(problem: CauchyProblem, gamma: float, tol: float = 1e-10, **kw) -> QrmSolution:
    return solve(assemble(problem, gamma), tol, **kw)


# ----------------------------------------------------------------------------- diagnostics


def diagnostics(sol: QrmSolution, problem: CauchyProblem, reference: ScalarField | None = None) -> dict:
    """Residual/functional diagnostics plus the per-kind error norms against ``reference``."""
    rep = dict(
        gamma=sol.gamma,
        cg_iterations=sol.iterations,
        relative_residual=sol.residual,
        converged=sol.converged,
        misfit_l2=sol.misfit,
        penalty_h2=sol.penalty,
        functional=sol.functional,
    )
    if reference is None:
        return rep
    grid = problem.grid
    err = ScalarField(grid, sol.u.values - reference.values)
    masks = problem.masks
    kind = problem.kind
    mt = problem.mirror_time
    if kind == "hyperbolic" and problem.meta.get("designated") == "initial-slice":
        t = grid.time_axis
        idx = [slice(None)] * grid.ndim
        idx[t] = 0
        sub = grid.sub_grid([i for i in range(grid.ndim) if i != t])
        e0 = ScalarField(sub, err.values[tuple(idx)])
        r0 = ScalarField(sub, reference.values[tuple(idx)])
        rep["error_l2_initial"] = discrete_norm(e0, "L2")
        nref = discrete_norm(r0, "L2")
        rep["relative_error_l2_initial"] = rep["error_l2_initial"] / nref if nref > 0 else math.nan
    elif kind == "hyperbolic":
        rep["error_h1_cylinder"] = discrete_norm(err, "H1", mirror_time=mt)
        rep["error_l2_cylinder"] = discrete_norm(err, "L2")
    elif kind == "reversed-parabolic":
        t = grid.time_axis
        idx = [slice(None)] * grid.ndim
        idx[t] = -1
        sub = grid.sub_grid([i for i in range(grid.ndim) if i != t])
        rep["error_l2_final"] = discrete_norm(ScalarField(sub, err.values[tuple(idx)]), "L2")
        if masks is not None:
            rep["error_h1_subdomain"] = discrete_norm(err, "H1", masks.omega_c3e, axes=grid.space_axes)
    else:
        if masks is not None:
            rep["error_h1_subdomain"] = discrete_norm(err, "H1", masks.omega_c3e)
            rep["error_h1_omega_c"] = discrete_norm(err, "H1", masks.omega_c)
        else:
            rep["error_h1_subdomain"] = discrete_norm(err, "H1")
    rep["error_l2_full"] = discrete_norm(err, "L2")
    return rep

"""Well-posed forward solvers used to synthesize data: heat (theta scheme) and wave (leapfrog)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..fields import CoefficientSet, ScalarField, operator_matrix, resolve, validate_ellipticity
from ..grid import ConfigurationError, Grid


class StabilityError(ValueError):
    pass


class SupportLeakError(ValueError):
    pass


def _spatial(grid: Grid) -> Grid:
    if grid.time_axis is None:
        raise ConfigurationError("forward solvers need a grid with a time axis")
    if grid.time_axis != grid.ndim - 1:
        raise ConfigurationError("the time axis must be the last axis")
    return grid.sub_grid(grid.space_axes)


def _spatial_coeffs(coeffs: CoefficientSet) -> CoefficientSet:
    return CoefficientSet("elliptic", coeffs.principal, coeffs.drift, coeffs.b0)


def _sample_st(value, grid: Grid) -> np.ndarray:
    if value is None:
        return np.zeros(grid.shape)
    return resolve(value, grid)


def forward_heat(
    coeffs: CoefficientSet,
    g,
    p,
    grid: Grid,
    *,
    f=None,
    scheme: str = "euler",
    substeps: int = 1,
) -> ScalarField:
    """Solve w_t = L w + f forward in time with w(., t_min) = g and w = p on the lateral boundary.

    ``scheme`` is "euler" (implicit, default), "crank-nicolson" or "explicit"; the
    explicit scheme enforces dt <= dx^2 / (2 mu2) per axis.
    """
    thetas = {"euler": 1.0, "crank-nicolson": 0.5, "explicit": 0.0}
    if scheme not in thetas:
        raise ConfigurationError(f"unknown scheme {scheme!r}; expected one of {tuple(thetas)}")
    theta = thetas[scheme]
    sgrid = _spatial(grid)
    sc = _spatial_coeffs(coeffs)
    tax = grid.axes[grid.time_axis]
    nt = tax.n
    dt = tax.spacing / substeps
    if scheme == "explicit":
        _, mu2 = validate_ellipticity(sc, sgrid)
        limit = min(h * h for h in sgrid.spacing) / (2 * mu2 * sgrid.ndim)
        if dt > limit * (1 + 1e-12):
            raise StabilityError(f"explicit step dt = {dt:.3g} exceeds the stability bound {limit:.3g}")
    L = operator_matrix(sc, sgrid).tolil()
    bnd = sgrid.boundary_mask.ravel()
    # lateral nodes carry Dirichlet rows
    L[np.flatnonzero(bnd), :] = 0
    L = L.tocsr()
    n = sgrid.size
    I = sp.identity(n, format="csr")
    keep = sp.diags((~bnd).astype(float))
    lhs = (I - theta * dt * L).tocsc()
    rhs_op = (keep @ (I + (1 - theta) * dt * L)).tocsr()
    solver = spla.splu(lhs) if theta > 0 else None

    g_arr = np.broadcast_to(resolve(g, sgrid), sgrid.shape).ravel()
    p_arr = _sample_st(p, grid).reshape(n, nt)
    f_arr = _sample_st(f, grid).reshape(n, nt)

    out = np.empty((n, nt))
    w = g_arr.copy()
    w[bnd] = p_arr[bnd, 0]
    out[:, 0] = w
    for k in range(nt - 1):
        for j in range(substeps):
            s0 = j / substeps
            s1 = (j + 1) / substeps
            # linear interpolation of lateral data and source inside one output interval
            pk = p_arr[:, k] * (1 - s1) + p_arr[:, k + 1] * s1
            f0 = f_arr[:, k] * (1 - s0) + f_arr[:, k + 1] * s0
            f1 = f_arr[:, k] * (1 - s1) + f_arr[:, k + 1] * s1
            b = rhs_op @ w + dt * ((1 - theta) * f0 + theta * f1) * (~bnd)
            b[bnd] = pk[bnd]
            w = solver.solve(b) if solver is not None else b
        out[:, k + 1] = w
    return ScalarField(grid, out.reshape(grid.shape))


@dataclass(eq=False)
class WaveResult:
    field: ScalarField  # solution restricted to the G grid
    p: np.ndarray  # Dirichlet traces, shape (2, nt): left, right end
    p_bar: np.ndarray  # outward normal derivatives, shape (2, nt)
    full: np.ndarray  # solution on the enlarged spatial grid, shape (nx_big, nt)
    x_full: np.ndarray
    energy: np.ndarray  # discrete energy per output time


def forward_wave(
    a,
    f0,
    grid: Grid,
    *,
    a_bounds: tuple[float, float] = (1.0, 1.0),
    cfl: float = 0.5,
    pad_cells: int = 4,
) -> WaveResult:
    """Leapfrog for a(x) u_tt = u_xx on an enlarged line with u(.,0) = f0, u_t(.,0) = 0.

    ``grid`` is the 1-D space x time grid on G x [0, T]; the enlarged domain adds
    R + T/sqrt(a_l) + ``pad_cells`` cells on each side so that nothing reflected from
    its edge returns to G before T. Traces are read at the endpoints of G; the
    normal derivative uses the second-order one-sided difference on G's nodes.
    """
    sgrid = _spatial(grid)
    if sgrid.ndim != 1:
        raise ConfigurationError("forward_wave supports one spatial dimension")
    xa = sgrid.axes[0]
    tax = grid.axes[grid.time_axis]
    if tax.lo != 0.0:
        raise ConfigurationError("wave data start at t = 0")
    a_l, a_u = a_bounds
    dx = xa.spacing
    T = tax.hi
    R = 0.5 * (xa.hi - xa.lo)
    width = R + T / math.sqrt(a_l)
    pad = int(math.ceil(width / dx)) + pad_cells
    nbig = xa.n + 2 * pad
    x = xa.lo + (np.arange(nbig) - pad) * dx
    x[pad : pad + xa.n] = xa.coords

    def on(v, xs):
        if callable(v):
            return np.broadcast_to(np.asarray(v(x=xs), float), xs.shape).astype(float)
        if isinstance(v, str):
            from ..expressions import evaluate

            return evaluate(v, {"x": xs})
        return np.broadcast_to(np.asarray(v, float), xs.shape).astype(float)

    u0 = on(f0, x)
    av = on(a, x)
    if av.min() < a_l - 1e-14 or av.max() > a_u + 1e-14:
        raise ConfigurationError(f"a(x) leaves [{a_l}, {a_u}]")
    inside = (x > xa.lo + 2.5 * dx) & (x < xa.hi - 2.5 * dx)
    scale = max(np.abs(u0).max(), 1e-300)
    if np.any(np.abs(u0[~inside]) > 1e-12 * scale):
        raise SupportLeakError("initial state is nonzero within two cells of the boundary of G")
    u0 = np.where(inside, u0, 0.0)

    dt_out = tax.spacing
    dt_max = cfl * dx * math.sqrt(a_l)
    sub = max(1, int(math.ceil(dt_out / dt_max - 1e-12)))
    dt = dt_out / sub
    if dt > dx * math.sqrt(a_l) * (1 + 1e-12):
        raise StabilityError(f"CFL violated: dt = {dt:.3g} > dx sqrt(a_l) = {dx * math.sqrt(a_l):.3g}")
    r = (dt / dx) ** 2 / av

    def lap(u):
        out = np.zeros_like(u)
        out[1:-1] = u[2:] - 2 * u[1:-1] + u[:-2]
        return out

    nt = tax.n
    full = np.empty((nbig, nt))
    full[:, 0] = u0
    prev = u0.copy()
    cur = u0 + 0.5 * r * lap(u0)
    cur[0] = cur[-1] = 0.0
    energy = np.empty(nt)
    energy[0] = _energy(av, u0, np.zeros_like(u0), dx)
    steps_done = 1
    for k in range(1, nt):
        while steps_done < k * sub:
            nxt = 2 * cur - prev + r * lap(cur)
            nxt[0] = nxt[-1] = 0.0
            prev, cur = cur, nxt
            steps_done += 1
        full[:, k] = cur
        # velocity from one more step for the energy diagnostic
        nxt = 2 * cur - prev + r * lap(cur)
        energy[k] = _energy(av, cur, (nxt - prev) / (2 * dt), dx)
    G = full[pad : pad + xa.n]
    p = np.stack([G[0], G[-1]])
    h = dx
    left = -(-3 * G[0] + 4 * G[1] - G[2]) / (2 * h)
    right = (3 * G[-1] - 4 * G[-2] + G[-3]) / (2 * h)
    return WaveResult(ScalarField(grid, G), p, np.stack([left, right]), full, x, energy)


def _energy(av, u, ut, dx):
    ux = np.diff(u) / dx
    return float(0.5 * np.sum(av * ut * ut) * dx + 0.5 * np.sum(ux * ux) * dx)

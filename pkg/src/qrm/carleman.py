"""Carleman weight functions, the subdomains they carve out, rate exponents and an
integral-form numerical check of the Carleman inequality."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import CoefficientSet, ScalarField, axis_derivative, operator_matrix
from .grid import BoundaryClassification, ConfigurationError, Grid

WEIGHT_KINDS = ("elliptic", "parabolic-lateral", "reversed-time", "hyperbolic")


class WeightDomainError(ValueError):
    pass


class EmptySubdomainError(ValueError):
    pass


class NonCompactSupportError(ValueError):
    pass


@dataclass(frozen=True)
class CarlemanWeight:
    """Weight family phi_lambda.

    elliptic:          psi = x1 + |xbar|^2/X^2 + a,            phi = exp(lam * psi^-nu)
    parabolic-lateral: psi = x1 + |xbar|^2/X^2 + t^2/T^2 + a,  phi = exp(lam * psi^-nu)
    reversed-time:     phi = (k + t)^-lam,  k defaults to T
    hyperbolic:        xi = |x - x0|^2 - eta t^2,              phi = exp(lam * xi)
    """

    kind: str
    lam: float = 1.0
    a: float = 0.1
    c: float = 0.6
    X: float = 1.0
    nu: float = 3.0
    T: float = 1.0
    k: float | None = None
    eta: float = 0.5
    x0: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ConfigurationError(f"unknown weight kind {self.kind!r}; expected one of {WEIGHT_KINDS}")
        if self.kind in ("elliptic", "parabolic-lateral"):
            if not 0 < self.a < self.c < 1:
                raise ConfigurationError(f"need 0 < a < c < 1, got a={self.a}, c={self.c}")
            if self.X <= 0 or self.nu <= 0:
                raise ConfigurationError("X and nu must be positive")
        if self.kind in ("parabolic-lateral", "reversed-time") and self.T <= 0:
            raise ConfigurationError("T must be positive")
        if self.kind == "reversed-time":
            if self.k_eff <= 0:
                raise ConfigurationError(f"k must be positive, got {self.k_eff}")
            if self.lam <= 1:
                raise ConfigurationError(f"reversed-time weight needs lambda > 1, got {self.lam}")
        if self.kind == "hyperbolic" and not 0 < self.eta < 1:
            raise ConfigurationError(f"eta must lie in (0, 1), got {self.eta}")
        object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)))

    @property
    def k_eff(self) -> float:
        return self.T if self.k is None else self.k

    def with_lambda(self, lam: float) -> "CarlemanWeight":
        return CarlemanWeight(**{**self.__dict__, "lam": lam})

    def psi(self, x: Sequence[np.ndarray], t=None) -> np.ndarray:
        x = [np.asarray(v, dtype=float) for v in x]
        out = x[0] + self.a
        for xb in x[1:]:
            out = out + xb**2 / self.X**2
        if self.kind == "parabolic-lateral":
            if t is None:
                raise WeightDomainError("parabolic-lateral weight needs a time coordinate")
            out = out + np.asarray(t, dtype=float) ** 2 / self.T**2
        return out

    def xi(self, x: Sequence[np.ndarray], t) -> np.ndarray:
        x = [np.asarray(v, dtype=float) for v in x]
        if len(self.x0) not in (1, len(x)):
            raise WeightDomainError(f"x0 has {len(self.x0)} components for {len(x)} spatial axes")
        x0 = self.x0 if len(self.x0) == len(x) else self.x0 * len(x)
        r2 = sum((xi - c) ** 2 for xi, c in zip(x, x0))
        return r2 - self.eta * np.asarray(t, dtype=float) ** 2

    def exponent(self, x: Sequence[np.ndarray], t=None) -> np.ndarray:
        """s with phi = exp(lam * s)."""
        if self.kind in ("elliptic", "parabolic-lateral"):
            p = self.psi(x, t)
            if np.any(p <= 0):
                raise WeightDomainError("psi <= 0 where psi^-nu is required")
            return p ** (-self.nu)
        if self.kind == "hyperbolic":
            return self.xi(x, t)
        base = self.k_eff + np.asarray(t, dtype=float)
        if np.any(base <= 0):
            raise WeightDomainError("k + t <= 0")
        return -np.log(base)

    def log_weight(self, x: Sequence[np.ndarray], t=None) -> np.ndarray:
        return self.lam * self.exponent(x, t)


def _split(grid: Grid) -> tuple[list[np.ndarray], np.ndarray | None]:
    mesh = grid.mesh
    x = [mesh[i] for i in grid.space_axes]
    t = mesh[grid.time_axis] if grid.time_axis is not None else None
    return x, t


def evaluate_weight(w: CarlemanWeight, x: Sequence[float] | Sequence[np.ndarray], t=None):
    """phi_lambda at a point (or arrays of points). Overflows to inf for very large lambda;
    use ``w.log_weight`` in that regime."""
    with np.errstate(over="ignore"):
        out = np.exp(w.log_weight(x, t))
    return float(out) if np.ndim(out) == 0 else out


def weight_field(w: CarlemanWeight, grid: Grid) -> np.ndarray:
    x, t = _split(grid)
    with np.errstate(over="ignore"):
        return np.exp(w.log_weight(x, t))


@dataclass(frozen=True, eq=False)
class SubdomainMasks:
    omega_c: np.ndarray
    omega_c3e: np.ndarray
    gamma_c: np.ndarray
    shell: np.ndarray
    eps: float
    c: float
    exponent: np.ndarray | None = None  # psi^-nu per node for the psi-based kinds

    @property
    def closure(self) -> np.ndarray:
        return self.omega_c | self.gamma_c | self.shell


def _mask_shell(mask: np.ndarray) -> np.ndarray:
    """Nodes of ``mask`` with an axis neighbour outside it (or on the grid edge)."""
    out = np.zeros_like(mask)
    for d in range(mask.ndim):
        for shift in (1, -1):
            nb = np.roll(mask, shift, axis=d)
            idx = [slice(None)] * mask.ndim
            idx[d] = 0 if shift == 1 else -1
            nb[tuple(idx)] = False
            out |= mask & ~nb
    return out


def admissible_eps(w: CarlemanWeight, c: float | None = None) -> tuple[float, float]:
    c = w.c if c is None else c
    if w.kind in ("elliptic", "parabolic-lateral"):
        return 0.0, (c - w.a) / 3
    if w.kind == "reversed-time":
        return 0.0, w.T / 2
    return 0.0, math.inf


def check_eps(w: CarlemanWeight, eps: float, c: float | None = None) -> None:
    lo, hi = admissible_eps(w, c)
    if not lo < eps < hi:
        if w.kind in ("elliptic", "parabolic-lateral"):
            raise ConfigurationError(
                f"eps = {eps} outside the admissible interval (0, (c - a)/3) = (0, {hi:.6g})"
            )
        if w.kind == "reversed-time":
            raise ConfigurationError(f"eps = {eps} outside the admissible interval (0, T/2) = (0, {hi:.6g})")
        raise ConfigurationError(f"eps must be positive, got {eps}")


def build_masks(
    w: CarlemanWeight, grid: Grid, bc: BoundaryClassification, c: float | None = None, eps: float = 0.05
) -> SubdomainMasks:
    """Node masks of Omega_c, Omega_{c+3eps}, Gamma_c and the level-set shell.

    For the reversed-time kind Omega_c is the whole cylinder and the shrunk set is
    Q_{T-eps} = {t < T - eps}.
    """
    c = w.c if c is None else c
    check_eps(w, eps, c)
    x, t = _split(grid)
    acc = bc.accessible
    if w.kind in ("elliptic", "parabolic-lateral"):
        psi = w.psi(x, t)
        tol = 1e-12 * max(1.0, grid.axes[grid.space_axes[0]].hi - grid.axes[grid.space_axes[0]].lo)
        inside = x[0] > tol
        omega = inside & (psi < c)
        omega3 = inside & (psi < c - 3 * eps)
        gamma = (np.abs(x[0]) <= tol) & (psi < c) & acc
    elif w.kind == "hyperbolic":
        xi = w.xi(x, t)
        omega = xi > c
        omega3 = xi > c + 3 * eps
        gamma = acc & omega
    else:
        omega = np.ones(grid.shape, dtype=bool)
        t_hi = grid.axes[grid.time_axis].hi
        omega3 = t < t_hi - eps
        gamma = acc.copy()
    if not omega3.any():
        raise EmptySubdomainError(f"Omega_(c+3eps) is empty for c={c}, eps={eps}")
    s = w.exponent(x, t) if w.kind in ("elliptic", "parabolic-lateral") else None
    return SubdomainMasks(omega, omega3 & omega, gamma, _mask_shell(omega), float(eps), float(c), s)


@dataclass(frozen=True)
class RateParameters:
    m: float | None
    beta: float
    alpha: float
    exponent: float
    rule: str  # "holder", "holder-reversed", "lipschitz"
    beta_in_range: bool = True
    beta_consistent: float | None = None
    note: str = ""


def holder_beta(m: float, eps: float) -> float:
    return 2 * eps / (3 * m + 2 * eps)


def reversed_beta(eps: float, T: float) -> float:
    """Exponent as printed for the backward-heat Hoelder estimate."""
    return -math.log(1 - eps / T) / (2 * math.log(1 - eps / (2 * T)))


def reversed_beta_consistent(eps: float, T: float) -> float:
    """Exponent implied by (1 - eps/2T)^(2 lam) = delta^(2 beta) with (2 - eps/T)^(2 lam) = 1/delta."""
    return -math.log(1 - eps / (2 * T)) / (2 * math.log(2 - eps / T))


def rate_parameters(w: CarlemanWeight, masks: SubdomainMasks | None, eps: float, alpha: float) -> RateParameters:
    if not 0 < alpha <= 1:
        raise ConfigurationError(f"alpha must lie in (0, 1], got {alpha}")
    if w.kind == "hyperbolic":
        return RateParameters(None, 1.0, alpha, 1.0, "lipschitz")
    if w.kind == "reversed-time":
        if not 0 < eps < w.T / 2:
            raise ConfigurationError(f"eps = {eps} outside the admissible interval (0, T/2) = (0, {w.T / 2})")
        beta = reversed_beta(eps, w.T)
        ok = 0 < beta < 0.5
        bc_ = reversed_beta_consistent(eps, w.T)
        note = "" if ok else f"printed beta {beta:.6g} outside (0, 1/2); consistent value {bc_:.6g}"
        return RateParameters(None, beta, alpha, alpha * beta, "holder-reversed", ok, bc_, note)
    if masks is None:
        raise ConfigurationError("masks required to compute m")
    check_eps(w, eps, masks.c)
    closure = masks.closure
    if not closure.any() or masks.exponent is None:
        raise EmptySubdomainError("Omega_c is empty or carries no exponent values")
    # node max of psi^-nu over the closure of Omega_c
    m = float(masks.exponent[closure].max())
    beta = holder_beta(m, eps)
    return RateParameters(m, beta, alpha, alpha * beta, "holder", 0 < beta < 1)


def lambda_of_delta(rule: str, delta: float, *, m: float = 1.0, eps: float = 0.0, T: float = 1.0) -> float:
    """Carleman parameter balancing the data and a-priori terms.

    rule "holder": (2/(3m + 2 eps)) ln(1/delta); "log": ln(1/delta)/(2 ln 2);
    "holder-reversed": ln(1/delta)/(2 ln(2 - eps/T)).
    """
    if not 0 < delta < 1:
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")
    L = math.log(1 / delta)
    if rule == "holder":
        return 2 / (3 * m + 2 * eps) * L
    if rule == "log":
        return L / (2 * math.log(2))
    if rule == "holder-reversed":
        if not 0 <= eps < T:
            raise ConfigurationError(f"eps = {eps} must lie in [0, T) so that 2 - eps/T > 1")
        return L / (2 * math.log(2 - eps / T))
    raise ConfigurationError(f"unknown lambda rule {rule!r}")


# ----------------------------------------------------------------------------- diagnostic


@dataclass(frozen=True)
class CarlemanDiagnostic:
    lambdas: tuple[float, ...]
    c_fit: tuple[float, ...]
    argmin: tuple[int, ...]  # which test field attains the min for each lambda
    lam_cut: float
    floor: float  # min of c_fit over lambda >= lam_cut

    def rows(self) -> list[dict]:
        return [dict(lam=l, c_fit=c, test=i) for l, c, i in zip(self.lambdas, self.c_fit, self.argmin)]


def _check_support(u: ScalarField, omega: np.ndarray | None) -> None:
    v = u.values
    nz = v != 0
    if not nz.any():
        raise NonCompactSupportError("test field vanishes identically")
    edge = np.zeros_like(nz)
    for d in range(v.ndim):
        idx = [slice(None)] * v.ndim
        for pos in (0, 1, -1, -2):
            idx[d] = pos
            edge[tuple(idx)] = True
    if (nz & edge).any():
        raise NonCompactSupportError("test field is nonzero within two layers of the grid boundary")
    if omega is not None and (nz & ~omega).any():
        raise NonCompactSupportError("test field is nonzero outside Omega_c")


def carleman_ratio_diagnostic(
    coeffs: CoefficientSet,
    w: CarlemanWeight,
    tests: Sequence[ScalarField],
    lambdas: Sequence[float],
    *,
    lam_cut: float | None = None,
    omega: np.ndarray | None = None,
) -> CarlemanDiagnostic:
    """C_fit(lam) = min over tests of  int (A0 u)^2 phi^2 / (lam int |grad u|^2 phi^2 + lam^3 int u^2 phi^2)."""
    if not tests:
        raise ValueError("empty test set")
    grid = tests[0].grid
    for u in tests:
        if u.grid is not grid:
            raise ValueError("all test fields must share one grid")
        _check_support(u, omega)
    A0 = operator_matrix(coeffs, grid, principal_only=True)
    grads = [axis_derivative(grid, d, 1) for d in range(grid.ndim)]
    x, t = _split(grid)
    s = w.exponent(x, t)
    wq = grid.weights
    pre = []
    for u in tests:
        f = u.flat
        a0 = (A0 @ f).reshape(grid.shape)
        g2 = sum((D @ f).reshape(grid.shape) ** 2 for D in grads)
        pre.append((a0**2, g2, u.values**2))
    c_fit, argmin = [], []
    for lam in lambdas:
        best, who = math.inf, -1
        for i, (a2, g2, u2) in enumerate(pre):
            support = (a2 > 0) | (g2 > 0) | (u2 > 0)
            smax = s[support].max()
            phi2 = np.exp(2 * lam * (s - smax)) * wq  # common factor cancels in the ratio
            num = float(np.sum(a2 * phi2))
            den = lam * float(np.sum(g2 * phi2)) + lam**3 * float(np.sum(u2 * phi2))
            r = num / den
            if r < best:
                best, who = r, i
        c_fit.append(best)
        argmin.append(who)
    lam_cut = min(lambdas) if lam_cut is None else lam_cut
    sel = [c for l, c in zip(lambdas, c_fit) if l >= lam_cut]
    return CarlemanDiagnostic(tuple(map(float, lambdas)), tuple(c_fit), tuple(argmin), lam_cut, min(sel) if sel else math.nan)

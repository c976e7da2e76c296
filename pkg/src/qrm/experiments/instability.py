"""Growth of Fourier modes under a naive backward heat march."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..grid import ConfigurationError


@dataclass(frozen=True)
class AmplificationRow:
    n: int
    analytic: float  # exp(n^2 T)
    observed: float  # growth of the mode-n coefficient over the march
    relative_gap: float


def naive_backward_march(u0: np.ndarray, dx: float, T: float, dt: float) -> np.ndarray:
    """March u_t = -u_xx forward in t (explicit, zero Dirichlet ends); no regularization."""
    steps = int(round(T / dt))
    if steps == 0:
        return u0.copy()
    u = u0.copy()
    r = dt / dx**2
    for _ in range(steps):
        lap = np.zeros_like(u)
        lap[1:-1] = u[2:] - 2 * u[1:-1] + u[:-2]
        u = u - r * lap
        u[0] = u[-1] = 0.0
    return u


def backward_instability_demo(
    modes, T: float, *, nx: int = 21, dt: float = 1e-3
) -> list[AmplificationRow]:
    """Amplification of sin(n x) on (0, pi) over time T: exp(n^2 T) against the naive march.

    The march is run on each mode separately and the growth is read from the
    discrete sine coefficient, so round-off in other modes does not contaminate it.
    """
    if T < 0:
        raise ConfigurationError("T must be nonnegative")
    x = np.linspace(0.0, math.pi, nx)
    dx = x[1] - x[0]
    rows = []
    for n in modes:
        n = int(n)
        if n < 1:
            raise ConfigurationError("mode numbers start at 1")
        s = np.sin(n * x)
        uT = naive_backward_march(s, dx, T, dt)
        observed = float(uT @ s / (s @ s))
        analytic = math.exp(n * n * T)
        rows.append(AmplificationRow(n, analytic, observed, abs(observed - analytic) / analytic))
    return rows

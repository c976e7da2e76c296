import math

import numpy as np
import pytest

from qrm.experiments.forward import StabilityError, SupportLeakError, forward_heat, forward_wave
from qrm.experiments.instability import backward_instability_demo
from qrm.fields import CoefficientSet
from qrm.grid import Axis, Grid

HEAT = CoefficientSet("parabolic")


def heat_grid(nx, nt, T=0.1):
    return Grid((Axis("x", 0.0, math.pi, nx), Axis("t", 0.0, T, nt, "time")))


def heat_error(grid, scheme="euler"):
    u = forward_heat(HEAT, "sin(x)", 0.0, grid, scheme=scheme)
    x, t = grid.mesh
    exact = np.exp(-t) * np.sin(x)
    return np.linalg.norm(u.values[:, -1] - exact[:, -1]) / np.linalg.norm(exact[:, -1])


@pytest.mark.parametrize("scheme", ["euler", "crank-nicolson"])
def test_heat_separable_solution(scheme):
    assert heat_error(heat_grid(201, 201), scheme) <= 1e-2


def test_heat_zero_data():
    u = forward_heat(HEAT, 0.0, 0.0, heat_grid(21, 11))
    assert np.all(u.values == 0)


def test_heat_euler_time_order():
    errs = [heat_error(heat_grid(801, nt, T=0.5)) for nt in (6, 11, 21)]
    slope = np.polyfit(np.log([0.1, 0.05, 0.025]), np.log(errs), 1)[0]
    assert slope >= 0.9


def test_heat_source_term():
    # u = t x (pi - x): u_t - u_xx = x (pi - x) + 2 t
    grid = heat_grid(41, 21)
    u = forward_heat(HEAT, 0.0, 0.0, grid, f="x*(pi - x) + 2*t", scheme="crank-nicolson")
    x, t = grid.mesh
    np.testing.assert_allclose(u.values, t * x * (math.pi - x), atol=1e-10)


def test_explicit_stability_bound():
    with pytest.raises(StabilityError):
        forward_heat(HEAT, "sin(x)", 0.0, heat_grid(101, 11), scheme="explicit")
    u = forward_heat(HEAT, "sin(x)", 0.0, heat_grid(21, 11), scheme="explicit", substeps=20)
    assert np.isfinite(u.values).all()


def wave_grid(nx=801, nt=301, T=1.5):
    return Grid((Axis("x", -1.0, 1.0, nx), Axis("t", 0.0, T, nt, "time")))


def bump(x):
    return np.exp(-((x / 0.2) ** 2)) * (np.abs(x) < 0.9)


def test_wave_zero_initial_state():
    w = forward_wave(1.0, 0.0, wave_grid(101, 31))
    assert np.all(w.p == 0) and np.all(w.p_bar == 0) and np.all(w.full == 0)


def test_wave_traces_match_dalembert():
    g = wave_grid()
    w = forward_wave(1.0, bump, g)
    t = g.axes[1].coords
    for side, xe in ((0, -1.0), (1, 1.0)):
        exact = 0.5 * (bump(xe - t) + bump(xe + t))
        assert np.abs(w.p[side] - exact).max() <= 1e-3 * np.abs(exact).max()


def test_wave_energy_conserved():
    w = forward_wave(1.0, bump, wave_grid())
    assert np.abs(w.energy / w.energy[0] - 1).max() <= 1e-3


def test_wave_support_leak():
    with pytest.raises(SupportLeakError):
        forward_wave(1.0, lambda x: np.ones_like(x), wave_grid(101, 31))


def test_instability_trivial_cases():
    assert backward_instability_demo([1], 0.0)[0].observed == pytest.approx(1.0)
    assert backward_instability_demo([2], 0.5)[0].analytic == pytest.approx(math.e**2, rel=1e-15)


def test_instability_growth_matches_analytic():
    rows = backward_instability_demo([1, 2, 3], 0.1)
    assert all(r.relative_gap <= 0.05 for r in rows)
    assert rows[0].observed < rows[1].observed < rows[2].observed

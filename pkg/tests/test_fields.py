import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from _manufactured import KINDS, halving_slope
from qrm.fields import (
    CoefficientSet,
    DegenerateCoefficientsError,
    EmptyMaskError,
    GridKindMismatch,
    ScalarField,
    apply_operator,
    discrete_norm,
    validate_ellipticity,
)
from qrm.grid import Axis, Grid


@pytest.fixture(scope="module")
def square():
    return Grid((Axis("x1", 0, 1, 11), Axis("x2", 0, 1, 13)))


@pytest.fixture(scope="module")
def cylinder():
    return Grid((Axis("x", 0, 1, 11), Axis("t", 0, 1, 9, "time")))


def test_laplacian_exact_on_quadratic(square):
    u = ScalarField.from_function(square, "x1**2 + x2**2")
    np.testing.assert_allclose(apply_operator(CoefficientSet("elliptic"), u).values, 4.0, atol=1e-9)


def test_heat_operator_on_linear_time(cylinder):
    u = ScalarField.from_function(cylinder, "t")
    np.testing.assert_allclose(apply_operator(CoefficientSet("parabolic"), u).values, 1.0, atol=1e-10)


def test_wave_operator_on_quadratic(cylinder):
    u = ScalarField.from_function(cylinder, "x**2 + t**2")
    np.testing.assert_allclose(apply_operator(CoefficientSet("hyperbolic"), u).values, 0.0, atol=1e-9)


def test_anisotropic_coefficient(square):
    c = CoefficientSet("elliptic", principal=[[2.0, 0.0], [0.0, 1.0]])
    u = ScalarField.from_function(square, "x1**2")
    np.testing.assert_allclose(apply_operator(c, u).values, 4.0, atol=1e-9)


def test_kind_grid_mismatch(square, cylinder):
    u = ScalarField.zeros(square)
    with pytest.raises(GridKindMismatch):
        apply_operator(CoefficientSet("parabolic"), u)
    with pytest.raises(GridKindMismatch):
        apply_operator(CoefficientSet("elliptic", principal=[[1.0]]), u)


@pytest.mark.parametrize("kind", KINDS)
def test_mesh_halving_slope(kind):
    slope, errs = halving_slope(kind)
    assert slope >= 1.8, errs


@given(
    arrays(float, (11, 13), elements=st.floats(-1, 1)),
    arrays(float, (11, 13), elements=st.floats(-1, 1)),
    st.floats(-3, 3),
    st.floats(-3, 3),
)
def test_linearity(v1, v2, c1, c2):
    grid = Grid((Axis("x1", 0, 1, 11), Axis("x2", 0, 1, 13)))
    c = CoefficientSet("elliptic", principal=[["1 + x1", 0.1], [0.1, 2.0]], drift=[1.0, "x2"], b0=-0.5)
    u1, u2 = ScalarField(grid, v1), ScalarField(grid, v2)
    lhs = apply_operator(c, c1 * u1 + c2 * u2).values
    rhs = c1 * apply_operator(c, u1).values + c2 * apply_operator(c, u2).values
    scale = max(1.0, np.abs(lhs).max())
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale


def test_ellipticity_identity(square):
    assert validate_ellipticity(CoefficientSet("elliptic"), square) == pytest.approx((1.0, 1.0))


def test_ellipticity_diagonal(square):
    mu = validate_ellipticity(CoefficientSet("elliptic", principal=[[2.0, 0.0], [0.0, 0.5]]), square)
    assert mu == pytest.approx((0.5, 2.0), abs=1e-12)


def test_ellipticity_indefinite(square):
    with pytest.raises(DegenerateCoefficientsError):
        validate_ellipticity(CoefficientSet("elliptic", principal=[[1.0, 0.0], [0.0, -1.0]]), square)


def test_asymmetric_principal_rejected(square):
    with pytest.raises(DegenerateCoefficientsError, match="symmetric"):
        CoefficientSet("elliptic", principal=[[1.0, 0.1], [0.0, 1.0]]).resolved(square)


def test_hyperbolic_a_bounds(cylinder):
    with pytest.raises(DegenerateCoefficientsError):
        CoefficientSet("hyperbolic", a="1 + x", a_bounds=(1.0, 1.5)).resolved(cylinder)


@pytest.mark.parametrize("order", ["L2", "H1", "H2"])
def test_zero_norm(square, order):
    assert discrete_norm(ScalarField.zeros(square), order) == 0.0


def test_constant_l2_is_root_measure(square):
    one = ScalarField.from_function(square, 1.0)
    assert discrete_norm(one, "L2") == pytest.approx(1.0, rel=1e-14)
    # a node mask stands for the union of its dual cells: here x1 <= 0.55
    mask = square.mesh[0] <= 0.5
    assert abs(discrete_norm(one, "L2", mask) ** 2 - 0.55) <= square.cell_volume


def test_sine_l2_quadrature():
    g = Grid((Axis("x", 0, 1, 201),))
    u = ScalarField.from_function(g, "sin(pi*x)")
    assert abs(discrete_norm(u, "L2") - 1 / math.sqrt(2)) <= 1e-3


def test_h1_norm_of_sine():
    g = Grid((Axis("x", 0, 1, 401),))
    u = ScalarField.from_function(g, "sin(pi*x)")
    assert discrete_norm(u, "H1") == pytest.approx(math.sqrt(0.5 + math.pi**2 / 2), rel=1e-4)


def test_empty_mask(square):
    with pytest.raises(EmptyMaskError):
        discrete_norm(ScalarField.zeros(square), "L2", np.zeros(square.shape, bool))


@given(
    arrays(float, (11, 13), elements=st.floats(-2, 2)),
    arrays(bool, (11, 13)),
    arrays(bool, (11, 13)),
    st.sampled_from(["L2", "H1", "H2"]),
)
def test_norm_monotone_in_mask(v, m1, extra, order):
    grid = Grid((Axis("x1", 0, 1, 11), Axis("x2", 0, 1, 13)))
    u = ScalarField(grid, v)
    m2 = m1 | extra
    try:
        small = discrete_norm(u, order, m1)
    except EmptyMaskError:
        small = 0.0
    try:
        big = discrete_norm(u, order, m2)
    except EmptyMaskError:
        big = 0.0
    assert small <= big * (1 + 1e-12) + 1e-15

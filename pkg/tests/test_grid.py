import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrm.grid import Axis, ConfigurationError, Grid, Tag, build_grid, classify_boundary


def test_spacing_from_node_count():
    g = build_grid([{"name": "x", "min": 0.0, "max": 1.0, "n": 11}])
    assert g.spacing == (0.1,)
    assert g.axes[0].coords[-1] == 1.0


def test_node_count_is_product():
    g = build_grid([{"name": "x", "min": 0, "max": 1, "n": 11}, {"name": "y", "min": 0, "max": 2, "n": 21}])
    assert g.size == 231
    assert g.shape == (11, 21)


@pytest.mark.parametrize("n", [1, 3, 4])
def test_too_few_nodes_rejected(n):
    with pytest.raises(ConfigurationError, match="at least 5"):
        Axis("x", 0.0, 1.0, n)


def test_bad_descriptors():
    with pytest.raises(ConfigurationError, match="missing field"):
        build_grid([{"name": "x", "min": 0, "n": 5}])
    with pytest.raises(ConfigurationError):
        Axis("x", 1.0, 0.0, 5)
    with pytest.raises(ConfigurationError, match="duplicate"):
        Grid((Axis("x", 0, 1, 5), Axis("x", 0, 1, 5)))
    with pytest.raises(ConfigurationError, match="time"):
        Grid((Axis("t", 0, 1, 5, "time"), Axis("s", 0, 1, 5, "time")))


shapes = st.lists(st.integers(5, 9), min_size=1, max_size=3)


@given(shapes)
def test_index_round_trip(ns):
    g = Grid(tuple(Axis(f"x{i}", 0.0, 1.0, n) for i, n in enumerate(ns)))
    lin = np.arange(g.size)
    assert np.array_equal(g.ravel(g.unravel(lin)), lin)
    mi = np.indices(g.shape).reshape(g.ndim, -1)
    assert np.array_equal(g.ravel(tuple(mi)), lin)  # lexicographic order


@given(shapes)
def test_boundary_count_matches_enumeration(ns):
    g = Grid(tuple(Axis(f"x{i}", 0.0, 1.0, n) for i, n in enumerate(ns)))
    brute = sum(
        any(i == 0 or i == n - 1 for i, n in zip(idx, ns)) for idx in itertools.product(*[range(n) for n in ns])
    )
    assert g.boundary_mask.sum() == brute == g.size - np.prod([n - 2 for n in ns])


@given(st.integers(5, 12), st.integers(5, 12))
def test_tags_partition_boundary(n1, n2):
    g = Grid((Axis("x", 0, 1, n1), Axis("t", 0, 1, n2, "time")))
    bc = classify_boundary(g, lambda x, t: x == 0)
    bnd = g.boundary_mask
    assert np.all((bc.tags != Tag.INTERIOR) == bnd)
    counts = sum(bc.count(t) for t in (Tag.ACCESSIBLE, Tag.INACCESSIBLE, Tag.INITIAL, Tag.FINAL))
    assert counts == bnd.sum()


def test_left_edge_accessible():
    g = Grid((Axis("x1", 0, 1, 6), Axis("x2", 0, 1, 7)))
    bc = classify_boundary(g, lambda x1, x2: x1 == 0)
    assert np.all(bc.tags[0] == Tag.ACCESSIBLE)
    assert bc.count(Tag.ACCESSIBLE) == 7
    assert bc.count(Tag.INACCESSIBLE) == g.boundary_mask.sum() - 7
    # corner normals belong to the first axis
    assert bc.normal_axis[0, 0] == 0 and bc.normal_sign[0, 0] == -1


def test_space_time_planes():
    g = Grid((Axis("x", 0, 1, 6), Axis("t", 0, 1, 8, "time")))
    bc = classify_boundary(g, lambda x, t: (x == 0) | (x == 1))
    assert np.all(bc.tags[1:-1, 0] == Tag.INITIAL)
    assert np.all(bc.tags[1:-1, -1] == Tag.FINAL)
    assert np.all(bc.tags[0] == Tag.ACCESSIBLE) and np.all(bc.tags[-1] == Tag.ACCESSIBLE)


def test_no_accessible_nodes():
    g = Grid((Axis("x", 0, 1, 6), Axis("y", 0, 1, 6)))
    bc = classify_boundary(g, lambda x, y: np.zeros_like(x, bool))
    assert bc.count(Tag.ACCESSIBLE) == 0
    assert bc.accessible_faces() == []


def test_trapezoid_weights_integrate_constants():
    g = Grid((Axis("x", 0, 2, 9), Axis("y", -1, 1, 7)))
    assert g.weights.sum() == pytest.approx(4.0, rel=1e-14)

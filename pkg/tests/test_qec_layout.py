import numpy as np
import pytest

from qforge.errors import InvalidDistanceError
from qforge.qec.layout import build_layout


def test_distance_three_layout_frozen():
    """The d=3 patch, worked out by hand from the plaquette rules."""
    layout = build_layout(3)
    assert layout.data_coords == tuple((r, c) for r in range(3) for c in range(3))
    assert layout.x_stabilizers == ((0, 1), (1, 2, 4, 5), (3, 4, 6, 7), (7, 8))
    assert layout.z_stabilizers == ((0, 1, 3, 4), (2, 5), (3, 6), (4, 5, 7, 8))
    assert layout.x_plaquettes == ((0, 1), (1, 2), (2, 1), (3, 2))
    assert layout.z_plaquettes == ((1, 1), (1, 3), (2, 0), (2, 2))
    assert layout.logical_x == (0, 3, 6)
    assert layout.logical_z == (0, 1, 2)


@pytest.mark.parametrize("d", [3, 5, 7])
def test_counts_scale_with_distance(d):
    layout = build_layout(d)
    assert layout.n_data == d * d
    assert layout.n_x == layout.n_z == (d * d - 1) // 2
    assert layout.n_stabilizers == d * d - 1


@pytest.mark.parametrize("d", [3, 5])
def test_stabilizer_weights_are_two_or_four(d):
    layout = build_layout(d)
    for support in layout.x_stabilizers + layout.z_stabilizers:
        assert len(support) in (2, 4)
        assert support == tuple(sorted(support))


@pytest.mark.parametrize("d", [3, 5])
def test_all_stabilizers_commute(d):
    layout = build_layout(d)
    for xs in layout.x_stabilizers:
        for zs in layout.z_stabilizers:
            assert len(set(xs) & set(zs)) % 2 == 0


@pytest.mark.parametrize("d", [3, 5])
def test_logicals_commute_with_stabilizers_and_anticommute(d):
    layout = build_layout(d)
    lx, lz = set(layout.logical_x), set(layout.logical_z)
    assert len(lx) == len(lz) == d
    for zs in layout.z_stabilizers:
        assert len(lx & set(zs)) % 2 == 0
    for xs in layout.x_stabilizers:
        assert len(lz & set(xs)) % 2 == 0
    assert len(lx & lz) % 2 == 1


def test_every_data_qubit_is_checked_by_both_types():
    layout = build_layout(5)
    x_cover = set().union(*map(set, layout.x_stabilizers))
    z_cover = set().union(*map(set, layout.z_stabilizers))
    assert x_cover == z_cover == set(range(layout.n_data))


def test_support_matrices():
    layout = build_layout(3)
    xm = layout.x_support_matrix()
    zm = layout.z_support_matrix()
    assert xm.shape == (4, 9) and zm.shape == (4, 9)
    assert xm.dtype == np.uint8
    assert list(xm.sum(axis=1)) == [len(s) for s in layout.x_stabilizers]
    assert list(xm[0]) == [1, 1, 0, 0, 0, 0, 0, 0, 0]


def test_qubit_index_row_major():
    layout = build_layout(5)
    assert layout.qubit_index(0, 0) == 0
    assert layout.qubit_index(1, 0) == 5
    assert layout.qubit_index(2, 3) == 13


@pytest.mark.parametrize("bad", [1, 2, 4, 0, -3, 3.0, "3"])
def test_invalid_distances_rejected(bad):
    with pytest.raises(InvalidDistanceError):
        build_layout(bad)


def test_layouts_are_cached():
    assert build_layout(3) is build_layout(3)

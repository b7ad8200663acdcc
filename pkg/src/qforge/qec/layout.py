"""Rotated surface-code layout.

Data qubits live on a d x d integer grid, indexed row-major. Stabilizer
plaquettes sit on the dual grid: plaquette (pr, pc) with pr, pc in [0, d]
touches the data qubits {(pr-1, pc-1), (pr-1, pc), (pr, pc-1), (pr, pc)}
that fall inside the grid. Plaquettes are checkerboard-colored: X-type when
pr + pc is odd, Z-type when even. Interior plaquettes (weight 4) are all
kept; on the top and bottom edges only the X-type weight-2 halves are kept,
on the left and right edges only the Z-type halves. Corners are dropped.

This yields d^2 data qubits and (d^2 - 1)/2 stabilizers of each type, all
mutually commuting. The logical X operator is the left column of X's, the
logical Z operator the top row of Z's; they overlap in exactly one qubit
(the corner) and therefore anticommute.

Convention: Z-type stabilizers detect X errors, X-type detect Z errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import InvalidDistanceError

Coord = tuple[int, int]


@dataclass(frozen=True)
class SurfaceCodeLayout:
    distance: int
    data_coords: tuple[Coord, ...]
    x_stabilizers: tuple[tuple[int, ...], ...]
    z_stabilizers: tuple[tuple[int, ...], ...]
    x_plaquettes: tuple[Coord, ...]   # dual-grid positions, parallel to x_stabilizers
    z_plaquettes: tuple[Coord, ...]
    logical_x: tuple[int, ...]
    logical_z: tuple[int, ...]

    @property
    def n_data(self) -> int:
        return len(self.data_coords)

    @property
    def n_x(self) -> int:
        return len(self.x_stabilizers)

    @property
    def n_z(self) -> int:
        return len(self.z_stabilizers)

    @property
    def n_stabilizers(self) -> int:
        return self.n_x + self.n_z

    def qubit_index(self, row: int, col: int) -> int:
        return row * self.distance + col

    def x_support_matrix(self) -> np.ndarray:
        """(n_x, n_data) uint8 incidence matrix of X-type stabilizers."""
        return _support_matrix(self.x_stabilizers, self.n_data)

    def z_support_matrix(self) -> np.ndarray:
        return _support_matrix(self.z_stabilizers, self.n_data)


def _support_matrix(stabilizers, n_data) -> np.ndarray:
    mat = np.zeros((len(stabilizers), n_data), dtype=np.uint8)
    for i, support in enumerate(stabilizers):
        mat[i, list(support)] = 1
    return mat


@lru_cache(maxsize=None)
def build_layout(distance: int) -> SurfaceCodeLayout:
    """Build the distance-d rotated surface-code layout.

    Raises InvalidDistanceError unless d is an odd integer >= 3.
    """
    d = distance
    if not isinstance(d, int) or d < 3 or d % 2 == 0:
        raise InvalidDistanceError(f"distance must be an odd integer >= 3, got {distance!r}")

    data_coords = tuple((r, c) for r in range(d) for c in range(d))

    def qidx(r: int, c: int) -> int:
        return r * d + c

    x_stabs: list[tuple[int, ...]] = []
    z_stabs: list[tuple[int, ...]] = []
    x_plaqs: list[Coord] = []
    z_plaqs: list[Coord] = []

    for pr in range(d + 1):
        for pc in range(d + 1):
            support = tuple(
                qidx(r, c)
                for r in (pr - 1, pr)
                for c in (pc - 1, pc)
                if 0 <= r < d and 0 <= c < d
            )
            if len(support) < 2:
                continue  # corners (weight 1) carry no stabilizer
            is_x = (pr + pc) % 2 == 1
            interior = 1 <= pr <= d - 1 and 1 <= pc <= d - 1
            if interior:
                keep = True
            elif pr in (0, d):
                keep = is_x          # top/bottom edges host X-type halves
            else:
                keep = not is_x      # left/right edges host Z-type halves
            if not keep:
                continue
            if is_x:
                x_stabs.append(tuple(sorted(support)))
                x_plaqs.append((pr, pc))
            else:
                z_stabs.append(tuple(sorted(support)))
                z_plaqs.append((pr, pc))

    layout = SurfaceCodeLayout(
        distance=d,
        data_coords=data_coords,
        x_stabilizers=tuple(x_stabs),
        z_stabilizers=tuple(z_stabs),
        x_plaquettes=tuple(x_plaqs),
        z_plaquettes=tuple(z_plaqs),
        logical_x=tuple(qidx(r, 0) for r in range(d)),
        logical_z=tuple(qidx(0, c) for c in range(d)),
    )
    _check_layout(layout)
    return layout


def _check_layout(layout: SurfaceCodeLayout) -> None:
    """Internal consistency checks; cheap enough to run at build time."""
    d = layout.distance
    expected = (d * d - 1) // 2
    assert layout.n_x == expected and layout.n_z == expected, "stabilizer count mismatch"
    for xs in layout.x_stabilizers:
        for zs in layout.z_stabilizers:
            overlap = len(set(xs) & set(zs))
            assert overlap % 2 == 0, f"anticommuting stabilizer pair {xs} / {zs}"
    lx, lz = set(layout.logical_x), set(layout.logical_z)
    for zs in layout.z_stabilizers:
        assert len(lx & set(zs)) % 2 == 0, "logical X anticommutes with a Z stabilizer"
    for xs in layout.x_stabilizers:
        assert len(lz & set(xs)) % 2 == 0, "logical Z anticommutes with an X stabilizer"
    assert len(lx & lz) % 2 == 1, "logical operators must anticommute"

"""Space-time minimum-weight matching decoder for the rotated surface code.

Detection events live on a graph whose nodes are (stabilizer, round) pairs:

* space edges connect same-type stabilizers that share a data qubit
  (crossing that qubit), weight ``space_weight``;
* time edges connect the same stabilizer in consecutive rounds, weight
  ``time_weight`` (they carry no data correction: a time-like pair is a
  measurement error);
* boundary edges connect a stabilizer to the virtual boundary node through
  the data qubit whose second same-type plaquette falls outside the patch.

Matching is exact up to ``max_exact_defects`` defects per graph per shot: a
recursion over the defect set, memoized on the remaining-defect bitmask,
considering for the lowest live defect either a boundary match or a pairing
with any other live defect. Ties are broken lexicographically on the sorted
pair list (the virtual boundary sorts last), so decoding is deterministic.
Beyond the bound a greedy nearest-pair fallback runs instead and the result
is flagged ``exact=False``.

Corrections are read off the space edges of each matched path; shortest
paths are produced by a breadth-first search that expands neighbors in
(row, col) order, which fixes one canonical path among equals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..errors import (
    InconsistentHistoryError,
    InvalidParamsError,
    TooManyDefectsError,
)
from .layout import SurfaceCodeLayout, build_layout
from .noise import SyndromeHistory

_INF = float("inf")


@dataclass(frozen=True)
class DecoderConfig:
    layout: SurfaceCodeLayout
    space_weight: float = 1.0
    time_weight: float = 1.0
    max_exact_defects: int = 16
    allow_greedy_fallback: bool = True

    def __post_init__(self):
        if self.space_weight <= 0 or self.time_weight <= 0:
            raise InvalidParamsError("matching weights must be positive")
        if self.max_exact_defects < 2:
            raise InvalidParamsError("max_exact_defects must be >= 2")


@dataclass
class CorrectionSet:
    """Suggested Pauli corrections over the data qubits.

    ``x`` flips undo X errors (from the Z-type defect graph), ``z`` flips
    undo Z errors. ``exact`` is False when any graph in the shot exceeded
    the exact-matching bound and fell back to the greedy matcher.
    """

    x: np.ndarray
    z: np.ndarray
    exact: bool = True


class _DefectGraph:
    """Spatial graph over one stabilizer type, with boundary data."""

    def __init__(self, plaquettes, pos_index, couplings, n_data):
        self.n_nodes = len(plaquettes)
        self.plaquettes = plaquettes
        self.n_data = n_data
        adj: list[list[tuple[int, int]]] = [[] for _ in plaquettes]
        boundary: list[list[int]] = [[] for _ in plaquettes]
        for qubit, (pos_a, pos_b) in couplings.items():
            a = pos_index.get(pos_a)
            b = pos_index.get(pos_b)
            if a is not None and b is not None:
                adj[a].append((b, qubit))
                adj[b].append((a, qubit))
            elif a is not None:
                boundary[a].append(qubit)
            elif b is not None:
                boundary[b].append(qubit)
            # both absent cannot happen for a valid layout (every data qubit
            # is seen by at least one stabilizer of each type)
        # deterministic expansion order: neighbors by (row, col)
        for u in range(self.n_nodes):
            adj[u].sort(key=lambda item: plaquettes[item[0]])
            boundary[u].sort()
        self.adj = adj
        self.boundary_edges = boundary
        self._all_pairs()

    def _all_pairs(self):
        n = self.n_nodes
        dist = np.full((n, n), np.inf)
        masks = [[0] * n for _ in range(n)]
        for src in range(n):
            dist[src, src] = 0.0
            seen = {src}
            frontier = [src]
            while frontier:
                nxt = []
                for u in frontier:
                    for v, qubit in self.adj[u]:
                        if v not in seen:
                            seen.add(v)
                            dist[src, v] = dist[src, u] + 1.0
                            masks[src][v] = masks[src][u] ^ (1 << qubit)
                            nxt.append(v)
                frontier = nxt
        self.dist = dist
        self.path_masks = masks

        # multi-source BFS from the virtual boundary node
        bdist = np.full(n, np.inf)
        bmasks = [0] * n
        frontier = []
        for u in range(n):
            if self.boundary_edges[u]:
                bdist[u] = 1.0
                bmasks[u] = 1 << self.boundary_edges[u][0]
                frontier.append(u)
        while frontier:
            nxt = []
            for u in frontier:
                for v, qubit in self.adj[u]:
                    if bdist[v] == np.inf:
                        bdist[v] = bdist[u] + 1.0
                        bmasks[v] = bmasks[u] ^ (1 << qubit)
                        nxt.append(v)
            frontier = nxt
        self.boundary_dist = bdist
        self.boundary_masks = bmasks


def _same_type_couplings(d: int, want_x: bool) -> dict[int, tuple]:
    """Map each data qubit to the two same-type plaquette positions it sits
    between. X-type positions have odd coordinate-sum parity."""
    couplings = {}
    for r in range(d):
        for c in range(d):
            qubit = r * d + c
            corners = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)]
            pair = tuple(p for p in corners if (p[0] + p[1]) % 2 == (1 if want_x else 0))
            couplings[qubit] = pair
    return couplings


@lru_cache(maxsize=None)
def _graphs_for(distance: int) -> tuple[_DefectGraph, _DefectGraph]:
    """(X-type graph, Z-type graph) for a given code distance."""
    layout = build_layout(distance)
    x_index = {pos: i for i, pos in enumerate(layout.x_plaquettes)}
    z_index = {pos: i for i, pos in enumerate(layout.z_plaquettes)}
    xg = _DefectGraph(layout.x_plaquettes, x_index,
                      _same_type_couplings(distance, want_x=True), layout.n_data)
    zg = _DefectGraph(layout.z_plaquettes, z_index,
                      _same_type_couplings(distance, want_x=False), layout.n_data)
    return xg, zg


def _min_weight_matching(defects, pair_cost, boundary_cost):
    """Exact minimum-weight matching with a boundary.

    ``defects`` is a list of opaque items; costs are functions on indices.
    Returns (total_cost, pairs) where pairs is a tuple of (i, j) index pairs
    with j == len(defects) meaning "matched to the boundary". Among optimal
    matchings the lexicographically smallest sorted pair list wins.
    """
    n = len(defects)
    bnd = n  # boundary pseudo-index, sorts after every real defect
    memo: dict[int, tuple[float, tuple]] = {0: (0.0, ())}

    def best(mask: int) -> tuple[float, tuple]:
        cached = memo.get(mask)
        if cached is not None:
            return cached
        i = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << i)
        sub_cost, sub_pairs = best(rest)
        winner = (boundary_cost(i) + sub_cost, ((i, bnd),) + sub_pairs)
        j_mask = rest
        while j_mask:
            j = (j_mask & -j_mask).bit_length() - 1
            j_mask &= j_mask - 1
            cost_ij = pair_cost(i, j)
            if cost_ij == _INF:
                continue
            sc, sp = best(rest ^ (1 << j))
            candidate = (cost_ij + sc, ((i, j),) + sp)
            if candidate < winner:
                winner = candidate
        memo[mask] = winner
        return winner

    return best((1 << n) - 1)


def _greedy_matching(defects, pair_cost, boundary_cost):
    """Nearest-pair fallback for oversized defect sets. Deterministic:
    ties break on the (i, j) index pair."""
    n = len(defects)
    live = set(range(n))
    pairs = []
    total = 0.0
    while live:
        best_choice = None
        for i in sorted(live):
            cand = (boundary_cost(i), (i, n))
            if best_choice is None or cand < best_choice:
                best_choice = cand
            for j in sorted(live):
                if j <= i:
                    continue
                c = pair_cost(i, j)
                if c == _INF:
                    continue
                cand = (c, (i, j))
                if cand < best_choice:
                    best_choice = cand
        cost, (i, j) = best_choice
        total += cost
        pairs.append((i, j))
        live.discard(i)
        live.discard(j)
    return total, tuple(pairs)


def _match_block(graph: _DefectGraph, events: np.ndarray,
                 config: DecoderConfig) -> tuple[int, bool]:
    """Match one stabilizer type's detection events; return the correction
    bitmask over data qubits and whether matching was exact."""
    rounds_idx, nodes_idx = np.nonzero(events)
    defects = sorted(zip(rounds_idx.tolist(), nodes_idx.tolist()))
    if not defects:
        return 0, True

    sw, tw = config.space_weight, config.time_weight
    dist = graph.dist
    bdist = graph.boundary_dist

    def pair_cost(i: int, j: int) -> float:
        (t1, n1), (t2, n2) = defects[i], defects[j]
        spatial = dist[n1, n2]
        if spatial == np.inf:
            return _INF
        return spatial * sw + abs(t1 - t2) * tw

    def boundary_cost(i: int) -> float:
        node = defects[i][1]
        b = bdist[node]
        return _INF if b == np.inf else b * sw

    exact = len(defects) <= config.max_exact_defects
    if exact:
        _, pairs = _min_weight_matching(defects, pair_cost, boundary_cost)
    elif config.allow_greedy_fallback:
        _, pairs = _greedy_matching(defects, pair_cost, boundary_cost)
    else:
        raise TooManyDefectsError(
            f"{len(defects)} defects exceed the exact-matching bound "
            f"{config.max_exact_defects} and the greedy fallback is disabled")

    mask = 0
    n = len(defects)
    for i, j in pairs:
        node_i = defects[i][1]
        if j == n:
            mask ^= graph.boundary_masks[node_i]
        else:
            node_j = defects[j][1]
            if node_i != node_j:
                mask ^= graph.path_masks[node_i][node_j]
            # same-node pair: pure measurement error, no data correction
    return mask, exact


def _mask_to_bits(mask: int, n: int) -> np.ndarray:
    bits = np.zeros(n, dtype=np.uint8)
    for q in range(n):
        if mask >> q & 1:
            bits[q] = 1
    return bits


def decode(history: SyndromeHistory, config: DecoderConfig) -> CorrectionSet:
    """Decode a syndrome history into a correction set.

    The history's columns must be in layout order (X-type block then
    Z-type block). Z-type detection events are matched to produce X
    corrections and vice versa.
    """
    layout = config.layout
    if history.outcomes.shape[1] != layout.n_stabilizers:
        raise InconsistentHistoryError(
            f"history width {history.outcomes.shape[1]} != "
            f"{layout.n_stabilizers} stabilizers for d={layout.distance}")
    events = history.detection_events()
    x_events = events[:, :layout.n_x]
    z_events = events[:, layout.n_x:]
    xg, zg = _graphs_for(layout.distance)
    x_corr_mask, z_exact = _match_block(zg, z_events, config)
    z_corr_mask, x_exact = _match_block(xg, x_events, config)
    return CorrectionSet(
        x=_mask_to_bits(x_corr_mask, layout.n_data),
        z=_mask_to_bits(z_corr_mask, layout.n_data),
        exact=x_exact and z_exact,
    )

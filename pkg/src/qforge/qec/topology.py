"""Decoder generation from a hardware connectivity description.

A topology file lists physical qubits with integer plane coordinates and
undirected coupling edges:

    {"qubits": [{"id": 0, "x": 0, "y": 0}, ...], "edges": [[0, 1], ...]}

The rotated surface code embeds diagonally: data qubit (r, c) maps to
device site (r + c, c - r + d - 1) and each stabilizer's ancilla sits on
the site between its data qubits, which makes every required data-ancilla
coupling a nearest-neighbor edge. The full distance-d footprint is a
(2d-1) x (2d-1) window. The generator scans odd distances from the largest
that could fit downward, trying every translation of the footprint, and
returns a DecoderConfig for the first distance that embeds with all
required sites and couplings present. If even d=3 does not fit, the
topology is rejected explicitly: missing edges are never silently accepted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import InvalidParamsError, TopologyUnsupportedError
from .decoder import DecoderConfig
from .layout import build_layout


@dataclass(frozen=True)
class DeviceTopology:
    sites: dict[int, tuple[int, int]]        # qubit id -> (x, y)
    edges: frozenset[tuple[int, int]]        # sorted id pairs

    @classmethod
    def from_dict(cls, payload: dict) -> "DeviceTopology":
        try:
            sites = {int(q["id"]): (int(q["x"]), int(q["y"])) for q in payload["qubits"]}
            edges = frozenset(tuple(sorted((int(a), int(b)))) for a, b in payload["edges"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParamsError(f"malformed topology payload: {exc}") from exc
        if len(sites) != len(payload["qubits"]):
            raise InvalidParamsError("duplicate qubit ids in topology")
        return cls(sites=sites, edges=edges)

    @classmethod
    def load(cls, path: str | Path) -> "DeviceTopology":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def grid(cls, width: int, height: int) -> "DeviceTopology":
        """Full width x height grid with all nearest-neighbor edges."""
        sites = {}
        for y in range(height):
            for x in range(width):
                sites[y * width + x] = (x, y)
        edges = set()
        for y in range(height):
            for x in range(width):
                qid = y * width + x
                if x + 1 < width:
                    edges.add(tuple(sorted((qid, qid + 1))))
                if y + 1 < height:
                    edges.add(tuple(sorted((qid, qid + width))))
        return cls(sites=sites, edges=frozenset(edges))

    def without_edge(self, a: int, b: int) -> "DeviceTopology":
        return DeviceTopology(sites=self.sites,
                              edges=self.edges - {tuple(sorted((a, b)))})


def _embedding_sites(distance: int):
    """Data and ancilla sites of the rotated embedding, plus required
    (ancilla, data) couplings, in footprint-local (u, v) coordinates."""
    layout = build_layout(distance)
    d = distance

    def data_site(r, c):
        return (r + c, c - r + d - 1)

    def ancilla_site(pr, pc):
        # the plaquette center maps midway between its data qubits
        return (pr + pc - 1, pc - pr + d - 1)

    data = {i: data_site(r, c) for i, (r, c) in enumerate(layout.data_coords)}
    ancillas = {}
    couplings = []
    plaquettes = list(zip(layout.x_plaquettes, layout.x_stabilizers)) + \
        list(zip(layout.z_plaquettes, layout.z_stabilizers))
    for idx, (pos, support) in enumerate(plaquettes):
        site = ancilla_site(*pos)
        ancillas[idx] = site
        for q in support:
            couplings.append((site, data[q]))
    return list(data.values()), list(ancillas.values()), couplings


def generate_decoder_for_topology(topology: DeviceTopology,
                                  max_distance: int | None = None) -> DecoderConfig:
    """Return a DecoderConfig for the largest odd distance that embeds."""
    if not topology.sites:
        raise TopologyUnsupportedError("topology has no qubits")
    coord_to_id = {coord: qid for qid, coord in topology.sites.items()}
    xs = [c[0] for c in topology.sites.values()]
    ys = [c[1] for c in topology.sites.values()]
    span = min(max(xs) - min(xs) + 1, max(ys) - min(ys) + 1)
    d_cap = (span + 1) // 2
    if d_cap % 2 == 0:
        d_cap -= 1
    if max_distance is not None:
        d_cap = min(d_cap, max_distance if max_distance % 2 else max_distance - 1)

    for d in range(d_cap, 2, -2):
        data_sites, ancilla_sites, couplings = _embedding_sites(d)
        footprint = 2 * d - 1
        for dy in range(min(ys), max(ys) - footprint + 2):
            for dx in range(min(xs), max(xs) - footprint + 2):
                if _fits(coord_to_id, topology.edges, data_sites, ancilla_sites,
                         couplings, dx, dy):
                    return DecoderConfig(layout=build_layout(d))
    raise TopologyUnsupportedError(
        "no odd distance >= 3 of the rotated code embeds in this topology")


def _fits(coord_to_id, edges, data_sites, ancilla_sites, couplings, dx, dy) -> bool:
    for u, v in data_sites + ancilla_sites:
        if (u + dx, v + dy) not in coord_to_id:
            return False
    for (au, av), (du, dv) in couplings:
        a = coord_to_id[(au + dx, av + dy)]
        b = coord_to_id[(du + dx, dv + dy)]
        if tuple(sorted((a, b))) not in edges:
            return False
    return True

"""Pauli-frame simulation of small Clifford circuits under depolarizing noise.

The ideal circuit (gates h, x, z, cx from |0...0>) is simulated once as a
dense statevector; per shot an X/Z Pauli frame is propagated through the
gate list, picking up depolarizing noise after every gate location and
before every measurement. The measured bit of a qubit is its ideal bit XOR
the frame's X bit, which is exact for terminal measurements of stabilizer
circuits under Pauli noise.

Frame conjugation rules: H swaps the X and Z bits of its qubit; CX adds the
control's X bit onto the target and the target's Z bit onto the control;
X and Z gates leave the frame unchanged (they commute with Paulis up to
phase). The ops ``inject_x`` / ``inject_z`` flip the frame directly and are
the hook for deliberate error injection.

Measurements must be terminal: once a measure op appears, only further
measure ops may follow. Bitstring position k holds the k-th measured qubit,
so with qubits measured in index order, string index == qubit index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParamsError, LengthMismatchError, UnsupportedGateError
from ..rng import substream
from .decoder import CorrectionSet
from .noise import NoiseModel

_ONE_QUBIT_GATES = ("h", "x", "z")
_MAX_QUBITS = 16

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_GATE_MATRIX = {"h": _H, "x": _X, "z": _Z}


@dataclass(frozen=True)
class Circuit:
    """A gate list over ``n_qubits`` qubits.

    Ops are tuples: ("h"|"x"|"z", q), ("cx", control, target),
    ("measure", q), ("inject_x"|"inject_z", q).
    """

    n_qubits: int
    ops: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= _MAX_QUBITS:
            raise InvalidParamsError(f"n_qubits must be in [1, {_MAX_QUBITS}]")
        object.__setattr__(self, "ops", tuple(tuple(op) for op in self.ops))
        measuring = False
        for op in self.ops:
            name = op[0]
            if name in _ONE_QUBIT_GATES or name in ("measure", "inject_x", "inject_z"):
                qubits = op[1:2]
            elif name == "cx":
                qubits = op[1:3]
                if len(op) != 3 or op[1] == op[2]:
                    raise UnsupportedGateError(f"malformed cx op {op!r}")
            else:
                raise UnsupportedGateError(f"unknown gate {name!r}")
            for q in qubits:
                if not 0 <= q < self.n_qubits:
                    raise UnsupportedGateError(f"qubit {q} out of range in {op!r}")
            if name == "measure":
                measuring = True
            elif measuring:
                raise UnsupportedGateError(
                    "measurements must be terminal; found gate after measure")

    @property
    def measured_qubits(self) -> tuple[int, ...]:
        return tuple(op[1] for op in self.ops if op[0] == "measure")


def deutsch_jozsa_constant(n_query: int = 3) -> Circuit:
    """Deutsch-Jozsa circuit for the constant-0 oracle (identity): the two
    Hadamard layers cancel and every shot ideally reads all zeros."""
    ops = [("h", q) for q in range(n_query)]
    ops += [("h", q) for q in range(n_query)]
    ops += [("measure", q) for q in range(n_query)]
    return Circuit(n_qubits=n_query, ops=tuple(ops))


def _ideal_distribution(circuit: Circuit) -> tuple[np.ndarray, tuple[int, ...]]:
    """Dense statevector run of the noiseless circuit; returns the outcome
    distribution over the measured qubits (big-endian: qubit 0 leftmost)."""
    n = circuit.n_qubits
    amps = np.zeros([2] * n, dtype=np.complex128)
    amps[(0,) * n] = 1.0
    for op in circuit.ops:
        name = op[0]
        if name in _GATE_MATRIX:
            amps = np.moveaxis(
                np.tensordot(_GATE_MATRIX[name], amps, axes=([1], [op[1]])), 0, op[1])
        elif name == "cx":
            control, target = op[1], op[2]
            sel = [slice(None)] * n
            sel[control] = 1
            sub = amps[tuple(sel)]
            axis = target - (1 if control < target else 0)
            amps[tuple(sel)] = np.flip(sub, axis=axis)
        # measure / inject ops do not touch the ideal state
    probs = np.abs(amps.reshape(-1)) ** 2
    probs = probs / probs.sum()
    measured = circuit.measured_qubits
    if not measured:
        measured = tuple(range(n))
    # marginalize onto measured qubits
    full = probs.reshape([2] * n)
    keep = sorted(set(measured))
    drop = [q for q in range(n) if q not in keep]
    marg = full.sum(axis=tuple(drop)) if drop else full
    return marg.reshape(-1), tuple(keep)


def pauli_frame_simulate(circuit: Circuit, model: NoiseModel, shots: int,
                         seed: int) -> dict[str, int]:
    """Run ``shots`` noisy shots; returns a histogram {bitstring: count}."""
    if shots < 1:
        raise InvalidParamsError("shots must be >= 1")
    rng = substream(seed, "qec.pauliframe")
    n = circuit.n_qubits
    measured = circuit.measured_qubits or tuple(range(n))

    probs, kept = _ideal_distribution(circuit)
    ideal_idx = rng.choice(len(probs), size=shots, p=probs)
    # unpack ideal outcome index into per-qubit bits (big-endian over `kept`)
    ideal_bits = np.zeros((shots, n), dtype=np.uint8)
    for pos, qubit in enumerate(kept):
        shift = len(kept) - 1 - pos
        ideal_bits[:, qubit] = (ideal_idx >> shift) & 1

    fx = np.zeros((shots, n), dtype=np.uint8)
    fz = np.zeros((shots, n), dtype=np.uint8)

    def depolarize(qubit: int) -> None:
        hit = rng.random(shots) < model.p
        pauli = rng.integers(0, 3, size=shots)
        fx[:, qubit] ^= (hit & (pauli != 2)).astype(np.uint8)
        fz[:, qubit] ^= (hit & (pauli != 0)).astype(np.uint8)

    out_bits = np.zeros((shots, len(measured)), dtype=np.uint8)
    slot = 0
    for op in circuit.ops:
        name = op[0]
        if name == "h":
            q = op[1]
            fx[:, q], fz[:, q] = fz[:, q].copy(), fx[:, q].copy()
            depolarize(q)
        elif name in ("x", "z"):
            depolarize(op[1])
        elif name == "cx":
            control, target = op[1], op[2]
            fx[:, target] ^= fx[:, control]
            fz[:, control] ^= fz[:, target]
            depolarize(control)
            depolarize(target)
        elif name == "inject_x":
            fx[:, op[1]] ^= 1
        elif name == "inject_z":
            fz[:, op[1]] ^= 1
        elif name == "measure":
            q = op[1]
            depolarize(q)
            out_bits[:, slot] = ideal_bits[:, q] ^ fx[:, q]
            slot += 1
    if slot == 0:  # no explicit measures: read all qubits in index order
        for q in range(n):
            depolarize(q)
        out_bits = ideal_bits ^ fx

    weights = 1 << np.arange(out_bits.shape[1] - 1, -1, -1, dtype=np.int64)
    codes = out_bits.astype(np.int64) @ weights
    counts: dict[str, int] = {}
    width = out_bits.shape[1]
    for code, count in zip(*np.unique(codes, return_counts=True)):
        counts[format(int(code), f"0{width}b")] = int(count)
    return counts


def apply_corrections(counts: dict[str, int], corrections: CorrectionSet) -> dict[str, int]:
    """XOR the X-correction bits into every histogram key (bit k of the
    correction flips string position k). Total mass is preserved."""
    x = np.asarray(corrections.x, dtype=np.uint8)
    out: dict[str, int] = {}
    for key, count in counts.items():
        if len(key) != x.size:
            raise LengthMismatchError(
                f"bitstring {key!r} has length {len(key)}, corrections cover {x.size} qubits")
        flipped = "".join(str(int(bit) ^ int(flip)) for bit, flip in zip(key, x))
        out[flipped] = out.get(flipped, 0) + count
    return out

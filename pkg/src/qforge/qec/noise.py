"""Pauli error state, depolarizing noise, and noisy syndrome measurement.

Errors are tracked as an X/Z frame: two bit vectors over the data qubits.
Composition is XOR. A Y error sets both bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InconsistentHistoryError, InvalidParamsError
from .layout import SurfaceCodeLayout


@dataclass(frozen=True)
class NoiseModel:
    """Phenomenological noise: depolarizing rate p on data qubits per round,
    independent flip probability q on every reported syndrome bit."""

    p: float
    q: float = 0.0

    def __post_init__(self):
        for name, value in (("p", self.p), ("q", self.q)):
            if not 0.0 <= value <= 1.0:
                raise InvalidParamsError(f"{name} must be in [0, 1], got {value}")


@dataclass
class ErrorState:
    """X/Z error bit vectors over the data qubits of one code patch."""

    x: np.ndarray
    z: np.ndarray

    @classmethod
    def zeros(cls, n_data: int) -> "ErrorState":
        return cls(np.zeros(n_data, dtype=np.uint8), np.zeros(n_data, dtype=np.uint8))

    def copy(self) -> "ErrorState":
        return ErrorState(self.x.copy(), self.z.copy())


def apply_depolarizing(state: ErrorState, model: NoiseModel,
                       rng: np.random.Generator) -> ErrorState:
    """Apply one round of depolarizing noise.

    Each qubit is hit with probability p; a hit applies X, Y or Z with equal
    probability p/3 and composes with the existing frame by XOR. The Pauli
    draw is consumed for every qubit (hit or not) so the stream layout does
    not depend on outcomes.
    """
    n = state.x.size
    hit = rng.random(n) < model.p
    pauli = rng.integers(0, 3, size=n)  # 0 = X, 1 = Y, 2 = Z
    x_flip = (hit & (pauli != 2)).astype(np.uint8)
    z_flip = (hit & (pauli != 0)).astype(np.uint8)
    return ErrorState(state.x ^ x_flip, state.z ^ z_flip)


def true_syndrome(state: ErrorState, layout: SurfaceCodeLayout) -> np.ndarray:
    """Noiseless stabilizer readout: X-type block then Z-type block.

    X-type stabilizers report the parity of Z errors on their support;
    Z-type stabilizers report the parity of X errors.
    """
    x_bits = layout.x_support_matrix() @ state.z % 2
    z_bits = layout.z_support_matrix() @ state.x % 2
    return np.concatenate([x_bits, z_bits]).astype(np.uint8)


def measure_syndromes(state: ErrorState, layout: SurfaceCodeLayout, q: float,
                      rng: np.random.Generator) -> np.ndarray:
    """One noisy measurement round: the true syndrome with each reported bit
    independently flipped with probability q."""
    if not 0.0 <= q <= 1.0:
        raise InvalidParamsError(f"q must be in [0, 1], got {q}")
    bits = true_syndrome(state, layout)
    flips = (rng.random(bits.size) < q).astype(np.uint8)
    return bits ^ flips


@dataclass(frozen=True)
class SyndromeHistory:
    """Stacked measurement rounds for one decoding shot.

    ``outcomes`` is a (rounds, n_stabilizers) bit matrix in layout order
    (X-type block then Z-type block). Detection events are always derived,
    never stored: round 0 is differenced against the all-zero reference and
    each later round against its predecessor.
    """

    outcomes: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.outcomes, dtype=np.uint8)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise InconsistentHistoryError("outcomes must be a (rounds, n_stab) bit matrix")
        object.__setattr__(self, "outcomes", arr)

    @property
    def rounds(self) -> int:
        return self.outcomes.shape[0]

    def appended(self, final_round: np.ndarray) -> "SyndromeHistory":
        """Return a new history with one extra round (the perfect final
        readout appended before decoding)."""
        row = np.asarray(final_round, dtype=np.uint8).reshape(1, -1)
        if row.shape[1] != self.outcomes.shape[1]:
            raise InconsistentHistoryError("appended round has wrong width")
        return SyndromeHistory(np.vstack([self.outcomes, row]))

    def detection_events(self) -> np.ndarray:
        reference = np.vstack([
            np.zeros((1, self.outcomes.shape[1]), dtype=np.uint8),
            self.outcomes[:-1],
        ])
        return self.outcomes ^ reference

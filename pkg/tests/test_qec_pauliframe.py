import numpy as np
import pytest

from qforge.errors import (
    InvalidParamsError,
    LengthMismatchError,
    UnsupportedGateError,
)
from qforge.qec.decoder import CorrectionSet
from qforge.qec.noise import NoiseModel
from qforge.qec.pauliframe import (
    Circuit,
    apply_corrections,
    deutsch_jozsa_constant,
    pauli_frame_simulate,
)

NOISELESS = NoiseModel(p=0.0)


def bell_circuit():
    return Circuit(n_qubits=2, ops=(("h", 0), ("cx", 0, 1),
                                    ("measure", 0), ("measure", 1)))


# ----------------------------------------------------------------- validation

def test_circuit_rejects_unknown_gate():
    with pytest.raises(UnsupportedGateError):
        Circuit(n_qubits=1, ops=(("t", 0),))


def test_circuit_rejects_malformed_cx():
    with pytest.raises(UnsupportedGateError):
        Circuit(n_qubits=2, ops=(("cx", 0, 0),))
    with pytest.raises(UnsupportedGateError):
        Circuit(n_qubits=2, ops=(("cx", 0),))


def test_circuit_rejects_out_of_range_qubit():
    with pytest.raises(UnsupportedGateError):
        Circuit(n_qubits=2, ops=(("h", 2),))


def test_measurements_must_be_terminal():
    with pytest.raises(UnsupportedGateError):
        Circuit(n_qubits=1, ops=(("measure", 0), ("h", 0)))
    # more measures after a measure are fine
    Circuit(n_qubits=2, ops=(("h", 0), ("measure", 0), ("measure", 1)))


def test_qubit_count_bounds():
    with pytest.raises(InvalidParamsError):
        Circuit(n_qubits=0)
    with pytest.raises(InvalidParamsError):
        Circuit(n_qubits=17)


def test_measured_qubits_property():
    assert bell_circuit().measured_qubits == (0, 1)
    assert Circuit(n_qubits=2, ops=(("h", 0),)).measured_qubits == ()


def test_simulate_rejects_zero_shots():
    with pytest.raises(InvalidParamsError):
        pauli_frame_simulate(bell_circuit(), NOISELESS, shots=0, seed=0)


# ------------------------------------------------------------ ideal behavior

def test_noiseless_bell_histogram():
    counts = pauli_frame_simulate(bell_circuit(), NOISELESS, shots=600, seed=4)
    assert set(counts) == {"00", "11"}
    assert sum(counts.values()) == 600
    assert abs(counts["00"] / 600 - 0.5) < 0.12


def test_noiseless_deutsch_jozsa_is_all_zeros():
    circuit = deutsch_jozsa_constant(3)
    counts = pauli_frame_simulate(circuit, NOISELESS, shots=500, seed=1)
    assert counts == {"000": 500}


def test_deutsch_jozsa_circuit_shape():
    circuit = deutsch_jozsa_constant(4)
    assert circuit.n_qubits == 4
    names = [op[0] for op in circuit.ops]
    assert names == ["h"] * 8 + ["measure"] * 4


def test_simulation_is_deterministic_under_seed():
    circuit = deutsch_jozsa_constant(3)
    model = NoiseModel(p=0.08)
    a = pauli_frame_simulate(circuit, model, shots=400, seed=13)
    b = pauli_frame_simulate(circuit, model, shots=400, seed=13)
    assert a == b


# ------------------------------------------------------------ frame tracking

def test_inject_x_flips_the_readout():
    circuit = Circuit(n_qubits=2, ops=(("inject_x", 1),
                                       ("measure", 0), ("measure", 1)))
    counts = pauli_frame_simulate(circuit, NOISELESS, shots=50, seed=0)
    assert counts == {"01": 50}


def test_inject_z_is_invisible_in_the_computational_basis():
    circuit = Circuit(n_qubits=2, ops=(("inject_z", 0),
                                       ("measure", 0), ("measure", 1)))
    counts = pauli_frame_simulate(circuit, NOISELESS, shots=50, seed=0)
    assert counts == {"00": 50}


def test_hadamard_conjugates_z_into_x():
    # H Z H = X: a Z injected between two Hadamards flips the readout
    circuit = Circuit(n_qubits=1, ops=(("h", 0), ("inject_z", 0), ("h", 0),
                                       ("measure", 0)))
    counts = pauli_frame_simulate(circuit, NOISELESS, shots=50, seed=0)
    assert counts == {"1": 50}


def test_cx_propagates_x_from_control_to_target():
    circuit = Circuit(n_qubits=2, ops=(("inject_x", 0), ("cx", 0, 1),
                                       ("measure", 0), ("measure", 1)))
    counts = pauli_frame_simulate(circuit, NOISELESS, shots=50, seed=0)
    assert counts == {"11": 50}


def test_cx_leaves_target_x_on_target():
    circuit = Circuit(n_qubits=2, ops=(("inject_x", 1), ("cx", 0, 1),
                                       ("measure", 0), ("measure", 1)))
    counts = pauli_frame_simulate(circuit, NOISELESS, shots=50, seed=0)
    assert counts == {"01": 50}


def test_x_and_z_gates_do_not_disturb_the_frame():
    circuit = Circuit(n_qubits=1, ops=(("x", 0), ("z", 0), ("inject_x", 0),
                                       ("measure", 0)))
    counts = pauli_frame_simulate(circuit, NOISELESS, shots=20, seed=0)
    # the ideal circuit includes the X gate, so the ideal bit is 1 and the
    # injected frame flips it back to 0
    assert counts == {"0": 20}


# ----------------------------------------------------------- noise behavior

def test_noise_degrades_deutsch_jozsa_success():
    circuit = deutsch_jozsa_constant(3)
    shots = 3000
    noisy = pauli_frame_simulate(circuit, NoiseModel(p=0.10), shots, seed=7)
    cleaner = pauli_frame_simulate(circuit, NoiseModel(p=0.01), shots, seed=7)
    assert cleaner.get("000", 0) > noisy.get("000", 0)
    assert sum(noisy.values()) == sum(cleaner.values()) == shots


def test_histogram_mass_equals_shots_under_noise():
    counts = pauli_frame_simulate(bell_circuit(), NoiseModel(p=0.2),
                                  shots=777, seed=3)
    assert sum(counts.values()) == 777
    assert all(len(k) == 2 for k in counts)


# -------------------------------------------------------------- corrections

def correction(x_bits):
    x = np.array(x_bits, dtype=np.uint8)
    return CorrectionSet(x=x, z=np.zeros_like(x))


def test_apply_corrections_flips_bit_positions():
    counts = {"00": 5, "11": 3}
    out = apply_corrections(counts, correction([1, 0]))
    assert out == {"10": 5, "01": 3}


def test_apply_corrections_merges_colliding_keys():
    counts = {"01": 2, "10": 3}
    out = apply_corrections(counts, correction([1, 1]))
    assert out == {"10": 2, "01": 3}
    counts = {"00": 1, "11": 2}
    out = apply_corrections(counts, correction([1, 1]))
    assert out == {"11": 1, "00": 2}


def test_apply_corrections_preserves_mass():
    counts = {"000": 10, "101": 5, "111": 1}
    out = apply_corrections(counts, correction([0, 1, 0]))
    assert sum(out.values()) == 16


def test_apply_corrections_rejects_width_mismatch():
    with pytest.raises(LengthMismatchError):
        apply_corrections({"00": 1}, correction([1, 0, 0]))

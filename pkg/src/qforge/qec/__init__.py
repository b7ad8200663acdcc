"""Surface-code error-correction toolkit."""

from .decoder import CorrectionSet, DecoderConfig, decode
from .demo import run_demo
from .layout import SurfaceCodeLayout, build_layout
from .montecarlo import RateEstimate, logical_error_rate, wilson_interval
from .noise import (
    ErrorState,
    NoiseModel,
    SyndromeHistory,
    apply_depolarizing,
    measure_syndromes,
    true_syndrome,
)
from .pauliframe import Circuit, apply_corrections, deutsch_jozsa_constant, \
    pauli_frame_simulate
from .topology import DeviceTopology, generate_decoder_for_topology

__all__ = [
    "Circuit",
    "CorrectionSet",
    "DecoderConfig",
    "DeviceTopology",
    "ErrorState",
    "NoiseModel",
    "RateEstimate",
    "SurfaceCodeLayout",
    "SyndromeHistory",
    "apply_corrections",
    "apply_depolarizing",
    "build_layout",
    "decode",
    "deutsch_jozsa_constant",
    "generate_decoder_for_topology",
    "logical_error_rate",
    "measure_syndromes",
    "pauli_frame_simulate",
    "run_demo",
    "true_syndrome",
    "wilson_interval",
]

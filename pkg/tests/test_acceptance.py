"""Acceptance gate: one test per release criterion.

Each criterion is a single test function, so a verbose pytest run emits one
pass/fail line per criterion; every test also prints a ``[PASS]``/``[FAIL]``
summary with the measured numbers (visible with ``-s`` or on failure).
Runtime budgets are asserted with a wall clock where the criterion states
one.
"""

import itertools
import json
import math
import time
from contextlib import contextmanager
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from qforge import dataprep as dp
from qforge import rag
from qforge.backend import (ALWAYS_FAIL_CODE, CompletionRequest,
                            ScriptedBackend)
from qforge.errors import TopologyUnsupportedError
from qforge.evalsuite import default_suite, pass_at_k, run_suite
from qforge.orchestrator import (GenerationTask, CheckerSpec, PipelineConfig,
                                 run_task)
from qforge.qec import (DecoderConfig, DeviceTopology, NoiseModel,
                        build_layout, decode, generate_decoder_for_topology,
                        logical_error_rate, pauli_frame_simulate)
from qforge.qec.decoder import CorrectionSet
from qforge.qec.noise import ErrorState, SyndromeHistory, true_syndrome
from qforge.qec.pauliframe import deutsch_jozsa_constant
from qforge.rng import substream
from qforge.sandbox import InlineExecutor


@contextmanager
def criterion(number: int, label: str):
    """Print exactly one pass/fail line for the enclosed assertions."""
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {number}: {label}")
        raise
    print(f"[PASS] criterion {number}: {label}")


# --------------------------------------------------------------- criterion 1

def test_criterion_01_pass_at_k_matches_exhaustive_enumeration():
    def oracle(n: int, c: int, k: int) -> Fraction:
        outcomes = [1] * c + [0] * (n - c)
        hits = sum(1 for subset in itertools.combinations(outcomes, k)
                   if any(subset))
        return Fraction(hits, math.comb(n, k))

    start = time.monotonic()
    checked = 0
    with criterion(1, "pass@k equals exhaustive subset enumeration, n <= 8"):
        for n in range(1, 9):
            for c in range(0, n + 1):
                for k in range(1, n + 1):
                    expected = oracle(n, c, k)
                    assert pass_at_k(n, c, k) == float(expected), (n, c, k)
                    checked += 1
        elapsed = time.monotonic() - start
        assert elapsed < 5.0, f"{elapsed:.2f}s over budget"
    print(f"       {checked} (n, c, k) triples in {elapsed:.2f}s")


def test_criterion_02_pass_at_k_spot_values():
    with criterion(2, "spot values pass@1(5,2)=0.4 and pass@2(3,1)=2/3"):
        assert abs(pass_at_k(5, 2, 1) - 0.4) < 1e-12
        assert abs(pass_at_k(3, 1, 2) - 2.0 / 3.0) < 1e-12


# --------------------------------------------------------------- criterion 3

def test_criterion_03_distance_three_corrects_all_single_errors():
    layout = build_layout(3)
    config = DecoderConfig(layout=layout)

    def clean(state: ErrorState, correction: CorrectionSet) -> bool:
        residual = ErrorState(state.x ^ correction.x, state.z ^ correction.z)
        if true_syndrome(residual, layout).any():
            return False
        x_flip = residual.x[list(layout.logical_z)].sum() % 2
        z_flip = residual.z[list(layout.logical_x)].sum() % 2
        return not (x_flip or z_flip)

    start = time.monotonic()
    with criterion(3, "d=3 decodes all 27 single-qubit Pauli errors"):
        failures = 0
        for qubit in range(layout.n_data):
            for pauli in ("x", "y", "z"):
                state = ErrorState.zeros(layout.n_data)
                if pauli in ("x", "y"):
                    state.x[qubit] = 1
                if pauli in ("y", "z"):
                    state.z[qubit] = 1
                history = SyndromeHistory(
                    true_syndrome(state, layout).reshape(1, -1))
                correction = decode(history, config)
                failures += not clean(state, correction)
        elapsed = time.monotonic() - start
        assert failures == 0
        assert elapsed < 1.0, f"{elapsed:.2f}s over budget"
    print(f"       27 errors, 0 logical failures in {elapsed:.2f}s")


# --------------------------------------------------------------- criterion 4

def test_criterion_04_larger_distance_suppresses_logical_errors():
    model = NoiseModel(p=0.005, q=0.005)
    start = time.monotonic()
    with criterion(4, "d=5 beats d=3 at p=q=0.005 with separated 95% CIs"):
        est3 = logical_error_rate(distance=3, model=model, rounds=3,
                                  trials=20000, seed=42)
        est5 = logical_error_rate(distance=5, model=model, rounds=5,
                                  trials=20000, seed=42)
        elapsed = time.monotonic() - start
        assert est5.logical_error_rate < est3.logical_error_rate
        assert est5.ci_high < est3.ci_low, "confidence intervals overlap"
        assert elapsed < 120.0, f"{elapsed:.1f}s over budget"
    print(f"       d=3 {est3.logical_error_rate:.5f} "
          f"[{est3.ci_low:.5f}, {est3.ci_high:.5f}]  "
          f"d=5 {est5.logical_error_rate:.5f} "
          f"[{est5.ci_low:.5f}, {est5.ci_high:.5f}]  in {elapsed:.1f}s")


# --------------------------------------------------------------- criterion 5

def test_criterion_05_logical_rate_below_physical_rate():
    start = time.monotonic()
    with criterion(5, "d=3 logical rate < p=0.002 with CI clear of it"):
        est = logical_error_rate(distance=3, model=NoiseModel(p=0.002, q=0.0),
                                 rounds=1, trials=50000, seed=42)
        elapsed = time.monotonic() - start
        assert est.logical_error_rate < 0.002
        assert est.ci_high < 0.002, "interval reaches the physical rate"
        assert elapsed < 60.0, f"{elapsed:.1f}s over budget"
    print(f"       {est.logical_error_rate:.6f} "
          f"[{est.ci_low:.6f}, {est.ci_high:.6f}] in {elapsed:.1f}s")


# --------------------------------------------------------------- criterion 6

def test_criterion_06_error_corrected_demo_shape():
    circuit = deutsch_jozsa_constant(3)
    start = time.monotonic()
    with criterion(6, "noiseless run is all-zeros; lower noise raises mass"):
        silent = pauli_frame_simulate(circuit, NoiseModel(p=0.0, q=0.0),
                                      shots=2000, seed=7)
        assert silent == {"000": 2000}
        high = pauli_frame_simulate(circuit, NoiseModel(p=0.05, q=0.0),
                                    shots=10000, seed=7)
        low = pauli_frame_simulate(circuit, NoiseModel(p=0.01, q=0.0),
                                   shots=10000, seed=7)
        elapsed = time.monotonic() - start
        assert low.get("000", 0) > high.get("000", 0)
        assert elapsed < 10.0, f"{elapsed:.1f}s over budget"
    print(f"       all-zeros mass {high.get('000', 0)} @ p=0.05 vs "
          f"{low.get('000', 0)} @ p=0.01 ({elapsed:.1f}s)")


# --------------------------------------------------------------- criterion 7

class _Recording(ScriptedBackend):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.prompts = []

    def complete(self, request: CompletionRequest):
        self.prompts.append(request.prompt)
        return super().complete(request)


def test_criterion_07_multi_pass_repair_contract():
    broken = "```python\nraise RuntimeError('boom')\n```"
    good = "```python\nprint('hello')\n```"
    task = GenerationTask(id="task-1", prompt="Print the word hello.",
                          checker=CheckerSpec("exact_stdout", "hello"))
    start = time.monotonic()
    with criterion(7, "fail-then-fix passes on attempt 2; budget is exact"):
        backend = _Recording({"task-1": [broken, good]})
        report = run_task(task, PipelineConfig(max_passes=3), backend,
                          executor=InlineExecutor())
        assert report.final_verdict == "pass"
        assert report.passes_used == 2
        repair = backend.prompts[1]
        assert task.prompt in repair
        assert "raise RuntimeError('boom')" in repair
        assert "RuntimeError" in report.attempts[0].execution.error_text()
        assert report.attempts[0].execution.error_text() in repair

        stubborn = _Recording({}, default=ALWAYS_FAIL_CODE)
        report = run_task(task, PipelineConfig(max_passes=4), stubborn,
                          executor=InlineExecutor())
        assert report.final_verdict != "pass"
        assert report.passes_used == 4
        assert len(stubborn.prompts) == 4
        elapsed = time.monotonic() - start
        assert elapsed < 1.0, f"{elapsed:.2f}s over budget"
    print(f"       repair loop contract held in {elapsed:.2f}s")


# --------------------------------------------------------------- criterion 8

def test_criterion_08_retrieval_matches_brute_force(tmp_path):
    rng = np.random.default_rng(2024)
    words = [f"w{idx:03d}" for idx in range(400)]

    def random_text():
        return " ".join(rng.choice(words, size=rng.integers(4, 12)))

    documents = [(f"doc-{i:04d}.txt", random_text()) for i in range(1000)]
    start = time.monotonic()
    with criterion(8, "top-k retrieval equals brute-force cosine ranking"):
        chunks = rag.chunk_corpus(documents)
        assert len(chunks) == 1000
        embedder = rag.resolve_embedder("hashed-bow-256")
        index = rag.embed_chunks(chunks, embedder)
        matrix = np.array([c.embedding for c in index.chunks],
                          dtype=np.float64)
        ids = [c.id for c in index.chunks]
        for _ in range(100):
            query = random_text()
            qvec = embedder.embed([query])[0].astype(np.float64)
            scores = matrix @ qvec / (
                np.linalg.norm(matrix, axis=1) * np.linalg.norm(qvec))
            want = sorted(range(len(ids)),
                          key=lambda i: (-scores[i], ids[i]))[:5]
            got = rag.retrieve(index, query, k=5)
            assert [r.chunk.id for r in got] == [ids[i] for i in want]

        path = tmp_path / "corpus.qfrg"
        rag.save_index(index, path)
        first = path.read_bytes()
        loaded = rag.load_index(path)
        rag.save_index(loaded, path)
        assert path.read_bytes() == first
        elapsed = time.monotonic() - start
        assert elapsed < 10.0, f"{elapsed:.1f}s over budget"
    print(f"       100 queries over 1000 chunks in {elapsed:.1f}s")


# --------------------------------------------------------------- criterion 9

def test_criterion_09_fim_rate_and_inverse():
    chunks = [dp.TrainChunk(text=f"alpha{i} beta{i} gamma{i} delta{i}",
                            source=f"s{i}.py") for i in range(10000)]
    rng = substream(99, "dataprep.fim")
    start = time.monotonic()
    with criterion(9, "FIM rate inside exact binomial 99% CI; reassembly "
                      "inverts"):
        out = [dp.fim_transform(chunk, rng, fim_rate=0.1) for chunk in chunks]
        applied = sum(1 for c in out if c.fim_applied)
        low, high = stats.binom.interval(0.99, len(chunks), 0.1)
        assert low <= applied <= high, (applied, low, high)
        for original, transformed in zip(chunks, out):
            if transformed.fim_applied:
                assert dp.fim_reassemble(transformed).text == original.text
            else:
                assert transformed.text == original.text
        elapsed = time.monotonic() - start
        assert elapsed < 5.0, f"{elapsed:.1f}s over budget"
    print(f"       {applied} of 10000 transformed "
          f"(99% CI [{low:.0f}, {high:.0f}]) in {elapsed:.1f}s")


# -------------------------------------------------------------- criterion 10

def test_criterion_10_suite_taxonomy_and_accuracy_ordering():
    suite = default_suite()
    with criterion(10, "suite mix is 47/24/29 +-2; semantic <= syntactic"):
        shares = {category: 100.0 * sum(c.category == category for c in suite)
                  / len(suite) for category in
                  ("basic", "intermediate", "advanced")}
        assert abs(shares["basic"] - 47) <= 2, shares
        assert abs(shares["intermediate"] - 24) <= 2, shares
        assert abs(shares["advanced"] - 29) <= 2, shares

        wrong = "```python\nprint('not it')\n```"
        broken = "```python\nraise RuntimeError('no')\n```"
        scripts = {
            "allpass": {case.id: case.reference_solution for case in suite},
            "allfail": {case.id: broken for case in suite},
            "mixed": {case.id: [case.reference_solution, wrong, broken][i % 3]
                      for i, case in enumerate(suite)},
        }
        pipeline = PipelineConfig(samples_n=2)
        for name, script in scripts.items():
            report = run_suite(suite, pipeline, ScriptedBackend(script),
                               executor=InlineExecutor(), seed=5)
            assert report.semantic_accuracy <= report.syntactic_accuracy, name
    print(f"       shares {shares} and ordering held on 3 reports")


# -------------------------------------------------------------- criterion 11

def test_criterion_11_topology_gate():
    with criterion(11, "grid yields a decoder; linear chain is rejected"):
        decoder = generate_decoder_for_topology(DeviceTopology.grid(9, 9))
        assert isinstance(decoder, DecoderConfig)
        assert decoder.layout.distance == 5
        assert decoder.space_weight > 0 and decoder.time_weight > 0

        chain = DeviceTopology.from_dict({
            "qubits": [{"id": i, "x": i, "y": 0} for i in range(25)],
            "edges": [[i, i + 1] for i in range(24)],
        })
        with pytest.raises(TopologyUnsupportedError) as excinfo:
            generate_decoder_for_topology(chain)
        assert excinfo.value.code == "topology_unsupported"
    print("       9x9 grid -> d=5 decoder; 25-site chain rejected")

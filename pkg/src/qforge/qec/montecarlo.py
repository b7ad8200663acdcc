"""Monte Carlo logical-error-rate estimation.

Each trial runs ``rounds`` noisy syndrome-extraction rounds (depolarizing
data noise, then a q-noisy readout), appends one perfect round, decodes,
and checks whether the residual error (injected XOR correction)
anticommutes with either logical operator. Failed decodes (decoder raised)
are counted as failures and reported separately.

Trials draw from independent substreams keyed (seed, trial_index), so the
estimate does not depend on execution order and trials could be distributed
across workers without changing the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParamsError, QForgeError
from ..rng import substream
from .decoder import DecoderConfig, decode
from .layout import build_layout
from .noise import ErrorState, NoiseModel, SyndromeHistory, apply_depolarizing, \
    measure_syndromes, true_syndrome


def wilson_interval(failures: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score 95% confidence interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    phat = failures / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    # at phat = 0 (or 1) the score equation has an exact root at 0 (or 1);
    # pin it rather than keep the rounding residue
    lo = 0.0 if failures == 0 else max(0.0, center - half)
    hi = 1.0 if failures == trials else min(1.0, center + half)
    return (lo, hi)


@dataclass(frozen=True)
class RateEstimate:
    distance: int
    p: float
    q: float
    rounds: int
    trials: int
    failures: int
    logical_error_rate: float
    ci_low: float
    ci_high: float
    decode_errors: int
    inexact_decodes: int

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "p": self.p,
            "q": self.q,
            "rounds": self.rounds,
            "trials": self.trials,
            "failures": self.failures,
            "logical_error_rate": self.logical_error_rate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "decode_errors": self.decode_errors,
            "inexact_decodes": self.inexact_decodes,
        }


def logical_error_rate(distance: int, model: NoiseModel, rounds: int, trials: int,
                       seed: int, config: DecoderConfig | None = None) -> RateEstimate:
    if rounds < 1:
        raise InvalidParamsError("rounds must be >= 1")
    if trials < 1:
        raise InvalidParamsError("trials must be >= 1")
    layout = build_layout(distance)
    if config is None:
        config = DecoderConfig(layout=layout)
    elif config.layout.distance != distance:
        raise InvalidParamsError("decoder config layout does not match distance")

    n = layout.n_data
    powers = 1 << np.arange(n, dtype=np.int64)
    logical_x_mask = int(sum(1 << q for q in layout.logical_x))
    logical_z_mask = int(sum(1 << q for q in layout.logical_z))

    failures = 0
    decode_errors = 0
    inexact = 0
    for trial in range(trials):
        rng = substream(seed, "qec.logical_error_rate", trial)
        state = ErrorState.zeros(n)
        rows = []
        for _ in range(rounds):
            state = apply_depolarizing(state, model, rng)
            rows.append(measure_syndromes(state, layout, model.q, rng))
        history = SyndromeHistory(np.vstack(rows)).appended(true_syndrome(state, layout))
        try:
            correction = decode(history, config)
        except QForgeError:
            failures += 1
            decode_errors += 1
            continue
        if not correction.exact:
            inexact += 1
        residual_x = int((state.x ^ correction.x).astype(np.int64) @ powers)
        residual_z = int((state.z ^ correction.z).astype(np.int64) @ powers)
        # an X residual flips the logical Z readout and vice versa
        x_flip = bin(residual_x & logical_z_mask).count("1") % 2
        z_flip = bin(residual_z & logical_x_mask).count("1") % 2
        if x_flip or z_flip:
            failures += 1

    lo, hi = wilson_interval(failures, trials)
    return RateEstimate(
        distance=distance, p=model.p, q=model.q, rounds=rounds, trials=trials,
        failures=failures, logical_error_rate=failures / trials,
        ci_low=lo, ci_high=hi, decode_errors=decode_errors, inexact_decodes=inexact,
    )

import numpy as np
import pytest

from qforge.errors import InvalidParamsError
from qforge.qec.decoder import DecoderConfig
from qforge.qec.layout import build_layout
from qforge.qec.montecarlo import RateEstimate, logical_error_rate, wilson_interval

Z95 = 1.959963984540054


# ------------------------------------------------------------ wilson interval

def test_wilson_endpoints_solve_the_score_equation():
    """Both endpoints are roots of (phat - p)^2 n = z^2 p (1 - p)."""
    for failures, trials in [(0, 50), (5, 100), (50, 50), (1, 3), (250, 1000)]:
        lo, hi = wilson_interval(failures, trials)
        phat = failures / trials
        for p in (lo, hi):
            lhs = (phat - p) ** 2 * trials
            rhs = Z95 * Z95 * p * (1 - p)
            assert lhs == pytest.approx(rhs, abs=1e-9)


def test_wilson_brackets_the_point_estimate():
    for failures, trials in [(0, 10), (3, 10), (10, 10), (17, 400)]:
        lo, hi = wilson_interval(failures, trials)
        assert 0.0 <= lo <= failures / trials <= hi <= 1.0


def test_wilson_edge_cases():
    assert wilson_interval(0, 100)[0] == 0.0
    assert wilson_interval(100, 100)[1] == 1.0
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_wilson_narrows_with_more_trials():
    widths = []
    for trials in (10, 100, 1000):
        lo, hi = wilson_interval(trials // 10, trials)
        widths.append(hi - lo)
    assert widths[0] > widths[1] > widths[2]


# ------------------------------------------------------- logical error rates

def test_noiseless_rate_is_zero():
    from qforge.qec.noise import NoiseModel
    est = logical_error_rate(3, NoiseModel(p=0.0, q=0.0), rounds=2,
                             trials=50, seed=1)
    assert est.failures == 0
    assert est.logical_error_rate == 0.0
    assert est.ci_low == 0.0
    assert est.decode_errors == 0 and est.inexact_decodes == 0


def test_measurement_noise_alone_never_fails():
    """With p=0 the data qubits are clean; q-flips make time-like defect
    pairs whose corrections cancel, so no trial ends in a logical error."""
    from qforge.qec.noise import NoiseModel
    est = logical_error_rate(3, NoiseModel(p=0.0, q=0.1), rounds=3,
                             trials=300, seed=11)
    assert est.failures == 0


def test_rate_estimate_fields_and_to_dict():
    from qforge.qec.noise import NoiseModel
    est = logical_error_rate(3, NoiseModel(p=0.02, q=0.0), rounds=1,
                             trials=100, seed=5)
    assert est.distance == 3 and est.rounds == 1 and est.trials == 100
    assert est.logical_error_rate == est.failures / est.trials
    assert est.ci_low <= est.logical_error_rate <= est.ci_high
    payload = est.to_dict()
    assert payload["failures"] == est.failures
    assert set(payload) == {
        "distance", "p", "q", "rounds", "trials", "failures",
        "logical_error_rate", "ci_low", "ci_high", "decode_errors",
        "inexact_decodes"}


def test_same_seed_reproduces_the_estimate():
    from qforge.qec.noise import NoiseModel
    a = logical_error_rate(3, NoiseModel(p=0.05, q=0.02), rounds=3,
                           trials=150, seed=77)
    b = logical_error_rate(3, NoiseModel(p=0.05, q=0.02), rounds=3,
                           trials=150, seed=77)
    assert a == b


def test_low_physical_rate_gives_low_logical_rate():
    from qforge.qec.noise import NoiseModel
    est = logical_error_rate(3, NoiseModel(p=0.002, q=0.0), rounds=1,
                             trials=2000, seed=9)
    assert est.logical_error_rate < 0.01


def test_rate_grows_with_physical_noise():
    from qforge.qec.noise import NoiseModel
    low = logical_error_rate(3, NoiseModel(p=0.01, q=0.0), rounds=3,
                             trials=1500, seed=3)
    high = logical_error_rate(3, NoiseModel(p=0.15, q=0.0), rounds=3,
                              trials=1500, seed=3)
    assert high.logical_error_rate > low.logical_error_rate
    assert high.ci_low > low.ci_high  # separated, not just ordered


def test_decode_errors_are_counted_as_failures():
    from qforge.qec.noise import NoiseModel
    config = DecoderConfig(layout=build_layout(3), max_exact_defects=2,
                           allow_greedy_fallback=False)
    est = logical_error_rate(3, NoiseModel(p=0.3, q=0.1), rounds=3,
                             trials=30, seed=21, config=config)
    assert est.decode_errors > 0
    assert est.failures >= est.decode_errors


def test_greedy_fallback_trials_are_flagged():
    from qforge.qec.noise import NoiseModel
    config = DecoderConfig(layout=build_layout(3), max_exact_defects=2)
    est = logical_error_rate(3, NoiseModel(p=0.3, q=0.1), rounds=3,
                             trials=30, seed=21, config=config)
    assert est.inexact_decodes > 0
    assert est.decode_errors == 0


def test_parameter_validation():
    from qforge.qec.noise import NoiseModel
    model = NoiseModel(p=0.01)
    with pytest.raises(InvalidParamsError):
        logical_error_rate(3, model, rounds=0, trials=10, seed=0)
    with pytest.raises(InvalidParamsError):
        logical_error_rate(3, model, rounds=1, trials=0, seed=0)
    with pytest.raises(InvalidParamsError):
        logical_error_rate(5, model, rounds=1, trials=10, seed=0,
                           config=DecoderConfig(layout=build_layout(3)))


def test_noise_model_validation():
    from qforge.qec.noise import NoiseModel
    with pytest.raises(InvalidParamsError):
        NoiseModel(p=-0.1)
    with pytest.raises(InvalidParamsError):
        NoiseModel(p=0.1, q=1.5)

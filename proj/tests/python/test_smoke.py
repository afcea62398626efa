"""Smoke tests of the Python bindings against independently computed values."""

import math

import numpy as np
import pytest

import fedq

CONFIG = """N = 6
K = 3
E = 2
T = 30
dim = 3
samples_per_client = 10
batch_size = 5
"""


def test_version():
    assert fedq.__version__ == "0.1.0"


def test_scalar_quantizer():
    assert fedq.round_nearest(2.5) == 3
    assert fedq.round_nearest(-2.5) == -2
    assert fedq.clamp_limit(9, 4) == 7
    assert fedq.clamp_limit(-9, 4) == -8
    code, value = fedq.quantize_pipeline(0.3, bits=4, gain=8.0)
    assert (code, value) == (2, 0.25)
    code, value = fedq.quantize_pipeline(1e300, bits=3, gain=4.0)
    assert (code, value) == (3, 0.75)


def test_stochastic_rounding_is_unbiased():
    x = 0.3
    draws = [fedq.round_stochastic(x, seed=s) for s in range(20000)]
    assert set(draws) <= {0, 1}
    sd = math.sqrt(x * (1 - x) / len(draws))
    assert abs(np.mean(draws) - x) < 5 * sd


def test_grid_moments_match_closed_form():
    rng = np.random.default_rng(0)
    for bits in (1, 3, 6):
        for M in (0.5, 2.0):
            step = 2 * M / (2**bits - 1)
            for w in rng.uniform(-M, M, 50):
                low, high, p_high, mean, var = fedq.grid_moments(float(w), M, bits)
                assert high - low == pytest.approx(step)
                assert mean == pytest.approx(w, abs=1e-12)
                assert var == pytest.approx((high - w) * (w - low), abs=1e-12)
                assert var <= (M / (2**bits - 1)) ** 2 * (1 + 1e-12)


def test_vector_quantizer_and_gain():
    d = [0.5, -2.0, 1.0]
    assert fedq.dt_gain(d, 3) == pytest.approx(4 / 2.0)
    codes, values = fedq.quantize_vector(d, bits=3, gain=2.0)
    assert codes == [1, -4, 2]
    assert values == [0.5, -2.0, 1.0]
    assert fedq.message_bits(100, 2) == 136 + 200


def test_schedules():
    assert fedq.lr_schedule(0, 1.0, 16.0) == 0.125
    for t in range(1, 50):
        eta = fedq.lr_schedule(t - 1, 1.0, 8.0)
        assert fedq.bits_thm1(t, 1.0, 8.0) == math.ceil(math.log2(1 / eta + 1))
    assert fedq.bits_downlink(0, 1.0, 16.0) == 4
    assert fedq.bits_step(151, 2.0, 75.0) == 2


def test_run_federation():
    records = fedq.run_federation(CONFIG)
    assert [r["round"] for r in records] == list(range(1, 31))
    assert all(r["gap"] >= -1e-12 for r in records)
    assert records[-1]["gap"] < records[0]["gap"]
    again = fedq.run_federation(CONFIG, threads=3)
    assert again == records
    other = fedq.run_federation(CONFIG, seed=5)
    assert other != records
    assert fedq.run_federation(CONFIG.replace("T = 30", "T = 0")) == []


def test_quantized_run_accounting():
    text = CONFIG + "uplink_mode = differential\nuplink_bits_schedule = constant:2\n"
    for r in fedq.run_federation(text):
        assert r["uplink_bits_cum"] == r["round"] * 3 * (136 + 3 * 2)
        assert r["downlink_bits_cum"] == r["round"] * 32 * 3


def test_errors_map_to_python_exceptions():
    with pytest.raises(fedq.ConfigError, match="'K'"):
        fedq.run_federation("N = 3\nK = 4\n")
    assert issubclass(fedq.ConfigError, ValueError)
    bad = CONFIG + "spread = 5\nuplink_mode = weight\nuplink_bits_schedule = constant:6\nweight_bound = 0.5\n"
    with pytest.raises(fedq.AssumptionViolation):
        fedq.run_federation(bad)


def test_canonical_config_round_trips():
    text = fedq.canonical_config(CONFIG)
    assert fedq.canonical_config(text) == text


def test_gamma_oracle():
    assert fedq.gamma_of([[0.0], [2.0]]) == 0.5
    clients = [[0.0, 1.0], [3.0, 5.0], [-1.0, 1.0]]
    pooled = np.concatenate([np.array(c) for c in clients])
    f_star = 0.5 * np.var(pooled)
    local = np.mean([0.5 * np.var(c) for c in clients])
    assert fedq.gamma_of(clients) == pytest.approx(f_star - local)


def test_verifiers():
    r = fedq.verify_lemma4(6, 2)
    assert r["passed"] and r["title"] == "lemma4"
    assert "result: pass" in r["text"]
    assert fedq.verify_lemma5(1.0, 4)["passed"]
    assert fedq.verify_lemma7([0.3, -1.2, 0.05], 2)["passed"]
    with pytest.raises(ValueError):
        fedq.verify_lemma4(30, 15)

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from sdors.model import DurationModel, ValidationError, document_to_dict
from sdors.sampling import (
    GenConfig,
    generate_instance,
    lognormal_params,
    sample_durations,
    sample_scenarios,
    split_stream,
    with_duration_sd,
)


def test_forced_attributes_give_mandatory_patients():
    inst = generate_instance(GenConfig(patients=3, days=5), rho=np.full(3, 5), alpha=np.full(3, 120))
    assert all(p.health_score == 575 and p.mandatory for p in inst.patients)


def test_forced_attributes_give_optional_patient_costs():
    inst = generate_instance(GenConfig(patients=1, days=5), rho=np.array([1]), alpha=np.array([60]))
    p = inst.patients[0]
    assert p.health_score == 55 and not p.mandatory
    assert p.cancel_penalty == 4320.0


def test_generation_is_deterministic():
    a = generate_instance(GenConfig(seed=11))
    b = generate_instance(GenConfig(seed=11))
    assert json.dumps(document_to_dict(a)) == json.dumps(document_to_dict(b))
    assert json.dumps(document_to_dict(a)) != json.dumps(document_to_dict(generate_instance(GenConfig(seed=12))))


def test_generated_ranges():
    inst = generate_instance(GenConfig(patients=200, hospitals=3, days=5, seed=1))
    assert set(np.unique(inst.time_limit)) <= {420, 435, 450, 465, 480}
    assert inst.room_open_cost.min() >= 4000 and inst.room_open_cost.max() <= 6000
    assert inst.suite_open_cost.min() >= 1500 and inst.suite_open_cost.max() <= 2500
    assert {p.urgency for p in inst.patients} <= set(range(1, 6))
    assert min(p.wait_days for p in inst.patients) >= 60 and max(p.wait_days for p in inst.patients) <= 120


def test_invalid_config_rejected():
    with pytest.raises(ValidationError):
        generate_instance(GenConfig(patients=0))
    with pytest.raises(ValidationError, match="kappa"):
        generate_instance(GenConfig(kappa3=-1.0))


def test_degenerate_sd_gives_mean():
    inst = with_duration_sd(generate_instance(GenConfig(patients=5)), 0.0)
    assert np.all(sample_scenarios(inst, 20).durations == 160)


def test_truncated_mean_matches_numeric_integral():
    d = DurationModel()
    mu, sigma = lognormal_params(d.mean, d.sd)
    dist = stats.lognorm(s=sigma, scale=np.exp(mu))
    mass = dist.cdf(d.high) - dist.cdf(d.low)
    mean = integrate.quad(lambda t: t * dist.pdf(t), d.low, d.high)[0] / mass
    T = sample_durations(np.random.default_rng(0), d, (100_000,))
    assert T.min() >= 45 and T.max() <= 480
    assert abs(T.mean() - mean) < 2.0
    assert abs(T.mean() - 160.0) < 2.0


def test_scenarios_reproducible_and_seeded():
    inst = generate_instance(GenConfig(patients=6, seed=2))
    a = sample_scenarios(inst, 5)
    b = sample_scenarios(inst, 5)
    assert np.array_equal(a.durations, b.durations)
    assert a.seed == split_stream(2, "scenarios")
    assert not np.array_equal(a.durations, sample_scenarios(inst, 5, 99).durations)
    a.validate(inst)


def test_split_stream_examples():
    assert split_stream(0, "a") == split_stream(0, "a")
    assert split_stream(0, "a") != split_stream(0, "b")
    assert split_stream(0, "a") != split_stream(1, "a")
    assert 0 <= split_stream(123, "x") < 2**64


def test_split_stream_labels_do_not_collide():
    seen = {split_stream(7, f"label-{i}") for i in range(1_000_000)}
    assert len(seen) == 1_000_000


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=1.0, max_value=500.0), st.floats(min_value=0.1, max_value=300.0))
def test_lognormal_params_reproduce_moments(mean, sd):
    mu, sigma = lognormal_params(mean, sd)
    assert np.exp(mu + sigma**2 / 2) == pytest.approx(mean, rel=1e-9)
    var = (np.exp(sigma**2) - 1) * np.exp(2 * mu + sigma**2)
    assert np.sqrt(var) == pytest.approx(sd, rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(5.0, 120.0))
def test_durations_stay_within_truncation(seed, sd):
    d = DurationModel(sd=sd)
    T = sample_durations(np.random.default_rng(seed), d, (50, 4))
    assert T.dtype.kind == "i"
    assert T.min() >= d.low and T.max() <= d.high

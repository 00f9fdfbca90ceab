import json
import math

import numpy as np
import pytest

from vmdp.model import (
    DesignInstance,
    build_design_model,
    generate_random_instance,
    model_from_json,
    model_to_json,
    validate_model,
)

from conftest import example_instance


def test_example_model_is_valid(design_model):
    report = validate_model(design_model)
    assert report.ok, report.violations


def test_design_rewards():
    m = build_design_model(example_instance())
    # component 1, alternative 5 (0-based action 4)
    np.testing.assert_allclose(m.rewards[0][0][4], [-0.29, math.log(0.68)])
    # same rewards at the second decision epoch
    np.testing.assert_allclose(m.rewards[1][0][4], [-0.29, math.log(0.68)])
    np.testing.assert_allclose(m.terminal_rewards, 0.0)


def test_design_transition_structure():
    m = build_design_model(example_instance())
    for a in range(5):
        np.testing.assert_array_equal(m.transitions[0][0][a], [0.0, 1.0])
        np.testing.assert_array_equal(m.transitions[0][1][a], [1.0, 0.0])
        np.testing.assert_array_equal(m.transitions[1][0][a], [0.5, 0.5])
    # rows sum to exactly 1, no float residue
    for t in range(2):
        for s in range(2):
            assert np.all(m.transitions[t][s].sum(axis=1) == 1.0)


def test_reliability_one_gives_zero_log_reward():
    d = DesignInstance(
        costs=(np.array([1.0]), np.array([0.5, 0.2])),
        reliabilities=(np.array([1.0]), np.array([0.9, 0.8])),
    )
    m = build_design_model(d)
    assert m.rewards[0][0][0][1] == 0.0


def test_nonpositive_reliability_rejected():
    with pytest.raises(ValueError, match="reliability"):
        DesignInstance(
            costs=(np.array([1.0, 2.0]), np.array([1.0])),
            reliabilities=(np.array([0.5, 0.0]), np.array([0.9])),
        )


def test_alpha_sum_violation(design_model):
    bad = model_from_json(model_to_json(design_model))
    bad.alpha[:] = [0.6, 0.6]
    report = validate_model(bad)
    assert not report.ok
    assert any("initial distribution sums to 1.2" in v for v in report.violations)


def test_transition_row_sum_violation(design_model):
    bad = model_from_json(model_to_json(design_model))
    bad.transitions[0][0][0] = np.array([0.5, 0.4])
    report = validate_model(bad)
    assert not report.ok
    assert any("sums to 0.9" in v and "t=0, s=0, a=0" in v for v in report.violations)


def test_probability_range_violation(design_model):
    bad = model_from_json(model_to_json(design_model))
    bad.transitions[0][0][0] = np.array([1.5, -0.5])
    report = validate_model(bad)
    assert not report.ok
    assert any("outside [0, 1]" in v for v in report.violations)


def test_all_single_action_states_rejected():
    d = DesignInstance(
        costs=(np.array([1.0]), np.array([1.0])),
        reliabilities=(np.array([0.5]), np.array([0.5])),
    )
    report = validate_model(build_design_model(d))
    assert not report.ok
    assert any("k_s >= 2" in v for v in report.violations)


def test_random_instance_correlation_target():
    costs, rels = [], []
    for seed in range(1000):
        inst = generate_random_instance(5, 5, 0.7, seed)
        for s in (0, 1):
            costs.append(inst.costs[s])
            rels.append(inst.reliabilities[s])
    r = np.corrcoef(np.concatenate(costs), np.concatenate(rels))[0, 1]
    assert abs(r - 0.7) < 0.05, f"empirical correlation {r:.3f}"


def test_random_instance_zero_correlation():
    costs, rels = [], []
    for seed in range(1000):
        inst = generate_random_instance(5, 5, 0.0, seed)
        for s in (0, 1):
            costs.append(inst.costs[s])
            rels.append(inst.reliabilities[s])
    r = np.corrcoef(np.concatenate(costs), np.concatenate(rels))[0, 1]
    assert abs(r) < 0.05, f"empirical correlation {r:.3f}"


def test_random_instance_deterministic_under_seed():
    a = generate_random_instance(4, 7, 0.7, 123)
    b = generate_random_instance(4, 7, 0.7, 123)
    for s in (0, 1):
        np.testing.assert_array_equal(a.costs[s], b.costs[s])
        np.testing.assert_array_equal(a.reliabilities[s], b.reliabilities[s])


def test_random_instance_reliabilities_clamped():
    for seed in range(200):
        inst = generate_random_instance(10, 10, 0.7, seed)
        for s in (0, 1):
            assert np.all(inst.reliabilities[s] >= 0.01)
            assert np.all(inst.reliabilities[s] <= 1.0)
            m = build_design_model(inst)
            assert np.all(np.isfinite(m.rewards[0][s]))


def test_random_instances_build_valid_models():
    for seed in range(50):
        inst = generate_random_instance(3, 6, 0.5, seed)
        assert validate_model(build_design_model(inst)).ok


def test_invalid_rho_rejected():
    with pytest.raises(ValueError, match="rho"):
        generate_random_instance(5, 5, 1.0, 0)
    with pytest.raises(ValueError):
        generate_random_instance(0, 5, 0.5, 0)


def test_json_round_trip(design_model):
    data = json.loads(json.dumps(model_to_json(design_model)))
    m2 = model_from_json(data)
    assert m2.num_states == design_model.num_states
    assert m2.horizon == design_model.horizon
    assert m2.actions_per_state == design_model.actions_per_state
    np.testing.assert_array_equal(m2.alpha, design_model.alpha)
    for t in range(design_model.num_epochs):
        for s in range(design_model.num_states):
            np.testing.assert_array_equal(m2.transitions[t][s], design_model.transitions[t][s])
            np.testing.assert_array_equal(m2.rewards[t][s], design_model.rewards[t][s])
    np.testing.assert_array_equal(m2.terminal_rewards, design_model.terminal_rewards)
    assert validate_model(m2).ok

import math

import numpy as np
import pytest

from vmdp.model import DesignInstance, Model, build_design_model

# Costs and reliabilities of the worked two-component example
# (five alternatives per component).
COMPONENT1 = {
    "cost": [0.70, 0.33, 0.83, 0.60, 0.29],
    "reliability": [0.48, 0.21, 0.58, 0.81, 0.68],
}
COMPONENT2 = {
    "cost": [0.48, 0.42, 0.39, 0.76, 0.98],
    "reliability": [0.56, 0.79, 0.46, 0.38, 0.90],
}

# Reference efficient set for that example: 1-based action pairs per
# epoch and value vectors rounded to two decimals.
REFERENCE_EFFICIENT = [
    (((5, 2), (5, 2)), (-0.72, -0.61)),
    (((4, 2), (5, 2)), (-0.87, -0.53)),
    (((4, 2), (4, 2)), (-1.02, -0.44)),
    (((4, 5), (4, 2)), (-1.30, -0.38)),
    (((4, 5), (4, 5)), (-1.58, -0.32)),
    (((4, 2), (4, 5)), (-1.30, -0.38)),
    (((5, 2), (4, 2)), (-0.87, -0.53)),
    (((5, 2), (5, 3)), (-0.70, -0.88)),
    (((5, 3), (5, 3)), (-0.68, -1.16)),
    (((5, 3), (5, 2)), (-0.70, -0.88)),
]


def one_based(action_map):
    return tuple(tuple(a + 1 for a in row) for row in action_map)


def example_instance() -> DesignInstance:
    return DesignInstance(
        costs=(np.array(COMPONENT1["cost"]), np.array(COMPONENT2["cost"])),
        reliabilities=(np.array(COMPONENT1["reliability"]), np.array(COMPONENT2["reliability"])),
    )


@pytest.fixture(scope="session")
def design_model() -> Model:
    return build_design_model(example_instance())


def random_model(rng, max_states=3, max_actions=3, max_horizon=4, num_objectives=None,
                 sparse=False) -> Model:
    """A random valid model; all-positive transitions unless sparse is set.

    Sparse models zero out some transition entries (rows renormalized, at
    least one positive entry kept), which can make them non-regular and
    their programs degenerate.
    """
    S = int(rng.integers(2, max_states + 1))
    T = int(rng.integers(2, max_horizon + 1))
    k = int(num_objectives if num_objectives is not None else rng.integers(2, 4))
    ks = [int(rng.integers(1, max_actions + 1)) for _ in range(S)]
    if max(ks) < 2:
        ks[int(rng.integers(0, S))] = 2

    transitions, rewards = [], []
    for _t in range(T - 1):
        p_row, r_row = [], []
        for s in range(S):
            P = rng.dirichlet(np.ones(S) * 2.0, size=ks[s])
            if sparse:
                mask = rng.random(P.shape) < 0.4
                keep = rng.integers(0, S, size=ks[s])
                mask[np.arange(ks[s]), keep] = False
                P = np.where(mask, 0.0, P)
                P = P / P.sum(axis=1, keepdims=True)
            p_row.append(P)
            r_row.append(rng.normal(size=(ks[s], k)))
        transitions.append(p_row)
        rewards.append(r_row)

    alpha = rng.dirichlet(np.ones(S) * 5.0)
    alpha = np.maximum(alpha, 0.05)
    alpha = alpha / alpha.sum()
    return Model(
        num_states=S,
        horizon=T,
        num_objectives=k,
        actions_per_state=tuple(ks),
        alpha=alpha,
        transitions=transitions,
        rewards=rewards,
        terminal_rewards=rng.normal(size=(S, k)),
    )


def unreachable_state_model(k_obj=2) -> Model:
    """S=2, T=3 model where nothing ever moves into state 1: every policy
    misses (state 1, epochs >= 1)."""
    into_0 = [np.array([[1.0, 0.0], [1.0, 0.0]]), np.array([[1.0, 0.0], [1.0, 0.0]])]
    rng = np.random.default_rng(7)
    rewards = [
        [rng.normal(size=(2, k_obj)) for _ in range(2)],
        [rng.normal(size=(2, k_obj)) for _ in range(2)],
    ]
    return Model(
        num_states=2,
        horizon=3,
        num_objectives=k_obj,
        actions_per_state=(2, 2),
        alpha=np.array([0.5, 0.5]),
        transitions=[into_0, [P.copy() for P in into_0]],
        rewards=rewards,
        terminal_rewards=rng.normal(size=(2, k_obj)),
    )


def assert_close(actual, expected, tol, label=""):
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    err = np.max(np.abs(actual - expected))
    assert err <= tol, f"{label}: max deviation {err:.3e} > {tol:.1e} ({actual} vs {expected})"


def total_reliability(instance: DesignInstance, pair1, pair2) -> float:
    "log reliability of a design choosing (a1, a2) at the two epochs, 1-based."
    # Actions chosen for component s come from whichever epoch designs it:
    # starting in either state, the played pair is (pair1[start], pair2[other]).
    p = instance.reliabilities
    start1 = math.log(p[0][pair1[0] - 1]) + math.log(p[1][pair2[1] - 1])
    start2 = math.log(p[1][pair1[1] - 1]) + math.log(p[0][pair2[0] - 1])
    return 0.5 * (start1 + start2)


def total_cost(instance: DesignInstance, pair1, pair2) -> float:
    c = instance.costs
    start1 = c[0][pair1[0] - 1] + c[1][pair2[1] - 1]
    start2 = c[1][pair1[1] - 1] + c[0][pair2[0] - 1]
    return 0.5 * (start1 + start2)

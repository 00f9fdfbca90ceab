import itertools

import numpy as np
import pytest
import scipy.io

from vmdp.dynamics import Policy, evaluate_policy, policy_frequencies
from vmdp.model import Model, validate_model
from vmdp.vlp import (
    build_program,
    certify_full_rank,
    count_regular_bases,
    enumerate_regular_bases,
    export_matrixmarket,
    regular_basis_solve,
)

from conftest import assert_close, random_model


@pytest.fixture(scope="module")
def design_program(design_model):
    return build_program(design_model)


def test_design_dimensions(design_program):
    # n = 2(k1 + k2 + 1), m = 6 for the two-component problem
    assert design_program.m == 6
    assert design_program.n == 22
    assert design_program.b.shape == (6,)
    np.testing.assert_array_equal(design_program.b, [0.5, 0.5, 0, 0, 0, 0])


def test_summation_block_pattern():
    # S=3 with action counts (2, 3, 2): the first constraint block is the
    # 3 x 7 block-diagonal ones pattern.
    rng = np.random.default_rng(0)
    m = Model(
        num_states=3,
        horizon=3,
        num_objectives=2,
        actions_per_state=(2, 3, 2),
        alpha=np.array([0.3, 0.3, 0.4]),
        transitions=[
            [rng.dirichlet(np.ones(3), size=k) for k in (2, 3, 2)] for _ in range(2)
        ],
        rewards=[[rng.normal(size=(k, 2)) for k in (2, 3, 2)] for _ in range(2)],
        terminal_rewards=np.zeros((3, 2)),
    )
    assert validate_model(m).ok
    cp = build_program(m)
    sigma = cp.dense()[:3, :7]
    expected = np.array(
        [
            [1, 1, 0, 0, 0, 0, 0],
            [0, 0, 1, 1, 1, 0, 0],
            [0, 0, 0, 0, 0, 1, 1],
        ],
        dtype=float,
    )
    np.testing.assert_array_equal(sigma, expected)
    # sub-diagonal blocks carry the negated transition probabilities
    assert np.all(cp.dense()[3:6, :7] <= 0)


def test_index_map_bijection(design_program):
    cp = design_program
    seen = set()
    for t in range(2):
        for s in range(2):
            for a in range(5):
                j = cp.col_index(t, s, a)
                assert cp.label(j) == ("sa", t, s, a)
                seen.add(j)
    for s in range(2):
        j = cp.terminal_col(s)
        assert cp.label(j) == ("terminal", s)
        seen.add(j)
    assert seen == set(range(cp.n))


def test_policy_frequencies_satisfy_program():
    rng = np.random.default_rng(21)
    for _ in range(25):
        m = random_model(rng)
        cp = build_program(m)
        pi = Policy.random(m, rng)
        x = cp.pack(policy_frequencies(m, pi))
        assert np.all(x >= 0)
        assert_close(cp.A @ x, cp.b, 1e-9, "A x = b")


def test_nonzero_count_with_full_transition_support():
    # (T-1)(K + S*K) + S nonzeros when every transition probability is positive
    rng = np.random.default_rng(33)
    for _ in range(10):
        m = random_model(rng)
        cp = build_program(m)
        S, T, K = m.num_states, m.horizon, cp.K
        assert cp.A.nnz == (T - 1) * (K + S * K) + S


def test_full_rank_certificate():
    rng = np.random.default_rng(4)
    for _ in range(10):
        assert certify_full_rank(build_program(random_model(rng)))
        assert certify_full_rank(build_program(random_model(rng, sparse=True)))


def test_basis_solve_reference_vertex(design_program):
    # (5, 2) at both epochs, 0-based (4, 1)
    x = regular_basis_solve(design_program, ((4, 1), (4, 1)))
    assert_close(design_program.value(x), (-0.72, -0.61), 0.02, "reference value")


def test_basis_solve_matches_policy_frequencies(design_model, design_program):
    rng = np.random.default_rng(8)
    for _ in range(20):
        sel = tuple(
            tuple(int(rng.integers(0, k)) for k in design_model.actions_per_state)
            for _ in range(2)
        )
        x = regular_basis_solve(design_program, sel)
        pi = Policy.deterministic(design_model, [list(r) for r in sel])
        x_pi = design_program.pack(policy_frequencies(design_model, pi))
        assert_close(x, x_pi, 1e-12, "vertex vs forward recursion")
        assert_close(design_program.value(x), evaluate_policy(design_model, pi)[1], 1e-9)


def test_regular_bases_are_unit_lower_triangular():
    rng = np.random.default_rng(44)
    for _ in range(10):
        m = random_model(rng, sparse=bool(rng.integers(0, 2)))
        cp = build_program(m)
        sel = tuple(
            tuple(int(rng.integers(0, k)) for k in m.actions_per_state)
            for _ in range(m.num_epochs)
        )
        AB = cp.dense()[:, cp.basis_columns(sel)]
        np.testing.assert_array_equal(np.diag(AB), 1.0)
        assert np.all(np.triu(AB, k=1) == 0)
        below = np.tril(AB, k=-1)
        assert np.all(below <= 0) and np.all(below >= -1)


def test_regular_model_vertices_distinct_nondegenerate():
    rng = np.random.default_rng(12)
    m = random_model(rng, max_states=2, max_actions=3, max_horizon=3)
    cp = build_program(m)
    seen = set()
    for sel in enumerate_regular_bases(cp):
        x = regular_basis_solve(cp, sel)
        assert np.count_nonzero(x > 1e-10) == cp.m  # non-degenerate
        assert_close(cp.A @ x, cp.b, 1e-9, "feasible")
        seen.add(np.round(x, 10).tobytes())
    assert len(seen) == count_regular_bases(cp)


def test_degenerate_vertex_has_zero_basic_coordinate():
    from conftest import unreachable_state_model

    m = unreachable_state_model()
    cp = build_program(m)
    sel = ((0, 0), (1, 1))
    x = regular_basis_solve(cp, sel)
    # state 1 carries no mass at epoch 1, so its selected coordinate is 0
    assert x[cp.col_index(1, 1, 1)] == 0.0
    assert np.count_nonzero(x) < cp.m


def test_enumeration_counts(design_program):
    assert count_regular_bases(design_program) == 625
    assert sum(1 for _ in enumerate_regular_bases(design_program)) == 625

    rng = np.random.default_rng(1)
    m = random_model(rng, max_states=2, max_actions=2, max_horizon=3)
    while m.actions_per_state != (2, 2) or m.horizon != 3:
        m = random_model(rng, max_states=2, max_actions=2, max_horizon=3)
    cp = build_program(m)
    assert count_regular_bases(cp) == 16
    maps = list(enumerate_regular_bases(cp))
    assert len(maps) == len(set(maps)) == 16


def test_single_state_two_actions():
    rng = np.random.default_rng(2)
    m = Model(
        num_states=1,
        horizon=2,
        num_objectives=2,
        actions_per_state=(2,),
        alpha=np.array([1.0]),
        transitions=[[np.array([[1.0], [1.0]])]],
        rewards=[[rng.normal(size=(2, 2))]],
        terminal_rewards=np.zeros((1, 2)),
    )
    assert validate_model(m).ok
    cp = build_program(m)
    assert count_regular_bases(cp) == 2
    assert len(list(enumerate_regular_bases(cp))) == 2


def test_enumeration_guard():
    rng = np.random.default_rng(3)
    m = random_model(rng, max_states=3, max_actions=3, max_horizon=3)
    # inflate the count artificially by a long horizon
    big = Model(
        num_states=m.num_states,
        horizon=40,
        num_objectives=m.num_objectives,
        actions_per_state=m.actions_per_state,
        alpha=m.alpha,
        transitions=[m.transitions[0]] * 39,
        rewards=[m.rewards[0]] * 39,
        terminal_rewards=m.terminal_rewards,
    )
    cp = build_program(big)
    with pytest.raises(ValueError, match="guard"):
        next(iter(enumerate_regular_bases(cp)))
    forced = enumerate_regular_bases(cp, force=True)
    assert len(list(itertools.islice(forced, 5))) == 5


def test_pack_unpack_round_trip(design_model, design_program):
    rng = np.random.default_rng(6)
    pi = Policy.random(design_model, rng)
    fv = policy_frequencies(design_model, pi)
    back = design_program.unpack(design_program.pack(fv))
    for t in range(2):
        for s in range(2):
            np.testing.assert_array_equal(back.x[t][s], fv.x[t][s])
    np.testing.assert_array_equal(back.terminal, fv.terminal)


def test_matrixmarket_export(design_program, tmp_path):
    paths = export_matrixmarket(design_program, tmp_path / "design")
    A = scipy.io.mmread(paths[0]).toarray()
    b = scipy.io.mmread(paths[1]).toarray().ravel()
    C = scipy.io.mmread(paths[2]).toarray()
    np.testing.assert_allclose(A, design_program.dense())
    np.testing.assert_allclose(b, design_program.b)
    np.testing.assert_allclose(C, design_program.C)

"""Policies, policy evaluation, and the policy <-> frequency correspondence.

A policy assigns to every decision epoch t and state s a distribution
q(a | s, t) over the actions of s. Its state-action frequencies
x_t(s, a) = P(state s, action a at epoch t) under the initial distribution
form the feasible points of the equivalent linear program; the map is a
bijection once policies are regularized (forced to action 0 at state-epoch
pairs they cannot reach).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Model

__all__ = [
    "Policy",
    "FrequencyVector",
    "RegularityReport",
    "evaluate_policy",
    "policy_frequencies",
    "frequencies_to_policy",
    "regularize",
    "regularity_report",
    "check_frequency_vector",
    "policy_to_json",
    "policy_from_json",
]

REACH_TOL = 1e-12  # forward state marginals below this count as unreachable
FREQ_TOL = 1e-9  # feasibility tolerance on the flow constraints


@dataclass(frozen=True)
class Policy:
    """Randomized Markov policy: q[t][s] is a (k_s,) distribution over actions."""

    q: list  # [t][s] -> (k_s,) ndarray

    @classmethod
    def deterministic(cls, m: Model, actions) -> "Policy":
        "Build the policy that plays actions[t][s] with probability 1."
        q = []
        for t in range(m.num_epochs):
            row = []
            for s in range(m.num_states):
                dist = np.zeros(m.actions_per_state[s])
                dist[actions[t][s]] = 1.0
                row.append(dist)
            q.append(row)
        return cls(q)

    @classmethod
    def random(cls, m: Model, rng: np.random.Generator) -> "Policy":
        "Dirichlet(1) decision rules at every state-epoch pair."
        return cls(
            [
                [rng.dirichlet(np.ones(m.actions_per_state[s])) for s in range(m.num_states)]
                for t in range(m.num_epochs)
            ]
        )

    @property
    def is_deterministic(self) -> bool:
        return all(np.max(dist) == 1.0 for row in self.q for dist in row)

    def action_map(self) -> tuple:
        "The per-(epoch, state) chosen actions; only valid when deterministic."
        if not self.is_deterministic:
            raise ValueError("policy is not deterministic")
        return tuple(tuple(int(np.argmax(dist)) for dist in row) for row in self.q)


def _check_dims(m: Model, pi: Policy) -> None:
    if len(pi.q) != m.num_epochs:
        raise ValueError(f"policy has {len(pi.q)} epochs, model expects {m.num_epochs}")
    for t, row in enumerate(pi.q):
        if len(row) != m.num_states:
            raise ValueError(f"policy epoch {t} covers {len(row)} states, expected {m.num_states}")
        for s, dist in enumerate(row):
            if len(dist) != m.actions_per_state[s]:
                raise ValueError(
                    f"policy (t={t}, s={s}) has {len(dist)} actions, expected {m.actions_per_state[s]}"
                )


@dataclass(frozen=True)
class FrequencyVector:
    """State-action frequencies x[t][s] (k_s,) plus terminal frequencies (S,)."""

    x: list  # [t][s] -> (k_s,) ndarray
    terminal: np.ndarray  # (S,)

    def state_marginals(self, m: Model) -> np.ndarray:
        "mu[t, s] = total frequency mass of state s at epoch t (terminal included)."
        mu = np.zeros((m.horizon, m.num_states))
        for t in range(m.num_epochs):
            for s in range(m.num_states):
                mu[t, s] = self.x[t][s].sum()
        mu[m.horizon - 1] = self.terminal
        return mu


def evaluate_policy(m: Model, pi: Policy):
    """Backward recursion for the expected total vector reward.

    u_T(s) = R_T(s), and one step earlier
    u_t(s) = sum_a q(a|s,t) [R_t(s,a) + sum_j p_t(j|s,a) u_{t+1}(j)].

    Returns (per_state, aggregate): u_1 as an (S, k) array and the
    alpha-weighted sum as a (k,) vector.
    """
    _check_dims(m, pi)
    u = np.asarray(m.terminal_rewards, dtype=float).copy()
    for t in reversed(range(m.num_epochs)):
        u_next = u
        u = np.zeros_like(u_next)
        for s in range(m.num_states):
            # (k_s, k): immediate reward plus expected continuation per action
            q_sa = m.rewards[t][s] + m.transitions[t][s] @ u_next
            u[s] = pi.q[t][s] @ q_sa
    return u, m.alpha @ u


def policy_frequencies(m: Model, pi: Policy) -> FrequencyVector:
    """Forward recursion for the state-action frequencies of a policy.

    mu_1 = alpha; x_t(s, a) = mu_t(s) q(a|s,t);
    mu_{t+1}(j) = sum_{s,a} p_t(j|s,a) x_t(s,a); x_T = mu_T.
    """
    _check_dims(m, pi)
    mu = np.asarray(m.alpha, dtype=float).copy()
    x = []
    for t in range(m.num_epochs):
        row = [mu[s] * pi.q[t][s] for s in range(m.num_states)]
        x.append(row)
        mu_next = np.zeros(m.num_states)
        for s in range(m.num_states):
            mu_next += row[s] @ m.transitions[t][s]
        mu = mu_next
    return FrequencyVector(x=x, terminal=mu)


def check_frequency_vector(m: Model, fv: FrequencyVector, tol: float = FREQ_TOL) -> list[str]:
    """Violations of the flow constraints (a)-(c) and of nonnegativity."""
    v: list[str] = []
    for t in range(m.num_epochs):
        for s in range(m.num_states):
            if np.any(np.asarray(fv.x[t][s]) < -tol):
                v.append(f"negative frequency at (t={t}, s={s})")
    if np.any(fv.terminal < -tol):
        v.append("negative terminal frequency")

    for j in range(m.num_states):
        lhs = fv.x[0][j].sum()
        if abs(lhs - m.alpha[j]) > tol:
            v.append(f"(a) fails at state {j}: {lhs:.3e} vs alpha {m.alpha[j]:.3e}")

    for t in range(m.num_epochs - 1):
        inflow = np.zeros(m.num_states)
        for s in range(m.num_states):
            inflow += fv.x[t][s] @ m.transitions[t][s]
        for j in range(m.num_states):
            lhs = fv.x[t + 1][j].sum()
            if abs(lhs - inflow[j]) > tol:
                v.append(f"(b) fails at (t={t + 1}, state {j}): {lhs:.3e} vs {inflow[j]:.3e}")

    inflow = np.zeros(m.num_states)
    t_last = m.num_epochs - 1
    for s in range(m.num_states):
        inflow += fv.x[t_last][s] @ m.transitions[t_last][s]
    for j in range(m.num_states):
        if abs(fv.terminal[j] - inflow[j]) > tol:
            v.append(f"(c) fails at state {j}: {fv.terminal[j]:.3e} vs {inflow[j]:.3e}")

    if abs(fv.terminal.sum() - 1.0) > tol:
        v.append(f"terminal frequencies sum to {fv.terminal.sum():.6g}")
    return v


def frequencies_to_policy(m: Model, fv: FrequencyVector, tol: float = FREQ_TOL) -> Policy:
    """The inverse map: q(a|s,t) = x_t(s,a) / sum_a' x_t(s,a').

    At state-epoch pairs carrying no mass the quotient is 0/0; the regular
    representative plays action 0 there. Raises ValueError when fv violates
    the flow constraints beyond tolerance.
    """
    bad = check_frequency_vector(m, fv, tol)
    if bad:
        raise ValueError("infeasible frequency vector: " + "; ".join(bad))
    q = []
    for t in range(m.num_epochs):
        row = []
        for s in range(m.num_states):
            mass = fv.x[t][s].sum()
            if mass > REACH_TOL:
                row.append(np.maximum(fv.x[t][s], 0.0) / mass)
            else:
                dist = np.zeros(m.actions_per_state[s])
                dist[0] = 1.0
                row.append(dist)
        q.append(row)
    return Policy(q)


def regularize(m: Model, pi: Policy) -> Policy:
    """Play action 0 at every state-epoch pair unreachable under pi.

    Values are unchanged: decisions at unreachable pairs only affect
    zero-probability trajectories.
    """
    fv = policy_frequencies(m, pi)
    mu = fv.state_marginals(m)
    q = []
    for t in range(m.num_epochs):
        row = []
        for s in range(m.num_states):
            if mu[t, s] < REACH_TOL:
                dist = np.zeros(m.actions_per_state[s])
                dist[0] = 1.0
                row.append(dist)
            else:
                row.append(np.asarray(pi.q[t][s], dtype=float).copy())
        q.append(row)
    return Policy(q)


@dataclass(frozen=True)
class RegularityReport:
    """Outcome of the one-step reachability test on the process dynamics.

    regular is True iff every state at every epoch is reachable under every
    policy. Otherwise some_policy_witness gives a pair (s, t) with t >= 1
    plus, per source state s', an action with p_{t-1}(s | s', a) = 0 (a
    policy playing those actions cannot reach (s, t)). all_policy_witness
    gives a pair no policy at all can reach.
    """

    regular: bool
    some_policy_witness: tuple[int, int, tuple[int, ...]] | None = None
    all_policy_witness: tuple[int, int] | None = None


def regularity_report(m: Model) -> RegularityReport:
    """Test process regularity from the transition kernels alone.

    A pair (s, t) is avoidable by some policy iff every source state s' has
    at least one action with p_{t-1}(s | s', a) = 0; it is missed by every
    policy iff all those probabilities vanish.
    """
    some_wit = None
    all_wit = None
    for t in range(1, m.horizon):
        for s in range(m.num_states):
            choices = []
            avoidable = True
            dead = True
            for sp in range(m.num_states):
                col = m.transitions[t - 1][sp][:, s]
                zero_actions = np.flatnonzero(col == 0.0)
                if zero_actions.size == 0:
                    avoidable = False
                    break
                choices.append(int(zero_actions[0]))
                if np.any(col > 0.0):
                    dead = False
            if avoidable:
                if some_wit is None:
                    some_wit = (s, t, tuple(choices))
                if dead and all_wit is None:
                    all_wit = (s, t)
    return RegularityReport(
        regular=some_wit is None,
        some_policy_witness=some_wit,
        all_policy_witness=all_wit,
    )


# ---------------------------------------------------------------------------
# Policy JSON format: {"q": q[t][s][a]} or the deterministic shorthand
# {"d": d[t][s]} with 0-based action indices.
# ---------------------------------------------------------------------------

def policy_to_json(pi: Policy) -> dict:
    if pi.is_deterministic:
        return {"d": [[int(np.argmax(dist)) for dist in row] for row in pi.q]}
    return {"q": [[np.asarray(dist).tolist() for dist in row] for row in pi.q]}


def policy_from_json(data: dict, m: Model) -> Policy:
    if "d" in data:
        return Policy.deterministic(m, data["d"])
    pi = Policy([[np.asarray(dist, dtype=float) for dist in row] for row in data["q"]])
    _check_dims(m, pi)
    for t, row in enumerate(pi.q):
        for s, dist in enumerate(row):
            if abs(dist.sum() - 1.0) > 1e-12 or np.any(dist < 0):
                raise ValueError(f"policy (t={t}, s={s}) is not a distribution")
    return pi

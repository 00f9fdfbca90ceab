"""Data model for finite-horizon vector-valued Markov decision processes.

A process has S states, decision epochs t = 1..T-1 and a terminal epoch T
(all indices are 0-based in code and in the JSON format: epochs 0..T-2 are
decision epochs, epoch T-1 is terminal). Each state s has its own action set
of size k_s. Transitions and rewards may vary with the epoch; rewards are
k-vectors. The initial state is drawn from a positive distribution alpha.

Also provides the two-component design problem (pick one alternative per
component, trading purchase cost against log-reliability) both as a concrete
instance type and as a correlated random-instance generator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Model",
    "DesignInstance",
    "ValidationReport",
    "validate_model",
    "build_design_model",
    "generate_random_instance",
    "model_to_json",
    "model_from_json",
    "load_model",
    "save_model",
]

PROB_TOL = 1e-12


@dataclass(frozen=True)
class Model:
    """A finite-horizon MDP with vector rewards.

    transitions[t][s] is a (k_s, S) array of p_t(j | s, a); rewards[t][s] is
    a (k_s, k) array of reward vectors; terminal_rewards is (S, k); alpha is
    the initial state distribution. Treated as immutable after construction.
    """

    num_states: int
    horizon: int
    num_objectives: int
    actions_per_state: tuple[int, ...]
    alpha: np.ndarray
    transitions: list  # [t][s] -> (k_s, S) ndarray
    rewards: list  # [t][s] -> (k_s, k) ndarray
    terminal_rewards: np.ndarray  # (S, k)

    @property
    def num_epochs(self) -> int:
        "Number of decision epochs, T - 1."
        return self.horizon - 1

    @property
    def total_actions(self) -> int:
        "K = sum of k_s over all states."
        return sum(self.actions_per_state)

    def deterministic_policy_count(self) -> int:
        "(prod_s k_s)^(T-1), exact integer."
        prod = 1
        for k_s in self.actions_per_state:
            prod *= k_s
        return prod ** self.num_epochs


@dataclass(frozen=True)
class DesignInstance:
    """Costs and reliabilities for the two-component design problem.

    costs[s] and reliabilities[s] are length-k_s arrays for component
    s in {0, 1}. Reliabilities must be positive (their log is a reward).
    """

    costs: tuple[np.ndarray, np.ndarray]
    reliabilities: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        for s in (0, 1):
            if len(self.costs[s]) != len(self.reliabilities[s]):
                raise ValueError(f"component {s}: cost/reliability length mismatch")
            if len(self.costs[s]) < 1:
                raise ValueError(f"component {s}: needs at least one alternative")
            if np.any(np.asarray(self.reliabilities[s]) <= 0):
                raise ValueError(f"component {s}: reliability must be > 0 (log is taken)")
            if np.any(np.asarray(self.costs[s]) < 0):
                raise ValueError(f"component {s}: costs must be >= 0")


@dataclass
class ValidationReport:
    ok: bool
    violations: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(self.violations)


def validate_model(m: Model) -> ValidationReport:
    """Check every model invariant; report violations by offending index."""
    v: list[str] = []
    S, T, k = m.num_states, m.horizon, m.num_objectives

    if S < 1:
        v.append(f"num_states must be positive, got {S}")
    if T < 2:
        v.append(f"horizon must be >= 2, got {T}")
    if k < 1:
        v.append(f"num_objectives must be positive, got {k}")
    if len(m.actions_per_state) != S:
        v.append(f"actions_per_state has length {len(m.actions_per_state)}, expected {S}")
        return ValidationReport(False, v)
    if any(k_s < 1 for k_s in m.actions_per_state):
        bad = [s for s, k_s in enumerate(m.actions_per_state) if k_s < 1]
        v.append(f"states {bad} have no actions (k_s must be >= 1)")
    if all(k_s < 2 for k_s in m.actions_per_state):
        v.append("at least one state must have k_s >= 2")

    alpha = np.asarray(m.alpha, dtype=float)
    if alpha.shape != (S,):
        v.append(f"alpha has shape {alpha.shape}, expected ({S},)")
    else:
        asum = alpha.sum()
        if abs(asum - 1.0) > PROB_TOL:
            v.append(f"initial distribution sums to {asum:.6g}")
        bad = np.flatnonzero(alpha <= 0)
        if bad.size:
            v.append(f"initial distribution not positive at states {bad.tolist()}")

    if len(m.transitions) != T - 1 or len(m.rewards) != T - 1:
        v.append(
            f"transitions/rewards have {len(m.transitions)}/{len(m.rewards)} epochs, expected {T - 1}"
        )
        return ValidationReport(not v, v)

    for t in range(T - 1):
        for s in range(S):
            k_s = m.actions_per_state[s]
            P = np.asarray(m.transitions[t][s], dtype=float)
            R = np.asarray(m.rewards[t][s], dtype=float)
            if P.shape != (k_s, S):
                v.append(f"transitions[t={t}][s={s}] has shape {P.shape}, expected ({k_s}, {S})")
                continue
            if R.shape != (k_s, k):
                v.append(f"rewards[t={t}][s={s}] has shape {R.shape}, expected ({k_s}, {k})")
            if np.any((P < 0) | (P > 1)):
                v.append(f"transitions[t={t}][s={s}] has entries outside [0, 1]")
            for a in range(k_s):
                rs = P[a].sum()
                if abs(rs - 1.0) > PROB_TOL:
                    v.append(f"transition row (t={t}, s={s}, a={a}) sums to {rs:.6g}")
            if not np.all(np.isfinite(R)):
                v.append(f"rewards[t={t}][s={s}] has non-finite entries")

    RT = np.asarray(m.terminal_rewards, dtype=float)
    if RT.shape != (S, k):
        v.append(f"terminal_rewards has shape {RT.shape}, expected ({S}, {k})")
    elif not np.all(np.isfinite(RT)):
        v.append("terminal_rewards has non-finite entries")

    return ValidationReport(not v, v)


def build_design_model(d: DesignInstance, alpha=None) -> Model:
    """Convert a design instance into the S=2, T=3, k=2 process.

    Epoch-1 transitions swap components deterministically (the component not
    yet designed is designed next); epoch-2 transitions are the uniform 1/2
    rows (the terminal state is artificial). Rewards are
    (-cost, log reliability) at both decision epochs, zero at the end.
    alpha defaults to the uniform (0.5, 0.5).
    """
    k1, k2 = len(d.costs[0]), len(d.costs[1])
    if alpha is None:
        alpha = np.array([0.5, 0.5])
    alpha = np.asarray(alpha, dtype=float)

    swap = [
        np.tile(np.array([0.0, 1.0]), (k1, 1)),  # from state 0 always to state 1
        np.tile(np.array([1.0, 0.0]), (k2, 1)),
    ]
    half = [np.full((k1, 2), 0.5), np.full((k2, 2), 0.5)]
    reward = [
        np.column_stack([-np.asarray(d.costs[s], dtype=float),
                         np.log(np.asarray(d.reliabilities[s], dtype=float))])
        for s in (0, 1)
    ]

    return Model(
        num_states=2,
        horizon=3,
        num_objectives=2,
        actions_per_state=(k1, k2),
        alpha=alpha,
        transitions=[swap, half],
        rewards=[reward, [r.copy() for r in reward]],
        terminal_rewards=np.zeros((2, 2)),
    )


def generate_random_instance(k1: int, k2: int, rho: float, seed: int) -> DesignInstance:
    """Sample a design instance with correlated uniform costs/reliabilities.

    Uses a Gaussian copula: a bivariate normal with Pearson correlation
    2*sin(pi*rho/6) pushed through the normal CDF has uniform marginals and
    rank correlation rho. Reliabilities are clamped to [0.01, 1] so every
    log-reward stays finite.
    """
    if k1 < 1 or k2 < 1:
        raise ValueError("k1 and k2 must be >= 1")
    if abs(rho) >= 1:
        raise ValueError(f"rho must lie in (-1, 1), got {rho}")

    rng = np.random.default_rng(seed)
    r = 2.0 * math.sin(math.pi * rho / 6.0)
    cov = np.array([[1.0, r], [r, 1.0]])
    chol = np.linalg.cholesky(cov)

    costs, rels = [], []
    for k_s in (k1, k2):
        z = rng.standard_normal((k_s, 2)) @ chol.T
        u = _normal_cdf(z)
        costs.append(u[:, 0])
        rels.append(np.clip(u[:, 1], 0.01, 1.0))
    return DesignInstance(costs=(costs[0], costs[1]), reliabilities=(rels[0], rels[1]))


def _normal_cdf(z: np.ndarray) -> np.ndarray:
    from scipy.special import ndtr

    return ndtr(z)


# ---------------------------------------------------------------------------
# JSON model format. Field names and 0-based indexing are part of the
# external contract: {"num_states", "horizon", "num_objectives",
# "actions_per_state", "alpha", "transitions" p[t][s][a][j],
# "rewards" r[t][s][a][i], "terminal_rewards" rT[s][i]}.
# ---------------------------------------------------------------------------

def model_to_json(m: Model) -> dict:
    "Plain-dict form of the model, ready for json.dump."
    return {
        "num_states": m.num_states,
        "horizon": m.horizon,
        "num_objectives": m.num_objectives,
        "actions_per_state": list(m.actions_per_state),
        "alpha": np.asarray(m.alpha).tolist(),
        "transitions": [[np.asarray(P).tolist() for P in epoch] for epoch in m.transitions],
        "rewards": [[np.asarray(R).tolist() for R in epoch] for epoch in m.rewards],
        "terminal_rewards": np.asarray(m.terminal_rewards).tolist(),
    }


def model_from_json(data: dict) -> Model:
    "Inverse of model_to_json. Raises KeyError/ValueError on malformed input."
    return Model(
        num_states=int(data["num_states"]),
        horizon=int(data["horizon"]),
        num_objectives=int(data["num_objectives"]),
        actions_per_state=tuple(int(k) for k in data["actions_per_state"]),
        alpha=np.asarray(data["alpha"], dtype=float),
        transitions=[
            [np.asarray(P, dtype=float) for P in epoch] for epoch in data["transitions"]
        ],
        rewards=[[np.asarray(R, dtype=float) for R in epoch] for epoch in data["rewards"]],
        terminal_rewards=np.asarray(data["terminal_rewards"], dtype=float),
    )


def load_model(path) -> Model:
    with open(path) as fh:
        return model_from_json(json.load(fh))


def save_model(m: Model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_json(m), fh, indent=1)

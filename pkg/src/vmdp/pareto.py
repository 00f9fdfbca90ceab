"""Efficient-vertex machinery: tests, enumeration, weights, and the oracle.

A deterministic policy is efficient iff its frequency vector (a vertex of
the feasible polyhedron) is an efficient solution of the vector program.
Efficiency of a vertex is decided by the boundedness of an auxiliary scalar
LP built from the reduced objective rows; all efficient vertices are found
by walking the adjacency graph (single-action swaps) outward from one
efficient vertex obtained by positive scalarization. The brute-force oracle
re-derives the efficient set from first principles: evaluate every
deterministic policy by backward recursion and keep the values not
dominated by any point of their convex hull.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import simplex
from .dynamics import Policy, frequencies_to_policy, regularity_report
from .model import Model
from .vlp import CanonicalProgram, count_regular_bases, regular_basis_solve, ENUMERATION_GUARD

__all__ = [
    "VertexRecord",
    "EnumerationResult",
    "WeightCertificate",
    "OracleRecord",
    "OracleResult",
    "efficiency_test",
    "initial_efficient_vertex",
    "adjacent_regular_bases",
    "enumerate_efficient",
    "recover_weights",
    "brute_force_oracle",
    "result_to_json",
    "result_to_markdown",
    "result_to_csv",
]

VERTEX_TOL = 1e-8  # two frequency vectors within this max-norm are one vertex
ZERO_TOL = 1e-11  # basic coordinates below this count as degenerate zeros
WEIGHT_EPS = 1e-3  # lower bound on recovered weights before normalization


@dataclass
class VertexRecord:
    """A vertex of the feasible polyhedron with one regular basis.

    action_map[t][s] is the selected action; basis the corresponding sorted
    column set; x the full frequency vector; value = C x.
    """

    action_map: tuple
    x: np.ndarray
    basis: np.ndarray
    value: np.ndarray
    efficient: bool | None = None
    weights: np.ndarray | None = None


@dataclass
class EnumerationResult:
    records: list[VertexRecord]
    policies: list[Policy]
    stats: dict = field(default_factory=dict)


def _reduced_rows(cp: CanonicalProgram, basis: np.ndarray):
    """R = C_B A_B^{-1} A_N - C_N and W = A_B^{-1} A_N for a regular basis.

    Regular bases are unit lower triangular when columns are sorted, so a
    triangular solve suffices.
    """
    A = cp.dense()
    mask = np.zeros(cp.n, dtype=bool)
    mask[basis] = True
    nonbasic = np.flatnonzero(~mask)
    W = scipy.linalg.solve_triangular(
        A[:, basis], A[:, nonbasic], lower=True, unit_diagonal=True
    )
    R = cp.C[:, basis] @ W - cp.C[:, nonbasic]
    return R, W, nonbasic


def efficiency_test(cp: CanonicalProgram, v: VertexRecord) -> bool:
    """Boundedness test for efficiency of the basic feasible solution v.

    Builds max sum(v_j) s.t. Ru + v = 0, Y_i u - s_i = 0 for degenerate
    basic rows i, all variables >= 0, and runs the simplex from the origin
    basis (Phase I is unnecessary: the origin is feasible). Bounded means
    no feasible direction improves one objective without losing another.
    """
    R, W, _ = _reduced_rows(cp, v.basis)
    k, n_u = R.shape
    xB = v.x[v.basis]
    q_rows = np.flatnonzero(xB <= ZERO_TOL)
    n_q = q_rows.size

    rows = k + n_q
    cols = n_u + k + n_q
    A_aux = np.zeros((rows, cols))
    A_aux[:k, :n_u] = R
    A_aux[:k, n_u : n_u + k] = np.eye(k)
    if n_q:
        A_aux[k:, :n_u] = -W[q_rows]  # Y = -A_B^{-1} A_N restricted to Q
        A_aux[k:, n_u + k :] = -np.eye(n_q)
    c_aux = np.zeros(cols)
    c_aux[n_u : n_u + k] = 1.0

    out = simplex.solve(
        simplex.LpProblem(c=c_aux, A=A_aux, b=np.zeros(rows)),
        start=np.arange(n_u, cols),
    )
    if out.status == simplex.OPTIMAL:
        return True
    if out.status == simplex.UNBOUNDED:
        return False
    raise RuntimeError(f"efficiency test LP reported {out.status}; origin is always feasible")


def initial_efficient_vertex(cp: CanonicalProgram) -> VertexRecord:
    """An efficient vertex from equal-weight scalarization.

    Maximizing the average objective over the polyhedron is bounded (the
    variables are probabilities) and any optimal vertex is efficient. The
    simplex is warm-started from the all-first-actions regular basis, which
    is feasible by construction. The optimum is re-expressed over a regular
    basis via the one-positive-action-per-block structure of vertices.
    """
    m = cp.model
    p = np.full(m.num_objectives, 1.0 / m.num_objectives)
    warm = tuple(tuple(0 for _ in range(m.num_states)) for _ in range(m.num_epochs))
    out = simplex.solve(
        simplex.LpProblem(c=p @ cp.C, A=cp.dense(), b=cp.b),
        start=cp.basis_columns(warm),
    )
    if out.status != simplex.OPTIMAL:
        raise RuntimeError(f"scalarized LP reported {out.status} on a bounded polytope")

    sel = []
    for t in range(m.num_epochs):
        row = []
        for s in range(m.num_states):
            lo = cp.col_index(t, s, 0)
            block = out.x[lo : lo + m.actions_per_state[s]]
            row.append(int(np.argmax(block)) if block.max() > 1e-9 else 0)
        sel.append(tuple(row))
    sel = tuple(sel)

    x = regular_basis_solve(cp, sel)
    if np.max(np.abs(x - out.x)) > 1e-6:
        raise RuntimeError("regular re-representation of the scalarized optimum diverged")
    return VertexRecord(
        action_map=sel,
        x=x,
        basis=cp.basis_columns(sel),
        value=cp.value(x),
        efficient=True,
    )


def adjacent_regular_bases(cp: CanonicalProgram, action_map: tuple):
    """All action maps differing from action_map in exactly one (s, t).

    Each corresponds to a single simplex pivot within one summation block;
    there are sum over (s, t) of (k_s - 1) of them.
    """
    m = cp.model
    for t in range(m.num_epochs):
        for s in range(m.num_states):
            current = action_map[t][s]
            for a in range(m.actions_per_state[s]):
                if a == current:
                    continue
                row = list(action_map[t])
                row[s] = a
                yield action_map[:t] + (tuple(row),) + action_map[t + 1 :]


def _vertex_key(x: np.ndarray) -> bytes:
    "Quantized frequency vector; identical within VERTEX_TOL in practice."
    return (np.round(x, 8) + 0.0).tobytes()


def enumerate_efficient(
    cp: CanonicalProgram, collect_weights: bool = False, force: bool = False
) -> EnumerationResult:
    """Enumerate every efficient vertex by the adjacency walk.

    FIFO work list seeded with one efficient vertex; each popped vertex has
    all its single-swap neighbours tested for efficiency, efficient ones
    join the list. Pivots that do not move the vertex (possible only at
    degenerate vertices) need no test, but the new basis stays on the work
    list so the walk continues through every regular basis of the vertex;
    found vertices are deduplicated by frequency vector, or by action map
    when the process is regular. Test verdicts are cached, so no vertex is
    tested twice.
    """
    if count_regular_bases(cp) > ENUMERATION_GUARD and not force:
        raise ValueError(
            f"{count_regular_bases(cp)} deterministic policies exceed the "
            f"{ENUMERATION_GUARD} guard; pass force=True"
        )
    m = cp.model
    regular = regularity_report(m).regular
    key_of = (lambda rec: rec.action_map) if regular else (lambda rec: _vertex_key(rec.x))

    first = initial_efficient_vertex(cp)
    found: dict = {key_of(first): first}
    inefficient: set = set()
    work: deque[VertexRecord] = deque([first])
    seen_maps = {first.action_map}
    stats = {"vertices_visited": 1, "tests_run": 0, "pivots": 0}

    while work:
        rec = work.popleft()
        for nmap in adjacent_regular_bases(cp, rec.action_map):
            if nmap in seen_maps:
                continue
            seen_maps.add(nmap)
            x = regular_basis_solve(cp, nmap)
            stats["pivots"] += 1

            if np.max(np.abs(x - rec.x)) < VERTEX_TOL:
                # Same vertex under another regular basis (degenerate case):
                # no new test, but keep walking from the new basis.
                work.append(
                    VertexRecord(nmap, rec.x, cp.basis_columns(nmap), rec.value, True)
                )
                continue

            cand = VertexRecord(nmap, x, cp.basis_columns(nmap), cp.value(x))
            key = key_of(cand)
            if key in found:
                # Known efficient vertex reached through a different basis.
                cand.efficient = True
                work.append(cand)
                continue
            if key in inefficient:
                continue

            stats["vertices_visited"] += 1
            cand.efficient = efficiency_test(cp, cand)
            stats["tests_run"] += 1
            if cand.efficient:
                found[key] = cand
                work.append(cand)
            else:
                inefficient.add(key)

    records = sorted(found.values(), key=lambda r: r.action_map)
    if collect_weights:
        for rec in records:
            rec.weights = recover_weights(cp, rec).weights
    policies = [frequencies_to_policy(m, cp.unpack(rec.x)) for rec in records]
    return EnumerationResult(records=records, policies=policies, stats=stats)


@dataclass
class WeightCertificate:
    """Positive weights certifying optimality of a vertex for p^T C x.

    weights sum to one; nonbasic_multipliers are the Lagrange multipliers
    of the active bounds x_N >= 0 (the scaled reduced-cost slacks), and
    equality_multipliers those of the flow constraints.
    """

    weights: np.ndarray
    nonbasic_multipliers: np.ndarray
    equality_multipliers: np.ndarray


def recover_weights(cp: CanonicalProgram, v: VertexRecord, eps: float = WEIGHT_EPS) -> WeightCertificate:
    """Find p >= eps > 0 making v optimal for the scalarized problem.

    Feasibility of

        lambda_N = A_N^T A_B^{-T} (p^T C)_B - (p^T C)_N >= 0,  p >= eps

    is exactly the optimality (KKT) condition of v for max (p^T C) x, so a
    feasible point yields the certificate. Weights are normalized to sum
    one afterwards (scaling changes nothing). Infeasibility for a vertex
    that passed the efficiency test signals an internal inconsistency.
    """
    R, _, _ = _reduced_rows(cp, v.basis)
    k, n_u = R.shape
    # Variables [lambda_N, p - eps]; constraint R^T p - lambda_N = 0.
    A_w = np.hstack([-np.eye(n_u), R.T])
    b_w = -eps * (R.T @ np.ones(k))
    out = simplex.solve(simplex.LpProblem(c=np.zeros(n_u + k), A=A_w, b=b_w))
    if out.status != simplex.OPTIMAL:
        raise RuntimeError(
            "weight-recovery LP infeasible for an allegedly efficient vertex; "
            "efficiency test and scalarization disagree"
        )
    p = eps + out.x[n_u:]
    lam = out.x[:n_u]
    total = p.sum()
    p /= total
    lam /= total
    AB = cp.dense()[:, v.basis]
    y_eq = scipy.linalg.solve_triangular(
        AB.T, cp.C[:, v.basis].T @ p, lower=False, unit_diagonal=True
    )
    return WeightCertificate(weights=p, nonbasic_multipliers=lam, equality_multipliers=y_eq)


# ---------------------------------------------------------------------------
# Brute-force oracle: exhaustive policy evaluation plus hull dominance.
# ---------------------------------------------------------------------------

ORACLE_GUARD = 10**6
ORACLE_VALUE_DECIMALS = 9


@dataclass
class OracleRecord:
    action_map: tuple
    value: np.ndarray
    efficient: bool


@dataclass
class OracleResult:
    records: list[OracleRecord]  # one per distinct frequency vector

    @property
    def efficient(self) -> list[OracleRecord]:
        return [r for r in self.records if r.efficient]


def _det_backward_value(m: Model, amap) -> np.ndarray:
    "Backward recursion specialised to a deterministic action map."
    u = np.asarray(m.terminal_rewards, dtype=float)
    for t in reversed(range(m.num_epochs)):
        u = np.stack(
            [
                m.rewards[t][s][amap[t][s]] + m.transitions[t][s][amap[t][s]] @ u
                for s in range(m.num_states)
            ]
        )
    return m.alpha @ u


def _det_equivalence_key(m: Model, amap) -> tuple:
    """Actions at reachable state-epoch pairs (-1 where unreachable).

    Two deterministic policies have identical frequency vectors exactly
    when these keys agree: frequencies are determined by the decisions at
    pairs carrying mass, and the forward masses only depend on those.
    """
    mass = np.asarray(m.alpha, dtype=float)
    marks = []
    for t in range(m.num_epochs):
        marks.extend(
            amap[t][s] if mass[s] > 0.0 else -1 for s in range(m.num_states)
        )
        nxt = np.zeros(m.num_states)
        for s in range(m.num_states):
            if mass[s] > 0.0:
                nxt += mass[s] * m.transitions[t][s][amap[t][s]]
        mass = nxt
    return tuple(marks)


def brute_force_oracle(m: Model, tol: float = 1e-9) -> OracleResult:
    """Classify every deterministic policy by hull dominance of its value.

    Evaluates all (prod k_s)^(T-1) deterministic policies by backward
    recursion, deduplicates equivalent ones (identical frequency vectors),
    and marks a value efficient iff no convex combination of all the values
    weakly dominates it with positive total slack. The hull LPs run on
    scipy's linprog, keeping this path independent of the in-house simplex.
    Pairwise-dominated values are settled without an LP (they are hull
    dominated a fortiori).
    """
    from scipy.optimize import linprog

    total = m.deterministic_policy_count()
    if total > ORACLE_GUARD:
        raise ValueError(f"{total} deterministic policies exceed the oracle guard {ORACLE_GUARD}")

    per_epoch = list(itertools.product(*(range(k) for k in m.actions_per_state)))
    by_vertex: dict[tuple, tuple] = {}
    for combo in itertools.product(per_epoch, repeat=m.num_epochs):
        key = _det_equivalence_key(m, combo)
        if key not in by_vertex:
            by_vertex[key] = (combo, _det_backward_value(m, combo))

    values = np.array([agg for _, agg in by_vertex.values()])
    # Group value vectors that agree up to rounding: members of a group are
    # treated as equal (they never dominate each other) and share a verdict.
    # The dominance tests themselves run on exact values; feeding rounded
    # vectors to the hull LP would fabricate excesses of rounding size.
    rounded = np.round(values, ORACLE_VALUE_DECIMALS)
    _, inverse = np.unique(rounded, axis=0, return_inverse=True)
    n_groups = inverse.max() + 1
    rep = np.full(n_groups, -1)
    for idx, g in enumerate(inverse):
        if rep[g] < 0:
            rep[g] = idx
    group_values = values[rep]

    # Pairwise-dominated values are hull dominated a fortiori and need no
    # LP. One pass in decreasing objective-sum order suffices: a dominator
    # has a strictly larger sum, so every killer is met before its victims
    # and survives into the frontier.
    verdict = np.ones(n_groups, dtype=bool)
    frontier: list[int] = []
    for i in np.argsort(-group_values.sum(axis=1), kind="stable"):
        v = group_values[i]
        if frontier:
            F = group_values[frontier]
            if np.any(np.all(F >= v - 1e-12, axis=1) & np.any(F > v + 1e-9, axis=1)):
                verdict[i] = False
                continue
        frontier.append(i)

    # max sum(w) s.t. values^T lam - w = v, sum(lam) = 1, lam, w >= 0;
    # only the right-hand side changes between candidates.
    k = m.num_objectives
    n_pts = values.shape[0]
    A_eq = np.zeros((k + 1, n_pts + k))
    A_eq[:k, :n_pts] = values.T
    A_eq[:k, n_pts:] = -np.eye(k)
    A_eq[k, :n_pts] = 1.0
    c = np.concatenate([np.zeros(n_pts), -np.ones(k)])
    for i in np.flatnonzero(verdict):
        b_eq = np.concatenate([group_values[i], [1.0]])
        res = linprog(c, A_eq=A_eq, b_eq=b_eq, method="highs")
        if not res.success:
            raise RuntimeError(f"oracle hull LP failed: {res.message}")
        verdict[i] = -res.fun <= tol

    records = [
        OracleRecord(action_map=combo, value=agg, efficient=bool(verdict[inverse[idx]]))
        for idx, (combo, agg) in enumerate(by_vertex.values())
    ]
    return OracleResult(records=records)


# ---------------------------------------------------------------------------
# Report rendering. JSON keeps 0-based indices (like the model format);
# the markdown and CSV tables print 1-based action numbers so they can be
# read against the engineering-design tables directly.
# ---------------------------------------------------------------------------

def result_to_json(result: EnumerationResult) -> dict:
    return {
        "efficient_policies": [
            {
                "actions": [list(row) for row in rec.action_map],
                "value": rec.value.tolist(),
                **({"weights": rec.weights.tolist()} if rec.weights is not None else {}),
            }
            for rec in result.records
        ],
        "stats": result.stats,
    }


def _format_rule(row) -> str:
    return "(" + ", ".join(str(a + 1) for a in row) + ")"


def result_to_markdown(result: EnumerationResult) -> str:
    if not result.records:
        return "(no efficient policies)"
    n_epochs = len(result.records[0].action_map)
    with_weights = any(rec.weights is not None for rec in result.records)
    header = ["Policy"] + [f"pi_{t + 1}" for t in range(n_epochs)] + ["Value"]
    if with_weights:
        header.append("Weights")
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for i, rec in enumerate(result.records, start=1):
        cells = [str(i)]
        cells += [_format_rule(row) for row in rec.action_map]
        cells.append("(" + ", ".join(f"{v:.2f}" for v in rec.value) + ")")
        if with_weights:
            cells.append(
                "(" + ", ".join(f"{w:.3f}" for w in rec.weights) + ")"
                if rec.weights is not None
                else ""
            )
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)


def result_to_csv(result: EnumerationResult) -> str:
    if not result.records:
        return "policy\n"
    n_epochs = len(result.records[0].action_map)
    n_states = len(result.records[0].action_map[0])
    k = result.records[0].value.size
    with_weights = any(rec.weights is not None for rec in result.records)
    cols = ["policy"]
    cols += [f"pi{t + 1}_s{s + 1}" for t in range(n_epochs) for s in range(n_states)]
    cols += [f"value_{i + 1}" for i in range(k)]
    if with_weights:
        cols += [f"weight_{i + 1}" for i in range(k)]
    lines = [",".join(cols)]
    for i, rec in enumerate(result.records, start=1):
        cells = [str(i)]
        cells += [str(a + 1) for row in rec.action_map for a in row]
        cells += [f"{v:.6f}" for v in rec.value]
        if with_weights:
            cells += [f"{w:.6f}" for w in rec.weights] if rec.weights is not None else [""] * k
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"

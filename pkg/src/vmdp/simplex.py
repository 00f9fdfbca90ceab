"""Self-contained primal simplex for canonical-form LPs (max c.x, Ax=b, x>=0).

Bland's smallest-index rule is always active, so the method terminates on
every input, degenerate or not. The basis inverse is kept explicitly (m is
small here) with product-form updates and a full refactorization every 50
pivots. Phase I with artificial variables handles signed right-hand sides
and missing start bases; a feasible start basis skips Phase I entirely.

Outcomes carry certificates: optimal solutions satisfy the reduced-cost
criterion, unbounded ones come with an improving ray d (Ad = 0, d >= 0,
c.d > 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LpProblem",
    "LpOutcome",
    "solve",
    "pivot",
    "SingularBasisError",
    "IterationLimitError",
    "OPTIMAL",
    "UNBOUNDED",
    "INFEASIBLE",
]

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
OPT_TOL = 1e-9
REFACTOR_EVERY = 50
MAX_ITER = 10**6


class SingularBasisError(ValueError):
    "A requested basis (or pivot result) is singular."


class IterationLimitError(RuntimeError):
    "The pivot count hit the safety cap; no answer is returned."


@dataclass(frozen=True)
class LpProblem:
    """max c.x subject to Ax = b, x >= 0, with A of full row rank."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        m, n = self.A.shape
        if m > n:
            raise ValueError(f"more constraints ({m}) than variables ({n})")
        if self.c.shape != (n,) or self.b.shape != (m,):
            raise ValueError("inconsistent problem dimensions")


@dataclass
class LpOutcome:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    basis: np.ndarray | None = None
    ray: np.ndarray | None = None
    detail: str = ""
    iterations: int = 0


class _Factors:
    "Explicit inverse of the basis matrix with eta updates and refactoring."

    def __init__(self, A: np.ndarray, basis: np.ndarray):
        self.A = A
        self.basis = np.array(basis, dtype=np.intp)
        self.updates = 0
        self.refactor()

    def refactor(self) -> None:
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise SingularBasisError(f"singular basis {self.basis.tolist()}") from exc
        self.updates = 0

    def ftran(self, col: np.ndarray) -> np.ndarray:
        return self.Binv @ col

    def btran(self, row: np.ndarray) -> np.ndarray:
        return row @ self.Binv

    def replace(self, pos: int, col_index: int, direction: np.ndarray) -> None:
        "Swap basis position pos for column col_index; direction = Binv A_col."
        piv = direction[pos]
        if abs(piv) < PIVOT_TOL:
            raise SingularBasisError(f"pivot element {piv:.2e} below tolerance")
        self.basis[pos] = col_index
        if self.updates >= REFACTOR_EVERY:
            self.refactor()
            return
        row = self.Binv[pos] / piv
        self.Binv -= np.outer(direction, row)
        self.Binv[pos] = row
        self.updates += 1


def pivot(A: np.ndarray, basis, enter: int, leave: int) -> np.ndarray:
    """Exchange basic column `leave` for `enter`; reject singular results.

    Returns the new basis index array (enter == leave is the identity).
    """
    basis = np.array(basis, dtype=np.intp)
    if enter == leave:
        return basis
    where = np.flatnonzero(basis == leave)
    if where.size == 0:
        raise ValueError(f"column {leave} is not basic")
    new_basis = basis.copy()
    new_basis[where[0]] = enter
    sign, logdet = np.linalg.slogdet(A[:, new_basis])
    if sign == 0 or logdet < np.log(PIVOT_TOL):
        raise SingularBasisError(f"pivot {leave} -> {enter} gives a singular basis")
    return new_basis


def _bland_entering(rc: np.ndarray, in_basis: np.ndarray) -> int | None:
    candidates = np.flatnonzero((rc > OPT_TOL) & ~in_basis)
    return int(candidates[0]) if candidates.size else None


def _bland_leaving(xB: np.ndarray, direction: np.ndarray, basis: np.ndarray):
    "Min-ratio row; ties broken by smallest basic variable index."
    pos = np.flatnonzero(direction > PIVOT_TOL)
    if pos.size == 0:
        return None, None
    ratios = np.maximum(xB[pos], 0.0) / direction[pos]
    theta = ratios.min()
    tied = pos[ratios <= theta + 1e-12]
    r = tied[np.argmin(basis[tied])]
    return int(r), float(theta)


def _phase2(c, A, b, factors: _Factors, budget: list[int]) -> LpOutcome:
    m, n = A.shape
    xB = factors.ftran(b)
    in_basis = np.zeros(n, dtype=bool)
    in_basis[factors.basis] = True
    iters = 0

    while True:
        if budget[0] <= 0:
            raise IterationLimitError(f"simplex exceeded {MAX_ITER} iterations")
        budget[0] -= 1
        iters += 1

        y = factors.btran(c[factors.basis])
        rc = c - y @ A
        j = _bland_entering(rc, in_basis)
        if j is None:
            x = np.zeros(n)
            x[factors.basis] = np.maximum(xB, 0.0)
            return LpOutcome(
                status=OPTIMAL,
                x=x,
                objective=float(c @ x),
                basis=factors.basis.copy(),
                iterations=iters,
            )

        u = factors.ftran(A[:, j])
        r, theta = _bland_leaving(xB, u, factors.basis)
        if r is None:
            ray = np.zeros(n)
            ray[j] = 1.0
            ray[factors.basis] = -u
            ray[np.abs(ray) < 1e-14] = 0.0
            x = np.zeros(n)
            x[factors.basis] = np.maximum(xB, 0.0)
            return LpOutcome(
                status=UNBOUNDED,
                x=x,
                objective=None,
                basis=factors.basis.copy(),
                ray=ray,
                iterations=iters,
            )

        leaving = factors.basis[r]
        factors.replace(r, j, u)
        in_basis[leaving] = False
        in_basis[j] = True
        xB = xB - theta * u
        xB[r] = theta
        if factors.updates == 0:  # just refactored; resync for drift control
            xB = factors.ftran(b)


def _phase1(A, b, budget: list[int]):
    "Feasible basis via artificials, or an infeasibility/rank diagnostic."
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A1 = A * sign[:, None]
    b1 = b * sign
    A_aug = np.hstack([A1, np.eye(m)])
    c_aug = np.concatenate([np.zeros(n), -np.ones(m)])
    factors = _Factors(A_aug, np.arange(n, n + m))
    out = _phase2(c_aug, A_aug, b1, factors, budget)
    if out.status != OPTIMAL:  # cannot happen: phase-I objective is bounded by 0
        raise AssertionError("phase I did not reach an optimum")
    if out.objective < -FEAS_TOL:
        return None, LpOutcome(
            status=INFEASIBLE,
            detail=f"phase I infeasibility measure {-out.objective:.3e}",
            iterations=out.iterations,
        )

    # Drive leftover artificials out of the basis; failure means rank(A) < m.
    basis = out.basis.copy()
    for pos in range(m):
        if basis[pos] < n:
            continue
        fac = _Factors(A_aug, basis)
        row = fac.Binv[pos] @ A1
        candidates = np.flatnonzero(np.abs(row) > PIVOT_TOL)
        candidates = [j for j in candidates if j not in set(basis.tolist())]
        if not candidates:
            return None, LpOutcome(
                status=INFEASIBLE,
                detail=f"rank deficiency: constraint row {int(basis[pos]) - n} is dependent",
                iterations=out.iterations,
            )
        basis[pos] = candidates[0]
    return basis, None


def solve(p: LpProblem, start=None) -> LpOutcome:
    """Solve the LP; a feasible start basis skips Phase I.

    Raises IterationLimitError rather than returning a possibly wrong
    answer when the pivot cap is hit.
    """
    A = np.asarray(p.A, dtype=float)
    b = np.asarray(p.b, dtype=float)
    c = np.asarray(p.c, dtype=float)
    budget = [MAX_ITER]

    if start is not None:
        try:
            factors = _Factors(A, np.asarray(start, dtype=np.intp))
            if factors.ftran(b).min() >= -FEAS_TOL:
                return _phase2(c, A, b, factors, budget)
        except SingularBasisError:
            pass  # fall back to Phase I

    basis, failure = _phase1(A, b, budget)
    if failure is not None:
        return failure
    factors = _Factors(A, basis)
    return _phase2(c, A, b, factors, budget)

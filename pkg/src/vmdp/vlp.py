"""Vectorization of the process into the canonical program (A, b, C).

Variables are ordered epoch-major: for t = 0..T-2 the blocks x_t(s, a)
(state-major, then action), followed by the S terminal variables x_T(s);
n = (T-1)K + S with K = sum_s k_s. Constraints are the flow equations,
one row per (epoch, state); m = T*S. The matrix has the block form

    [  Sig                          ]
    [ -P_1   Sig                    ]
    [       -P_2   Sig              ]
    [              ...              ]
    [                -P_{T-1}   I_S ]

where Sig is the S x K block-diagonal summation matrix (a 1 x k_s row of
ones per state) and P_t gathers the transition probabilities. Picking one
action column per (epoch, state) block plus all terminal columns yields a
"regular" basis: unit lower triangular, hence nonsingular, and feasible by
forward substitution since b = (alpha, 0, ..., 0) >= 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dynamics import FrequencyVector
from .model import Model

__all__ = [
    "CanonicalProgram",
    "build_program",
    "regular_basis_solve",
    "enumerate_regular_bases",
    "count_regular_bases",
    "certify_full_rank",
    "export_matrixmarket",
]

ENUMERATION_GUARD = 10**7


@dataclass
class CanonicalProgram:
    """The canonical-form program assembled from a model.

    A is m x n sparse (CSC), b the right-hand side, C the k x n objective
    matrix whose columns are the reward vectors. Column indices follow the
    epoch-major layout above; col_index/terminal_col/label give the
    bidirectional index map.
    """

    model: Model
    A: sp.csc_matrix
    b: np.ndarray
    C: np.ndarray
    m: int
    n: int

    def __post_init__(self):
        self._offsets = np.concatenate([[0], np.cumsum(self.model.actions_per_state)])
        self._K = int(self._offsets[-1])
        self._dense_A = None

    @property
    def K(self) -> int:
        return self._K

    def col_index(self, t: int, s: int, a: int) -> int:
        "Column of x_t(s, a), 0-based epoch t <= T-2."
        return t * self._K + int(self._offsets[s]) + a

    def terminal_col(self, s: int) -> int:
        return self.model.num_epochs * self._K + s

    def label(self, j: int):
        "Inverse map: ('sa', t, s, a) for decision columns, ('terminal', s) else."
        first_term = self.model.num_epochs * self._K
        if j >= first_term:
            return ("terminal", j - first_term)
        t, r = divmod(j, self._K)
        s = int(np.searchsorted(self._offsets, r, side="right")) - 1
        return ("sa", t, s, r - int(self._offsets[s]))

    def dense(self) -> np.ndarray:
        "Dense copy of A, cached; m is small so this is cheap."
        if self._dense_A is None:
            self._dense_A = self.A.toarray()
        return self._dense_A

    def basis_columns(self, sel) -> np.ndarray:
        """Columns of the regular basis for action map sel[t][s].

        Sorted ascending, which makes A[:, B] unit lower triangular.
        """
        cols = [
            self.col_index(t, s, sel[t][s])
            for t in range(self.model.num_epochs)
            for s in range(self.model.num_states)
        ]
        cols.extend(self.terminal_col(s) for s in range(self.model.num_states))
        return np.asarray(cols, dtype=np.intp)

    def pack(self, fv: FrequencyVector) -> np.ndarray:
        "Flatten a frequency vector into the column layout."
        x = np.zeros(self.n)
        for t in range(self.model.num_epochs):
            for s in range(self.model.num_states):
                lo = self.col_index(t, s, 0)
                x[lo : lo + self.model.actions_per_state[s]] = fv.x[t][s]
        x[self.model.num_epochs * self._K :] = fv.terminal
        return x

    def unpack(self, x: np.ndarray) -> FrequencyVector:
        xs = []
        for t in range(self.model.num_epochs):
            row = []
            for s in range(self.model.num_states):
                lo = self.col_index(t, s, 0)
                row.append(np.asarray(x[lo : lo + self.model.actions_per_state[s]]).copy())
            xs.append(row)
        return FrequencyVector(x=xs, terminal=np.asarray(x[self.model.num_epochs * self._K :]).copy())

    def value(self, x: np.ndarray) -> np.ndarray:
        "Objective vector C x."
        return self.C @ x


def build_program(m: Model) -> CanonicalProgram:
    """Assemble A (triplet build, CSC storage), b and C for a model."""
    S, T, k = m.num_states, m.horizon, m.num_objectives
    offsets = np.concatenate([[0], np.cumsum(m.actions_per_state)])
    K = int(offsets[-1])
    n = (T - 1) * K + S
    m_rows = T * S

    rows, cols, vals = [], [], []
    C = np.zeros((k, n))

    for t in range(T - 1):
        for s in range(S):
            for a in range(m.actions_per_state[s]):
                j = t * K + int(offsets[s]) + a
                # summation block: +1 in this column's own (epoch, state) row
                rows.append(t * S + s)
                cols.append(j)
                vals.append(1.0)
                # transition block: -p_t(j'|s,a) one row-block down
                p = m.transitions[t][s][a]
                for jp in np.flatnonzero(p):
                    rows.append((t + 1) * S + jp)
                    cols.append(j)
                    vals.append(-float(p[jp]))
                C[:, j] = m.rewards[t][s][a]
    for s in range(S):
        j = (T - 1) * K + s
        rows.append((T - 1) * S + s)
        cols.append(j)
        vals.append(1.0)
        C[:, j] = m.terminal_rewards[s]

    A = sp.coo_matrix((vals, (rows, cols)), shape=(m_rows, n)).tocsc()
    b = np.zeros(m_rows)
    b[:S] = m.alpha
    return CanonicalProgram(model=m, A=A, b=b, C=C, m=m_rows, n=n)


def regular_basis_solve(cp: CanonicalProgram, sel) -> np.ndarray:
    """Basic solution of the regular basis given by action map sel[t][s].

    Forward substitution through the flow equations with all non-selected
    decision variables fixed to zero; always feasible (x >= 0) because the
    basis is unit lower triangular with nonpositive subdiagonal entries and
    b >= 0. Coordinates of degenerate vertices come out exactly zero.
    """
    m = cp.model
    x = np.zeros(cp.n)
    mass = np.asarray(m.alpha, dtype=float).copy()
    for t in range(m.num_epochs):
        for s in range(m.num_states):
            x[cp.col_index(t, s, sel[t][s])] = mass[s]
        nxt = np.zeros(m.num_states)
        for s in range(m.num_states):
            nxt += mass[s] * m.transitions[t][s][sel[t][s]]
        mass = nxt
    x[m.num_epochs * cp.K :] = mass
    return x


def count_regular_bases(cp: CanonicalProgram) -> int:
    return cp.model.deterministic_policy_count()


def enumerate_regular_bases(cp: CanonicalProgram, force: bool = False):
    """Yield every action map sel (one action per (epoch, state)).

    There are (prod_s k_s)^(T-1) of them; iteration refuses above 10^7
    unless force is set.
    """
    total = count_regular_bases(cp)
    if total > ENUMERATION_GUARD and not force:
        raise ValueError(
            f"{total} regular bases exceeds the {ENUMERATION_GUARD} guard; pass force=True"
        )
    m = cp.model
    per_epoch = itertools.product(*(range(k_s) for k_s in m.actions_per_state))
    epoch_choices = list(per_epoch)
    for combo in itertools.product(epoch_choices, repeat=m.num_epochs):
        yield tuple(combo)


def certify_full_rank(cp: CanonicalProgram) -> bool:
    """Certify rank(A) = m by exhibiting one nonsingular regular basis.

    The all-zeros action map gives A_B unit lower triangular; verifying
    that structure numerically proves nonsingularity, hence full row rank.
    """
    sel = tuple(
        tuple(0 for _ in range(cp.model.num_states)) for _ in range(cp.model.num_epochs)
    )
    AB = cp.dense()[:, cp.basis_columns(sel)]
    if not np.allclose(np.diag(AB), 1.0):
        return False
    if np.any(np.abs(np.triu(AB, k=1)) > 0):
        return False
    below = np.tril(AB, k=-1)
    return bool(np.all(below <= 0) and np.all(below >= -1))


def export_matrixmarket(cp: CanonicalProgram, prefix) -> list[str]:
    """Write A, b, C in MatrixMarket format as <prefix>_{A,b,C}.mtx."""
    import scipy.io as sio

    paths = []
    for name, mat in (("A", cp.A), ("b", cp.b.reshape(-1, 1)), ("C", cp.C)):
        path = f"{prefix}_{name}.mtx"
        sio.mmwrite(path, sp.coo_matrix(mat))
        paths.append(path)
    return paths

"""Dense two-phase simplex for the small LPs that arise in verification.

Problems have the form::

    maximize (or minimize)  c . x
    subject to              A_ub x <= b_ub
                            A_eq x == b_eq
                            lower <= x <= upper

Pivoting uses the most-negative reduced cost with lowest-index tie-breaks,
and falls back to Bland's rule after a run of degenerate pivots so the method
always terminates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-10


class LPError(RuntimeError):
    """The simplex failed numerically (after refactorizing) or hit its pivot cap."""


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None = None
    value: float | None = None
    pivots: int = 0

    @property
    def feasible(self) -> bool:
        return self.status != INFEASIBLE


_ST_OPTIMAL, _ST_UNBOUNDED, _ST_LIMIT = 0, 1, 2


@numba.njit(cache=True)
def _pivot(T, basis, row, col):
    m1, n1 = T.shape
    piv = T[row, col]
    for j in range(n1):
        T[row, j] /= piv
    for i in range(m1):
        if i == row:
            continue
        f = T[i, col]
        if f != 0.0:
            for j in range(n1):
                T[i, j] -= f * T[row, j]
            T[i, col] = 0.0
    T[row, col] = 1.0
    basis[row] = col


@numba.njit(cache=True)
def _complement(T, basis, ub, flipped, M, r, col):
    u = ub[col]
    m = T.shape[0] - 1
    n = T.shape[1] - 1
    row = -1
    for i in range(m):
        if basis[i] == col:
            row = i
            break
    if row >= 0:
        # basic: negate its row except the unit entry
        for j in range(n):
            T[row, j] = -T[row, j]
        T[row, col] = 1.0
        T[row, n] = u - T[row, n]
    else:
        for i in range(m + 1):
            T[i, n] -= u * T[i, col]
            T[i, col] = -T[i, col]
    for i in range(M.shape[0]):
        r[i] -= u * M[i, col]
        M[i, col] = -M[i, col]
    flipped[col] = not flipped[col]


@numba.njit(cache=True)
def _run(T, basis, ub, flipped, M, r, allowed, pivots, max_pivots, pivot_tol):
    m = T.shape[0] - 1
    n = T.shape[1] - 1
    degenerate = 0
    while True:
        # entering column: most negative reduced cost, or first (Bland) when stalling
        col = -1
        best_red = -pivot_tol * 10
        for j in range(n):
            if allowed[j] and T[m, j] < -pivot_tol * 10:
                if degenerate > 20:
                    col = j
                    break
                if T[m, j] < best_red:
                    best_red = T[m, j]
                    col = j
        if col < 0:
            return _ST_OPTIMAL, pivots
        best = np.inf
        for i in range(m):
            a = T[i, col]
            if a > pivot_tol:
                ratio = T[i, n] / a
            elif a < -pivot_tol and np.isfinite(ub[basis[i]]):
                ratio = (ub[basis[i]] - T[i, n]) / -a
            else:
                continue
            if ratio < best:
                best = ratio
        if ub[col] <= best:
            if not np.isfinite(ub[col]):
                return _ST_UNBOUNDED, pivots
            # entering variable reaches its own bound first
            _complement(T, basis, ub, flipped, M, r, col)
            degenerate = 0
            continue
        if best < 0.0:
            best = 0.0
        limit = best + 1e-12 * max(1.0, abs(best))
        row = -1
        for i in range(m):
            a = T[i, col]
            if a > pivot_tol:
                ratio = T[i, n] / a
            elif a < -pivot_tol and np.isfinite(ub[basis[i]]):
                ratio = (ub[basis[i]] - T[i, n]) / -a
            else:
                continue
            if ratio <= limit and (row < 0 or basis[i] < basis[row]):
                row = i
        if best <= 1e-12:
            degenerate += 1
        else:
            degenerate = 0
        if T[row, col] < 0.0:
            _complement(T, basis, ub, flipped, M, r, basis[row])
        _pivot(T, basis, row, col)
        pivots += 1
        if pivots > max_pivots:
            return _ST_LIMIT, pivots


class _Tableau:
    """Bounded standard form ``min c.z, Mz = r, 0 <= z <= ub`` with explicit basis.

    A variable sitting at its upper bound is stored complemented
    (``z' = ub - z``), so every nonbasic variable is at 0 in the tableau.
    ``M`` and ``r`` are kept in the same complemented coordinates so that
    refactorization reproduces the tableau. The pivoting loop is compiled.
    """

    def __init__(self, M: np.ndarray, r: np.ndarray, basis: np.ndarray, ub: np.ndarray):
        self.M = np.ascontiguousarray(M)
        self.r = r.copy()
        m, n = M.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = M
        self.T[:m, n] = r
        self.basis = basis.astype(np.int64)
        self.ub = ub
        self.flipped = np.zeros(n, dtype=np.bool_)
        self.pivots = 0
        self.refactorizations = 0

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    def set_cost(self, cost: np.ndarray) -> None:
        obj = self.T[-1]
        obj[:] = 0.0
        obj[: cost.size] = cost
        obj[:-1][self.flipped] *= -1.0
        cb = obj[self.basis].copy()
        obj -= cb @ self.T[:-1]

    def pivot(self, row: int, col: int) -> None:
        _pivot(self.T, self.basis, row, col)
        self.pivots += 1

    def refactor(self, cost: np.ndarray) -> None:
        B = self.M[:, self.basis]
        try:
            inv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise LPError("singular basis during refactorization") from exc
        m, n = self.M.shape
        self.T[:m, :n] = inv @ self.M
        self.T[:m, n] = inv @ self.r
        self.set_cost(cost)
        self.refactorizations += 1

    def run(self, allowed: np.ndarray, max_pivots: int) -> str:
        """Minimize the current objective row over columns in ``allowed``."""
        status, self.pivots = _run(self.T, self.basis, self.ub, self.flipped, self.M, self.r,
                                   allowed, self.pivots, max_pivots, PIVOT_TOL)
        if status == _ST_LIMIT:
            raise LPError(f"pivot limit {max_pivots} exceeded")
        return OPTIMAL if status == _ST_OPTIMAL else UNBOUNDED

    def solution(self, n: int) -> np.ndarray:
        z = np.zeros(self.T.shape[1] - 1)
        z[self.basis] = self.T[:-1, -1]
        z = np.maximum(z, 0.0)
        z = np.where(self.flipped, self.ub - z, z)
        return np.clip(z[:n], 0.0, self.ub[:n])


def _as2d(A, n):
    if A is None:
        return np.zeros((0, n))
    A = np.asarray(A, dtype=np.float64)
    return A.reshape(-1, n)


class LinearProgram:
    """A feasible region that can be optimized for several objectives.

    Phase one runs once in the constructor; each :meth:`optimize` call
    starts phase two from the basis left by the previous call, which is
    already feasible. See the module docstring for the problem form;
    ``lower`` defaults to 0 and ``upper`` to +inf, and either may contain
    infinities.
    """

    def __init__(self, n, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                 lower=None, upper=None, tol: float = FEAS_TOL):
        A_ub, A_eq = _as2d(A_ub, n), _as2d(A_eq, n)
        b_ub = np.asarray(b_ub if b_ub is not None else [], dtype=np.float64).reshape(-1)
        b_eq = np.asarray(b_eq if b_eq is not None else [], dtype=np.float64).reshape(-1)
        lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=np.float64).reshape(-1)
        upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=np.float64).reshape(-1)
        for arr in (A_ub, A_eq, b_ub, b_eq):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP coefficients must be finite")
        if np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise ValueError("lower bounds may not be +inf nor upper bounds -inf")
        self.n, self.tol = n, tol
        self.A_ub, self.b_ub, self.A_eq, self.b_eq = A_ub, b_ub, A_eq, b_eq
        self.lower, self.upper = lower, upper
        self.status = OPTIMAL
        self.pivots = 0
        if np.any(lower > upper):
            self.status = INFEASIBLE
            return

        # x = offset + sign * z (+ extra negative part for free variables)
        fin_lo = np.isfinite(lower)
        fin_hi = np.isfinite(upper)
        flip = ~fin_lo & fin_hi          # x = upper - z
        free = ~fin_lo & ~fin_hi         # x = z+ - z-
        self.sign = np.where(flip, -1.0, 1.0)
        self.offset = np.where(fin_lo, lower, np.where(flip, upper, 0.0))
        self.free_idx = np.flatnonzero(free)
        nz = self.nz = n + self.free_idx.size

        def lift(A):
            out = np.empty((A.shape[0], nz))
            out[:, :n] = A * self.sign
            out[:, n:] = -A[:, self.free_idx]
            return out

        Aub = lift(A_ub)
        bub = b_ub - A_ub @ self.offset
        Aeq = lift(A_eq)
        beq = b_eq - A_eq @ self.offset
        zub = np.full(nz, np.inf)
        box = fin_lo & fin_hi
        zub[:n][box] = upper[box] - lower[box]

        # row equilibration
        su = np.max(np.abs(Aub), axis=1) if Aub.size else np.zeros(0)
        zu = su == 0
        if np.any(zu & (bub < -tol)):
            self.status = INFEASIBLE
            return
        se = np.max(np.abs(Aeq), axis=1) if Aeq.size else np.zeros(0)
        ze = se == 0
        if np.any(ze & (np.abs(beq) > tol)):
            self.status = INFEASIBLE
            return
        Aub, bub = Aub[~zu] / su[~zu, None], bub[~zu] / su[~zu]
        Aeq, beq = Aeq[~ze] / se[~ze, None], beq[~ze] / se[~ze]

        m1, m2 = Aub.shape[0], Aeq.shape[0]
        m = m1 + m2
        neg = bub < 0
        # columns: z (nz) | slacks (m1) | artificials (n_art)
        art_rows = np.concatenate([np.flatnonzero(neg), m1 + np.arange(m2)])
        n_art = art_rows.size
        ncol = nz + m1 + n_art
        M = np.zeros((m, ncol))
        r = np.zeros(m)
        M[:m1, :nz] = Aub
        M[:m1, nz : nz + m1] = np.eye(m1)
        r[:m1] = bub
        M[m1:, :nz] = Aeq
        r[m1:] = beq
        flipr = np.concatenate([neg, beq < 0])
        M[flipr] *= -1
        r[flipr] *= -1
        basis = np.concatenate([np.arange(nz, nz + m1), np.zeros(m2, dtype=int)])
        for k, row in enumerate(art_rows):
            M[row, nz + m1 + k] = 1.0
            basis[row] = nz + m1 + k

        ub = np.concatenate([zub, np.full(m1 + n_art, np.inf)])
        tab = self.tab = _Tableau(M, r, basis, ub)
        self.max_pivots = 50 * (m + ncol) + 100
        is_art = np.zeros(ncol, dtype=bool)
        is_art[nz + m1 :] = True
        self.allowed = ~is_art
        self.n_extra = m1 + n_art

        if n_art:
            tab.set_cost(np.where(is_art, 1.0, 0.0))
            tab.run(np.ones(ncol, dtype=bool), self.max_pivots)
            infeas = tab.T[:-1, -1][is_art[tab.basis]].sum()
            if infeas > tol:
                self.status = INFEASIBLE
                self.pivots = tab.pivots
                return
            # drive artificials out of the basis
            keep = np.ones(tab.m, dtype=bool)
            for row in range(tab.m):
                if is_art[tab.basis[row]]:
                    cand = np.flatnonzero(~is_art & (np.abs(tab.T[row, :-1]) > 1e-9))
                    if cand.size:
                        tab.pivot(row, int(cand[0]))
                    else:
                        keep[row] = False
            if not keep.all():
                rows = np.flatnonzero(keep)
                tab.T = np.vstack([tab.T[rows], tab.T[-1:]])
                tab.basis = tab.basis[rows]
                tab.M = tab.M[rows]
                tab.r = tab.r[rows]
        self.pivots = tab.pivots

    @property
    def feasible(self) -> bool:
        return self.status != INFEASIBLE

    def optimize(self, c, maximize: bool = True) -> LPResult:
        """Optimize ``c . x`` over the region; raises :class:`LPError` on failure."""
        if self.status == INFEASIBLE:
            return LPResult(INFEASIBLE, pivots=self.pivots)
        c = np.asarray(c, dtype=np.float64).reshape(-1)
        if c.size != self.n or not np.all(np.isfinite(c)):
            raise ValueError("objective must be finite with one entry per variable")
        cz = np.concatenate([c * self.sign, -c[self.free_idx]])
        if maximize:
            cz = -cz
        cost = np.concatenate([cz, np.zeros(self.n_extra)])
        tab = self.tab
        tab.set_cost(cost)
        refactored = 0
        n = self.n
        while True:
            status = tab.run(self.allowed, tab.pivots + self.max_pivots)
            if status == UNBOUNDED:
                self.pivots = tab.pivots
                return LPResult(UNBOUNDED, pivots=tab.pivots)
            z = tab.solution(self.nz)
            x = self.offset + self.sign * z[:n]
            x[self.free_idx] -= z[n:]
            if _check(x, self.A_ub, self.b_ub, self.A_eq, self.b_eq, self.lower, self.upper, self.tol):
                break
            if refactored >= 2:
                raise LPError("solution violates constraints after refactorization")
            tab.refactor(cost)
            refactored += 1
        self.pivots = tab.pivots
        x = np.clip(x, self.lower, self.upper)
        return LPResult(OPTIMAL, x, float(c @ x), tab.pivots)


def lp_solve(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    lower=None,
    upper=None,
    maximize: bool = True,
    tol: float = FEAS_TOL,
) -> LPResult:
    """Solve a dense LP; see the module docstring for the problem form.

    ``lower`` defaults to 0 and ``upper`` to +inf; either may contain
    infinities. Raises :class:`LPError` on numerical failure.
    """
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(c)):
        raise ValueError("LP coefficients must be finite")
    prog = LinearProgram(c.size, A_ub, b_ub, A_eq, b_eq, lower, upper, tol)
    return prog.optimize(c, maximize)


def _check(x, A_ub, b_ub, A_eq, b_eq, lower, upper, tol) -> bool:
    def ok(resid, scale):
        return np.all(resid <= tol * np.maximum(1.0, scale))

    if A_ub.size:
        lhs = A_ub @ x
        if not ok(lhs - b_ub, np.abs(A_ub) @ np.abs(x) + np.abs(b_ub)):
            return False
    if A_eq.size:
        lhs = A_eq @ x
        if not ok(np.abs(lhs - b_eq), np.abs(A_eq) @ np.abs(x) + np.abs(b_eq)):
            return False
    return bool(ok(lower - x, np.abs(lower)) and ok(x - upper, np.abs(upper)))

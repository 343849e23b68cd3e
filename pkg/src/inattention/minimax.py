"""Exact mixed equilibria of finite zero-sum matrix games.

The row player maximizes.  Games are solved as linear programs: after shifting
the payoff matrix to be strictly positive, the column player's LP

    max 1'y   s.t.   M y <= 1,  y >= 0

is solved with a dense tableau simplex.  The slacks' reduced costs recover the
row player's strategy, so one solve certifies both sides.  Dantzig pivoting is
tried first; on stall the solve restarts with Bland's rule, which cannot
cycle.  Solutions are LP vertices, so duality gaps are at rounding level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import ActionDistribution


class MatrixGameError(RuntimeError):
    """The matrix game solver failed to produce a certified solution."""


@dataclass(frozen=True)
class MatrixGame:
    """Payoff matrix for the maximizing row player."""

    payoff: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.payoff, dtype=np.float64)
        object.__setattr__(self, "payoff", p)
        if p.ndim != 2:
            raise ValueError("payoff must be a matrix")
        if not np.isfinite(p).all():
            raise ValueError("payoff matrix has non-finite entries")


@njit(cache=True)
def _simplex(M, bland):
    """Tableau simplex for the shifted column-player LP.

    Returns (ok, value, row_strategy, col_strategy) for the original payoffs.
    """
    m, n = M.shape
    lo = M[0, 0]
    for i in range(m):
        for j in range(n):
            if M[i, j] < lo:
                lo = M[i, j]
    shift = 1.0 - lo
    T = np.zeros((m + 1, n + m + 1))
    for i in range(m):
        for j in range(n):
            T[i, j] = M[i, j] + shift
        T[i, n + i] = 1.0
        T[i, n + m] = 1.0
    for j in range(n):
        T[m, j] = -1.0
    basis = np.empty(m, np.int64)
    for i in range(m):
        basis[i] = n + i
    max_it = 50 * (n + m + 2) if not bland else 4000 * (n + m + 2)
    it = 0
    while True:
        it += 1
        if it > max_it:
            return False, 0.0, np.zeros(m), np.zeros(n)
        enter = -1
        if bland:
            for j in range(n + m):
                if T[m, j] < -1e-12:
                    enter = j
                    break
        else:
            best_rc = -1e-12
            for j in range(n + m):
                if T[m, j] < best_rc:
                    best_rc = T[m, j]
                    enter = j
        if enter < 0:
            break
        leave = -1
        best = np.inf
        for i in range(m):
            a = T[i, enter]
            if a > 1e-12:
                ratio = T[i, n + m] / a
                if ratio < best - 1e-15 or (
                    abs(ratio - best) <= 1e-15 and (leave < 0 or basis[i] < basis[leave])
                ):
                    best = ratio
                    leave = i
        if leave < 0:
            return False, 0.0, np.zeros(m), np.zeros(n)
        piv = T[leave, enter]
        for j in range(n + m + 1):
            T[leave, j] /= piv
        for i in range(m + 1):
            if i != leave:
                f = T[i, enter]
                if f != 0.0:
                    for j in range(n + m + 1):
                        T[i, j] -= f * T[leave, j]
        basis[leave] = enter
    Z = T[m, n + m]
    if Z <= 0.0:
        return False, 0.0, np.zeros(m), np.zeros(n)
    y = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            y[basis[i]] = T[i, n + m]
    w = 1.0 / Z
    p = np.empty(m)
    for i in range(m):
        p[i] = T[m, n + i] * w
    q = y * w
    # clean tiny negative noise and renormalize exactly
    ps = 0.0
    for i in range(m):
        if p[i] < 0.0:
            p[i] = 0.0
        ps += p[i]
    qs = 0.0
    for j in range(n):
        if q[j] < 0.0:
            q[j] = 0.0
        qs += q[j]
    p /= ps
    q /= qs
    return True, w - shift, p, q


@njit(cache=True)
def solve_matrix_game_kernel(M):
    """(value, row_strategy, col_strategy) with a pure-saddle fast path."""
    m, n = M.shape
    best_rowmin = -np.inf
    bi = 0
    for i in range(m):
        r = np.inf
        for j in range(n):
            if M[i, j] < r:
                r = M[i, j]
        if r > best_rowmin:
            best_rowmin = r
            bi = i
    best_colmax = np.inf
    bj = 0
    for j in range(n):
        c = -np.inf
        for i in range(m):
            if M[i, j] > c:
                c = M[i, j]
        if c < best_colmax:
            best_colmax = c
            bj = j
    if best_rowmin == best_colmax:
        p = np.zeros(m)
        q = np.zeros(n)
        p[bi] = 1.0
        q[bj] = 1.0
        return True, best_rowmin, p, q
    ok, v, p, q = _simplex(M, False)
    if not ok:
        ok, v, p, q = _simplex(M, True)
    return ok, v, p, q


def solve_matrix_game(
    game: MatrixGame | np.ndarray, tol: float = 1e-9
) -> tuple[float, ActionDistribution, ActionDistribution]:
    """Minimax value and certifying strategies of a matrix game.

    The returned strategies satisfy min_col(p'M) >= value - tol and
    max_row(Mq) <= value + tol, hence a duality gap of at most 2 tol.
    """
    M = game.payoff if isinstance(game, MatrixGame) else MatrixGame(np.asarray(game)).payoff
    ok, value, p, q = solve_matrix_game_kernel(M)
    if not ok:
        raise MatrixGameError("simplex failed to terminate")
    lo = float((p @ M).min())
    hi = float((M @ q).max())
    if lo < value - tol or hi > value + tol:
        raise MatrixGameError(
            f"solution not certified: value={value}, row guarantee={lo}, col guarantee={hi}")
    return float(value), ActionDistribution(p), ActionDistribution(q)

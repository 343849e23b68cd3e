"""Optimal values and equilibrium policies for MDPs and zero-sum games.

Games are solved with Shapley value iteration: each sweep replaces V(s) by the
minimax value of the stage game r(s,.,.) + gamma * E[V], solved exactly per
state.  Sweeps stop once the sup-norm residual is at most tol*(1-gamma)/gamma,
which bounds the value error by tol.  MDPs use plain value iteration with the
same stopping rule.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .core import ActionDistribution, Mdp, StationaryPolicy, ZeroSumGame
from .minimax import solve_matrix_game_kernel

MAX_SWEEPS = 10_000_000
SUPPORT_DEDUP_ATOL = 1e-9


class SolverError(RuntimeError):
    """Value iteration failed to converge or a stage game could not be solved."""


@dataclass(frozen=True)
class EquilibriumSolution:
    """Converged values, stage strategies, and derived Q tensor of a game."""

    values: np.ndarray                  # (S,)
    policy1: StationaryPolicy
    policy2: StationaryPolicy
    q_tensor: np.ndarray                # (S, A1, A2), recomputed from values
    residual: float                     # final sup-norm Bellman residual
    residual_history: np.ndarray
    tol: float
    game_fingerprint: str

    def q_of_distributions(self, state: int, d1, d2) -> float:
        """Bilinear stage value d1' Q*(s) d2."""
        d1 = d1.probs if isinstance(d1, ActionDistribution) else np.asarray(d1)
        d2 = d2.probs if isinstance(d2, ActionDistribution) else np.asarray(d2)
        return float(d1 @ self.q_tensor[state] @ d2)

    def q_against_policy2(self) -> np.ndarray:
        """(S, A1) matrix G with G[s, a1] = sum_a2 Q*(s, a1, a2) pi2*(s, a2)."""
        return np.einsum("sab,sb->sa", self.q_tensor, self.policy2.table)


@dataclass(frozen=True)
class SupportSet:
    """Deduplicated action distributions used by an equilibrium policy."""

    distributions: tuple[ActionDistribution, ...]
    game_fingerprint: str = ""

    def __post_init__(self):
        if not self.distributions:
            raise ValueError("support set must be non-empty")

    def __len__(self) -> int:
        return len(self.distributions)

    def as_matrix(self) -> np.ndarray:
        return np.stack([d.probs for d in self.distributions])


@dataclass(frozen=True)
class DeltaMap:
    """Per-state spread of optimal Q values, the stakes weight Delta(s)."""

    weights: np.ndarray
    game_fingerprint: str = ""

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if w.min(initial=0.0) < -1e-9:
            raise ValueError("Delta must be nonnegative")


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def _game_sweep(reward, next_idx, next_prob, gamma, V, Vnew, P1, P2):
    S, A1, A2 = reward.shape
    K = next_idx.shape[3]
    fail = 0
    for s in prange(S):
        M = np.empty((A1, A2))
        for a1 in range(A1):
            for a2 in range(A2):
                ev = 0.0
                for k in range(K):
                    ev += next_prob[s, a1, a2, k] * V[next_idx[s, a1, a2, k]]
                M[a1, a2] = reward[s, a1, a2] + gamma * ev
        ok, v, p, q = solve_matrix_game_kernel(M)
        if not ok:
            fail = s + 1
            continue
        Vnew[s] = v
        for a in range(A1):
            P1[s, a] = p[a]
        for a in range(A2):
            P2[s, a] = q[a]
    return fail


@njit(cache=True)
def _q_from_values(reward, next_idx, next_prob, gamma, V):
    S, A1, A2 = reward.shape
    K = next_idx.shape[3]
    Q = np.empty((S, A1, A2))
    for s in range(S):
        for a1 in range(A1):
            for a2 in range(A2):
                ev = 0.0
                for k in range(K):
                    ev += next_prob[s, a1, a2, k] * V[next_idx[s, a1, a2, k]]
                Q[s, a1, a2] = reward[s, a1, a2] + gamma * ev
    return Q


@njit(cache=True)
def _mdp_sweep(reward, next_idx, next_prob, gamma, V, Vnew):
    S, A = reward.shape
    K = next_idx.shape[2]
    for s in range(S):
        best = -np.inf
        for a in range(A):
            ev = 0.0
            for k in range(K):
                ev += next_prob[s, a, k] * V[next_idx[s, a, k]]
            q = reward[s, a] + gamma * ev
            if q > best:
                best = q
        Vnew[s] = best


def _residual_target(tol: float, gamma: float) -> float:
    if gamma == 0.0:
        return np.inf  # one sweep is exact
    return tol * (1.0 - gamma) / gamma


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


def mdp_solve(mdp: Mdp, tol: float = 1e-6):
    """(V*, Q*, greedy policy) of an MDP; ||V - V*||_inf <= tol.

    Greedy ties break to the lowest action index.
    """
    V = np.zeros(mdp.n_states)
    Vnew = np.empty_like(V)
    target = _residual_target(tol, mdp.gamma)
    for _ in range(MAX_SWEEPS):
        _mdp_sweep(mdp.reward, mdp.next_idx, mdp.next_prob, mdp.gamma, V, Vnew)
        res = float(np.abs(Vnew - V).max())
        V, Vnew = Vnew, V
        if res <= target:
            break
    else:
        raise SolverError("MDP value iteration exceeded the sweep cap")
    Q = np.einsum(
        "sak,sak->sa", mdp.next_prob,
        V[mdp.next_idx]) * mdp.gamma + mdp.reward
    policy = StationaryPolicy.deterministic(np.argmax(Q, axis=1), mdp.n_actions)
    return V, Q, policy


def game_solve(game: ZeroSumGame, tol: float = 1e-6) -> EquilibriumSolution:
    """Shapley value iteration until the residual certifies a tol-accurate V*."""
    S = game.n_states
    V = np.zeros(S)
    Vnew = np.empty_like(V)
    P1 = np.zeros((S, game.n_actions1))
    P2 = np.zeros((S, game.n_actions2))
    target = _residual_target(tol, game.gamma)
    history = []
    for _ in range(MAX_SWEEPS):
        fail = _game_sweep(game.reward, game.next_idx, game.next_prob,
                           game.gamma, V, Vnew, P1, P2)
        if fail:
            raise SolverError(f"stage matrix game failed at state {fail - 1}")
        res = float(np.abs(Vnew - V).max())
        history.append(res)
        V, Vnew = Vnew, V
        if res <= target:
            break
    else:
        raise SolverError("Shapley iteration exceeded the sweep cap")
    Q = _q_from_values(game.reward, game.next_idx, game.next_prob, game.gamma, V)
    return EquilibriumSolution(
        values=V.copy(),
        policy1=StationaryPolicy(P1.copy()),
        policy2=StationaryPolicy(P2.copy()),
        q_tensor=Q,
        residual=res,
        residual_history=np.asarray(history),
        tol=tol,
        game_fingerprint=game.fingerprint(),
    )


def policy_evaluation(mdp: Mdp, policy: StationaryPolicy) -> np.ndarray:
    """Exact V of a fixed policy in an MDP, by linear solve."""
    S = mdp.n_states
    P = np.zeros((S, S))
    flat = mdp.dense_transition()  # (S, A, S)
    for s in range(S):
        P[s] = policy.table[s] @ flat[s]
    r = np.einsum("sa,sa->s", mdp.reward, policy.table)
    return np.linalg.solve(np.eye(S) - mdp.gamma * P, r)


# ---------------------------------------------------------------------------
# support sets and Delta weights
# ---------------------------------------------------------------------------


def support_set(policy1: StationaryPolicy, game_fingerprint: str = "") -> SupportSet:
    """Distinct action distributions used by a policy, ordered by first state."""
    kept: list[np.ndarray] = []
    for s in range(policy1.n_states):
        row = policy1.table[s]
        if not any(np.abs(row - k).max() <= SUPPORT_DEDUP_ATOL for k in kept):
            kept.append(row.copy())
    return SupportSet(tuple(ActionDistribution(k) for k in kept), game_fingerprint)


def delta_map(solution: EquilibriumSolution, mode: str = "per-distribution",
              support: SupportSet | None = None) -> DeltaMap:
    """Delta(s): Q-value spread per state.

    "per-action" takes the spread over Player 1 actions of the MDP-style
    Q*(s, a) (the game tensor marginalized by pi2*); "per-distribution" takes
    it over the support set's distributions d with Q*(s, d) = d' Q*(s) pi2*(s).
    """
    G = solution.q_against_policy2()  # (S, A1)
    if mode == "per-action":
        w = G.max(axis=1) - G.min(axis=1)
    elif mode == "per-distribution":
        if support is None:
            raise ValueError("per-distribution mode needs a SupportSet")
        scores = G @ support.as_matrix().T  # (S, |D|)
        w = scores.max(axis=1) - scores.min(axis=1)
    else:
        raise ValueError(f"unknown delta mode {mode!r}")
    return DeltaMap(np.maximum(w, 0.0), solution.game_fingerprint)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_solution_csv(path, solution: EquilibriumSolution) -> None:
    """One row per state: state, value, p1 strategy, p2 strategy."""
    a1 = solution.policy1.n_actions
    a2 = solution.policy2.n_actions
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "value"]
                   + [f"p1_{a}" for a in range(a1)]
                   + [f"p2_{a}" for a in range(a2)])
        for s in range(solution.values.shape[0]):
            w.writerow([s, f"{solution.values[s]:.12g}"]
                       + [f"{x:.12g}" for x in solution.policy1.table[s]]
                       + [f"{x:.12g}" for x in solution.policy2.table[s]])

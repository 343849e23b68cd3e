"""Action rules for both players and Player 1's prediction update.

Player 1 scores candidate action distributions against its posterior belief
assuming Player 2 plays the equilibrium policy and the future is perfectly
observed (the Q_MDP idea lifted to games).  Player 2 either follows the
equilibrium policy or deviates myopically: knowing Player 1's current
distribution choice, it picks the action minimizing Player 1's expected
one-step-plus-continuation value.

Loops are written to match the compiled episode engine operation-for-
operation so both paths produce identical trajectories from identical draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ActionDistribution, Belief, StationaryPolicy, ZeroSumGame
from .equilibrium import DeltaMap, EquilibriumSolution, SupportSet

PERFECT_INFORMATION = "perfect"

P2_EQUILIBRIUM = "equilibrium"
P2_DECEPTIVE = "deceptive"
P2_MODES = (P2_EQUILIBRIUM, P2_DECEPTIVE)


def sample_index(probs: np.ndarray, u: float) -> int:
    """Smallest index whose cumulative probability exceeds u."""
    acc = 0.0
    last = 0
    for i in range(probs.shape[0]):
        p = probs[i]
        if p > 0.0:
            acc += p
            last = i
            if u < acc:
                return i
    return last


@dataclass(frozen=True)
class Player1Config:
    """Everything Player 1 needs at run time, all from one solved game.

    ``selector`` is a callable (belief, bank, delta, u_row) -> ordered index
    list, or the PERFECT_INFORMATION sentinel.  ``action_rule`` is "support"
    for the game rule over the equilibrium support set or "qmdp" for the
    per-action MDP rule (games with a single Player 2 action).
    """

    selector: object
    solution: EquilibriumSolution
    support: SupportSet
    delta: DeltaMap
    assumed_pi2: StationaryPolicy = None
    action_rule: str = "support"
    q_against_pi2: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.assumed_pi2 is None:
            object.__setattr__(self, "assumed_pi2", self.solution.policy2)
        if self.action_rule not in ("support", "qmdp"):
            raise ValueError(f"unknown action rule {self.action_rule!r}")
        fps = {self.solution.game_fingerprint,
               self.support.game_fingerprint or self.solution.game_fingerprint,
               self.delta.game_fingerprint or self.solution.game_fingerprint}
        if len(fps) != 1:
            raise ValueError("solution, support set, and Delta map come from different games")
        if self.q_against_pi2 is None:
            object.__setattr__(self, "q_against_pi2", self.solution.q_against_policy2())


def p1_act_mdp(belief: Belief, q_matrix: np.ndarray) -> int:
    """Eq.-(4)-style rule: argmax_a sum_s b(s) Q*(s, a), lowest index on ties."""
    b = belief.probs
    n_actions = q_matrix.shape[1]
    best_a = 0
    best = -np.inf
    for a in range(n_actions):
        score = 0.0
        for s in range(b.shape[0]):
            if b[s] != 0.0:
                score += b[s] * q_matrix[s, a]
        if score > best:
            best = score
            best_a = a
    return best_a


def p1_support_scores(belief: Belief, q_against_pi2: np.ndarray,
                      support: SupportSet) -> np.ndarray:
    """Score of each support distribution d: sum_s b(s) d' Q*(s) pi2*(s)."""
    b = belief.probs
    g = np.zeros(q_against_pi2.shape[1])
    for s in range(b.shape[0]):
        w = b[s]
        if w != 0.0:
            for a in range(g.shape[0]):
                g[a] += w * q_against_pi2[s, a]
    D = support.as_matrix()
    scores = np.empty(D.shape[0])
    for d in range(D.shape[0]):
        acc = 0.0
        for a in range(g.shape[0]):
            acc += D[d, a] * g[a]
        scores[d] = acc
    return scores


def p1_act_game(belief: Belief, solution: EquilibriumSolution, support: SupportSet,
                q_against_pi2: np.ndarray | None = None) -> ActionDistribution:
    """Game action rule: best support distribution under the posterior belief.

    Ties break to the distribution first in the support set's order.
    """
    if q_against_pi2 is None:
        q_against_pi2 = solution.q_against_policy2()
    scores = p1_support_scores(belief, q_against_pi2, support)
    best = 0
    for d in range(1, scores.shape[0]):
        if scores[d] > scores[best]:
            best = d
    return support.distributions[best]


def p1_predict(belief: Belief, a1: int, assumed_pi2: StationaryPolicy,
               game: ZeroSumGame) -> Belief:
    """Prediction update: push the belief through Player 1's action and the
    assumed Player 2 policy."""
    b = belief.probs
    out = np.zeros_like(b)
    K = game.next_idx.shape[3]
    for s in range(b.shape[0]):
        w = b[s]
        if w == 0.0:
            continue
        for a2 in range(game.n_actions2):
            w2 = w * assumed_pi2.table[s, a2]
            if w2 == 0.0:
                continue
            for k in range(K):
                p = game.next_prob[s, a1, a2, k]
                if p != 0.0:
                    out[game.next_idx[s, a1, a2, k]] += w2 * p
    total = out.sum()
    if total < 1e-300:
        raise RuntimeError("prediction update produced an all-zero belief")
    return Belief(out / total)


def p2_deviation_scores(state: int, d1: ActionDistribution,
                        solution: EquilibriumSolution, game: ZeroSumGame) -> np.ndarray:
    """g(a2) = sum_a1 d1(a1) (r(s,a1,a2) + gamma E[V*(s') | a1,a2]) per a2."""
    d = d1.probs
    K = game.next_idx.shape[3]
    g = np.empty(game.n_actions2)
    for a2 in range(game.n_actions2):
        acc = 0.0
        for a1 in range(game.n_actions1):
            w = d[a1]
            if w == 0.0:
                continue
            ev = 0.0
            for k in range(K):
                p = game.next_prob[state, a1, a2, k]
                if p != 0.0:
                    ev += p * solution.values[game.next_idx[state, a1, a2, k]]
            acc += w * (game.reward[state, a1, a2] + game.gamma * ev)
        g[a2] = acc
    return g


def p2_act(mode: str, state: int, d1: ActionDistribution,
           solution: EquilibriumSolution, game: ZeroSumGame,
           u: float | None = None, rng=None) -> int:
    """Player 2's action: sample the equilibrium policy, or deviate myopically.

    Deceptive mode needs ``d1``, Player 1's current rule-(5) choice, which is
    how Player 2's knowledge of Player 1's belief enters.  The minimizing
    action is returned deterministically (the objective is linear in d2, so a
    vertex is optimal); ties break to the lowest index.
    """
    if mode not in P2_MODES:
        raise ValueError(f"unknown Player 2 mode {mode!r}")
    if mode == P2_EQUILIBRIUM:
        if u is None:
            u = float(rng.random()) if rng is not None else 0.0
        return sample_index(solution.policy2.table[state], u)
    g = p2_deviation_scores(state, d1, solution, game)
    best = 0
    for a2 in range(1, g.shape[0]):
        if g[a2] < g[best]:
            best = a2
    return best

"""Finite MDPs, two-player zero-sum stochastic games, policies, and beliefs.

States and actions are dense integer indices.  Transition rows are stored in a
padded sparse layout: ``next_idx[s, a..., k]`` lists successor states and
``next_prob[s, a..., k]`` their probabilities, zero-padded up to a common
width.  This keeps large games (e.g. the grid world, 1332 states) cheap while
small games can round-trip through dense tensors.

All containers are immutable after construction and safe to share across
workers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

# Tolerance for probability rows supplied as data (transition rows, policies,
# sensor likelihoods) versus beliefs computed by repeated updates, which are
# allowed to accumulate rounding.
PROB_ATOL = 1e-12
BELIEF_ATOL = 1e-10


class DimensionMismatchError(ValueError):
    """A policy, belief, or sensor does not match the game's shapes."""


# ---------------------------------------------------------------------------
# distributions, policies, beliefs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionDistribution:
    """Probability distribution over one player's action set."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1:
            raise ValueError("action distribution must be a vector")
        if p.min(initial=0.0) < -PROB_ATOL:
            raise ValueError("negative action probability")
        if abs(p.sum() - 1.0) > PROB_ATOL:
            raise ValueError(f"action probabilities sum to {p.sum()!r}, not 1")

    @property
    def n_actions(self) -> int:
        return self.probs.shape[0]

    @staticmethod
    def dirac(action: int, n_actions: int) -> "ActionDistribution":
        p = np.zeros(n_actions)
        p[action] = 1.0
        return ActionDistribution(p)


@dataclass(frozen=True)
class StationaryPolicy:
    """One ActionDistribution per state, stored as an (S, A) table."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.float64)
        object.__setattr__(self, "table", t)
        if t.ndim != 2:
            raise ValueError("policy table must be (n_states, n_actions)")
        if t.min(initial=0.0) < -PROB_ATOL:
            raise ValueError("negative policy probability")
        bad = np.abs(t.sum(axis=1) - 1.0) > PROB_ATOL
        if bad.any():
            raise ValueError(f"policy rows {np.flatnonzero(bad).tolist()} do not sum to 1")

    @property
    def n_states(self) -> int:
        return self.table.shape[0]

    @property
    def n_actions(self) -> int:
        return self.table.shape[1]

    def distribution(self, state: int) -> ActionDistribution:
        return ActionDistribution(self.table[state].copy())

    @staticmethod
    def deterministic(actions, n_actions: int) -> "StationaryPolicy":
        actions = np.asarray(actions, dtype=np.int64)
        t = np.zeros((actions.shape[0], n_actions))
        t[np.arange(actions.shape[0]), actions] = 1.0
        return StationaryPolicy(t)

    @staticmethod
    def uniform(n_states: int, n_actions: int) -> "StationaryPolicy":
        return StationaryPolicy(np.full((n_states, n_actions), 1.0 / n_actions))


@dataclass(frozen=True)
class Belief:
    """Probability vector over states."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1:
            raise ValueError("belief must be a vector")
        if p.min(initial=0.0) < -BELIEF_ATOL:
            raise ValueError("negative belief entry")
        if abs(p.sum() - 1.0) > BELIEF_ATOL:
            raise ValueError(f"belief sums to {p.sum()!r}, not 1")

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]


def dirac_belief(state: int, n_states: int) -> Belief:
    """Belief with all mass on one state."""
    if not 0 <= state < n_states:
        raise ValueError(f"unknown state index {state}")
    p = np.zeros(n_states)
    p[state] = 1.0
    return Belief(p)


def uniform_belief(n_states: int) -> Belief:
    return Belief(np.full(n_states, 1.0 / n_states))


# ---------------------------------------------------------------------------
# padded sparse transition helpers
# ---------------------------------------------------------------------------


def _pack_rows(dense: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Convert a (..., S) stack of probability rows to padded sparse form."""
    dense = np.asarray(dense, dtype=np.float64)
    lead = dense.shape[:-1]
    flat = dense.reshape(-1, dense.shape[-1])
    nnz = (flat != 0.0).sum(axis=1)
    width = max(int(nnz.max(initial=1)), 1)
    idx = np.zeros((flat.shape[0], width), dtype=np.int32)
    prob = np.zeros((flat.shape[0], width), dtype=np.float64)
    for r in range(flat.shape[0]):
        nz = np.flatnonzero(flat[r])
        idx[r, : nz.size] = nz
        prob[r, : nz.size] = flat[r, nz]
    return idx.reshape(lead + (width,)), prob.reshape(lead + (width,))


def _unpack_rows(idx: np.ndarray, prob: np.ndarray, n_states: int) -> np.ndarray:
    lead = idx.shape[:-1]
    flat_i = idx.reshape(-1, idx.shape[-1])
    flat_p = prob.reshape(-1, prob.shape[-1])
    out = np.zeros((flat_i.shape[0], n_states))
    for r in range(flat_i.shape[0]):
        np.add.at(out[r], flat_i[r], flat_p[r])
    # padding contributes to index 0 with probability 0, which is harmless
    return out.reshape(lead + (n_states,))


# ---------------------------------------------------------------------------
# MDP and game containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mdp:
    """Discounted MDP with bounded rewards.

    ``next_idx``/``next_prob`` have shape (S, A, K).
    """

    n_states: int
    n_actions: int
    reward: np.ndarray
    next_idx: np.ndarray
    next_prob: np.ndarray
    gamma: float
    initial_state: int
    r_max: float

    def __post_init__(self):
        object.__setattr__(self, "reward", np.asarray(self.reward, dtype=np.float64))
        object.__setattr__(self, "next_idx", np.ascontiguousarray(self.next_idx, dtype=np.int32))
        object.__setattr__(self, "next_prob", np.ascontiguousarray(self.next_prob, dtype=np.float64))

    @staticmethod
    def from_dense(transition, reward, gamma, initial_state=0, r_max=None) -> "Mdp":
        transition = np.asarray(transition, dtype=np.float64)
        reward = np.asarray(reward, dtype=np.float64)
        s, a = reward.shape
        idx, prob = _pack_rows(transition)
        if r_max is None:
            r_max = float(np.abs(reward).max(initial=0.0))
        return Mdp(s, a, reward, idx, prob, float(gamma), int(initial_state), float(r_max))

    def dense_transition(self) -> np.ndarray:
        return _unpack_rows(self.next_idx, self.next_prob, self.n_states)

    def validate(self) -> list[str]:
        return _validate_common(
            self.next_prob, self.next_idx, self.reward, self.gamma,
            self.initial_state, self.n_states, self.r_max,
            label=lambda flat: f"(s={flat // self.n_actions}, a={flat % self.n_actions})",
        )


@dataclass(frozen=True)
class ZeroSumGame:
    """Two-player zero-sum stochastic game; ``reward`` is Player 1's.

    ``next_idx``/``next_prob`` have shape (S, A1, A2, K).
    """

    n_states: int
    n_actions1: int
    n_actions2: int
    reward: np.ndarray
    next_idx: np.ndarray
    next_prob: np.ndarray
    gamma: float
    initial_state: int
    r_max: float
    state_names: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "reward", np.asarray(self.reward, dtype=np.float64))
        object.__setattr__(self, "next_idx", np.ascontiguousarray(self.next_idx, dtype=np.int32))
        object.__setattr__(self, "next_prob", np.ascontiguousarray(self.next_prob, dtype=np.float64))

    @staticmethod
    def from_dense(transition, reward, gamma, initial_state=0, r_max=None,
                   state_names=()) -> "ZeroSumGame":
        transition = np.asarray(transition, dtype=np.float64)
        reward = np.asarray(reward, dtype=np.float64)
        s, a1, a2 = reward.shape
        idx, prob = _pack_rows(transition)
        if r_max is None:
            r_max = float(np.abs(reward).max(initial=0.0))
        return ZeroSumGame(s, a1, a2, reward, idx, prob, float(gamma),
                           int(initial_state), float(r_max), tuple(state_names))

    def dense_transition(self) -> np.ndarray:
        if self.n_states ** 2 * self.n_actions1 * self.n_actions2 > 50_000_000:
            raise MemoryError("dense transition tensor would be too large")
        return _unpack_rows(self.next_idx, self.next_prob, self.n_states)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.array([self.n_states, self.n_actions1, self.n_actions2,
                           self.initial_state]).tobytes())
        h.update(np.float64(self.gamma).tobytes())
        h.update(self.reward.tobytes())
        h.update(self.next_idx.tobytes())
        h.update(self.next_prob.tobytes())
        return h.hexdigest()

    def validate(self) -> list[str]:
        def label(flat):
            a2 = flat % self.n_actions2
            a1 = (flat // self.n_actions2) % self.n_actions1
            s = flat // (self.n_actions1 * self.n_actions2)
            return f"(s={s}, a1={a1}, a2={a2})"

        return _validate_common(
            self.next_prob, self.next_idx, self.reward, self.gamma,
            self.initial_state, self.n_states, self.r_max, label=label,
        )


def _validate_common(next_prob, next_idx, reward, gamma, initial_state,
                     n_states, r_max, label) -> list[str]:
    violations = []
    sums = next_prob.reshape(-1, next_prob.shape[-1]).sum(axis=1)
    for flat in np.flatnonzero(np.abs(sums - 1.0) > PROB_ATOL):
        violations.append(f"transition row {label(flat)} sums to {sums[flat]!r}")
    if next_prob.min(initial=0.0) < 0.0:
        violations.append("negative transition probability")
    if next_idx.min(initial=0) < 0 or next_idx.max(initial=0) >= n_states:
        violations.append("transition successor index out of range")
    flat_r = np.abs(reward).ravel()
    for flat in np.flatnonzero(flat_r > r_max + PROB_ATOL):
        violations.append(f"reward at {label(flat)} exceeds r_max={r_max}")
    if not 0.0 <= gamma < 1.0:
        violations.append(f"discount {gamma} outside [0, 1)")
    if not 0 <= initial_state < n_states:
        violations.append(f"initial state {initial_state} out of range")
    return violations


def validate_game(game: ZeroSumGame) -> list[str]:
    """All invariant violations of a game; the game is valid iff empty."""
    return game.validate()


def validate_mdp(mdp: Mdp) -> list[str]:
    return mdp.validate()


# ---------------------------------------------------------------------------
# induced MDP
# ---------------------------------------------------------------------------


def induced_mdp(game: ZeroSumGame, pi2: StationaryPolicy) -> Mdp:
    """The MDP Player 1 faces when Player 2 plays the fixed policy ``pi2``.

    transition(s, a1) = sum_a2 pi2(s, a2) P(s, a1, a2, .) and likewise for the
    reward; discount and initial state carry over.
    """
    if pi2.n_states != game.n_states or pi2.n_actions != game.n_actions2:
        raise DimensionMismatchError(
            f"policy shape {pi2.table.shape} does not match game "
            f"({game.n_states} states, {game.n_actions2} P2 actions)")
    S, A1, A2 = game.n_states, game.n_actions1, game.n_actions2
    reward = np.einsum("sab,sb->sa", game.reward, pi2.table)
    rows_idx = []
    rows_prob = []
    width = 1
    for s in range(S):
        for a1 in range(A1):
            acc: dict[int, float] = {}
            for a2 in range(A2):
                w = pi2.table[s, a2]
                if w == 0.0:
                    continue
                for k in range(game.next_idx.shape[3]):
                    p = game.next_prob[s, a1, a2, k]
                    if p == 0.0:
                        continue
                    q = int(game.next_idx[s, a1, a2, k])
                    acc[q] = acc.get(q, 0.0) + w * p
            items = sorted(acc.items())
            rows_idx.append([q for q, _ in items])
            rows_prob.append([p for _, p in items])
            width = max(width, len(items))
    idx = np.zeros((S, A1, width), dtype=np.int32)
    prob = np.zeros((S, A1, width), dtype=np.float64)
    for flat, (qi, pi) in enumerate(zip(rows_idx, rows_prob)):
        s, a1 = divmod(flat, A1)
        idx[s, a1, : len(qi)] = qi
        prob[s, a1, : len(pi)] = pi
    return Mdp(S, A1, reward, idx, prob, game.gamma, game.initial_state, game.r_max)


def mdp_as_game(mdp: Mdp) -> ZeroSumGame:
    """Embed an MDP as a zero-sum game in which Player 2 has one action."""
    return ZeroSumGame(
        n_states=mdp.n_states,
        n_actions1=mdp.n_actions,
        n_actions2=1,
        reward=mdp.reward[:, :, None],
        next_idx=mdp.next_idx[:, :, None, :],
        next_prob=mdp.next_prob[:, :, None, :],
        gamma=mdp.gamma,
        initial_state=mdp.initial_state,
        r_max=mdp.r_max,
    )


# ---------------------------------------------------------------------------
# JSON serialization (small games only)
# ---------------------------------------------------------------------------


def game_to_json(game: ZeroSumGame) -> str:
    """Serialize to the documented JSON layout; round-trips bit-exactly."""
    doc = {
        "states": game.n_states,
        "actions1": game.n_actions1,
        "actions2": game.n_actions2,
        "gamma": game.gamma,
        "initial_state": game.initial_state,
        "r_max": game.r_max,
        "transitions": game.dense_transition().tolist(),
        "rewards": game.reward.tolist(),
    }
    return json.dumps(doc)


def game_from_json(text: str) -> ZeroSumGame:
    doc = json.loads(text)
    return game_from_dict(doc)


def game_from_dict(doc: dict) -> ZeroSumGame:
    for key in ("states", "actions1", "actions2", "gamma", "initial_state",
                "transitions", "rewards"):
        if key not in doc:
            raise KeyError(f"game document missing field '{key}'")
    game = ZeroSumGame.from_dense(
        np.asarray(doc["transitions"], dtype=np.float64),
        np.asarray(doc["rewards"], dtype=np.float64),
        float(doc["gamma"]),
        int(doc["initial_state"]),
        r_max=float(doc["r_max"]) if "r_max" in doc else None,
    )
    if game.reward.shape != (doc["states"], doc["actions1"], doc["actions2"]):
        raise ValueError("field 'rewards' has inconsistent shape")
    return game

"""Compiled episode engine for large simulation batches.

Implements the same per-step timeline as harness.run_episode, with the belief
factored as (known part u, uncertain part c): the full state index is
u * n_c + c.  Unfactored games use n_u = 1, where the engine and the Python
harness consume identical draw tables and produce identical trajectories
(asserted by tests).  The grid world uses u = defender column (deterministic,
so always known) and c = attacker cell; sensors there read only c.

Arrival at an ``end`` cell collects a terminal reward and ends the episode.
When the end event is public (grid capture), the predicted belief is
conditioned on the episode continuing by zeroing end cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .equilibrium import DeltaMap, EquilibriumSolution, SupportSet
from .sensing import SensorBank

METHOD_WEIGHTED = 0      # Algorithm-1 greedy under a cost budget
METHOD_NONWEIGHTED = 1   # greedy on H(S | obs), k sensors
METHOD_RANDOM = 2        # k distinct sensors from the select stream
METHOD_NONE = 3
METHOD_ALL = 4
METHOD_PERFECT = 5


@dataclass(frozen=True)
class EnginePack:
    """Game, solution, and sensor arrays in engine layout."""

    n_u: int
    n_c: int
    u_next: np.ndarray            # (n_u, A1) int32
    c_next: np.ndarray            # (n_c, A1, A2, K) int32
    c_prob: np.ndarray            # (n_c, A1, A2, K)
    reward: np.ndarray            # (n_u*n_c, A1, A2)
    terminal_reward: np.ndarray   # (n_u, n_c)
    end_mask: np.ndarray          # (n_c,) bool
    condition_continue: bool
    pi2: np.ndarray               # (n_u*n_c, A2)
    G: np.ndarray                 # (n_u*n_c, A1): Q* against pi2*
    D: np.ndarray                 # (nD, A1) support distributions
    Z: np.ndarray                 # (n_u*n_c, A1, A2): r + gamma E[V*]
    delta: np.ndarray             # (n_u*n_c,)
    lik: np.ndarray               # (N, n_c, max_sym)
    n_sym: np.ndarray             # (N,) int64
    costs: np.ndarray             # (N,)
    gamma: float


def build_pack(game, bank: SensorBank, solution: EquilibriumSolution,
               support: SupportSet, delta: DeltaMap) -> EnginePack:
    """Engine arrays for an unfactored game (n_u = 1)."""
    n_sensors = bank.n_sensors
    max_sym = max((s.n_symbols for s in bank.sensors), default=1)
    lik = np.zeros((max(n_sensors, 1), game.n_states, max_sym))
    for i, s in enumerate(bank.sensors):
        lik[i, :, : s.n_symbols] = s.likelihood
    return EnginePack(
        n_u=1,
        n_c=game.n_states,
        u_next=np.zeros((1, game.n_actions1), dtype=np.int32),
        c_next=game.next_idx,
        c_prob=game.next_prob,
        reward=game.reward,
        terminal_reward=np.zeros((1, game.n_states)),
        end_mask=np.zeros(game.n_states, dtype=np.bool_),
        condition_continue=False,
        pi2=solution.policy2.table,
        G=solution.q_against_policy2(),
        D=support.as_matrix(),
        Z=solution.q_tensor,
        delta=np.asarray(getattr(delta, "weights", delta), dtype=np.float64),
        lik=lik,
        n_sym=np.array([s.n_symbols for s in bank.sensors] or [1], dtype=np.int64),
        costs=np.asarray(bank.costs if n_sensors else np.zeros(1)),
        gamma=game.gamma,
    )


@njit(cache=True)
def _sample(probs, u):
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


@njit(cache=True)
def _h(p):
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


@njit(cache=True)
def _objective(b, lik, n_sym, mask, n_chosen, delta, ubase, weighted):
    """Weighted binary-entropy objective (or plain conditional entropy)."""
    n_c = b.shape[0]
    N = mask.shape[0]
    if n_chosen == 0:
        total = 0.0
        if weighted:
            for c in range(n_c):
                if b[c] > 0.0 and delta[ubase + c] != 0.0:
                    total += delta[ubase + c] * _h(b[c])
        else:
            for c in range(n_c):
                if b[c] > 0.0:
                    total += -b[c] * math.log2(b[c])
        return total
    sel = np.empty(n_chosen, np.int64)
    j = 0
    for i in range(N):
        if mask[i]:
            sel[j] = i
            j += 1
    n_joint = 1
    for i in range(n_chosen):
        n_joint *= n_sym[sel[i]]
    w = np.empty(n_c)
    total = 0.0
    for joint in range(n_joint):
        rem = joint
        p = 0.0
        for c in range(n_c):
            w[c] = b[c]
        rem = joint
        for i in range(n_chosen):
            sym = rem % n_sym[sel[i]]
            rem //= n_sym[sel[i]]
            for c in range(n_c):
                if w[c] != 0.0:
                    w[c] *= lik[sel[i], c, sym]
        for c in range(n_c):
            p += w[c]
        if p <= 0.0:
            continue
        if weighted:
            for c in range(n_c):
                if w[c] != 0.0 and delta[ubase + c] != 0.0:
                    total += delta[ubase + c] * p * _h(w[c] / p)
        else:
            for c in range(n_c):
                if w[c] > 0.0:
                    q = w[c] / p
                    total += -p * q * math.log2(q)
    return total


@njit(cache=True)
def _select_sensors(method, b, lik, n_sym, costs, budget, k, delta, ubase, sel_u, mask):
    """Fill mask with the selected sensor set; returns the number chosen."""
    N = mask.shape[0]
    for i in range(N):
        mask[i] = False
    if method == METHOD_NONE or method == METHOD_PERFECT:
        return 0
    if method == METHOD_ALL:
        for i in range(N):
            mask[i] = True
        return N
    if method == METHOD_RANDOM:
        u = sel_u.copy()
        for _ in range(k):
            best = 0
            for i in range(1, N):
                if u[i] < u[best]:
                    best = i
            mask[best] = True
            u[best] = np.inf
        return k
    weighted = method == METHOD_WEIGHTED
    n_chosen = 0
    spent = 0.0
    while True:
        best_j = -1
        best_obj = np.inf
        for j in range(N):
            if mask[j]:
                continue
            if weighted and spent + costs[j] > budget + 1e-12:
                continue
            mask[j] = True
            obj = _objective(b, lik, n_sym, mask, n_chosen + 1, delta, ubase, weighted)
            mask[j] = False
            if obj < best_obj:
                best_obj = obj
                best_j = j
        if best_j < 0:
            break
        mask[best_j] = True
        n_chosen += 1
        spent += costs[best_j]
        if not weighted and n_chosen == k:
            break
    return n_chosen


@njit(cache=True)
def _episode(
    u_next, c_next, c_prob, reward, terminal_reward, end_mask, condition_continue,
    pi2, G, D, Z, delta, lik, n_sym, costs, gamma,
    method, budget, k, deceptive, horizon, u0, c0, b_init,
    obs_u, p1_u, p2_u, env_u, sel_u,
    states, a1s, a2s, d_idxs, rewards, sel_out, beliefs_post,
):
    n_c = b_init.shape[0]
    N = n_sym.shape[0]
    A1 = G.shape[1]
    A2 = pi2.shape[1]
    K = c_next.shape[3]
    rec_T = beliefs_post.shape[0]
    b = b_init.copy()
    post = np.empty(n_c)
    mask = np.zeros(N, np.bool_)
    g = np.empty(A1)
    u = u0
    c = c0
    ret = 0.0
    disc = 1.0
    n_surprise = 0
    t = 0
    while t < horizon:
        ubase = u * n_c
        strue = ubase + c
        _select_sensors(method, b, lik, n_sym, costs, budget, k, delta, ubase, sel_u[t], mask)
        # observe and update
        if method == METHOD_PERFECT:
            for i in range(n_c):
                post[i] = 0.0
            post[c] = 1.0
        else:
            for i in range(n_c):
                post[i] = b[i]
            any_sel = False
            for i in range(N):
                if mask[i]:
                    any_sel = True
                    sym = _sample(lik[i, c, : n_sym[i]], obs_u[t, i])
                    for cc in range(n_c):
                        if post[cc] != 0.0:
                            post[cc] *= lik[i, cc, sym]
            if any_sel:
                denom = 0.0
                for cc in range(n_c):
                    denom += post[cc]
                if denom < 1e-12:
                    n_surprise += 1
                    for cc in range(n_c):
                        post[cc] = b[cc]
                else:
                    for cc in range(n_c):
                        post[cc] /= denom
        # Player 1 acts on the support set
        for a in range(A1):
            acc = 0.0
            for cc in range(n_c):
                if post[cc] != 0.0:
                    acc += post[cc] * G[ubase + cc, a]
            g[a] = acc
        best_d = 0
        best_score = -np.inf
        for d in range(D.shape[0]):
            sc = 0.0
            for a in range(A1):
                sc += D[d, a] * g[a]
            if sc > best_score:
                best_score = sc
                best_d = d
        a1 = _sample(D[best_d], p1_u[t])
        # Player 2 acts
        if deceptive:
            a2 = 0
            best_g = np.inf
            for cand in range(A2):
                acc = 0.0
                for a in range(A1):
                    if D[best_d, a] != 0.0:
                        acc += D[best_d, a] * Z[strue, a, cand]
                if acc < best_g:
                    best_g = acc
                    a2 = cand
        else:
            a2 = _sample(pi2[strue], p2_u[t])
        r = reward[strue, a1, a2]
        ret += disc * r
        states[t] = strue
        a1s[t] = a1
        a2s[t] = a2
        d_idxs[t] = best_d
        rewards[t] = r
        for i in range(N):
            sel_out[t, i] = 1 if mask[i] else 0
        if t < rec_T:
            for cc in range(n_c):
                beliefs_post[t, cc] = post[cc]
        # environment transition
        u_new = u_next[u, a1]
        kk = _sample(c_prob[c, a1, a2], env_u[t])
        c_new = c_next[c, a1, a2, kk]
        t += 1
        if end_mask[c_new]:
            ret += disc * gamma * terminal_reward[u_new, c_new]
            return ret, t, n_surprise
        # prediction update under the assumed equilibrium policy
        for cc in range(n_c):
            b[cc] = 0.0
        for cc in range(n_c):
            w = post[cc]
            if w == 0.0:
                continue
            srow = ubase + cc
            for a2p in range(A2):
                w2 = w * pi2[srow, a2p]
                if w2 == 0.0:
                    continue
                for kk2 in range(K):
                    p = c_prob[cc, a1, a2p, kk2]
                    if p != 0.0:
                        b[c_next[cc, a1, a2p, kk2]] += w2 * p
        total = 0.0
        for cc in range(n_c):
            total += b[cc]
        if total > 0.0:
            for cc in range(n_c):
                b[cc] /= total
        else:
            for cc in range(n_c):
                b[cc] = post[cc]
        if condition_continue:
            total = 0.0
            for cc in range(n_c):
                if end_mask[cc]:
                    b[cc] = 0.0
                else:
                    total += b[cc]
            if total > 0.0:
                for cc in range(n_c):
                    b[cc] /= total
        u = u_new
        c = c_new
        disc *= gamma
    return ret, t, n_surprise


@njit(cache=True, parallel=True)
def _batch(
    u_next, c_next, c_prob, reward, terminal_reward, end_mask, condition_continue,
    pi2, G, D, Z, delta, lik, n_sym, costs, gamma,
    method, budget, k, deceptive, horizon, u0s, c0s, b_init,
    obs_u, p1_u, p2_u, env_u, sel_u,
    rets, n_steps, n_surp, states, a1s, a2s, d_idxs, rewards, sel_out, beliefs_post,
):
    n_eps = rets.shape[0]
    for e in prange(n_eps):
        r, t, ns = _episode(
            u_next, c_next, c_prob, reward, terminal_reward, end_mask, condition_continue,
            pi2, G, D, Z, delta, lik, n_sym, costs, gamma,
            method, budget, k, deceptive, horizon, u0s[e], c0s[e], b_init,
            obs_u[e], p1_u[e], p2_u[e], env_u[e], sel_u[e],
            states[e], a1s[e], a2s[e], d_idxs[e], rewards[e], sel_out[e], beliefs_post[e],
        )
        rets[e] = r
        n_steps[e] = t
        n_surp[e] = ns


@dataclass
class BatchResult:
    returns: np.ndarray
    n_steps: np.ndarray
    n_surprises: np.ndarray
    states: np.ndarray        # (n_eps, T) int32, -1 padded
    a1: np.ndarray
    a2: np.ndarray
    d_index: np.ndarray
    rewards: np.ndarray
    selected: np.ndarray      # (n_eps, T, N) int8
    beliefs_post: np.ndarray  # (n_eps, rec_T, n_c) or empty


def run_batch(pack: EnginePack, *, method: int, p2_deceptive: bool, horizon: int,
              n_episodes: int, base_seed: int, first_run_index: int = 0,
              budget: float = 0.0, k: int = 0, initial_u: int = 0,
              initial_c: int = 0, initial_belief_c: np.ndarray | None = None,
              record_belief_steps: int = 0,
              tables: tuple | None = None) -> BatchResult:
    """Simulate ``n_episodes`` episodes with per-episode labeled substreams."""
    from .rng import draw_tables

    N = pack.n_sym.shape[0]
    T = horizon
    if tables is None:
        obs_u = np.empty((n_episodes, T, max(N, 1)))
        p1_u = np.empty((n_episodes, T))
        p2_u = np.empty((n_episodes, T))
        env_u = np.empty((n_episodes, T))
        sel_u = np.empty((n_episodes, T, max(N, 1)))
        for e in range(n_episodes):
            tab = draw_tables(base_seed, first_run_index + e, T, N)
            obs_u[e] = tab.obs
            p1_u[e] = tab.p1
            p2_u[e] = tab.p2
            env_u[e] = tab.env
            sel_u[e] = tab.select
    else:
        obs_u, p1_u, p2_u, env_u, sel_u = tables
    if initial_belief_c is None:
        initial_belief_c = np.zeros(pack.n_c)
        initial_belief_c[initial_c] = 1.0
    u0s = np.full(n_episodes, initial_u, dtype=np.int64)
    c0s = np.full(n_episodes, initial_c, dtype=np.int64)
    rets = np.empty(n_episodes)
    n_steps = np.zeros(n_episodes, dtype=np.int64)
    n_surp = np.zeros(n_episodes, dtype=np.int64)
    states = np.full((n_episodes, T), -1, dtype=np.int32)
    a1s = np.full((n_episodes, T), -1, dtype=np.int16)
    a2s = np.full((n_episodes, T), -1, dtype=np.int16)
    d_idxs = np.full((n_episodes, T), -1, dtype=np.int16)
    rewards = np.zeros((n_episodes, T))
    sel_out = np.zeros((n_episodes, T, N), dtype=np.int8)
    rec_T = min(record_belief_steps, T)
    beliefs = np.zeros((n_episodes, rec_T, pack.n_c))
    _batch(
        pack.u_next, pack.c_next, pack.c_prob, pack.reward, pack.terminal_reward,
        pack.end_mask, pack.condition_continue, pack.pi2, pack.G, pack.D, pack.Z,
        pack.delta, pack.lik, pack.n_sym, pack.costs, pack.gamma,
        method, float(budget), int(k), p2_deceptive, T, u0s, c0s,
        np.asarray(initial_belief_c, dtype=np.float64),
        obs_u, p1_u, p2_u, env_u, sel_u,
        rets, n_steps, n_surp, states, a1s, a2s, d_idxs, rewards, sel_out, beliefs,
    )
    return BatchResult(rets, n_steps, n_surp, states, a1s, a2s, d_idxs,
                       rewards, sel_out, beliefs)

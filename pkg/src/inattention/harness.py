"""Episode simulation, Monte-Carlo return estimation, and exact evaluation.

run_episode executes the per-step timeline: Player 1 selects sensors and
updates its belief from the sampled observations, both players act, the
environment transitions, and Player 1 runs the prediction update under the
assumed Player 2 policy.  exact_eval computes the same process's expected
discounted return exactly by expanding every stochastic branch up to a
horizon, carrying Player 1's belief (a deterministic function of the
observable history) and the true-state distribution through each branch.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .agents import (P2_DECEPTIVE, P2_EQUILIBRIUM, PERFECT_INFORMATION,
                     Player1Config, p1_act_game, p1_act_mdp, p1_predict,
                     p2_act, p2_deviation_scores, sample_index)
from .core import ActionDistribution, Belief, ZeroSumGame, dirac_belief
from .rng import DrawTables, draw_tables
from .sensing import (ZERO_LIKELIHOOD_EPS, JointObservation, SensorBank,
                      bayes_obs_update, joint_obs_prob, likelihood_vector,
                      weighted_entropy_objective)


@dataclass(frozen=True)
class SurpriseEvent:
    """An observation the agent's model gave essentially zero probability."""

    step: int
    observation: JointObservation
    probability: float


@dataclass(frozen=True)
class StepRecord:
    t: int
    state: int
    sensors: tuple[int, ...]
    observation: JointObservation
    belief_pre: np.ndarray
    belief_post: np.ndarray
    d1: np.ndarray
    a1: int
    a2: int
    reward: float


@dataclass(frozen=True)
class EpisodeRecord:
    steps: tuple[StepRecord, ...]
    discounted_return: float
    surprises: tuple[SurpriseEvent, ...]
    base_seed: int
    run_index: int
    horizon: int
    gamma: float

    def check(self) -> None:
        total = sum(self.gamma ** st.t * st.reward for st in self.steps)
        assert math.isclose(total, self.discounted_return, rel_tol=0, abs_tol=1e-9)


@dataclass(frozen=True)
class ReturnEstimate:
    """Monte-Carlo mean with a normal-approximation 95% half-width."""

    mean: float
    sd: float
    n: int
    half_width: float

    @staticmethod
    def from_samples(samples) -> "ReturnEstimate":
        x = np.asarray(samples, dtype=np.float64)
        sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
        return ReturnEstimate(float(x.mean()), sd, int(x.size),
                              1.96 * sd / math.sqrt(x.size))


def horizon_for(tol: float, r_max: float, gamma: float) -> int:
    """Smallest T with r_max * gamma^T / (1 - gamma) <= tol."""
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if r_max * 1.0 / (1.0 - gamma) <= tol:
        return 0
    if gamma == 0.0:
        return 1
    t = max(int(math.ceil(math.log(tol * (1.0 - gamma) / r_max) / math.log(gamma))), 0)
    while r_max * gamma ** t / (1.0 - gamma) > tol:
        t += 1
    while t > 0 and r_max * gamma ** (t - 1) / (1.0 - gamma) <= tol:
        t -= 1
    return t


def _select(cfg: Player1Config, belief: Belief, bank: SensorBank, u_row) -> list[int]:
    if cfg.selector == PERFECT_INFORMATION:
        return []
    return list(cfg.selector(belief, bank, cfg.delta, u_row))


def _act(cfg: Player1Config, belief: Belief):
    """(d1, sampled-from) pair per the configured action rule."""
    if cfg.action_rule == "qmdp":
        a = p1_act_mdp(belief, cfg.q_against_pi2)
        return ActionDistribution.dirac(a, cfg.q_against_pi2.shape[1])
    return p1_act_game(belief, cfg.solution, cfg.support, cfg.q_against_pi2)


def run_episode(game: ZeroSumGame, bank: SensorBank, p1: Player1Config,
                p2_mode: str, base_seed: int, horizon: int,
                initial_belief: Belief, run_index: int = 0,
                initial_state: int | None = None,
                initial_state_dist: Belief | None = None,
                stop_states: frozenset = frozenset(),
                tables: DrawTables | None = None) -> EpisodeRecord:
    """Simulate one episode of the sensing/acting timeline.

    The true initial state is ``initial_state`` (default: the game's), or a
    draw from ``initial_state_dist``.  ``stop_states`` are absorbing zero-
    reward states where simulation ends.  All randomness comes from the
    episode's labeled substreams, so identical arguments reproduce the
    episode bit for bit.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if tables is None:
        tables = draw_tables(base_seed, run_index, horizon, bank.n_sensors)
    if initial_state_dist is not None:
        s = sample_index(initial_state_dist.probs, tables.init)
    else:
        s = game.initial_state if initial_state is None else initial_state
    belief = initial_belief
    steps: list[StepRecord] = []
    surprises: list[SurpriseEvent] = []
    ret = 0.0
    for t in range(horizon):
        if s in stop_states:
            break
        chosen = _select(p1, belief, bank, tables.select[t])
        if p1.selector == PERFECT_INFORMATION:
            obs = JointObservation((), ())
            post = dirac_belief(s, game.n_states)
        else:
            symbols = tuple(
                sample_index(bank.sensors[i].likelihood[s], tables.obs[t, i])
                for i in chosen)
            obs = JointObservation(tuple(chosen), symbols)
            pred = joint_obs_prob(belief, bank, chosen, symbols) if chosen else 1.0
            if chosen and pred < ZERO_LIKELIHOOD_EPS:
                surprises.append(SurpriseEvent(t, obs, pred))
                post = belief
            else:
                post = bayes_obs_update(belief, bank, chosen, obs)
        d1 = _act(p1, post)
        a1 = sample_index(d1.probs, tables.p1[t])
        a2 = p2_act(p2_mode, s, d1, p1.solution, game, u=tables.p2[t])
        r = float(game.reward[s, a1, a2])
        ret += game.gamma ** t * r
        steps.append(StepRecord(t, s, tuple(chosen), obs, belief.probs.copy(),
                                post.probs.copy(), d1.probs.copy(), a1, a2, r))
        k = sample_index(game.next_prob[s, a1, a2], tables.env[t])
        s = int(game.next_idx[s, a1, a2, k])
        belief = p1_predict(post, a1, p1.assumed_pi2, game)
    return EpisodeRecord(tuple(steps), ret, tuple(surprises),
                         base_seed, run_index, horizon, game.gamma)


def estimate_return(n: int, base_seed: int, game: ZeroSumGame, bank: SensorBank,
                    p1: Player1Config, p2_mode: str, horizon: int,
                    initial_belief: Belief, **kwargs) -> ReturnEstimate:
    """Mean discounted return over n independently seeded episodes."""
    if n < 2:
        raise ValueError("need at least 2 runs")
    returns = [
        run_episode(game, bank, p1, p2_mode, base_seed, horizon, initial_belief,
                    run_index=j, **kwargs).discounted_return
        for j in range(n)
    ]
    return ReturnEstimate.from_samples(returns)


# ---------------------------------------------------------------------------
# exact finite-horizon evaluation
# ---------------------------------------------------------------------------


@dataclass
class ExactEvaluation:
    """Exact truncated expectation with a geometric tail bound."""

    lower: float
    upper: float
    expectation: float
    tail: float
    horizon: int
    nodes: int
    max_selected_objective: float

    def __iter__(self):
        return iter((self.lower, self.upper))


class NodeCapError(RuntimeError):
    pass


def exact_eval(game: ZeroSumGame, bank: SensorBank, p1: Player1Config,
               p2_mode: str, horizon: int, initial_belief: Belief,
               initial_state_dist: Belief | None = None,
               stop_states: frozenset = frozenset(),
               node_cap: int = 10_000_000) -> ExactEvaluation:
    """Exact expected discounted return of the timeline, truncated at T.

    Returns the interval [E_T - tail, E_T + tail] with
    tail = r_max gamma^T / (1 - gamma).  Branches whose true-state
    distribution lies entirely in ``stop_states`` (absorbing, zero reward)
    contribute exactly and stop expanding.  Requires a deterministic
    selector.  Also reports the largest weighted-entropy objective of any
    selected sensor set along any reachable branch (the empirical per-step
    bound of value-loss guarantees).
    """
    if initial_state_dist is None:
        initial_state_dist = dirac_belief(game.initial_state, game.n_states)
    gamma = game.gamma
    K = game.next_idx.shape[3]
    state = {"nodes": 0, "expect": 0.0, "alpha": 0.0}
    stop_mask = np.zeros(game.n_states, dtype=bool)
    for z in stop_states:
        stop_mask[z] = True

    def p2_rows(truth_support, d1) -> dict[int, np.ndarray]:
        rows = {}
        for s in truth_support:
            if p2_mode == P2_EQUILIBRIUM:
                rows[s] = p1.solution.policy2.table[s]
            else:
                g = p2_deviation_scores(int(s), d1, p1.solution, game)
                best = 0
                for a2 in range(1, g.shape[0]):
                    if g[a2] < g[best]:
                        best = a2
                row = np.zeros(game.n_actions2)
                row[best] = 1.0
                rows[s] = row
        return rows

    def expand(t: int, weight: float, belief: Belief, truth: np.ndarray) -> None:
        if t >= horizon:
            return
        support = np.flatnonzero(truth)
        if stop_mask[support].all():
            return
        state["nodes"] += 1
        if state["nodes"] > node_cap:
            raise NodeCapError(f"exact_eval exceeded {node_cap} nodes")
        if p1.selector == PERFECT_INFORMATION:
            branches = [
                (float(truth[s]), dirac_belief(int(s), game.n_states), _dirac_vec(int(s), game.n_states))
                for s in support
            ]
        else:
            chosen = _select(p1, belief, bank, None)
            state["alpha"] = max(state["alpha"],
                                 weighted_entropy_objective(belief, bank, chosen, p1.delta))
            branches = []
            if not chosen:
                branches.append((1.0, belief, truth))
            else:
                sizes = [bank.sensors[i].n_symbols for i in chosen]
                for symbols in itertools.product(*(range(n) for n in sizes)):
                    lik = likelihood_vector(bank, chosen, symbols)
                    p_act = float(truth @ lik)
                    if p_act <= 0.0:
                        continue
                    p_bel = float(belief.probs @ lik)
                    if p_bel < ZERO_LIKELIHOOD_EPS:
                        post = belief
                    else:
                        post = Belief(belief.probs * lik / p_bel)
                    branches.append((p_act, post, truth * lik / p_act))
        for p_act, post, f_post in branches:
            d1 = _act(p1, post)
            f_support = np.flatnonzero(f_post)
            rows = p2_rows(f_support, d1)
            for a1 in np.flatnonzero(d1.probs):
                a1 = int(a1)
                w_branch = weight * p_act * float(d1.probs[a1])
                er = 0.0
                f_next = np.zeros(game.n_states)
                for s in f_support:
                    s = int(s)
                    fs = float(f_post[s])
                    row = rows[s]
                    for a2 in np.flatnonzero(row):
                        a2 = int(a2)
                        w2 = fs * float(row[a2])
                        er += w2 * float(game.reward[s, a1, a2])
                        for k in range(K):
                            p = game.next_prob[s, a1, a2, k]
                            if p != 0.0:
                                f_next[game.next_idx[s, a1, a2, k]] += w2 * p
                state["expect"] += w_branch * gamma ** t * er
                b_next = p1_predict(post, a1, p1.assumed_pi2, game)
                expand(t + 1, w_branch, b_next, f_next)

    expand(0, 1.0, initial_belief, initial_state_dist.probs.copy())
    tail = game.r_max * gamma ** horizon / (1.0 - gamma)
    e = state["expect"]
    return ExactEvaluation(e - tail, e + tail, e, tail, horizon,
                           state["nodes"], state["alpha"])


def _dirac_vec(s: int, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[s] = 1.0
    return v


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

EPISODE_CSV_COLUMNS = ["t", "state", "sensors", "observation", "a1", "a2", "reward"]


def write_episode_csv(path, records: list[EpisodeRecord]) -> None:
    """One row per step (beliefs omitted), then one summary row per episode."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode"] + EPISODE_CSV_COLUMNS)
        for e, rec in enumerate(records):
            for st in rec.steps:
                w.writerow([e, st.t, st.state,
                            ";".join(map(str, st.sensors)),
                            ";".join(map(str, st.observation.symbols)),
                            st.a1, st.a2, f"{st.reward:.12g}"])
        w.writerow([])
        w.writerow(["episode", "return", "steps", "surprises", "run_index"])
        for e, rec in enumerate(records):
            w.writerow([e, f"{rec.discounted_return:.12g}", len(rec.steps),
                        len(rec.surprises), rec.run_index])

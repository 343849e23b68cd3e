"""Experiment drivers: the grid-world study and the random-game suite.

Both drive the compiled engine.  Random-game episodes share draw tables
across the method/mode combinations (common random numbers), so method
comparisons are paired; seeds derive from one base seed per the substream
scheme.  Grid runs record per-step sensor choices and column beliefs for the
frequency and confusion summaries.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import dirac_belief
from .engine import (METHOD_ALL, METHOD_NONE, METHOD_NONWEIGHTED,
                     METHOD_PERFECT, METHOD_RANDOM, METHOD_WEIGHTED,
                     BatchResult, EnginePack, build_pack, run_batch)
from .equilibrium import (EquilibriumSolution, StationaryPolicy, delta_map,
                          game_solve, support_set)
from .harness import ReturnEstimate, horizon_for
from .rng import draw_tables
from .scenarios import (GridConfig, RandomGameConfig, Scenario,
                        build_random_game, grid_scenario)

GRID_RECORD_STEPS = 25
GRID_HORIZON = 250


# ---------------------------------------------------------------------------
# solution cache
# ---------------------------------------------------------------------------


def cache_dir() -> Path:
    env = os.environ.get("INATTENTION_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "inattention"


def solve_cached(game, tol: float, key: str) -> EquilibriumSolution:
    """Solve a game, memoizing on disk keyed by content fingerprint and tol."""
    fp = game.fingerprint()
    path = cache_dir() / f"{key}-{fp[:16]}-tol{tol:g}.npz"
    if path.exists():
        data = np.load(path, allow_pickle=False)
        if str(data["fingerprint"]) == fp:
            return EquilibriumSolution(
                values=data["values"],
                policy1=StationaryPolicy(data["policy1"]),
                policy2=StationaryPolicy(data["policy2"]),
                q_tensor=data["q_tensor"],
                residual=float(data["residual"]),
                residual_history=data["residual_history"],
                tol=float(data["tol"]),
                game_fingerprint=fp,
            )
    solution = game_solve(game, tol)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, values=solution.values, policy1=solution.policy1.table,
             policy2=solution.policy2.table, q_tensor=solution.q_tensor,
             residual=solution.residual, residual_history=solution.residual_history,
             tol=solution.tol, fingerprint=fp)
    return solution


def solved_bundle(scenario: Scenario, tol: float = 1e-6, cached: bool = True):
    """(solution, support set, per-distribution Delta map) for a scenario."""
    if cached:
        solution = solve_cached(scenario.game, tol, scenario.name)
    else:
        solution = game_solve(scenario.game, tol)
    support = support_set(solution.policy1, solution.game_fingerprint)
    delta = delta_map(solution, "per-distribution", support)
    return solution, support, delta


# ---------------------------------------------------------------------------
# engine pack assembly
# ---------------------------------------------------------------------------


def scenario_pack(scenario: Scenario, solution, support, delta) -> EnginePack:
    if scenario.grid is None:
        return build_pack(scenario.game, scenario.bank, solution, support, delta)
    layout = scenario.grid
    n_u, n_c = layout.n_u, layout.n_c
    n_full = n_u * n_c
    A1 = scenario.game.n_actions1
    c_next = np.ascontiguousarray(
        np.repeat(layout.att_next[:, None, :, :], A1, axis=1))
    c_prob = np.ascontiguousarray(
        np.repeat(layout.att_prob[:, None, :, :], A1, axis=1))
    max_sym = max(s.n_symbols for s in scenario.bank.sensors)
    lik = np.zeros((scenario.bank.n_sensors, n_c, max_sym))
    for i, s in enumerate(scenario.bank.sensors):
        lik[i, :, : s.n_symbols] = s.likelihood[:n_c]  # independent of defender column
    return EnginePack(
        n_u=n_u, n_c=n_c, u_next=layout.u_next, c_next=c_next, c_prob=c_prob,
        reward=np.zeros((n_full, A1, scenario.game.n_actions2)),
        terminal_reward=layout.terminal_reward,
        end_mask=layout.capture_cells,
        condition_continue=True,
        pi2=np.ascontiguousarray(solution.policy2.table[:n_full]),
        G=np.ascontiguousarray(solution.q_against_policy2()[:n_full]),
        D=support.as_matrix(),
        Z=np.ascontiguousarray(solution.q_tensor[:n_full]),
        delta=np.ascontiguousarray(delta.weights[:n_full]),
        lik=lik,
        n_sym=np.array([s.n_symbols for s in scenario.bank.sensors], dtype=np.int64),
        costs=scenario.bank.costs,
        gamma=scenario.game.gamma,
    )


def stacked_tables(base_seed: int, n_episodes: int, horizon: int, n_sensors: int,
                   first_run_index: int = 0):
    N = max(n_sensors, 1)
    obs = np.empty((n_episodes, horizon, N))
    p1 = np.empty((n_episodes, horizon))
    p2 = np.empty((n_episodes, horizon))
    env = np.empty((n_episodes, horizon))
    sel = np.empty((n_episodes, horizon, N))
    for e in range(n_episodes):
        tab = draw_tables(base_seed, first_run_index + e, horizon, n_sensors)
        obs[e], p1[e], p2[e], env[e], sel[e] = tab.obs, tab.p1, tab.p2, tab.env, tab.select
    return obs, p1, p2, env, sel


# ---------------------------------------------------------------------------
# grid experiment
# ---------------------------------------------------------------------------


@dataclass
class GridExperimentResult:
    estimate: ReturnEstimate
    returns: np.ndarray
    n_steps: np.ndarray
    n_surprises: np.ndarray
    sensor_freq: np.ndarray      # (rec_T, n_sensors) frequency among running episodes
    sensor_counts: np.ndarray    # (rec_T,) running-episode counts
    confusion: np.ndarray        # (rec_T, width, width): [t, true_col, believed_col]
    confusion_counts: np.ndarray  # (rec_T, width)


def run_grid_experiment(cfg: GridConfig | None, n_runs: int, p2_mode: str,
                        base_seed: int, solution=None, tol: float = 1e-6,
                        cached: bool = True) -> GridExperimentResult:
    scenario = grid_scenario(cfg)
    if solution is None:
        solution, support, delta = solved_bundle(scenario, tol, cached)
    else:
        support = support_set(solution.policy1, solution.game_fingerprint)
        delta = delta_map(solution, "per-distribution", support)
    pack = scenario_pack(scenario, solution, support, delta)
    layout = scenario.grid
    res = run_batch(
        pack, method=METHOD_WEIGHTED, p2_deceptive=(p2_mode == "deceptive"),
        horizon=GRID_HORIZON, n_episodes=n_runs, base_seed=base_seed,
        budget=scenario.bank.budget, initial_u=layout.u0, initial_c=layout.c0,
        record_belief_steps=GRID_RECORD_STEPS,
    )
    W = layout.width
    rec_T = GRID_RECORD_STEPS
    freq = np.zeros((rec_T, scenario.bank.n_sensors))
    counts = np.zeros(rec_T)
    conf = np.zeros((rec_T, W, W))
    conf_counts = np.zeros((rec_T, W))
    col_of_cell = np.arange(layout.n_c) % W
    for e in range(n_runs):
        T_e = int(res.n_steps[e])
        for t in range(min(T_e, rec_T)):
            counts[t] += 1
            freq[t] += res.selected[e, t]
            true_col = int(res.states[e, t]) % layout.n_c % W
            marg = np.bincount(col_of_cell, weights=res.beliefs_post[e, t], minlength=W)
            conf[t, true_col] += marg
            conf_counts[t, true_col] += 1
    nz = counts > 0
    freq[nz] /= counts[nz, None]
    for t in range(rec_T):
        for col in range(W):
            if conf_counts[t, col] > 0:
                conf[t, col] /= conf_counts[t, col]
    return GridExperimentResult(
        estimate=ReturnEstimate.from_samples(res.returns),
        returns=res.returns, n_steps=res.n_steps, n_surprises=res.n_surprises,
        sensor_freq=freq, sensor_counts=counts,
        confusion=conf, confusion_counts=conf_counts,
    )


def write_grid_csvs(out_dir, result: GridExperimentResult, label: str) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    p = out_dir / f"grid_{label}_returns.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "return", "steps", "surprises"])
        for e in range(result.returns.shape[0]):
            w.writerow([e, f"{result.returns[e]:.12g}", int(result.n_steps[e]),
                        int(result.n_surprises[e])])
    paths.append(p)
    p = out_dir / f"grid_{label}_sensor_freq.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x_sensor_freq", "y_sensor_freq", "episodes"])
        for t in range(result.sensor_freq.shape[0]):
            if result.sensor_counts[t] == 0:
                continue
            w.writerow([t, f"{result.sensor_freq[t, 0]:.12g}",
                        f"{result.sensor_freq[t, 1]:.12g}", int(result.sensor_counts[t])])
    paths.append(p)
    p = out_dir / f"grid_{label}_confusion.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "true_coord", "believed_coord", "mean_belief"])
        T, W, _ = result.confusion.shape
        for t in range(T):
            for true_col in range(W):
                if result.confusion_counts[t, true_col] == 0:
                    continue
                for believed in range(W):
                    w.writerow([t, true_col + 1, believed + 1,
                                f"{result.confusion[t, true_col, believed]:.12g}"])
    paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# random-game suite
# ---------------------------------------------------------------------------

METHOD_SPECS = (
    ("perfect", METHOD_PERFECT, 0),
    ("weighted_k2", METHOD_WEIGHTED, 2),
    ("nonweighted_k2", METHOD_NONWEIGHTED, 2),
    ("random_k2", METHOD_RANDOM, 2),
    ("weighted_k1", METHOD_WEIGHTED, 1),
    ("nonweighted_k1", METHOD_NONWEIGHTED, 1),
    ("random_k1", METHOD_RANDOM, 1),
    ("none", METHOD_NONE, 0),
)
P2_MODES = ("equilibrium", "deceptive")


@dataclass
class RandomExperimentResult:
    rows: list  # (method, p2_mode, ReturnEstimate)
    means: dict  # (method, p2_mode) -> mean

    def mean(self, method: str, p2_mode: str) -> float:
        return self.means[(method, p2_mode)]


def run_random_experiment(n_games: int, n_runs_per_game: int, base_seed: int,
                          tol: float = 1e-6, horizon_tol: float = 1e-3,
                          game_overrides: dict | None = None) -> RandomExperimentResult:
    """Mean Player-1 return per sensor-selection method and Player-2 mode.

    Perfect state information is run once (the two Player-2 modes coincide
    there), giving 15 table rows for the default method set.
    """
    overrides = game_overrides or {}
    samples: dict[tuple[str, str], list[np.ndarray]] = {}
    gamma = overrides.get("gamma", RandomGameConfig.gamma)
    horizon = horizon_for(horizon_tol, 1.0, gamma)
    for g in range(n_games):
        words = np.random.SeedSequence(entropy=base_seed, spawn_key=(g,)).generate_state(2, np.uint64)
        cfg = RandomGameConfig(seed=int(words[0]), **overrides)
        game, bank = build_random_game(cfg)
        solution = game_solve(game, tol)
        support = support_set(solution.policy1, solution.game_fingerprint)
        delta = delta_map(solution, "per-distribution", support)
        pack = build_pack(game, bank, solution, support, delta)
        tables = stacked_tables(int(words[1]), n_runs_per_game, horizon, bank.n_sensors)
        belief0 = dirac_belief(game.initial_state, game.n_states).probs
        for label, method, k in METHOD_SPECS:
            modes = ("equilibrium",) if method == METHOD_PERFECT else P2_MODES
            for mode in modes:
                res = run_batch(
                    pack, method=method, p2_deceptive=(mode == "deceptive"),
                    horizon=horizon, n_episodes=n_runs_per_game, base_seed=0,
                    budget=float(k), k=k, initial_c=game.initial_state,
                    initial_belief_c=belief0, tables=tables,
                )
                samples.setdefault((label, mode), []).append(res.returns)
    rows = []
    means = {}
    for label, method, k in METHOD_SPECS:
        modes = ("equilibrium",) if method == METHOD_PERFECT else P2_MODES
        for mode in modes:
            all_returns = np.concatenate(samples[(label, mode)])
            est = ReturnEstimate.from_samples(all_returns)
            rows.append((label, mode, est))
            means[(label, mode)] = est.mean
    return RandomExperimentResult(rows=rows, means=means)


def write_random_csv(out_dir, result: RandomExperimentResult) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    p = out_dir / "random_returns.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "p2_mode", "mean_return", "sd", "ci_half_width", "runs"])
        for label, mode, est in result.rows:
            w.writerow([label, mode, f"{est.mean:.12g}", f"{est.sd:.12g}",
                        f"{est.half_width:.12g}", est.n])
    return p

"""Deterministic counter-based randomness for episodes.

Every episode owns independent Philox substreams keyed by (base_seed,
run_index, label); each consumer (observation sampling, each player's action
sampling, the environment transition, the random-baseline selector) reads its
own fixed-shape table of uniforms, so adding or removing a consumer never
perturbs the draws any other consumer sees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STREAM_LABELS = ("obs", "p1", "p2", "env", "select", "init")


def substream(base_seed: int, run_index: int, label: str) -> np.random.Generator:
    """Independent generator for one labeled consumer of one episode."""
    key = STREAM_LABELS.index(label)
    seq = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(run_index), key))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class DrawTables:
    """Pre-drawn uniforms for one episode, indexed positionally by step.

    obs[t, i] samples sensor i's symbol at step t (consumed only if selected);
    p1[t] samples Player 1's action from its chosen distribution; p2[t]
    samples Player 2's equilibrium action; env[t] samples the state
    transition; select[t] drives the random-baseline sensor choice; init
    samples the initial state when an initial distribution is given.
    """

    obs: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    env: np.ndarray
    select: np.ndarray
    init: float


def draw_tables(base_seed: int, run_index: int, horizon: int, n_sensors: int) -> DrawTables:
    return DrawTables(
        obs=substream(base_seed, run_index, "obs").random((horizon, max(n_sensors, 1))),
        p1=substream(base_seed, run_index, "p1").random(horizon),
        p2=substream(base_seed, run_index, "p2").random(horizon),
        env=substream(base_seed, run_index, "env").random(horizon),
        select=substream(base_seed, run_index, "select").random((horizon, max(n_sensors, 1))),
        init=float(substream(base_seed, run_index, "init").random()),
    )

"""Builders for the concrete study instances.

* two-state confirmation-bias MDP (absorbing states, one uninformative sensor)
* five-state deception game (Start branches left/right, absorbing leaves,
  two partition sensors)
* line-defense grid world: a defender patrols the top row while an attacker
  crosses an 11x11 grid; capture pays minus the column distance
* random game generator for the quantitative suite

State indexing in the grid: s = defender_column * 121 + attacker_cell with
attacker_cell = row * 11 + column (row 10 is the defense line); the absorbing
post-capture state is the last index.  All indices are 0-based internally;
the coordinates quoted in configs are 1-based grid cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Belief, Mdp, ZeroSumGame, dirac_belief, mdp_as_game
from .sensing import Sensor, SensorBank


@dataclass(frozen=True)
class Scenario:
    """A ready-to-simulate bundle: game, sensors, and Player 1's start belief."""

    name: str
    game: ZeroSumGame
    bank: SensorBank
    initial_belief: Belief
    grid: "GridLayout | None" = None
    default_horizon_tol: float = 1e-3


# ---------------------------------------------------------------------------
# two-state confirmation-bias MDP
# ---------------------------------------------------------------------------


def build_fig1_mdp(gamma: float) -> tuple[Mdp, SensorBank]:
    """Two absorbing states; matching the state pays 1, the null sensor sees
    nothing.  With a wrong Dirac prior the agent is stuck at value 0."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    transition = np.zeros((2, 2, 2))
    transition[:, :, :] = 0.0
    for s in range(2):
        transition[s, :, s] = 1.0
    reward = np.array([[1.0, 0.0], [0.0, 1.0]])
    mdp = Mdp.from_dense(transition, reward, gamma, initial_state=1, r_max=1.0)
    null = Sensor(alphabet=("null",), likelihood=np.ones((2, 1)), cost=0.0)
    return mdp, SensorBank((null,), budget=0.0)


def fig1_scenario(gamma: float) -> Scenario:
    """The mismatch demo: the true start is state 1, the agent believes 0."""
    mdp, bank = build_fig1_mdp(gamma)
    return Scenario("fig1", mdp_as_game(mdp), bank, dirac_belief(0, 2))


# ---------------------------------------------------------------------------
# five-state deception game
# ---------------------------------------------------------------------------

FIG3_STATES = ("Start", "LU", "LD", "RU", "RD")
START, LU, LD, RU, RD = range(5)


def build_fig3_game(epsilon: float, gamma: float) -> tuple[ZeroSumGame, SensorBank]:
    """Start splits to the left pair under Player 2's l and the right pair
    under r (0.5/0.5); leaves are absorbing.  Player 1 earns 1 on the left
    leaves and 1-epsilon on the right ones by matching the leaf."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0, 1)")
    A1 = A2 = 2  # Player 1: l/r (ignored at Start); Player 2: l/r (ignored at leaves)
    transition = np.zeros((5, A1, A2, 5))
    transition[START, :, 0, LU] = 0.5
    transition[START, :, 0, LD] = 0.5
    transition[START, :, 1, RU] = 0.5
    transition[START, :, 1, RD] = 0.5
    for leaf in (LU, LD, RU, RD):
        transition[leaf, :, :, leaf] = 1.0
    reward = np.zeros((5, A1, A2))
    reward[LU, 0, :] = 1.0
    reward[LD, 1, :] = 1.0
    reward[RU, 1, :] = 1.0 - epsilon
    reward[RD, 0, :] = 1.0 - epsilon
    game = ZeroSumGame.from_dense(transition, reward, gamma, initial_state=START,
                                  r_max=1.0, state_names=FIG3_STATES)
    up = Sensor(alphabet=("up:T", "up:F"),
                likelihood=np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 1.0],
                                     [1.0, 0.0], [0.0, 1.0]]), cost=1.0)
    left = Sensor(alphabet=("left:T", "left:F"),
                  likelihood=np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0],
                                       [0.0, 1.0], [0.0, 1.0]]), cost=1.0)
    return game, SensorBank((up, left), budget=1.0)


def fig3_scenario(epsilon: float = 0.5, gamma: float = 0.9) -> Scenario:
    game, bank = build_fig3_game(epsilon, gamma)
    return Scenario("fig3", game, bank, dirac_belief(START, 5))


# ---------------------------------------------------------------------------
# line-defense grid world
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridConfig:
    """Line-defense parameters; the paper instance is the default.

    The defender relocates deterministically one column per step (left, stay,
    right); the attacker moves to any of its 8 neighbors or stays, reaching
    its target with probability ``move_success`` and staying otherwise.  The
    attacker's coordinate sensors report the true value with ``sensor_true``
    and split ``sensor_adjacent`` over the in-range adjacent values.  The
    defender's own position is known (a free sensor), so with budget 1 the
    greedy selector activates exactly one paid coordinate sensor per step.
    """

    width: int = 11
    height: int = 11
    p1_start_col: int = 6          # 1-based column on the defense line
    p2_start_col: int = 7          # 1-based column at maximal depth
    move_success: float = 0.9
    sensor_true: float = 0.7
    sensor_adjacent: float = 0.3
    paid_cost: float = 1.0
    budget: float = 1.0
    gamma: float = 0.99

    def __post_init__(self):
        if not (0.0 <= self.move_success <= 1.0 and 0.0 <= self.sensor_true <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(self.sensor_true + self.sensor_adjacent - 1.0) > 1e-12:
            raise ValueError("sensor_true + sensor_adjacent must be 1")
        if not (1 <= self.p1_start_col <= self.width and 1 <= self.p2_start_col <= self.width):
            raise ValueError("start columns out of range")


@dataclass(frozen=True)
class GridLayout:
    """Index bookkeeping for the factored grid state space."""

    width: int
    height: int
    n_u: int                  # defender columns
    n_c: int                  # attacker cells
    terminal: int             # absorbing post-capture state (full index)
    u0: int
    c0: int
    capture_cells: np.ndarray  # (n_c,) bool, attacker on the defense line
    u_next: np.ndarray         # (n_u, 3) int32 deterministic defender move
    att_next: np.ndarray       # (n_c, 9, 2) int32
    att_prob: np.ndarray       # (n_c, 9, 2)
    terminal_reward: np.ndarray  # (n_u, n_c)

    def cell(self, col: int, row: int) -> int:
        return row * self.width + col

    def state(self, u: int, c: int) -> int:
        return u * self.n_c + c

    def cell_col(self, c: int) -> int:
        return c % self.width

    def cell_row(self, c: int) -> int:
        return c // self.width


ATTACKER_MOVES = tuple((dc, dr) for dr in (-1, 0, 1) for dc in (-1, 0, 1))


def _coordinate_sensor(cfg: GridConfig, layout: GridLayout, axis: str) -> Sensor:
    """Noisy reading of the attacker's column (axis "x") or row (axis "y").

    Rows exist for every full state; the post-capture state reads uniformly
    (it is never sensed during play).
    """
    n = cfg.width if axis == "x" else cfg.height
    n_states = layout.n_u * layout.n_c + 1
    lik = np.zeros((n_states, n))
    for u in range(layout.n_u):
        for c in range(layout.n_c):
            coord = layout.cell_col(c) if axis == "x" else layout.cell_row(c)
            row = np.zeros(n)
            row[coord] = cfg.sensor_true
            adj = [a for a in (coord - 1, coord + 1) if 0 <= a < n]
            for a in adj:
                row[a] += cfg.sensor_adjacent / len(adj)
            lik[layout.state(u, c)] = row
    lik[layout.terminal] = 1.0 / n
    return Sensor(alphabet=tuple(f"{axis}={v + 1}" for v in range(n)),
                  likelihood=lik, cost=cfg.paid_cost)


def grid_layout(cfg: GridConfig) -> GridLayout:
    W, H = cfg.width, cfg.height
    n_c = W * H
    n_u = W
    u_next = np.zeros((n_u, 3), dtype=np.int32)
    for u in range(n_u):
        for a1, dm in enumerate((-1, 0, 1)):
            u_next[u, a1] = min(max(u + dm, 0), n_u - 1)
    att_next = np.zeros((n_c, 9, 2), dtype=np.int32)
    att_prob = np.zeros((n_c, 9, 2))
    for c in range(n_c):
        row, col = divmod(c, W)
        for a2, (dc, dr) in enumerate(ATTACKER_MOVES):
            tc = min(max(col + dc, 0), W - 1)
            tr = min(max(row + dr, 0), H - 1)
            target = tr * W + tc
            if target == c:
                att_next[c, a2, 0] = c
                att_prob[c, a2, 0] = 1.0
            else:
                att_next[c, a2, 0] = target
                att_prob[c, a2, 0] = cfg.move_success
                att_next[c, a2, 1] = c
                att_prob[c, a2, 1] = 1.0 - cfg.move_success
    capture = np.zeros(n_c, dtype=bool)
    capture[(H - 1) * W:] = True
    term_reward = np.zeros((n_u, n_c))
    for u in range(n_u):
        for c in range(n_c):
            if capture[c]:
                term_reward[u, c] = -abs(u - (c % W))
    return GridLayout(
        width=W, height=H, n_u=n_u, n_c=n_c, terminal=n_u * n_c,
        u0=cfg.p1_start_col - 1, c0=cfg.p2_start_col - 1,
        capture_cells=capture, u_next=u_next, att_next=att_next,
        att_prob=att_prob, terminal_reward=term_reward,
    )


def build_line_defense(cfg: GridConfig | None = None) -> tuple[ZeroSumGame, SensorBank]:
    """Full-state line-defense game plus the two paid coordinate sensors."""
    cfg = cfg or GridConfig()
    layout = grid_layout(cfg)
    n_u, n_c = layout.n_u, layout.n_c
    S = n_u * n_c + 1
    A1, A2, K = 3, 9, 2
    next_idx = np.zeros((S, A1, A2, K), dtype=np.int32)
    next_prob = np.zeros((S, A1, A2, K))
    reward = np.zeros((S, A1, A2))
    for u in range(n_u):
        for c in range(n_c):
            s = layout.state(u, c)
            if layout.capture_cells[c]:
                reward[s, :, :] = layout.terminal_reward[u, c]
                next_idx[s, :, :, 0] = layout.terminal
                next_prob[s, :, :, 0] = 1.0
                continue
            for a1 in range(A1):
                uq = layout.u_next[u, a1]
                for a2 in range(A2):
                    for k in range(K):
                        p = layout.att_prob[c, a2, k]
                        if p != 0.0:
                            next_idx[s, a1, a2, k] = layout.state(uq, layout.att_next[c, a2, k])
                            next_prob[s, a1, a2, k] = p
    next_idx[layout.terminal, :, :, 0] = layout.terminal
    next_prob[layout.terminal, :, :, 0] = 1.0
    game = ZeroSumGame(S, A1, A2, reward, next_idx, next_prob, cfg.gamma,
                       layout.state(layout.u0, layout.c0), float(cfg.width - 1))
    bank = SensorBank(
        ( _coordinate_sensor(cfg, layout, "x"), _coordinate_sensor(cfg, layout, "y") ),
        budget=cfg.budget,
    )
    return game, bank


def grid_scenario(cfg: GridConfig | None = None) -> Scenario:
    cfg = cfg or GridConfig()
    game, bank = build_line_defense(cfg)
    layout = grid_layout(cfg)
    return Scenario("grid", game, bank,
                    dirac_belief(game.initial_state, game.n_states), grid=layout)


# ---------------------------------------------------------------------------
# random games
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomGameConfig:
    n_states: int = 10
    n_actions: int = 4
    n_sensors: int = 10
    obs_per_sensor: int = 2
    gamma: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if min(self.n_states, self.n_actions, self.obs_per_sensor) < 1 or self.n_sensors < 0:
            raise ValueError("all counts must be at least 1")


def build_random_game(cfg: RandomGameConfig) -> tuple[ZeroSumGame, SensorBank]:
    """Transitions uniform on the simplex, rewards uniform on [0, 1], sensor
    rows uniform on the observation simplex, uniform initial state."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    n, a = cfg.n_states, cfg.n_actions
    transition = rng.dirichlet(np.ones(n), size=(n, a, a))
    reward = rng.uniform(0.0, 1.0, size=(n, a, a))
    sensors = []
    for i in range(cfg.n_sensors):
        lik = rng.dirichlet(np.ones(cfg.obs_per_sensor), size=n)
        sensors.append(Sensor(
            alphabet=tuple(f"s{i}:{w}" for w in range(cfg.obs_per_sensor)),
            likelihood=lik, cost=1.0))
    initial = int(rng.integers(n))
    game = ZeroSumGame.from_dense(transition, reward, cfg.gamma,
                                  initial_state=initial, r_max=1.0)
    return game, SensorBank(tuple(sensors), budget=float(cfg.n_sensors))


def random_scenario(seed: int = 0, **overrides) -> Scenario:
    cfg = RandomGameConfig(seed=seed, **overrides)
    game, bank = build_random_game(cfg)
    return Scenario("random", game, bank,
                    dirac_belief(game.initial_state, game.n_states))

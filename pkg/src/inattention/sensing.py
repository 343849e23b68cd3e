"""Sensor models, Bayes observation updates, and online sensor selection.

Sensors are conditionally independent given the state and have pairwise
disjoint alphabets, so a joint observation is one symbol per selected sensor
and its likelihood is the product of the per-sensor likelihoods.  The
selection objective weights the per-state binary ambiguity h(P(s | omega)) by
the stakes weight Delta(s); the greedy selector adds one sensor at a time
while the budget allows (or until the objective drops below a threshold).

Logarithms are base 2 throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import PROB_ATOL, Belief

ZERO_LIKELIHOOD_EPS = 1e-12
ENUMERATION_CAP = 1_000_000


class EnumerationCapError(RuntimeError):
    """The joint observation alphabet is too large to enumerate."""


@dataclass(frozen=True)
class Sensor:
    """One information source: alphabet, per-state symbol likelihoods, cost."""

    alphabet: tuple
    likelihood: np.ndarray          # (n_states, len(alphabet))
    cost: float = 0.0

    def __post_init__(self):
        lik = np.asarray(self.likelihood, dtype=np.float64)
        object.__setattr__(self, "likelihood", lik)
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        if lik.ndim != 2 or lik.shape[1] != len(self.alphabet):
            raise ValueError("likelihood must be (n_states, |alphabet|)")
        if lik.min(initial=0.0) < 0.0:
            raise ValueError("negative likelihood")
        bad = np.abs(lik.sum(axis=1) - 1.0) > PROB_ATOL
        if bad.any():
            raise ValueError(f"likelihood rows {np.flatnonzero(bad).tolist()} do not sum to 1")
        if self.cost < 0.0:
            raise ValueError("sensor cost must be nonnegative")

    @property
    def n_states(self) -> int:
        return self.likelihood.shape[0]

    @property
    def n_symbols(self) -> int:
        return len(self.alphabet)


@dataclass(frozen=True)
class SensorBank:
    """All sensors available to Player 1 plus the per-step cost budget."""

    sensors: tuple[Sensor, ...]
    budget: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if self.budget < 0.0:
            raise ValueError("budget must be nonnegative")
        seen: set = set()
        for i, sensor in enumerate(self.sensors):
            overlap = seen.intersection(sensor.alphabet)
            if overlap:
                raise ValueError(f"sensor {i} reuses symbols {sorted(overlap)!r}")
            seen.update(sensor.alphabet)
        if self.sensors:
            n = self.sensors[0].n_states
            if any(s.n_states != n for s in self.sensors):
                raise ValueError("sensors disagree on the number of states")

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    @property
    def n_states(self) -> int:
        return self.sensors[0].n_states if self.sensors else 0

    @property
    def costs(self) -> np.ndarray:
        return np.array([s.cost for s in self.sensors])


@dataclass(frozen=True)
class JointObservation:
    """One symbol (by index) from each selected sensor."""

    indices: tuple[int, ...]
    symbols: tuple[int, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.symbols):
            raise ValueError("one symbol per selected sensor")

    def symbol_values(self, bank: SensorBank) -> tuple:
        return tuple(bank.sensors[i].alphabet[w]
                     for i, w in zip(self.indices, self.symbols))


# ---------------------------------------------------------------------------
# entropies
# ---------------------------------------------------------------------------


def binary_entropy(p: float) -> float:
    """h(p) = -p log2 p - (1-p) log2 (1-p), with h(0) = h(1) = 0."""
    if p < -PROB_ATOL or p > 1.0 + PROB_ATOL:
        raise ValueError(f"p={p} outside [0, 1]")
    p = min(max(p, 0.0), 1.0)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def shannon_entropy(probs: np.ndarray) -> float:
    """Entropy in bits of a (possibly unnormalized-by-rounding) distribution."""
    p = np.asarray(probs, dtype=np.float64)
    p = p[p > 0.0]
    return float(-(p * np.log2(p)).sum()) if p.size else 0.0


# ---------------------------------------------------------------------------
# joint observations
# ---------------------------------------------------------------------------


def likelihood_vector(bank: SensorBank, indices, symbols) -> np.ndarray:
    """Product of per-sensor likelihood columns, one entry per state."""
    out = np.ones(bank.n_states)
    for i, w in zip(indices, symbols):
        out *= bank.sensors[i].likelihood[:, w]
    return out


def _enumerate_joint(belief: np.ndarray, bank: SensorBank, indices):
    """Yield (symbols, p(omega), unnormalized posterior) for positive joints."""
    indices = list(indices)
    sizes = [bank.sensors[i].n_symbols for i in indices]
    if sizes and int(np.prod(sizes)) > ENUMERATION_CAP:
        raise EnumerationCapError(
            f"joint alphabet of size {int(np.prod(sizes))} exceeds cap {ENUMERATION_CAP}")
    for symbols in itertools.product(*(range(n) for n in sizes)):
        weights = belief * likelihood_vector(bank, indices, symbols)
        p = float(weights.sum())
        if p > 0.0:
            yield symbols, p, weights


def joint_obs_dist(belief: Belief, bank: SensorBank, indices) -> list[tuple[JointObservation, float]]:
    """Distribution of the joint observation under the belief.

    Zero-probability joints are omitted; returned probabilities sum to the
    belief's total mass (1 within rounding).
    """
    indices = sorted(indices)
    out = []
    for symbols, p, _ in _enumerate_joint(belief.probs, bank, indices):
        out.append((JointObservation(tuple(indices), symbols), p))
    return out


def joint_obs_prob(belief: Belief, bank: SensorBank, indices, symbols) -> float:
    """Predicted probability of one joint observation."""
    return float(belief.probs @ likelihood_vector(bank, indices, symbols))


def bayes_obs_update(belief: Belief, bank: SensorBank, indices, observation) -> Belief:
    """Posterior after observing one joint observation (Bayes rule).

    If the predicted probability of the observation is below 1e-12 the prior
    is returned unchanged; callers that need the surprise diagnostic check the
    predicted probability themselves (see harness.SurpriseEvent).
    """
    if isinstance(observation, JointObservation):
        indices, symbols = observation.indices, observation.symbols
    else:
        symbols = tuple(observation)
        indices = tuple(indices)
    weights = belief.probs * likelihood_vector(bank, indices, symbols)
    denom = float(weights.sum())
    if denom < ZERO_LIKELIHOOD_EPS:
        return belief
    return Belief(weights / denom)


# ---------------------------------------------------------------------------
# selection objectives
# ---------------------------------------------------------------------------


def weighted_entropy_objective(belief: Belief, bank: SensorBank, indices, delta) -> float:
    """sum_s Delta(s) * H(1_s(S) | joint observation) under the belief."""
    weights = getattr(delta, "weights", delta)
    weights = np.asarray(weights, dtype=np.float64)
    total = 0.0
    for _, p, unnorm in _enumerate_joint(belief.probs, bank, sorted(indices)):
        post = unnorm / p
        for s in np.flatnonzero(post):
            if weights[s] != 0.0:
                total += weights[s] * p * binary_entropy(float(post[s]))
    return total


def nonweighted_entropy_objective(belief: Belief, bank: SensorBank, indices) -> float:
    """Conditional state entropy H(S | joint observation) under the belief."""
    total = 0.0
    for _, p, unnorm in _enumerate_joint(belief.probs, bank, sorted(indices)):
        total += p * shannon_entropy(unnorm / p)
    return total


# ---------------------------------------------------------------------------
# selectors
# ---------------------------------------------------------------------------


def greedy_select(belief: Belief, bank: SensorBank, delta, *, budget: float | None = None,
                  threshold: float | None = None) -> list[int]:
    """Greedy sensor selection on the weighted-entropy objective.

    Budget mode adds, among the sensors that still fit the budget, the one
    whose addition minimizes the objective (ties to the lowest index) until
    none fits.  Threshold mode stops as soon as the current objective is at
    most the threshold, or all sensors are chosen.  Returns the selection in
    the order sensors were added.
    """
    if (budget is None) == (threshold is None):
        raise ValueError("exactly one of budget/threshold must be given")
    chosen: list[int] = []
    spent = 0.0
    costs = bank.costs
    while True:
        if threshold is not None:
            if weighted_entropy_objective(belief, bank, chosen, delta) <= threshold:
                break
            candidates = [j for j in range(bank.n_sensors) if j not in chosen]
        else:
            candidates = [j for j in range(bank.n_sensors)
                          if j not in chosen and spent + costs[j] <= budget + 1e-12]
        if not candidates:
            break
        best_j = -1
        best_obj = np.inf
        for j in candidates:
            obj = weighted_entropy_objective(belief, bank, chosen + [j], delta)
            if obj < best_obj:
                best_obj = obj
                best_j = j
        chosen.append(best_j)
        spent += costs[best_j]
    return chosen


def baseline_select(belief: Belief, bank: SensorBank, k: int, method: str,
                    rng=None) -> list[int]:
    """Reference selection rules: nonweighted-entropy greedy, random, all, none."""
    n = bank.n_sensors
    if method == "none":
        return []
    if method == "all":
        return list(range(n))
    if k > n:
        raise ValueError(f"k={k} exceeds {n} sensors")
    if method == "random":
        if rng is None:
            raise ValueError("random selection needs a generator or seed")
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        u = rng.random(n)
        return sorted(np.argsort(u, kind="stable")[:k].tolist())
    if method == "nonweighted-entropy":
        chosen: list[int] = []
        for _ in range(k):
            best_j, best_obj = -1, np.inf
            for j in range(n):
                if j in chosen:
                    continue
                obj = nonweighted_entropy_objective(belief, bank, chosen + [j])
                if obj < best_obj:
                    best_obj, best_j = obj, j
            chosen.append(best_j)
        return chosen
    raise ValueError(f"unknown baseline method {method!r}")

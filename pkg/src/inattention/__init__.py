"""Rational-inattention sensor selection and deceptive deviations in
two-player zero-sum stochastic games."""

__version__ = "0.1.0"

from .core import (ActionDistribution, Belief, Mdp, StationaryPolicy,
                   ZeroSumGame, dirac_belief, game_from_json, game_to_json,
                   induced_mdp, mdp_as_game, uniform_belief, validate_game)
from .equilibrium import (DeltaMap, EquilibriumSolution, SupportSet, delta_map,
                          game_solve, mdp_solve, policy_evaluation, support_set)
from .harness import (EpisodeRecord, ReturnEstimate, SurpriseEvent, exact_eval,
                      estimate_return, horizon_for, run_episode)
from .minimax import MatrixGame, solve_matrix_game
from .sensing import (JointObservation, Sensor, SensorBank, bayes_obs_update,
                      baseline_select, binary_entropy, greedy_select,
                      joint_obs_dist, weighted_entropy_objective)

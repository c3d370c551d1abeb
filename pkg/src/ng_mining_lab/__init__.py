"""Advanced mining in Bitcoin-NG: optimal early-mining strategies, equilibria and simulation."""

from .game import (
    EquilibriumReport,
    GameSpec,
    best_response,
    foc_residuals,
    is_equilibrium,
    iterate_best_response,
    n_player_reward,
    n_player_utility,
    n_player_win_prob,
    solve_equilibrium,
    two_player_best_response,
    two_player_equilibrium_closed_form,
    utilities,
    verify_equilibrium,
    win_probs,
)
from .lambertw import LambertConvergenceError, LambertDomainError, lambert_w0, lambert_w0_exp
from .params import (
    ChainParams,
    Config,
    ConfigError,
    PoolSet,
    PoolSpec,
    PrevLeader,
    StrategyProfile,
    ValidationReport,
    enforce_difficulty,
    load_config,
    default_config_path,
    parse_config,
    validate_config,
)
from .race import (
    ATTACKER,
    HONEST,
    RaceSpec,
    attacker_win_prob,
    expected_reward,
    optimal_tau_closed_form,
    optimal_tau_numeric,
    pairwise_win_prob,
    reward_curve,
    reward_if_win,
)
from .simulator import SimConfig, SimStats, TpsPenalty, analytic_rewards, measure_tps_penalty, run_round, run_sim

__version__ = "0.1.0"

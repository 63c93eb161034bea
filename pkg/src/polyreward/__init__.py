"""Low-bias reward-estimator synthesis for group-sampled policy updates.

The package builds (K+1)-entry reward lookup tables for group size K,
profiles their gradient-weighted bias and variance exactly, solves the
minimax and variance-optimal synthesis programs, and ships a desk-scale
simulator of the alignment game the tables are designed for.
"""

from .aqp import (
    DominanceReport,
    ParetoPoint,
    default_epsilons,
    dominance_check,
    pareto_trace,
    solve_aqp,
    subgradient_oracle,
)
from .estimators import (
    PolynomialReward,
    TableFormatError,
    falling_factorial_estimate,
    load_table,
    plugin_log_table,
    save_table,
    taylor_bt_table,
    u_statistic_coeffs_exact,
    u_statistic_table,
    u_statistic_target,
)
from .exact import (
    BiasProfile,
    DomainError,
    EstimatorTable,
    Grid,
    bernstein_basis,
    bernstein_matrix,
    bernstein_row,
    bias_profile,
    build_grid,
    expected_value,
    expected_value_exact,
    gradient_weighted_bias,
    second_moment,
)
from .game import (
    GameSpec,
    GameState,
    GameTrace,
    answer_marginal,
    duality_gap,
    exact_equilibrium,
    link_dual,
    load_game_spec,
    optimal_policy,
    run_game_grpo,
    run_mirror_descent,
    save_game_spec,
    sparsemax_project,
    target_best_response,
)
from .minimax import (
    CertificationError,
    MinimaxResult,
    certification_grid,
    remez_epsilon,
    scaling_study,
    solve_minimax,
)
from .qsolve import InfeasibleError, QspError
from .splitting import (
    SplitReport,
    optimal_gamma,
    rao_blackwell_table,
    split_estimator_stats,
    taylor_uniform_failure,
)

__version__ = "0.1.0"

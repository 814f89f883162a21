"""Log-linear learning dynamics with round-based value updates for
identical-interest Markov games, plus the exact solver and experiment
harness used to verify their convergence."""

from .diagnostics import (
    DiagnosticsCollector,
    DiagnosticsRecord,
    bias_band,
    compute_diagnostics,
    deviation_envelope,
    q_band,
    value_band,
)
from .dynamics import (
    DynamicsConfig,
    StagePlayState,
    logit_response,
    stationary_brute_force,
    stationary_closed_form,
    step_stage_game,
    transition_matrix,
)
from .estimation import ModelEstimates, estimated_q_update, observe, run_dynamics_model_free
from .experiment import ExperimentBundle, ExperimentConfig, run_experiment, summarize, write_csv
from .game import (
    ConfigError,
    GameGenConfig,
    MarkovGame,
    decode_joint_action,
    encode_joint_action,
    generate_random_game,
    load_game,
    sample_next_state,
    save_game,
    validate,
)
from .graphs import (
    RaisedGraph,
    SizeCapExceeded,
    StateGraph,
    build_raised_graph,
    build_state_graph,
    check_projection,
    recurrent_classes,
    transient_states,
)
from .rounds import (
    RoundEstimates,
    RoundSchedule,
    RoundSnapshot,
    RunRecord,
    UpdateScheme,
    q_update,
    run_dynamics,
    run_round,
    sampled_frequency,
    v_average,
    v_most_frequent,
)
from .solver import ExactSolution, IterationLimitError, bellman_backup, logit_distribution, solve

__version__ = "0.1.0"

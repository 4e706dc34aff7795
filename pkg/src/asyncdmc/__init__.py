"""Exponent bounds and Monte-Carlo simulation for asynchronous communication
over discrete memoryless channels."""

from .probability import (
    ChannelModel,
    Distribution,
    Kernel,
    conditional_kl,
    empirical_conditional_type,
    kl_divergence,
    mutual_information,
    output_marginal,
    sample,
    simplex_grid,
)
from .capacity import CapacityResult, compute_capacity
from .exponents import (
    ExponentCurve,
    achievable_curve,
    achievable_exponent,
    brute_force_minimax,
    brute_force_training_constant,
    minimax_exponent,
    training_bound_constant,
    training_bound_curve,
)
from .decoders import (
    Codebook,
    JointDecoder,
    JointDecoderConfig,
    RandomGuessDecoder,
    TrainingDecoder,
    TrainingDecoderConfig,
    build_joint_codebook,
    build_training_codebook,
    default_threshold,
    verify_condition_iii,
)
from .simulate import (
    BudgetExceededError,
    DelayGrowthRow,
    ExperimentConfig,
    ExperimentReport,
    TrialRecord,
    delay_growth_experiment,
    generate_output_stream,
    iter_output_stream,
    run_experiment,
    run_trial,
)
from .rng import CounterRng

__all__ = [
    "BudgetExceededError",
    "CapacityResult",
    "ChannelModel",
    "Codebook",
    "CounterRng",
    "DelayGrowthRow",
    "Distribution",
    "ExperimentConfig",
    "ExperimentReport",
    "ExponentCurve",
    "JointDecoder",
    "JointDecoderConfig",
    "Kernel",
    "RandomGuessDecoder",
    "TrainingDecoder",
    "TrainingDecoderConfig",
    "TrialRecord",
    "achievable_curve",
    "achievable_exponent",
    "brute_force_minimax",
    "brute_force_training_constant",
    "build_joint_codebook",
    "build_training_codebook",
    "compute_capacity",
    "conditional_kl",
    "default_threshold",
    "delay_growth_experiment",
    "empirical_conditional_type",
    "generate_output_stream",
    "iter_output_stream",
    "kl_divergence",
    "minimax_exponent",
    "mutual_information",
    "output_marginal",
    "run_experiment",
    "run_trial",
    "sample",
    "simplex_grid",
    "training_bound_constant",
    "training_bound_curve",
    "verify_condition_iii",
]

"""Consensus labels for crowdsourced binary image classification.

Fits a Bayesian item response model (abilities, point and camera
difficulties, pseudo-guessing, discrimination, learning over daily
occasions) to gold-standard classifications with a built-in
Metropolis-within-Gibbs sampler, clusters participants by ability, and
aggregates votes by plain, group-restricted and ability-weighted majority.
"""

from .estimator import AbilityConsensusEstimator
from .model import ModelConfig, ModelParameters, log_likelihood, log_posterior, log_prior, response_probability
from .posterior import ability_weights, cluster_participants, hdi, learning_curve, summarize
from .records import (
    ClassificationRecord,
    GoldStandard,
    ResponseMatrix,
    build_response_matrix,
    derive_occasions,
    parse_classifications,
    split_gold_standard,
)
from .sampler import PosteriorDraws, SamplerConfig, ess, rhat, run_chain, run_chains
from .simulate import SimConfig, enumerate_vote_accuracy, generate, grid_posterior_1d
from .vote import aggregate, group_restricted_vote, majority_vote, weighted_majority_vote
from .metrics import confusion, measures, pairwise_wilcoxon, wilcoxon_rank_sum

__version__ = "0.1.0"

__all__ = [
    "AbilityConsensusEstimator",
    "ClassificationRecord",
    "GoldStandard",
    "ModelConfig",
    "ModelParameters",
    "PosteriorDraws",
    "ResponseMatrix",
    "SamplerConfig",
    "SimConfig",
    "ability_weights",
    "aggregate",
    "build_response_matrix",
    "cluster_participants",
    "confusion",
    "derive_occasions",
    "enumerate_vote_accuracy",
    "ess",
    "generate",
    "grid_posterior_1d",
    "group_restricted_vote",
    "hdi",
    "learning_curve",
    "log_likelihood",
    "log_posterior",
    "log_prior",
    "majority_vote",
    "measures",
    "pairwise_wilcoxon",
    "parse_classifications",
    "response_probability",
    "rhat",
    "run_chain",
    "run_chains",
    "split_gold_standard",
    "summarize",
    "weighted_majority_vote",
    "wilcoxon_rank_sum",
]

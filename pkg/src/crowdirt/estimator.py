"""Scikit-learn style front end: fit the ability model, predict consensus labels."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .model import ModelConfig
from .posterior import ability_weights, cluster_participants, summarize
from .records import GoldStandard, build_response_matrix, derive_occasions
from .sampler import SamplerConfig, run_chains
from .vote import aggregate


class AbilityConsensusEstimator(BaseEstimator):
    """Estimates participant abilities from gold-standard items and aggregates votes.

    ``fit`` consumes classification records plus a gold standard, runs the
    MCMC fit and derives per-participant weights and ability groups;
    ``predict`` aggregates the records it is given into one consensus label
    per point using the configured strategy.
    """

    def __init__(
        self,
        strategy: str = "weighted",
        allowed_groups: tuple = ("expert", "experienced"),
        include_learning: bool = True,
        anchor_mode: str = "hierarchical_zero_mean",
        n_chains: int = 4,
        warmup_iters: int = 2000,
        sampling_iters: int = 2000,
        thin: int = 1,
        seed: int = 0,
        target_accept: float = 0.44,
        adapt_window: int = 50,
        init_jitter_sd: float = 0.1,
        parallel: bool = False,
    ):
        self.strategy = strategy
        self.allowed_groups = allowed_groups
        self.include_learning = include_learning
        self.anchor_mode = anchor_mode
        self.n_chains = n_chains
        self.warmup_iters = warmup_iters
        self.sampling_iters = sampling_iters
        self.thin = thin
        self.seed = seed
        self.target_accept = target_accept
        self.adapt_window = adapt_window
        self.init_jitter_sd = init_jitter_sd
        self.parallel = parallel

    def fit(self, X, y):
        """X: iterable of ClassificationRecord; y: GoldStandard or truth mapping."""
        records = list(X)
        if not records:
            raise ValueError("no records")
        gold = y if isinstance(y, GoldStandard) else GoldStandard(dict(y))
        records = derive_occasions(records)
        rm = build_response_matrix(records, gold)
        model_config = ModelConfig(include_learning=self.include_learning, anchor_mode=self.anchor_mode)
        sampler_config = SamplerConfig(
            n_chains=self.n_chains,
            warmup_iters=self.warmup_iters,
            sampling_iters=self.sampling_iters,
            thin=self.thin,
            seed=self.seed,
            target_accept=self.target_accept,
            adapt_window=self.adapt_window,
            init_jitter_sd=self.init_jitter_sd,
            parallel=self.parallel,
        )
        self.response_matrix_ = rm
        self.draws_ = run_chains(model_config, rm, sampler_config)
        self.summaries_ = summarize(self.draws_)
        by_name = {s.name: s for s in self.summaries_}
        self.theta_mean_ = {
            pid: by_name[f"theta[{pid}]"].posterior_mean for pid in rm.participants
        }
        self.weights_ = ability_weights(self.theta_mean_)
        self.groups_ = cluster_participants(self.theta_mean_)
        return self

    def _check_fitted(self):
        if not hasattr(self, "draws_"):
            raise NotFittedError("call fit before predict")

    def predict(self, X):
        """Aggregate records into consensus labels; returns a list of ConsensusLabel."""
        self._check_fitted()
        records = list(X)
        if self.strategy == "majority":
            labels, _ = aggregate(records, "majority")
        elif self.strategy == "group_majority":
            labels, _ = aggregate(
                records,
                "group_majority",
                groups=self.groups_.groups,
                allowed_groups=self.allowed_groups,
            )
        elif self.strategy == "weighted":
            labels, _ = aggregate(records, "weighted", weights=self.weights_.weights)
        else:
            raise ValueError(f"unknown strategy: {self.strategy}")
        return labels

    def fit_predict(self, X, y, eval_records=None):
        self.fit(X, y)
        return self.predict(eval_records if eval_records is not None else X)

    def participant_weights(self) -> dict[str, float]:
        self._check_fitted()
        return dict(self.weights_.weights)

    def participant_groups(self) -> dict[str, str]:
        self._check_fitted()
        return dict(self.groups_.groups)

    def max_rhat(self) -> float:
        self._check_fitted()
        values = [s.rhat for s in self.summaries_ if np.isfinite(s.rhat)]
        return max(values) if values else float("nan")

"""Adaptive random-walk Metropolis-within-Gibbs sampling and convergence diagnostics.

All parameters are updated component-wise on the unconstrained scale with
Gaussian proposals whose scales adapt toward a target acceptance rate
during warmup (Robbins-Monro) and are frozen afterwards.  For the response
model, components whose likelihood footprints are disjoint (all abilities,
all point difficulties, ...) are updated in a single vectorized pass; this
is still a component-wise kernel, just evaluated in parallel.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import model as _model
from .model import (
    ModelConfig,
    ModelDims,
    ParamLayout,
    beta15_logpdf,
    constrain_draws,
    half_cauchy_logpdf,
    logistic,
    logit,
    norm_logpdf,
)
from .records import ResponseMatrix

ADAPT_C = 1.0  # Robbins-Monro step numerator
RIDGE_REPEATS = 3  # extra-move passes per sweep


class SamplerError(RuntimeError):
    pass


class DiagnosticsError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 4
    warmup_iters: int = 2000
    sampling_iters: int = 2000
    thin: int = 1
    seed: int = 0
    target_accept: float = 0.44
    adapt_window: int = 50
    init_jitter_sd: float = 0.1
    parallel: bool = False

    def __post_init__(self):
        if min(self.n_chains, self.warmup_iters, self.sampling_iters, self.thin, self.adapt_window) < 1:
            raise ValueError("all sampler counts must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must be in (0, 1)")


@dataclass
class ChainDraws:
    draws: np.ndarray  # (kept iterations, dims), unconstrained
    accept_rates: np.ndarray  # per component, post-warmup
    chain_seed: object
    proposal_scales: np.ndarray
    scale_history: list = field(default_factory=list)


class PosteriorDraws:
    """Multi-chain draw store with a constrained-space view."""

    def __init__(self, chains, names, constrain=None, constrained_names=None):
        if not chains:
            raise SamplerError("need at least one chain")
        shape = chains[0].draws.shape
        if any(c.draws.shape != shape for c in chains):
            raise SamplerError("chains have inhomogeneous shapes")
        self.chains = list(chains)
        self.names = list(names)
        self._constrain = constrain
        self.constrained_names = list(constrained_names) if constrained_names is not None else self.names
        self._constrained_cache = None

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    @property
    def n_draws_per_chain(self) -> int:
        return self.chains[0].draws.shape[0]

    def constrained_chains(self) -> list[np.ndarray]:
        if self._constrained_cache is None:
            if self._constrain is None:
                self._constrained_cache = [c.draws for c in self.chains]
            else:
                self._constrained_cache = [self._constrain(c.draws) for c in self.chains]
        return self._constrained_cache

    def parameter(self, name: str) -> list[np.ndarray]:
        """Per-chain constrained draws of one named parameter."""
        try:
            col = self.constrained_names.index(name)
        except ValueError:
            raise KeyError(name) from None
        return [c[:, col] for c in self.constrained_chains()]

    def pooled(self, name: str) -> np.ndarray:
        return np.concatenate(self.parameter(name))


def _adapt_step(iteration: int, adapt_window: int) -> float:
    return ADAPT_C / math.ceil(iteration / adapt_window)


def run_chain(log_posterior, dims, config: SamplerConfig, chain_seed, initial=None, track_scales=False) -> ChainDraws:
    """Component-wise adaptive random-walk Metropolis over a generic target."""
    rng = np.random.default_rng(chain_seed)
    if initial is None:
        initial = np.zeros(dims)
    x = np.array(initial, dtype=float)
    cur = log_posterior(x)
    attempts = 0
    while not np.isfinite(cur):
        attempts += 1
        if attempts > 100:
            raise SamplerError("bad_init: log posterior not finite after 100 re-jitter attempts")
        x = np.asarray(initial, dtype=float) + config.init_jitter_sd * rng.standard_normal(dims)
        cur = log_posterior(x)

    log_scales = np.zeros(dims)
    accept_counts = np.zeros(dims)
    kept = []
    scale_history = []
    total = config.warmup_iters + config.sampling_iters
    for it in range(1, total + 1):
        warm = it <= config.warmup_iters
        step = _adapt_step(it, config.adapt_window) if warm else 0.0
        for j in range(dims):
            old = x[j]
            x[j] = old + math.exp(log_scales[j]) * rng.standard_normal()
            prop_lp = log_posterior(x)
            accepted = math.log(rng.random()) < prop_lp - cur
            if accepted:
                cur = prop_lp
            else:
                x[j] = old
            if warm:
                log_scales[j] += step * ((1.0 if accepted else 0.0) - config.target_accept)
            elif accepted:
                accept_counts[j] += 1
        if not warm:
            s = it - config.warmup_iters
            if s % config.thin == 0:
                kept.append(x.copy())
            if track_scales:
                scale_history.append(np.exp(log_scales.copy()))
    return ChainDraws(
        draws=np.asarray(kept),
        accept_rates=accept_counts / config.sampling_iters,
        chain_seed=chain_seed,
        proposal_scales=np.exp(log_scales),
        scale_history=scale_history,
    )


# ---------------------------------------------------------------------------
# Response-model kernel
# ---------------------------------------------------------------------------


class _IrtKernel:
    def __init__(self, rm: ResponseMatrix, model_config: ModelConfig):
        obs = rm.observations
        self.i_idx = obs[:, 0]
        self.k_idx = obs[:, 1]
        self.l_idx = obs[:, 2]
        self.t_idx = obs[:, 3]
        self.y = obs[:, 4].astype(float)
        self.dims = ModelDims.from_matrix(rm)
        self.model_config = model_config
        self.layout = ParamLayout(self.dims, model_config)
        self.sl = self.layout.slices()

    def obs_loglik(self, theta, bp, bc, alpha, eta, phi) -> np.ndarray:
        z = alpha[self.k_idx] * (
            phi[self.t_idx] + theta[self.i_idx] - bp[self.k_idx] - bc[self.l_idx]
        )
        p = eta[self.k_idx] + (1.0 - eta[self.k_idx]) * logistic(z)
        p = np.clip(p, _model.P_FLOOR, 1.0 - _model.P_FLOOR)
        return self.y * np.log(p) + (1.0 - self.y) * np.log1p(-p)

    def prior_median_vector(self) -> np.ndarray:
        sl = self.sl
        vec = np.zeros(self.layout.size)
        vec[sl["alpha"]] = 1.0
        vec[sl["eta"]] = logit(1.0 - 0.5 ** 0.2)  # Beta(1,5) median
        log5 = math.log(5.0)  # half-Cauchy(0,5) median
        vec[sl["sigma_beta_point"]] = log5
        vec[sl["sigma_beta_camera"]] = log5
        vec[sl["sigma_alpha"]] = log5
        if self.model_config.include_learning:
            vec[sl["sigma_phi"]] = log5
        # sigma_theta: Uniform(0,10) median 5 -> scaled-logit 0 (already zero)
        return vec


class _IrtChainState:
    """Mutable per-chain state: constrained blocks plus cached per-observation loglik."""

    def __init__(self, kernel: _IrtKernel, vec: np.ndarray):
        sl = kernel.sl
        self.theta = vec[sl["theta"]].copy()
        self.bp = vec[sl["beta_point"]].copy()
        self.bc = vec[sl["beta_camera"]].copy()
        self.alpha = vec[sl["alpha"]].copy()
        self.eta_u = vec[sl["eta"]].copy()
        self.eta = logistic(self.eta_u)
        T = kernel.dims.n_occasions
        self.phi = np.zeros(T)
        if kernel.model_config.include_learning:
            self.phi[1:] = vec[sl["phi"]]
            self.ls_ph = float(vec[sl["sigma_phi"]][0])
        else:
            self.ls_ph = 0.0
        self.s_th_u = float(vec[sl["sigma_theta"]][0])
        self.mu_bp = float(vec[sl["mu_beta_point"]][0])
        self.ls_bp = float(vec[sl["sigma_beta_point"]][0])
        self.mu_bc = float(vec[sl["mu_beta_camera"]][0])
        self.ls_bc = float(vec[sl["sigma_beta_camera"]][0])
        self.ls_al = float(vec[sl["sigma_alpha"]][0])
        self.ll_obs = kernel.obs_loglik(self.theta, self.bp, self.bc, self.alpha, self.eta, self.phi)

    @property
    def sigma_theta(self) -> float:
        return _model.SIGMA_THETA_UPPER * logistic(self.s_th_u)

    def to_vector(self, kernel: _IrtKernel) -> np.ndarray:
        sl = kernel.sl
        vec = np.empty(kernel.layout.size)
        vec[sl["theta"]] = self.theta
        vec[sl["beta_point"]] = self.bp
        vec[sl["beta_camera"]] = self.bc
        vec[sl["alpha"]] = self.alpha
        vec[sl["eta"]] = self.eta_u
        if kernel.model_config.include_learning:
            vec[sl["phi"]] = self.phi[1:]
            vec[sl["sigma_phi"]] = self.ls_ph
        vec[sl["sigma_theta"]] = self.s_th_u
        vec[sl["mu_beta_point"]] = self.mu_bp
        vec[sl["sigma_beta_point"]] = self.ls_bp
        vec[sl["mu_beta_camera"]] = self.mu_bc
        vec[sl["sigma_beta_camera"]] = self.ls_bc
        vec[sl["sigma_alpha"]] = self.ls_al
        return vec


def _run_irt_chain(kernel: _IrtKernel, config: SamplerConfig, chain_seed, track_scales=False) -> ChainDraws:
    rng = np.random.default_rng(chain_seed)
    size = kernel.layout.size
    base = kernel.prior_median_vector()
    vec = base + config.init_jitter_sd * rng.standard_normal(size)
    st = _IrtChainState(kernel, vec)
    sl = kernel.sl
    learning = kernel.model_config.include_learning
    sum_to_zero = kernel.model_config.anchor_mode == "sum_to_zero"
    n_obs = len(kernel.y)
    I, K, L, T = (
        kernel.dims.n_participants,
        kernel.dims.n_points,
        kernel.dims.n_cameras,
        kernel.dims.n_occasions,
    )

    log_scales = np.full(size, math.log(0.5))
    extra_log_scales = np.full(6, math.log(0.5))  # ridge / funnel moves
    accept_counts = np.zeros(size)
    kept = []
    scale_history = []
    total = config.warmup_iters + config.sampling_iters

    def vector_update(slc, values, prop, d_prior, group_of_obs, ll_new, warm, step):
        d_ll = np.bincount(group_of_obs, weights=ll_new - st.ll_obs, minlength=len(values))
        with np.errstate(invalid="ignore"):
            accept = np.log(rng.random(len(values))) < d_prior + d_ll
        new_values = np.where(accept, prop, values)
        acc_obs = accept[group_of_obs]
        st.ll_obs = np.where(acc_obs, ll_new, st.ll_obs)
        if warm:
            log_scales[slc] += step * (accept.astype(float) - config.target_accept)
        else:
            accept_counts[slc] += accept
        return new_values

    def scalar_update(pos, cur, delta_fn, warm, step):
        prop = cur + math.exp(log_scales[pos]) * rng.standard_normal()
        d = delta_fn(prop)
        accepted = math.log(rng.random()) < d
        if warm:
            log_scales[pos] += step * ((1.0 if accepted else 0.0) - config.target_accept)
        elif accepted:
            accept_counts[pos] += 1
        return prop if accepted else cur

    for it in range(1, total + 1):
        warm = it <= config.warmup_iters
        step = _adapt_step(it, config.adapt_window) if warm else 0.0

        # abilities
        prop = st.theta + np.exp(log_scales[sl["theta"]]) * rng.standard_normal(I)
        ll_new = kernel.obs_loglik(prop, st.bp, st.bc, st.alpha, st.eta, st.phi)
        d_pr = norm_logpdf(prop, 0.0, st.sigma_theta) - norm_logpdf(st.theta, 0.0, st.sigma_theta)
        st.theta = vector_update(sl["theta"], st.theta, prop, d_pr, kernel.i_idx, ll_new, warm, step)

        # point difficulties
        s_bp = math.exp(st.ls_bp)
        prop = st.bp + np.exp(log_scales[sl["beta_point"]]) * rng.standard_normal(K)
        ll_new = kernel.obs_loglik(st.theta, prop, st.bc, st.alpha, st.eta, st.phi)
        d_pr = norm_logpdf(prop, st.mu_bp, s_bp) - norm_logpdf(st.bp, st.mu_bp, s_bp)
        st.bp = vector_update(sl["beta_point"], st.bp, prop, d_pr, kernel.k_idx, ll_new, warm, step)

        # camera difficulties
        s_bc = math.exp(st.ls_bc)
        prop = st.bc + np.exp(log_scales[sl["beta_camera"]]) * rng.standard_normal(L)
        ll_new = kernel.obs_loglik(st.theta, st.bp, prop, st.alpha, st.eta, st.phi)
        d_pr = norm_logpdf(prop, st.mu_bc, s_bc) - norm_logpdf(st.bc, st.mu_bc, s_bc)
        st.bc = vector_update(sl["beta_camera"], st.bc, prop, d_pr, kernel.l_idx, ll_new, warm, step)

        # discriminations
        s_al = math.exp(st.ls_al)
        prop = st.alpha + np.exp(log_scales[sl["alpha"]]) * rng.standard_normal(K)
        ll_new = kernel.obs_loglik(st.theta, st.bp, st.bc, prop, st.eta, st.phi)
        d_pr = norm_logpdf(prop, 1.0, s_al) - norm_logpdf(st.alpha, 1.0, s_al)
        st.alpha = vector_update(sl["alpha"], st.alpha, prop, d_pr, kernel.k_idx, ll_new, warm, step)

        # pseudo-guessing (logit scale, with jacobian)
        prop_u = st.eta_u + np.exp(log_scales[sl["eta"]]) * rng.standard_normal(K)
        prop_eta = logistic(prop_u)
        ll_new = kernel.obs_loglik(st.theta, st.bp, st.bc, st.alpha, prop_eta, st.phi)
        with np.errstate(divide="ignore", invalid="ignore"):
            d_pr = (
                beta15_logpdf(prop_eta)
                - beta15_logpdf(st.eta)
                + np.log(prop_eta) + np.log1p(-prop_eta)
                - np.log(st.eta) - np.log1p(-st.eta)
            )
        d_pr = np.where(np.isnan(d_pr), -np.inf, d_pr)
        new_u = vector_update(sl["eta"], st.eta_u, prop_u, d_pr, kernel.k_idx, ll_new, warm, step)
        st.eta_u = new_u
        st.eta = logistic(st.eta_u)

        # learning effects (occasion 1 pinned at zero)
        if learning and T > 1:
            s_ph = math.exp(st.ls_ph)
            prop_free = st.phi[1:] + np.exp(log_scales[sl["phi"]]) * rng.standard_normal(T - 1)
            prop_phi = np.concatenate(([0.0], prop_free))
            ll_new = kernel.obs_loglik(st.theta, st.bp, st.bc, st.alpha, st.eta, prop_phi)
            d_ll = np.bincount(kernel.t_idx, weights=ll_new - st.ll_obs, minlength=T)[1:]
            d_pr = norm_logpdf(prop_free, 0.0, s_ph) - norm_logpdf(st.phi[1:], 0.0, s_ph)
            accept = np.log(rng.random(T - 1)) < d_pr + d_ll
            st.phi[1:] = np.where(accept, prop_free, st.phi[1:])
            acc_obs = np.concatenate(([False], accept))[kernel.t_idx]
            st.ll_obs = np.where(acc_obs, ll_new, st.ll_obs)
            if warm:
                log_scales[sl["phi"]] += step * (accept.astype(float) - config.target_accept)
            else:
                accept_counts[sl["phi"]] += accept

        # mode-swap move: wrong-heavy points have a mirror mode with the
        # discrimination sign flipped and the difficulty reflected about the
        # point's mean ability term.  The map (alpha, beta) -> (-alpha,
        # 2 m - beta) is an involution with unit Jacobian, so the acceptance
        # ratio is just the posterior ratio; random-walk updates cannot cross
        # between these modes on their own.
        n_per_point = np.bincount(kernel.k_idx, minlength=K).astype(float)
        ability_term = st.phi[kernel.t_idx] + st.theta[kernel.i_idx] - st.bc[kernel.l_idx]
        m = np.bincount(kernel.k_idx, weights=ability_term, minlength=K) / np.maximum(n_per_point, 1.0)
        prop_alpha = -st.alpha
        prop_bp = 2.0 * m - st.bp
        ll_new = kernel.obs_loglik(st.theta, prop_bp, st.bc, prop_alpha, st.eta, st.phi)
        d_ll = np.bincount(kernel.k_idx, weights=ll_new - st.ll_obs, minlength=K)
        s_al, s_bp = math.exp(st.ls_al), math.exp(st.ls_bp)
        d_pr = (
            norm_logpdf(prop_alpha, 1.0, s_al) - norm_logpdf(st.alpha, 1.0, s_al)
            + norm_logpdf(prop_bp, st.mu_bp, s_bp) - norm_logpdf(st.bp, st.mu_bp, s_bp)
        )
        accept = np.log(rng.random(K)) < d_pr + d_ll
        st.alpha = np.where(accept, prop_alpha, st.alpha)
        st.bp = np.where(accept, prop_bp, st.bp)
        acc_obs = accept[kernel.k_idx]
        st.ll_obs = np.where(acc_obs, ll_new, st.ll_obs)

        # hyperparameters (prior-only targets)
        def d_sigma_theta(prop_u):
            frac_new, frac_old = logistic(prop_u), logistic(st.s_th_u)
            s_new = _model.SIGMA_THETA_UPPER * frac_new
            s_old = st.sigma_theta
            return (
                float(np.sum(norm_logpdf(st.theta, 0.0, s_new) - norm_logpdf(st.theta, 0.0, s_old)))
                + math.log(frac_new) + math.log1p(-frac_new)
                - math.log(frac_old) - math.log1p(-frac_old)
            )

        st.s_th_u = scalar_update(sl["sigma_theta"].start, st.s_th_u, d_sigma_theta, warm, step)

        def d_mu_bp(prop):
            s = math.exp(st.ls_bp)
            return (
                float(np.sum(norm_logpdf(st.bp, prop, s) - norm_logpdf(st.bp, st.mu_bp, s)))
                + float(norm_logpdf(prop, 0.0, 5.0) - norm_logpdf(st.mu_bp, 0.0, 5.0))
            )

        st.mu_bp = scalar_update(sl["mu_beta_point"].start, st.mu_bp, d_mu_bp, warm, step)

        def d_ls(values, mu, cur_ls):
            def inner(prop_ls):
                s_new, s_old = math.exp(prop_ls), math.exp(cur_ls())
                return (
                    float(np.sum(norm_logpdf(values(), mu(), s_new) - norm_logpdf(values(), mu(), s_old)))
                    + half_cauchy_logpdf(s_new) - half_cauchy_logpdf(s_old)
                    + prop_ls - cur_ls()
                )
            return inner

        st.ls_bp = scalar_update(
            sl["sigma_beta_point"].start, st.ls_bp,
            d_ls(lambda: st.bp, lambda: st.mu_bp, lambda: st.ls_bp), warm, step,
        )

        def d_mu_bc(prop):
            s = math.exp(st.ls_bc)
            return (
                float(np.sum(norm_logpdf(st.bc, prop, s) - norm_logpdf(st.bc, st.mu_bc, s)))
                + float(norm_logpdf(prop, 0.0, 5.0) - norm_logpdf(st.mu_bc, 0.0, 5.0))
            )

        st.mu_bc = scalar_update(sl["mu_beta_camera"].start, st.mu_bc, d_mu_bc, warm, step)
        st.ls_bc = scalar_update(
            sl["sigma_beta_camera"].start, st.ls_bc,
            d_ls(lambda: st.bc, lambda: st.mu_bc, lambda: st.ls_bc), warm, step,
        )
        st.ls_al = scalar_update(
            sl["sigma_alpha"].start, st.ls_al,
            d_ls(lambda: st.alpha, lambda: 1.0, lambda: st.ls_al), warm, step,
        )
        if learning and T > 1:
            st.ls_ph = scalar_update(
                sl["sigma_phi"].start, st.ls_ph,
                d_ls(lambda: st.phi[1:], lambda: 0.0, lambda: st.ls_ph), warm, step,
            )

        # soft directions benefit from several passes per sweep
        for _ in range(RIDGE_REPEATS):
            # ridge moves: the likelihood is invariant under a common shift of
            # (theta, beta_point) and under trading beta_point against
            # beta_camera, so those directions are walked with dedicated joint
            # proposals; (alpha, sigma_alpha) gets a joint scale move to cross
            # the hierarchical funnel.
            def ridge_update(idx, delta_fn):
                c = math.exp(extra_log_scales[idx]) * rng.standard_normal()
                accepted = math.log(rng.random()) < delta_fn(c)
                if warm:
                    extra_log_scales[idx] += step * ((1.0 if accepted else 0.0) - config.target_accept)
                return c if accepted else None

            def d_shift_theta(c):
                s = st.sigma_theta
                return (
                    float(np.sum(norm_logpdf(st.theta + c, 0.0, s) - norm_logpdf(st.theta, 0.0, s)))
                    + float(norm_logpdf(st.mu_bp + c, 0.0, 5.0) - norm_logpdf(st.mu_bp, 0.0, 5.0))
                )

            c = ridge_update(0, d_shift_theta)
            if c is not None:
                st.theta += c
                st.bp += c
                st.mu_bp += c

            def d_shift_cameras(c):
                return float(
                    norm_logpdf(st.mu_bp + c, 0.0, 5.0) - norm_logpdf(st.mu_bp, 0.0, 5.0)
                    + norm_logpdf(st.mu_bc - c, 0.0, 5.0) - norm_logpdf(st.mu_bc, 0.0, 5.0)
                )

            c = ridge_update(1, d_shift_cameras)
            if c is not None:
                st.bp += c
                st.mu_bp += c
                st.bc -= c
                st.mu_bc -= c

            # joint scale moves cross the hierarchical funnels: the effects and
            # their scale move together as x' = center + (x - center) e^c,
            # log sigma += c.  The quadratic prior term is untouched and the
            # normalization cancels against the move jacobian, leaving the
            # likelihood change, the half-Cauchy ratio and the log-map jacobian c.
            def scale_move(idx, effects, center, cur_ls, new_ll_fn):
                c = math.exp(extra_log_scales[idx]) * rng.standard_normal()
                prop_effects = center + (effects - center) * math.exp(c)
                prop_ls = cur_ls + c
                ll_new = new_ll_fn(prop_effects)
                delta = (
                    float(np.sum(ll_new - st.ll_obs))
                    + half_cauchy_logpdf(math.exp(prop_ls)) - half_cauchy_logpdf(math.exp(cur_ls))
                    + c
                )
                accepted = math.log(rng.random()) < delta
                if warm:
                    extra_log_scales[idx] += step * ((1.0 if accepted else 0.0) - config.target_accept)
                if accepted:
                    st.ll_obs = ll_new
                    return prop_effects, prop_ls
                return None

            moved = scale_move(
                2, st.alpha, 1.0, st.ls_al,
                lambda a: kernel.obs_loglik(st.theta, st.bp, st.bc, a, st.eta, st.phi),
            )
            if moved is not None:
                st.alpha, st.ls_al = moved

            moved = scale_move(
                3, st.bc, st.mu_bc, st.ls_bc,
                lambda b: kernel.obs_loglik(st.theta, st.bp, b, st.alpha, st.eta, st.phi),
            )
            if moved is not None:
                st.bc, st.ls_bc = moved

            if learning and T > 1:
                def phi_ll(free):
                    return kernel.obs_loglik(
                        st.theta, st.bp, st.bc, st.alpha, st.eta, np.concatenate(([0.0], free))
                    )

                moved = scale_move(4, st.phi[1:], 0.0, st.ls_ph, phi_ll)
                if moved is not None:
                    st.phi = np.concatenate(([0.0], moved[0]))
                    st.ls_ph = moved[1]

                # the common level of phi trades against the ability level:
                # shifting every free phi by c and every theta by -c only
                # moves first-occasion observations, so walk that direction
                # jointly as well.
                def level_trade(c):
                    s_ph = math.exp(st.ls_ph)
                    ll_new = kernel.obs_loglik(
                        st.theta - c, st.bp, st.bc, st.alpha, st.eta,
                        np.concatenate(([0.0], st.phi[1:] + c)),
                    )
                    delta = (
                        float(np.sum(ll_new - st.ll_obs))
                        + float(np.sum(norm_logpdf(st.theta - c, 0.0, st.sigma_theta)
                                       - norm_logpdf(st.theta, 0.0, st.sigma_theta)))
                        + float(np.sum(norm_logpdf(st.phi[1:] + c, 0.0, s_ph)
                                       - norm_logpdf(st.phi[1:], 0.0, s_ph)))
                    )
                    return delta, ll_new

                c = math.exp(extra_log_scales[5]) * rng.standard_normal()
                delta, ll_new = level_trade(c)
                accepted = math.log(rng.random()) < delta
                if warm:
                    extra_log_scales[5] += step * ((1.0 if accepted else 0.0) - config.target_accept)
                if accepted:
                    st.theta = st.theta - c
                    st.phi = np.concatenate(([0.0], st.phi[1:] + c))
                    st.ll_obs = ll_new

        if sum_to_zero:
            # recenter abilities; shift difficulties so the likelihood is untouched
            shift = float(st.theta.mean())
            st.theta -= shift
            st.bp -= shift
            st.mu_bp -= shift

        if not warm:
            s = it - config.warmup_iters
            if s % config.thin == 0:
                kept.append(st.to_vector(kernel))
            if track_scales:
                scale_history.append(np.exp(log_scales.copy()))

    return ChainDraws(
        draws=np.asarray(kept),
        accept_rates=accept_counts / config.sampling_iters,
        chain_seed=chain_seed,
        proposal_scales=np.exp(log_scales),
        scale_history=scale_history,
    )


def _chain_worker(args):
    rm, model_config, config, chain_index = args
    kernel = _IrtKernel(rm, model_config)
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_chains)
    return _run_irt_chain(kernel, config, seeds[chain_index])


def run_chains(model_config: ModelConfig, rm: ResponseMatrix, config: SamplerConfig) -> PosteriorDraws:
    """Run all chains with seeds derived deterministically from config.seed.

    Output order is by chain index regardless of scheduling; sequential and
    parallel execution produce identical draws.
    """
    kernel = _IrtKernel(rm, model_config)
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_chains)
    chains: list[ChainDraws | None] = [None] * config.n_chains
    if config.parallel and config.n_chains > 1:
        with ProcessPoolExecutor(max_workers=config.n_chains) as pool:
            futures = [(c, pool.submit(_chain_worker, (rm, model_config, config, c))) for c in range(config.n_chains)]
            for c, fut in futures:
                try:
                    chains[c] = fut.result()
                except Exception as exc:
                    raise SamplerError(f"chain {c} failed: {exc}") from exc
    else:
        for c in range(config.n_chains):
            try:
                chains[c] = _run_irt_chain(kernel, config, seeds[c])
            except Exception as exc:
                raise SamplerError(f"chain {c} failed: {exc}") from exc
    names = kernel.layout.names(
        participants=rm.participants, points=rm.points, cameras=rm.cameras
    )
    dims = kernel.dims
    return PosteriorDraws(
        chains=chains,
        names=names,
        constrain=lambda m: constrain_draws(m, dims, model_config),
        constrained_names=names,
    )


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def _split_chains(chains: list[np.ndarray]) -> list[np.ndarray]:
    out = []
    for x in chains:
        n = len(x) // 2
        if n < 2:
            raise DiagnosticsError("need at least 4 draws per chain for split diagnostics")
        out.append(x[:n])
        out.append(x[len(x) - n:])
    return out


def rhat_from_chains(chains: list[np.ndarray]) -> float:
    """Split-chain potential scale reduction factor."""
    halves = _split_chains([np.asarray(c, dtype=float) for c in chains])
    n = len(halves[0])
    means = np.array([h.mean() for h in halves])
    variances = np.array([h.var(ddof=1) for h in halves])
    W = variances.mean()
    B = n * means.var(ddof=1)
    var_plus = (n - 1) / n * W + B / n
    if W <= 0.0 or var_plus <= 0.0:
        raise DiagnosticsError("degenerate_draws: zero variance")
    return float(math.sqrt(var_plus / W))


def ess_from_chains(chains: list[np.ndarray]) -> float:
    """Effective sample size via initial-positive-sequence autocorrelation summation."""
    chains = [np.asarray(c, dtype=float) for c in chains]
    n = len(chains[0])
    m = len(chains)
    total = m * n
    if total < 8:
        raise DiagnosticsError("need at least 8 draws for ess")
    W = float(np.mean([c.var(ddof=1) for c in chains]))
    if m > 1:
        means = np.array([c.mean() for c in chains])
        B = n * means.var(ddof=1)
        var_plus = (n - 1) / n * W + B / n
    else:
        var_plus = (n - 1) / n * W
    if W <= 0.0 or var_plus <= 0.0:
        raise DiagnosticsError("degenerate_draws: zero variance")

    acov = np.zeros(n)
    for c in chains:
        d = c - c.mean()
        acov += np.correlate(d, d, mode="full")[n - 1:] / n
    acov /= m
    rho = 1.0 - (W - acov) / var_plus  # rho[0] == 1 up to float error

    tau = -1.0
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        t += 2
    if tau <= 0.0:
        return float(total)
    return float(min(total, total / tau))


def rhat(draws: PosteriorDraws, parameter: str) -> float:
    return rhat_from_chains(draws.parameter(parameter))


def ess(draws: PosteriorDraws, parameter: str) -> float:
    return ess_from_chains(draws.parameter(parameter))

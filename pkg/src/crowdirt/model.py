"""The probabilistic response model.

A linear logistic test model with pseudo-guessing: the probability of a
correct answer is a guessing floor plus a logistic term in
(learning + ability - point difficulty - camera difficulty), scaled by a
per-point discrimination.  Hierarchical priors sit on abilities,
difficulties, discriminations and guessing; the learning effect enters as
an occasion-level shift anchored at zero on the first occasion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .records import ResponseMatrix

LOG_2PI = math.log(2.0 * math.pi)
SIGMA_THETA_UPPER = 10.0
P_FLOOR = 1e-12  # likelihood-only clamp on p

ANCHOR_MODES = ("hierarchical_zero_mean", "sum_to_zero")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    include_learning: bool = True
    anchor_mode: str = "hierarchical_zero_mean"

    def __post_init__(self):
        if self.anchor_mode not in ANCHOR_MODES:
            raise ModelError(f"unknown anchor_mode: {self.anchor_mode}")


@dataclass(frozen=True)
class ModelDims:
    n_participants: int
    n_points: int
    n_cameras: int
    n_occasions: int

    @classmethod
    def from_matrix(cls, rm: ResponseMatrix) -> "ModelDims":
        return cls(rm.n_participants, rm.n_points, rm.n_cameras, rm.n_occasions)


@dataclass
class ModelParameters:
    """Full latent state; ``phi`` has length n_occasions with phi[0] pinned to 0."""

    theta: np.ndarray
    beta_point: np.ndarray
    beta_camera: np.ndarray
    alpha: np.ndarray
    eta: np.ndarray
    phi: np.ndarray
    sigma_theta: float = 1.0
    mu_beta_point: float = 0.0
    sigma_beta_point: float = 1.0
    mu_beta_camera: float = 0.0
    sigma_beta_camera: float = 1.0
    sigma_alpha: float = 1.0
    sigma_phi: float = 1.0

    def dims(self) -> ModelDims:
        return ModelDims(len(self.theta), len(self.beta_point), len(self.beta_camera), len(self.phi))

    def copy(self) -> "ModelParameters":
        return replace(
            self,
            theta=self.theta.copy(),
            beta_point=self.beta_point.copy(),
            beta_camera=self.beta_camera.copy(),
            alpha=self.alpha.copy(),
            eta=self.eta.copy(),
            phi=self.phi.copy(),
        )


def logistic(x):
    """Numerically stable logistic function, safe for |x| up to ~700 and beyond."""
    x = np.clip(np.asarray(x, dtype=float), -700.0, 700.0)  # avoid subnormal exp results
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def logit(p):
    p = np.asarray(p, dtype=float)
    out = np.log(p) - np.log1p(-p)
    if out.ndim == 0:
        return float(out)
    return out


def response_probability(theta, beta_point, beta_camera, alpha, eta, phi=0.0):
    """P(correct) = eta + (1 - eta) * logistic(alpha * (phi + theta - beta_point - beta_camera))."""
    args = [np.asarray(a, dtype=float) for a in (theta, beta_point, beta_camera, alpha, eta, phi)]
    if any(not np.all(np.isfinite(a)) for a in args):
        raise ModelError("non-finite input to response_probability")
    theta, beta_point, beta_camera, alpha, eta, phi = args
    if np.any(eta < 0.0) or np.any(eta >= 1.0):
        raise ModelError("eta must be in [0, 1)")
    p = eta + (1.0 - eta) * logistic(alpha * (phi + theta - beta_point - beta_camera))
    if p.ndim == 0:
        return float(p)
    return p


def _obs_probabilities(params: ModelParameters, rm: ResponseMatrix) -> np.ndarray:
    obs = rm.observations
    i, k, l, t = obs[:, 0], obs[:, 1], obs[:, 2], obs[:, 3]
    z = params.alpha[k] * (params.phi[t] + params.theta[i] - params.beta_point[k] - params.beta_camera[l])
    return params.eta[k] + (1.0 - params.eta[k]) * logistic(z)


def log_likelihood(params: ModelParameters, rm: ResponseMatrix) -> float:
    """Bernoulli log-likelihood of the correctness indicators."""
    d = params.dims()
    if (
        d.n_participants != rm.n_participants
        or d.n_points != rm.n_points
        or d.n_cameras != rm.n_cameras
        or d.n_occasions < rm.n_occasions
    ):
        raise ModelError(
            f"parameter dims {d} do not match response matrix "
            f"({rm.n_participants}, {rm.n_points}, {rm.n_cameras}, {rm.n_occasions})"
        )
    if rm.n_observations == 0:
        return 0.0
    y = rm.observations[:, 4].astype(float)
    p = np.clip(_obs_probabilities(params, rm), P_FLOOR, 1.0 - P_FLOOR)
    return float(np.sum(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def norm_logpdf(x, mu, sd):
    x = np.asarray(x, dtype=float)
    return -0.5 * ((x - mu) / sd) ** 2 - np.log(sd) - 0.5 * LOG_2PI


def half_cauchy_logpdf(x, scale=5.0):
    """Cauchy(0, scale) truncated to (0, inf), renormalized."""
    if x <= 0.0:
        return -np.inf
    return math.log(2.0) - math.log(math.pi * scale) - math.log1p((x / scale) ** 2)


def beta15_logpdf(x):
    """Beta(1, 5) density 5 (1 - x)^4 on (0, 1)."""
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, -np.inf)
    ok = (x > 0.0) & (x < 1.0)
    out[ok] = math.log(5.0) + 4.0 * np.log1p(-x[ok])
    if out.ndim == 0:
        return float(out)
    return out


def log_prior(params: ModelParameters, config: ModelConfig = ModelConfig()) -> float:
    """Sum of the prior log-densities; -inf for out-of-support values."""
    p = params
    if not (0.0 < p.sigma_theta < SIGMA_THETA_UPPER):
        return -np.inf
    for s in (p.sigma_beta_point, p.sigma_beta_camera, p.sigma_alpha):
        if s <= 0.0:
            return -np.inf
    if np.any(p.eta <= 0.0) or np.any(p.eta >= 1.0):
        return -np.inf
    total = 0.0
    total += float(np.sum(norm_logpdf(p.theta, 0.0, p.sigma_theta)))
    total += -math.log(SIGMA_THETA_UPPER)  # Uniform(0, 10) on sigma_theta
    total += float(np.sum(norm_logpdf(p.beta_point, p.mu_beta_point, p.sigma_beta_point)))
    total += float(norm_logpdf(p.mu_beta_point, 0.0, 5.0))
    total += half_cauchy_logpdf(p.sigma_beta_point)
    total += float(np.sum(norm_logpdf(p.beta_camera, p.mu_beta_camera, p.sigma_beta_camera)))
    total += float(norm_logpdf(p.mu_beta_camera, 0.0, 5.0))
    total += half_cauchy_logpdf(p.sigma_beta_camera)
    total += float(np.sum(norm_logpdf(p.alpha, 1.0, p.sigma_alpha)))
    total += half_cauchy_logpdf(p.sigma_alpha)
    total += float(np.sum(beta15_logpdf(p.eta)))
    if config.include_learning and len(p.phi) > 1:
        if p.sigma_phi <= 0.0:
            return -np.inf
        total += float(np.sum(norm_logpdf(p.phi[1:], 0.0, p.sigma_phi)))
        total += half_cauchy_logpdf(p.sigma_phi)
    return total


def log_posterior(params: ModelParameters, rm: ResponseMatrix, config: ModelConfig = ModelConfig()) -> float:
    lp = log_prior(params, config)
    if not np.isfinite(lp):
        return -np.inf
    return lp + log_likelihood(params, rm)


# ---------------------------------------------------------------------------
# Constrained <-> unconstrained transforms
#
# Layout: theta (I) | beta_point (K) | beta_camera (L) | alpha (K) |
#         logit(eta) (K) | phi[1:] (T-1, learning only) |
#         scaled-logit(sigma_theta / 10) | mu_beta_point | log sigma_beta_point |
#         mu_beta_camera | log sigma_beta_camera | log sigma_alpha |
#         log sigma_phi (learning only)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamLayout:
    dims: ModelDims
    config: ModelConfig

    @property
    def n_phi_free(self) -> int:
        return self.dims.n_occasions - 1 if self.config.include_learning else 0

    @property
    def size(self) -> int:
        d = self.dims
        n = d.n_participants + 3 * d.n_points + d.n_cameras + self.n_phi_free + 6
        return n + (1 if self.config.include_learning else 0)

    def slices(self) -> dict[str, slice]:
        d = self.dims
        out = {}
        start = 0
        for name, width in (
            ("theta", d.n_participants),
            ("beta_point", d.n_points),
            ("beta_camera", d.n_cameras),
            ("alpha", d.n_points),
            ("eta", d.n_points),
            ("phi", self.n_phi_free),
            ("sigma_theta", 1),
            ("mu_beta_point", 1),
            ("sigma_beta_point", 1),
            ("mu_beta_camera", 1),
            ("sigma_beta_camera", 1),
            ("sigma_alpha", 1),
            ("sigma_phi", 1 if self.config.include_learning else 0),
        ):
            out[name] = slice(start, start + width)
            start += width
        return out

    def names(self, participants=None, points=None, cameras=None) -> list[str]:
        d = self.dims
        part = participants if participants is not None else [str(i) for i in range(d.n_participants)]
        pts = (
            ["{}:{}".format(*key) for key in points]
            if points is not None
            else [str(k) for k in range(d.n_points)]
        )
        cams = cameras if cameras is not None else [str(l) for l in range(d.n_cameras)]
        names = []
        names += [f"theta[{p}]" for p in part]
        names += [f"beta_point[{k}]" for k in pts]
        names += [f"beta_camera[{c}]" for c in cams]
        names += [f"alpha[{k}]" for k in pts]
        names += [f"eta[{k}]" for k in pts]
        names += [f"phi[{t}]" for t in range(2, d.n_occasions + 1)][: self.n_phi_free]
        names += ["sigma_theta", "mu_beta_point", "sigma_beta_point", "mu_beta_camera", "sigma_beta_camera", "sigma_alpha"]
        if self.config.include_learning:
            names.append("sigma_phi")
        return names


def to_unconstrained(params: ModelParameters, config: ModelConfig = ModelConfig()) -> np.ndarray:
    layout = ParamLayout(params.dims(), config)
    sl = layout.slices()
    vec = np.empty(layout.size)
    vec[sl["theta"]] = params.theta
    vec[sl["beta_point"]] = params.beta_point
    vec[sl["beta_camera"]] = params.beta_camera
    vec[sl["alpha"]] = params.alpha
    vec[sl["eta"]] = logit(params.eta)
    if config.include_learning:
        vec[sl["phi"]] = params.phi[1:]
        vec[sl["sigma_phi"]] = math.log(params.sigma_phi)
    vec[sl["sigma_theta"]] = logit(params.sigma_theta / SIGMA_THETA_UPPER)
    vec[sl["mu_beta_point"]] = params.mu_beta_point
    vec[sl["sigma_beta_point"]] = math.log(params.sigma_beta_point)
    vec[sl["mu_beta_camera"]] = params.mu_beta_camera
    vec[sl["sigma_beta_camera"]] = math.log(params.sigma_beta_camera)
    vec[sl["sigma_alpha"]] = math.log(params.sigma_alpha)
    return vec


def from_unconstrained(
    vec: np.ndarray, dims: ModelDims, config: ModelConfig = ModelConfig()
) -> tuple[ModelParameters, float]:
    """Inverse transform; returns (params, log |det Jacobian| of this map)."""
    layout = ParamLayout(dims, config)
    if len(vec) != layout.size:
        raise ModelError(f"expected unconstrained vector of length {layout.size}, got {len(vec)}")
    sl = layout.slices()
    eta_u = vec[sl["eta"]]
    eta = logistic(eta_u)
    s_theta_u = float(vec[sl["sigma_theta"]][0])
    s_theta_frac = logistic(s_theta_u)
    sigma_theta = SIGMA_THETA_UPPER * s_theta_frac
    ls_bp = float(vec[sl["sigma_beta_point"]][0])
    ls_bc = float(vec[sl["sigma_beta_camera"]][0])
    ls_al = float(vec[sl["sigma_alpha"]][0])
    phi = np.zeros(dims.n_occasions)
    sigma_phi = 1.0
    log_jac = 0.0
    # logit maps: d(constrained)/d(unconstrained) = p (1 - p)
    log_jac += float(np.sum(np.log(eta) + np.log1p(-eta)))
    log_jac += math.log(SIGMA_THETA_UPPER) + math.log(s_theta_frac) + math.log1p(-s_theta_frac)
    log_jac += ls_bp + ls_bc + ls_al
    if config.include_learning:
        phi[1:] = vec[sl["phi"]]
        ls_ph = float(vec[sl["sigma_phi"]][0])
        sigma_phi = math.exp(ls_ph)
        log_jac += ls_ph
    params = ModelParameters(
        theta=vec[sl["theta"]].copy(),
        beta_point=vec[sl["beta_point"]].copy(),
        beta_camera=vec[sl["beta_camera"]].copy(),
        alpha=vec[sl["alpha"]].copy(),
        eta=np.asarray(eta),
        phi=phi,
        sigma_theta=sigma_theta,
        mu_beta_point=float(vec[sl["mu_beta_point"]][0]),
        sigma_beta_point=math.exp(ls_bp),
        mu_beta_camera=float(vec[sl["mu_beta_camera"]][0]),
        sigma_beta_camera=math.exp(ls_bc),
        sigma_alpha=math.exp(ls_al),
        sigma_phi=sigma_phi,
    )
    return params, log_jac


def constrain_draws(matrix: np.ndarray, dims: ModelDims, config: ModelConfig = ModelConfig()) -> np.ndarray:
    """Map a matrix of unconstrained draws (rows) to constrained space, column for column."""
    layout = ParamLayout(dims, config)
    sl = layout.slices()
    out = np.array(matrix, dtype=float, copy=True)
    out[:, sl["eta"]] = logistic(matrix[:, sl["eta"]])
    out[:, sl["sigma_theta"]] = SIGMA_THETA_UPPER * logistic(matrix[:, sl["sigma_theta"]])
    for name in ("sigma_beta_point", "sigma_beta_camera", "sigma_alpha"):
        out[:, sl[name]] = np.exp(matrix[:, sl[name]])
    if config.include_learning:
        out[:, sl["sigma_phi"]] = np.exp(matrix[:, sl["sigma_phi"]])
    return out


# ---------------------------------------------------------------------------
# Flat named-vector JSON serialization
# ---------------------------------------------------------------------------


def params_to_json(params: ModelParameters) -> str:
    doc = {}
    for name, arr in (
        ("theta", params.theta),
        ("beta_point", params.beta_point),
        ("beta_camera", params.beta_camera),
        ("alpha", params.alpha),
        ("eta", params.eta),
        ("phi", params.phi),
    ):
        for idx, value in enumerate(arr):
            doc[f"{name}[{idx}]"] = float(value)
    for name in (
        "sigma_theta",
        "mu_beta_point",
        "sigma_beta_point",
        "mu_beta_camera",
        "sigma_beta_camera",
        "sigma_alpha",
        "sigma_phi",
    ):
        doc[name] = float(getattr(params, name))
    return json.dumps(doc, indent=1, sort_keys=False)


def params_from_json(text: str) -> ModelParameters:
    doc = json.loads(text)
    arrays: dict[str, dict[int, float]] = {}
    scalars: dict[str, float] = {}
    for key, value in doc.items():
        if "[" in key:
            name, idx = key[:-1].split("[")
            arrays.setdefault(name, {})[int(idx)] = float(value)
        else:
            scalars[key] = float(value)
    def vec(name):
        entries = arrays.get(name, {})
        out = np.zeros(len(entries))
        for idx, value in entries.items():
            out[idx] = value
        return out
    return ModelParameters(
        theta=vec("theta"),
        beta_point=vec("beta_point"),
        beta_camera=vec("beta_camera"),
        alpha=vec("alpha"),
        eta=vec("eta"),
        phi=vec("phi"),
        **scalars,
    )

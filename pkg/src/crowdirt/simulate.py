"""Synthetic dataset generation from known parameters, plus brute-force oracles.

The generator draws model parameters, samples correctness through the
response probability, and emits records in the same CSV schema the parser
consumes, so the whole pipeline runs end to end without real data.  The
oracles (1-D grid posterior, exact vote-outcome enumeration) are
deliberately naive and independent of the sampler and vote code paths.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .model import ModelParameters, logistic, norm_logpdf, response_probability
from .records import ClassificationRecord


class SimulationError(ValueError):
    pass


@dataclass
class SimConfig:
    n_participants: int = 10
    n_images: int = 20
    points_per_image: int = 15
    n_cameras: int = 3
    n_occasions: int = 5
    assignments_per_point: int = 5  # participants classifying each image's points
    theta_sd: float = 1.0
    beta_point_sd: float = 1.0
    beta_camera_sd: float = 0.5
    alpha_mean: float = 1.0
    alpha_sd: float = 0.2
    eta_a: float = 1.0
    eta_b: float = 5.0
    phi_max: float = 0.0  # linear ramp 0 .. phi_max over the occasions
    prevalence: float = 0.4
    unsure_rate: float = 0.0
    seed: int = 0
    # fixed-value overrides for oracle-driven tests; scalars broadcast
    theta: object = None
    beta_point: object = None
    beta_camera: object = None
    alpha: object = None
    eta: object = None
    phi: object = None

    def __post_init__(self):
        counts = (
            self.n_participants,
            self.n_images,
            self.points_per_image,
            self.n_cameras,
            self.n_occasions,
            self.assignments_per_point,
        )
        if min(counts) < 1:
            raise SimulationError("all counts must be >= 1")
        if min(self.theta_sd, self.beta_point_sd, self.beta_camera_sd, self.alpha_sd) <= 0:
            raise SimulationError("scale parameters must be > 0")


@dataclass
class SyntheticTruth:
    params: ModelParameters
    participant_ids: list[str]
    point_keys: list[tuple[str, str]]
    camera_ids: list[str]
    true_labels: dict[tuple[str, str], str]
    correctness: list[int] = field(default_factory=list)  # per record; -1 for unsure

    def theta_by_participant(self) -> dict[str, float]:
        return dict(zip(self.participant_ids, self.params.theta.tolist()))

    def beta_by_point(self) -> dict[tuple[str, str], float]:
        return dict(zip(self.point_keys, self.params.beta_point.tolist()))

    def to_json(self) -> str:
        doc = {
            "theta": self.theta_by_participant(),
            "beta_point": {f"{img}:{pt}": b for (img, pt), b in self.beta_by_point().items()},
            "beta_camera": dict(zip(self.camera_ids, self.params.beta_camera.tolist())),
            "alpha": {f"{img}:{pt}": a for (img, pt), a in zip(self.point_keys, self.params.alpha.tolist())},
            "eta": {f"{img}:{pt}": e for (img, pt), e in zip(self.point_keys, self.params.eta.tolist())},
            "phi": self.params.phi.tolist(),
            "true_labels": {f"{img}:{pt}": lab for (img, pt), lab in self.true_labels.items()},
            "correctness": self.correctness,
        }
        return json.dumps(doc, indent=1)


def _broadcast(value, default_fn, size):
    if value is None:
        return default_fn()
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(size, float(arr))
    if len(arr) != size:
        raise SimulationError(f"override of length {len(arr)} does not match size {size}")
    return arr.copy()


def generate(config: SimConfig) -> tuple[list[ClassificationRecord], SyntheticTruth]:
    """Draw parameters and records; deterministic for a fixed seed.

    Each assigned participant classifies all points of the image; a
    participant's images are spread over contiguous daily occasions so the
    derived occasion numbers match the generative ones.
    """
    rng = np.random.default_rng(config.seed)
    I, J, Kpi = config.n_participants, config.n_images, config.points_per_image
    L, T = config.n_cameras, config.n_occasions

    participant_ids = [f"p{idx:03d}" for idx in range(I)]
    image_ids = [f"img{idx:04d}" for idx in range(J)]
    camera_ids = [f"cam{idx}" for idx in range(L)]
    point_keys = [(img, f"pt{k:02d}") for img in image_ids for k in range(Kpi)]
    K = len(point_keys)

    theta = _broadcast(config.theta, lambda: rng.normal(0.0, config.theta_sd, I), I)
    beta_point = _broadcast(config.beta_point, lambda: rng.normal(0.0, config.beta_point_sd, K), K)
    beta_camera = _broadcast(config.beta_camera, lambda: rng.normal(0.0, config.beta_camera_sd, L), L)
    alpha = _broadcast(config.alpha, lambda: rng.normal(config.alpha_mean, config.alpha_sd, K), K)
    eta = _broadcast(config.eta, lambda: rng.beta(config.eta_a, config.eta_b, K), K)
    if config.phi is not None:
        phi = _broadcast(config.phi, None, T)
        phi[0] = 0.0
    elif T > 1:
        phi = config.phi_max * np.arange(T) / (T - 1)
    else:
        phi = np.zeros(1)

    camera_of_image = rng.integers(0, L, size=J)
    labels = np.where(rng.random(K) < config.prevalence, "present", "absent")
    true_labels = dict(zip(point_keys, labels.tolist()))

    params = ModelParameters(
        theta=theta,
        beta_point=beta_point,
        beta_camera=beta_camera,
        alpha=alpha,
        eta=eta,
        phi=np.asarray(phi, dtype=float),
        sigma_theta=config.theta_sd,
        sigma_beta_point=config.beta_point_sd,
        sigma_beta_camera=config.beta_camera_sd,
        sigma_alpha=config.alpha_sd,
        sigma_phi=1.0,
    )
    truth = SyntheticTruth(
        params=params,
        participant_ids=participant_ids,
        point_keys=point_keys,
        camera_ids=camera_ids,
        true_labels=true_labels,
    )

    n_assign = min(config.assignments_per_point, I)
    images_of: dict[int, list[int]] = {i: [] for i in range(I)}
    for j in range(J):
        for i in rng.choice(I, size=n_assign, replace=False):
            images_of[int(i)].append(j)

    base = datetime(2024, 1, 1, tzinfo=timezone.utc)
    point_index = {key: idx for idx, key in enumerate(point_keys)}
    records: list[ClassificationRecord] = []
    for i in range(I):
        imgs = images_of[i]
        if not imgs:
            continue
        # shuffle so a participant's occasion number is independent of the
        # image index; otherwise occasion-level effects are confounded with
        # point difficulties
        imgs = [imgs[j] for j in rng.permutation(len(imgs))]
        n_days = min(T, len(imgs))
        seq = 0
        for pos, j in enumerate(imgs):
            day = 1 + (pos * n_days) // len(imgs)  # contiguous days 1..n_days
            img = image_ids[j]
            cam = camera_ids[camera_of_image[j]]
            for k_local in range(Kpi):
                key = (img, f"pt{k_local:02d}")
                k = point_index[key]
                if config.unsure_rate > 0.0 and rng.random() < config.unsure_rate:
                    answer = "unsure"
                    truth.correctness.append(-1)
                else:
                    p = response_probability(theta[i], beta_point[k], beta_camera[camera_of_image[j]], alpha[k], eta[k], phi[day - 1])
                    correct = int(rng.random() < p)
                    truth.correctness.append(correct)
                    actual = true_labels[key]
                    other = "absent" if actual == "present" else "present"
                    answer = actual if correct else other
                duration = float(np.round(np.exp(rng.normal(math.log(4.0), 0.5)), 3))
                ts = base + timedelta(days=day - 1, seconds=20 * seq)
                seq += 1
                records.append(
                    ClassificationRecord(
                        participant_id=participant_ids[i],
                        image_id=img,
                        point_id=key[1],
                        camera_id=cam,
                        timestamp=ts,
                        answer=answer,
                        duration_secs=duration,
                        truth=true_labels[key],
                    )
                )
    return records, truth


def grid_posterior_1d(
    y,
    beta_point,
    beta_camera,
    alpha,
    eta,
    phi,
    sigma_theta: float = 1.0,
    grid=None,
):
    """Brute-force 1-D posterior over one participant's ability.

    All per-observation parameters are fixed; the grid density is
    exp(log posterior) normalized by the trapezoidal rule.
    Returns (grid, density, mean, sd).
    """
    if grid is None:
        grid = np.linspace(-6.0, 6.0, 1201)
    grid = np.asarray(grid, dtype=float)
    if len(grid) < 1000 or grid.min() > -6.0 or grid.max() < 6.0:
        raise SimulationError("grid must cover [-6, 6] with at least 1000 points")
    y = np.asarray(y, dtype=float)
    args = [np.broadcast_to(np.asarray(a, dtype=float), y.shape) for a in (beta_point, beta_camera, alpha, eta, phi)]
    beta_point, beta_camera, alpha, eta, phi = args

    z = alpha[None, :] * (phi[None, :] + grid[:, None] - beta_point[None, :] - beta_camera[None, :])
    p = eta[None, :] + (1.0 - eta[None, :]) * logistic(z)
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    loglik = np.sum(y[None, :] * np.log(p) + (1.0 - y[None, :]) * np.log1p(-p), axis=1)
    logpost = loglik + norm_logpdf(grid, 0.0, sigma_theta)
    peak = logpost.max()
    if not np.isfinite(peak):
        raise SimulationError("all-zero posterior mass on grid")
    density = np.exp(logpost - peak)
    mass = np.trapezoid(density, grid)
    if mass <= 0.0:
        raise SimulationError("all-zero posterior mass on grid")
    density /= mass
    mean = float(np.trapezoid(grid * density, grid))
    var = float(np.trapezoid((grid - mean) ** 2 * density, grid))
    return grid, density, mean, math.sqrt(max(var, 0.0))


ENUMERATION_LIMIT = 20


def enumerate_vote_accuracy(p_correct, truth: int, weights=None) -> float:
    """Exact probability that the (weighted) majority vote recovers the truth.

    Sums the probability of every correctness pattern whose decision,
    including the ties-to-absent rule, equals ``truth`` (1 = present).
    """
    p_correct = np.asarray(list(p_correct), dtype=float)
    n = len(p_correct)
    if n > ENUMERATION_LIMIT:
        raise SimulationError("too_large_to_enumerate: more than 20 voters")
    if truth not in (0, 1):
        raise SimulationError("truth must be 0 or 1")
    if weights is None:
        weights = np.ones(n)
    else:
        weights = np.asarray(list(weights), dtype=float)
        if len(weights) != n:
            raise SimulationError("weights length mismatch")

    idx = np.arange(2 ** n, dtype=np.int64)
    probs = np.ones(2 ** n)
    weight_correct = np.zeros(2 ** n)
    for voter in range(n):
        bit = (idx >> voter) & 1
        probs *= np.where(bit == 1, p_correct[voter], 1.0 - p_correct[voter])
        weight_correct += np.where(bit == 1, weights[voter], 0.0)
    total_weight = float(weights.sum())
    if truth == 1:
        # correct voters vote present; present needs a strict weight majority
        decided_truth = weight_correct > total_weight - weight_correct
    else:
        # incorrect voters vote present; ties go to absent
        weight_present = total_weight - weight_correct
        decided_truth = weight_present <= weight_correct
    return float(probs[decided_truth].sum())

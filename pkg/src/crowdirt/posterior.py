"""Posterior summaries, highest-density intervals, ability clustering and consensus weights."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy import stats

from .sampler import DiagnosticsError, PosteriorDraws, ess_from_chains, rhat_from_chains

GROUP_NAMES = ("beginner", "competent", "experienced", "expert")


class PosteriorError(ValueError):
    pass


@dataclass
class ParamSummary:
    name: str
    posterior_mean: float
    posterior_sd: float
    hdi_low: float
    hdi_high: float
    rhat: float
    ess: float


@dataclass
class AbilityGroups:
    groups: dict[str, str]  # participant -> group name
    cut_points: tuple[float, float, float]
    degenerate: bool = False


@dataclass
class WeightTable:
    weights: dict[str, float]  # participant -> weight in (0, 1), summing to 1


def hdi(sample, mass: float = 0.95) -> tuple[float, float]:
    """Shortest interval containing ceil(mass * n) sorted sample points.

    Among equal-width candidates the leftmost is returned.
    """
    if not 0.0 < mass < 1.0:
        raise PosteriorError("mass must be in (0, 1)")
    xs = np.sort(np.asarray(sample, dtype=float))
    n = len(xs)
    if n < math.ceil(1.0 / (1.0 - mass)):
        raise PosteriorError(f"sample of {n} too small for mass {mass}")
    window = math.ceil(mass * n)
    widths = xs[window - 1:] - xs[: n - window + 1]
    start = int(np.argmin(widths))  # argmin returns the first (leftmost) minimum
    return float(xs[start]), float(xs[start + window - 1])


def summarize(draws: PosteriorDraws, hdi_mass: float = 0.95) -> list[ParamSummary]:
    """Pooled constrained-space mean/sd/HDI plus per-parameter diagnostics.

    Parameters with degenerate (zero-variance) draws get NaN diagnostics.
    """
    out = []
    for name in draws.constrained_names:
        per_chain = draws.parameter(name)
        pooled = np.concatenate(per_chain)
        try:
            r = rhat_from_chains(per_chain)
            e = ess_from_chains(per_chain)
        except DiagnosticsError:
            r = float("nan")
            e = float("nan")
        low, high = hdi(pooled, hdi_mass)
        out.append(
            ParamSummary(
                name=name,
                posterior_mean=float(pooled.mean()),
                posterior_sd=float(pooled.std(ddof=1)) if len(pooled) > 1 else 0.0,
                hdi_low=low,
                hdi_high=high,
                rhat=r,
                ess=e,
            )
        )
    return out


def empirical_quantile(sorted_values: np.ndarray, p: float) -> float:
    """Inverse-CDF quantile without interpolation: the ceil(p n)-th order statistic."""
    n = len(sorted_values)
    rank = max(math.ceil(p * n), 1)
    return float(sorted_values[rank - 1])


def cluster_participants(theta_means: dict[str, float]) -> AbilityGroups:
    """Quartile clustering of posterior-mean abilities into four named groups.

    Half-open intervals: (-inf, q25] beginner, (q25, q50] competent,
    (q50, q75] experienced, (q75, inf) expert.
    """
    if len(theta_means) < 4:
        raise PosteriorError("need at least 4 participants to cluster")
    values = np.sort(np.asarray(list(theta_means.values()), dtype=float))
    q25 = empirical_quantile(values, 0.25)
    q50 = empirical_quantile(values, 0.50)
    q75 = empirical_quantile(values, 0.75)
    degenerate = q25 == q75
    groups = {}
    for pid, mean in theta_means.items():
        if mean <= q25:
            groups[pid] = "beginner"
        elif mean <= q50:
            groups[pid] = "competent"
        elif mean <= q75:
            groups[pid] = "experienced"
        else:
            groups[pid] = "expert"
    return AbilityGroups(groups=groups, cut_points=(q25, q50, q75), degenerate=degenerate)


def ability_weights(theta_means: dict[str, float]) -> WeightTable:
    """Softmax of posterior-mean abilities: w_i = exp(theta_i) / sum_j exp(theta_j)."""
    if not theta_means:
        raise PosteriorError("no participants")
    pids = list(theta_means)
    values = np.asarray([theta_means[p] for p in pids], dtype=float)
    if not np.all(np.isfinite(values)):
        raise PosteriorError("non-finite ability mean")
    shifted = values - values.max()
    ex = np.exp(shifted)
    weights = ex / ex.sum()
    return WeightTable(weights=dict(zip(pids, weights.tolist())))


def ability_weight_draws(theta_draws: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Fully Bayesian weights: the softmax applied draw by draw instead of to the means."""
    pids = list(theta_draws)
    matrix = np.column_stack([np.asarray(theta_draws[p], dtype=float) for p in pids])
    shifted = matrix - matrix.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    weights = ex / ex.sum(axis=1, keepdims=True)
    return {pid: weights[:, j] for j, pid in enumerate(pids)}


@dataclass
class LearningCurve:
    occasions: list[int]
    means: list[float]
    hdi_lows: list[float]
    hdi_highs: list[float]
    slope: float
    intercept: float
    p_value: float


def learning_curve(phi_draws_by_occasion: dict[int, np.ndarray], hdi_mass: float = 0.95) -> LearningCurve:
    """Per-occasion summaries of the learning effect plus an OLS trend test.

    The slope and two-sided p-value come from an ordinary least-squares fit
    of the posterior means against the occasion number.
    """
    if len(phi_draws_by_occasion) < 2:
        raise PosteriorError("need at least 2 occasions")
    occasions = sorted(phi_draws_by_occasion)
    means, lows, highs = [], [], []
    for t in occasions:
        draws = np.asarray(phi_draws_by_occasion[t], dtype=float)
        means.append(float(draws.mean()))
        low, high = hdi(draws, hdi_mass) if len(draws) >= math.ceil(1 / (1 - hdi_mass)) else (float(draws.min()), float(draws.max()))
        lows.append(low)
        highs.append(high)
    with np.errstate(divide="ignore", invalid="ignore"):
        fit = stats.linregress(np.asarray(occasions, dtype=float), np.asarray(means))
    p_value = float(fit.pvalue)
    if math.isnan(p_value):
        p_value = 1.0  # constant means: no evidence of trend
    return LearningCurve(
        occasions=occasions,
        means=means,
        hdi_lows=lows,
        hdi_highs=highs,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        p_value=p_value,
    )


# ---------------------------------------------------------------------------
# Artifact output
# ---------------------------------------------------------------------------


def write_summary_json(summaries: list[ParamSummary], stream) -> None:
    def clean(value):
        return None if isinstance(value, float) and math.isnan(value) else value

    doc = [{key: clean(val) for key, val in asdict(s).items()} for s in summaries]
    json.dump(doc, stream, indent=1)
    stream.write("\n")


def write_groups_csv(groups: AbilityGroups, theta_summaries: dict[str, ParamSummary], n_points: dict[str, int], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["participant_id", "group", "theta_mean", "hdi_low", "hdi_high", "n_points"])
    for pid in sorted(groups.groups):
        summ = theta_summaries[pid]
        writer.writerow(
            [pid, groups.groups[pid], repr(summ.posterior_mean), repr(summ.hdi_low), repr(summ.hdi_high), n_points.get(pid, 0)]
        )


def write_weights_csv(table: WeightTable, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["participant_id", "weight"])
    for pid in sorted(table.weights):
        writer.writerow([pid, repr(table.weights[pid])])

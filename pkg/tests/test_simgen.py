"""Tests for the synthetic data generator and its brute-force oracles."""

import math

import numpy as np
import pytest

from crowdirt.model import logit, response_probability
from crowdirt.records import GoldStandard, build_response_matrix, derive_occasions
from crowdirt.simulate import (
    SimConfig,
    SimulationError,
    enumerate_vote_accuracy,
    generate,
    grid_posterior_1d,
)


class TestSimConfig:
    def test_validation(self):
        with pytest.raises(SimulationError):
            SimConfig(n_participants=0)
        with pytest.raises(SimulationError):
            SimConfig(theta_sd=0.0)

    def test_override_length_check(self):
        with pytest.raises(SimulationError, match="length"):
            generate(SimConfig(n_participants=3, theta=[0.0, 1.0]))


class TestGenerate:
    def test_deterministic(self):
        cfg = SimConfig(seed=5)
        r1, t1 = generate(cfg)
        r2, t2 = generate(cfg)
        assert r1 == r2
        np.testing.assert_array_equal(t1.params.theta, t2.params.theta)
        assert t1.true_labels == t2.true_labels
        r3, _ = generate(SimConfig(seed=6))
        assert r1 != r3

    def test_record_schema_and_counts(self):
        cfg = SimConfig(
            n_participants=4, n_images=6, points_per_image=3,
            n_cameras=2, n_occasions=2, assignments_per_point=2, seed=0,
        )
        records, truth = generate(cfg)
        # each image gets 2 participants x 3 points
        assert len(records) == 6 * 2 * 3
        for rec in records:
            assert rec.answer in ("present", "absent")
            assert rec.truth in ("present", "absent")
            assert rec.truth == truth.true_labels[rec.point_key]
            assert rec.duration_secs > 0
        assert len(truth.correctness) == len(records)
        assert len(truth.point_keys) == 18

    def test_derived_occasions_match_generative_days(self):
        cfg = SimConfig(
            n_participants=3, n_images=12, points_per_image=2,
            n_cameras=2, n_occasions=4, assignments_per_point=3, seed=1,
        )
        records, _ = generate(cfg)
        derived = derive_occasions(records)
        occ = {r.occasion for r in derived}
        assert occ <= set(range(1, 5))
        assert max(occ) >= 2  # the schedule really spreads over days

    def test_occasion_independent_of_image(self):
        # the per-participant shuffle must decorrelate occasion and image index
        cfg = SimConfig(
            n_participants=10, n_images=100, points_per_image=1,
            n_cameras=1, n_occasions=5, assignments_per_point=10, seed=2,
        )
        records, _ = generate(cfg)
        derived = derive_occasions(records)
        img_idx = np.array([int(r.image_id[3:]) for r in derived], dtype=float)
        occ = np.array([r.occasion for r in derived], dtype=float)
        assert abs(np.corrcoef(img_idx, occ)[0, 1]) < 0.1

    def test_empirical_correct_rate_matches_parameters(self):
        # fix everything; the mean correctness must match the analytic p
        p_target = response_probability(0.8, 0.0, 0.0, 1.0, 0.1)
        cfg = SimConfig(
            n_participants=4, n_images=200, points_per_image=5,
            n_cameras=1, n_occasions=1, assignments_per_point=4,
            theta=0.8, beta_point=0.0, beta_camera=0.0, alpha=1.0, eta=0.1,
            seed=3,
        )
        records, truth = generate(cfg)
        rate = np.mean([c for c in truth.correctness if c >= 0])
        n = len(truth.correctness)
        se = math.sqrt(p_target * (1 - p_target) / n)
        assert abs(rate - p_target) < 3 * se

    def test_ability_ordering_in_correctness(self):
        cfg = SimConfig(
            n_participants=2, n_images=300, points_per_image=3,
            n_cameras=1, n_occasions=1, assignments_per_point=2,
            theta=[2.0, -2.0], beta_point=0.0, beta_camera=0.0,
            alpha=1.0, eta=0.0, seed=4,
        )
        records, _ = generate(cfg)
        rate = {}
        for rec in records:
            correct = rec.answer == rec.truth
            rate.setdefault(rec.participant_id, []).append(correct)
        assert np.mean(rate["p000"]) > np.mean(rate["p001"]) + 0.2

    def test_learning_ramp_raises_late_occasion_accuracy(self):
        cfg = SimConfig(
            n_participants=10, n_images=200, points_per_image=3,
            n_cameras=1, n_occasions=2, assignments_per_point=8,
            theta=0.0, beta_point=0.0, beta_camera=0.0, alpha=1.0, eta=0.0,
            phi=[0.0, 1.5], seed=5,
        )
        records, _ = generate(cfg)
        derived = derive_occasions(records)
        by_occ = {}
        for rec in derived:
            by_occ.setdefault(rec.occasion, []).append(rec.answer == rec.truth)
        assert np.mean(by_occ[2]) > np.mean(by_occ[1]) + 0.15

    def test_unsure_rate(self):
        cfg = SimConfig(unsure_rate=0.3, seed=6)
        records, truth = generate(cfg)
        frac = np.mean([r.answer == "unsure" for r in records])
        assert frac == pytest.approx(0.3, abs=0.05)
        assert sum(c == -1 for c in truth.correctness) == sum(r.answer == "unsure" for r in records)

    def test_prevalence(self):
        cfg = SimConfig(n_images=100, points_per_image=10, prevalence=0.25, seed=7)
        _, truth = generate(cfg)
        frac = np.mean([lab == "present" for lab in truth.true_labels.values()])
        assert frac == pytest.approx(0.25, abs=0.05)

    def test_pipeline_round_trip(self):
        # generated records must survive the full parse/index pipeline
        records, truth = generate(SimConfig(seed=8))
        rm = build_response_matrix(derive_occasions(records), GoldStandard(truth.true_labels))
        assert rm.n_observations == sum(c >= 0 for c in truth.correctness)
        assert rm.n_participants <= 10

    def test_truth_json(self):
        import json

        _, truth = generate(SimConfig(seed=9))
        doc = json.loads(truth.to_json())
        assert set(doc) >= {"theta", "beta_point", "true_labels", "phi", "correctness"}
        assert len(doc["theta"]) == 10


class TestGridPosterior:
    def test_prior_recovery_with_no_data(self):
        # an uninformative observation set: zero observations is not allowed,
        # so use eta ~ 1-ish? Instead: prior dominates for a flat likelihood
        # constructed from one present and one absent vote at alpha -> 0
        y = np.array([1.0, 0.0])
        grid, dens, mean, sd = grid_posterior_1d(
            y, beta_point=0.0, beta_camera=0.0, alpha=1e-8, eta=0.0, phi=0.0, sigma_theta=1.0
        )
        assert mean == pytest.approx(0.0, abs=1e-3)
        assert sd == pytest.approx(1.0, abs=1e-2)

    def test_many_correct_answers_shift_mean_up(self):
        y = np.ones(30)
        _, _, mean, sd = grid_posterior_1d(
            y, beta_point=0.0, beta_camera=0.0, alpha=1.0, eta=0.0, phi=0.0
        )
        assert mean > 1.0
        assert sd < 1.0

    def test_symmetry(self):
        y_good = np.concatenate([np.ones(20), np.zeros(5)])
        y_bad = np.concatenate([np.zeros(20), np.ones(5)])
        _, _, m1, s1 = grid_posterior_1d(y_good, 0.0, 0.0, 1.0, 0.0, 0.0)
        _, _, m2, s2 = grid_posterior_1d(y_bad, 0.0, 0.0, 1.0, 0.0, 0.0)
        assert m1 == pytest.approx(-m2, abs=1e-6)
        assert s1 == pytest.approx(s2, abs=1e-6)

    def test_density_normalized(self):
        y = np.array([1.0, 1.0, 0.0])
        grid, dens, _, _ = grid_posterior_1d(y, 0.0, 0.0, 1.0, 0.1, 0.0)
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-9)

    def test_grid_validation(self):
        with pytest.raises(SimulationError, match="grid"):
            grid_posterior_1d(np.ones(3), 0.0, 0.0, 1.0, 0.0, 0.0, grid=np.linspace(-2, 2, 2000))
        with pytest.raises(SimulationError, match="grid"):
            grid_posterior_1d(np.ones(3), 0.0, 0.0, 1.0, 0.0, 0.0, grid=np.linspace(-6, 6, 100))


class TestEnumerateVoteAccuracy:
    def test_three_voters_example(self):
        # three independent voters each correct with 0.9:
        # majority correct with 0.9^3 + 3 * 0.9^2 * 0.1 = 0.972
        assert enumerate_vote_accuracy([0.9, 0.9, 0.9], truth=1) == pytest.approx(0.972, abs=1e-12)

    def test_tie_rule_asymmetry(self):
        # two voters, both correct with 0.5; truth present requires both to
        # vote present (strict majority): 0.25.  Truth absent wins on ties:
        # 1 - P(both wrong) = 0.75
        assert enumerate_vote_accuracy([0.5, 0.5], truth=1) == pytest.approx(0.25)
        assert enumerate_vote_accuracy([0.5, 0.5], truth=0) == pytest.approx(0.75)

    def test_weights_flip_decision(self):
        # an expert with weight 5 dominates two opposing voters
        acc_flat = enumerate_vote_accuracy([0.95, 0.2, 0.2], truth=1)
        acc_weighted = enumerate_vote_accuracy([0.95, 0.2, 0.2], truth=1, weights=[5.0, 1.0, 1.0])
        assert acc_weighted > acc_flat

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(0)
        p = rng.uniform(0.2, 0.95, size=7)
        w = rng.uniform(0.5, 2.0, size=7)
        exact = enumerate_vote_accuracy(p, truth=1, weights=w)
        n_sim = 200_000
        correct = rng.random((n_sim, 7)) < p
        w_present = np.where(correct, w, 0.0).sum(axis=1)
        w_absent = np.where(~correct, w, 0.0).sum(axis=1)
        mc = np.mean(w_present > w_absent)
        se = math.sqrt(exact * (1 - exact) / n_sim)
        assert abs(mc - exact) < 4 * se + 1e-9

    def test_errors(self):
        with pytest.raises(SimulationError, match="too_large"):
            enumerate_vote_accuracy([0.5] * 21, truth=1)
        with pytest.raises(SimulationError):
            enumerate_vote_accuracy([0.5], truth=2)
        with pytest.raises(SimulationError, match="weights"):
            enumerate_vote_accuracy([0.5, 0.5], truth=1, weights=[1.0])

    def test_probability_bounds(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            p = rng.uniform(0, 1, size=5)
            for truth in (0, 1):
                acc = enumerate_vote_accuracy(p, truth=truth)
                assert 0.0 <= acc <= 1.0

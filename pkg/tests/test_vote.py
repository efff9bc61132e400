"""Tests for the majority, weighted and group-restricted vote rules."""

from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdirt.records import ClassificationRecord
from crowdirt.vote import (
    ABSENT,
    PRESENT,
    VoteError,
    aggregate,
    group_restricted_vote,
    majority_vote,
    weighted_majority_vote,
)


def rec(pid, pt, answer, img="img1"):
    return ClassificationRecord(
        participant_id=pid,
        image_id=img,
        point_id=pt,
        camera_id="cam1",
        timestamp=datetime(2024, 1, 1, tzinfo=timezone.utc),
        answer=answer,
        duration_secs=1.0,
    )


class TestMajorityVote:
    def test_strict_majority_present(self):
        label, tally, tie = majority_vote([1, 1, 0])
        assert label == PRESENT and not tie
        assert (tally.n_present, tally.n_absent) == (2, 1)

    def test_majority_absent(self):
        label, _, tie = majority_vote([1, 0, 0])
        assert label == ABSENT and not tie

    def test_tie_goes_to_absent(self):
        label, _, tie = majority_vote([1, 0])
        assert label == ABSENT and tie

    def test_no_votes(self):
        with pytest.raises(VoteError, match="no_votes"):
            majority_vote([])

    @given(st.lists(st.sampled_from([0, 1]), min_size=1, max_size=25))
    @settings(max_examples=100, deadline=None)
    def test_strict_majority_property(self, votes):
        label, tally, tie = majority_vote(votes)
        n_present = sum(votes)
        assert label == (PRESENT if n_present > len(votes) - n_present else ABSENT)
        assert tie == (2 * n_present == len(votes))
        assert tally.n_present + tally.n_absent == len(votes)


class TestWeightedMajorityVote:
    def test_weight_overrides_count(self):
        # one expert with weight 5 beats three beginners with weight 1 each
        label, tally, tie = weighted_majority_vote([(1, 5.0), (0, 1.0), (0, 1.0), (0, 1.0)])
        assert label == PRESENT and not tie
        assert tally.weight_present == 5.0 and tally.weight_absent == 3.0

    def test_equal_mass_decides_absent(self):
        label, _, tie = weighted_majority_vote([(1, 2.0), (0, 2.0)])
        assert label == ABSENT and tie

    def test_negative_weight(self):
        with pytest.raises(VoteError, match="negative"):
            weighted_majority_vote([(1, -0.5)])

    def test_zero_weight_mass(self):
        with pytest.raises(VoteError, match="zero_weight_mass"):
            weighted_majority_vote([(1, 0.0), (0, 0.0)])

    def test_uniform_weights_match_majority(self):
        votes = [1, 1, 0, 1, 0]
        label_w, _, tie_w = weighted_majority_vote([(v, 0.2) for v in votes])
        label_m, _, tie_m = majority_vote(votes)
        assert (label_w, tie_w) == (label_m, tie_m)


class TestGroupRestrictedVote:
    def test_restriction_flips_outcome(self):
        grouped = [(0, "beginner"), (0, "beginner"), (1, "expert"), (1, "expert"), (0, "beginner")]
        label_all, _, _ = majority_vote([v for v, _ in grouped])
        label_exp, _, _, fallback = group_restricted_vote(grouped, {"expert"})
        assert label_all == ABSENT
        assert label_exp == PRESENT and not fallback

    def test_fallback_when_no_allowed_votes(self):
        grouped = [(1, "beginner"), (1, "beginner"), (0, "beginner")]
        label, _, _, fallback = group_restricted_vote(grouped, {"expert"})
        assert fallback
        assert label == PRESENT  # falls back to all votes

    def test_no_votes(self):
        with pytest.raises(VoteError, match="no_votes"):
            group_restricted_vote([], {"expert"})


class TestAggregate:
    def records(self):
        return [
            rec("p1", "pt1", "present"),
            rec("p2", "pt1", "present"),
            rec("p3", "pt1", "absent"),
            rec("p1", "pt2", "unsure"),
            rec("p2", "pt2", "unsure"),
            rec("p1", "pt3", "absent"),
            rec("p2", "pt3", "present"),
        ]

    def test_majority_counts_and_omissions(self):
        labels, report = aggregate(self.records(), "majority")
        assert report.n_points == 2
        assert report.omitted_unsure_only == 1
        assert report.omitted_keys == [("img1", "pt2")]
        by_key = {(l.image_id, l.point_id): l for l in labels}
        assert by_key[("img1", "pt1")].decided == PRESENT
        pt3 = by_key[("img1", "pt3")]
        assert pt3.decided == ABSENT and pt3.tie_broken

    def test_weighted_strategy(self):
        weights = {"p1": 3.0, "p2": 1.0, "p3": 1.0}
        labels, _ = aggregate(self.records(), "weighted", weights=weights)
        by_key = {(l.image_id, l.point_id): l for l in labels}
        # pt3: p1 absent w=3 vs p2 present w=1
        assert by_key[("img1", "pt3")].decided == ABSENT

    def test_weighted_zero_mass_falls_back(self):
        records = [rec("pX", "pt1", "present"), rec("pY", "pt1", "present")]
        labels, report = aggregate(records, "weighted", weights={"other": 1.0})
        assert labels[0].decided == PRESENT
        assert labels[0].fallback
        assert report.fallback_points == 1

    def test_group_majority(self):
        groups = {"p1": "expert", "p2": "beginner", "p3": "beginner"}
        labels, report = aggregate(
            self.records(), "group_majority", groups=groups, allowed_groups={"expert"}
        )
        by_key = {(l.image_id, l.point_id): l for l in labels}
        # pt1 restricted to p1 only: present
        assert by_key[("img1", "pt1")].decided == PRESENT
        assert not by_key[("img1", "pt1")].fallback

    def test_missing_arguments(self):
        with pytest.raises(VoteError):
            aggregate(self.records(), "weighted")
        with pytest.raises(VoteError):
            aggregate(self.records(), "group_majority")
        with pytest.raises(VoteError, match="unknown strategy"):
            aggregate(self.records(), "plurality")

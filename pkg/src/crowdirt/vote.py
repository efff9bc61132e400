"""Point-level label aggregation: plain, group-restricted and weighted majority votes."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

PRESENT = 1
ABSENT = 0

STRATEGIES = ("majority", "group_majority", "weighted")


class VoteError(ValueError):
    pass


@dataclass
class VoteTally:
    image_id: str = ""
    point_id: str = ""
    n_present: int = 0
    n_absent: int = 0
    weight_present: float = 0.0
    weight_absent: float = 0.0


@dataclass
class ConsensusLabel:
    image_id: str
    point_id: str
    decided: int  # 1 = present, 0 = absent
    strategy: str
    tally: VoteTally
    tie_broken: bool = False
    fallback: bool = False


def majority_vote(votes) -> tuple[int, VoteTally, bool]:
    """Strict-majority rule: present wins iff its vote share exceeds 0.5.

    An exact 50/50 split decides absent with ``tie_broken`` set.
    Returns (label, tally, tie_broken).
    """
    votes = list(votes)
    if not votes:
        raise VoteError("no_votes")
    n_present = sum(1 for v in votes if v == PRESENT)
    n_absent = len(votes) - n_present
    tally = VoteTally(n_present=n_present, n_absent=n_absent)
    tie = n_present == n_absent
    label = PRESENT if n_present > n_absent else ABSENT
    return label, tally, tie


def weighted_majority_vote(weighted_votes) -> tuple[int, VoteTally, bool]:
    """Weighted vote: the side with the larger weight mass wins; equal mass decides absent."""
    weighted_votes = list(weighted_votes)
    if not weighted_votes:
        raise VoteError("no_votes")
    if any(w < 0 for _, w in weighted_votes):
        raise VoteError("negative weight")
    w_present = sum(w for v, w in weighted_votes if v == PRESENT)
    w_absent = sum(w for v, w in weighted_votes if v == ABSENT)
    if w_present == 0.0 and w_absent == 0.0:
        raise VoteError("zero_weight_mass")
    n_present = sum(1 for v, _ in weighted_votes if v == PRESENT)
    tally = VoteTally(
        n_present=n_present,
        n_absent=len(weighted_votes) - n_present,
        weight_present=w_present,
        weight_absent=w_absent,
    )
    tie = w_present == w_absent
    label = PRESENT if w_present > w_absent else ABSENT
    return label, tally, tie


def group_restricted_vote(grouped_votes, allowed_groups) -> tuple[int, VoteTally, bool, bool]:
    """Majority vote over votes whose group is allowed.

    If no vote survives the filter, falls back to a majority vote over all
    votes so every point still receives a label.
    Returns (label, tally, tie_broken, fallback).
    """
    grouped_votes = list(grouped_votes)
    if not grouped_votes:
        raise VoteError("no_votes")
    allowed = set(allowed_groups)
    kept = [v for v, g in grouped_votes if g in allowed]
    fallback = not kept
    if fallback:
        kept = [v for v, _ in grouped_votes]
    label, tally, tie = majority_vote(kept)
    return label, tally, tie, fallback


def _answer_to_vote(answer: str) -> int | None:
    if answer == "present":
        return PRESENT
    if answer == "absent":
        return ABSENT
    return None  # unsure


@dataclass
class AggregateReport:
    n_points: int = 0
    omitted_unsure_only: int = 0
    fallback_points: int = 0
    omitted_keys: list[tuple[str, str]] = field(default_factory=list)


def aggregate(records, strategy, weights=None, groups=None, allowed_groups=None):
    """Produce one ConsensusLabel per (image, point) with >= 1 non-unsure vote.

    ``weights`` maps participant_id -> weight (required for "weighted");
    ``groups`` maps participant_id -> group name (required for
    "group_majority", together with ``allowed_groups``).
    Returns (labels, AggregateReport).
    """
    if strategy not in STRATEGIES:
        raise VoteError(f"unknown strategy: {strategy}")
    if strategy == "weighted" and weights is None:
        raise VoteError("weighted strategy requires weights")
    if strategy == "group_majority" and (groups is None or allowed_groups is None):
        raise VoteError("group_majority strategy requires groups and allowed_groups")

    by_point: dict[tuple[str, str], list] = {}
    for rec in records:
        by_point.setdefault(rec.point_key, []).append(rec)

    labels: list[ConsensusLabel] = []
    report = AggregateReport()
    for key, recs in by_point.items():
        votes = [(_answer_to_vote(r.answer), r.participant_id) for r in recs]
        votes = [(v, pid) for v, pid in votes if v is not None]
        if not votes:
            report.omitted_unsure_only += 1
            report.omitted_keys.append(key)
            continue
        fallback = False
        if strategy == "majority":
            label, tally, tie = majority_vote([v for v, _ in votes])
        elif strategy == "group_majority":
            grouped = [(v, groups.get(pid)) for v, pid in votes]
            label, tally, tie, fallback = group_restricted_vote(grouped, allowed_groups)
        else:
            weighted = [(v, weights.get(pid, 0.0)) for v, pid in votes]
            if all(w == 0.0 for _, w in weighted):
                # no weight mass at this point: fall back to plain majority
                label, tally, tie = majority_vote([v for v, _ in votes])
                fallback = True
            else:
                label, tally, tie = weighted_majority_vote(weighted)
        tally.image_id, tally.point_id = key
        labels.append(
            ConsensusLabel(
                image_id=key[0],
                point_id=key[1],
                decided=label,
                strategy=strategy,
                tally=tally,
                tie_broken=tie,
                fallback=fallback,
            )
        )
        report.n_points += 1
        report.fallback_points += int(fallback)
    return labels, report


def write_consensus(labels, stream) -> None:
    """Write consensus labels to CSV."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(
        [
            "image_id",
            "point_id",
            "strategy",
            "label",
            "n_present",
            "n_absent",
            "weight_present",
            "weight_absent",
            "tie_broken",
            "fallback",
        ]
    )
    for lab in labels:
        writer.writerow(
            [
                lab.image_id,
                lab.point_id,
                lab.strategy,
                "present" if lab.decided == PRESENT else "absent",
                lab.tally.n_present,
                lab.tally.n_absent,
                repr(lab.tally.weight_present),
                repr(lab.tally.weight_absent),
                str(lab.tie_broken).lower(),
                str(lab.fallback).lower(),
            ]
        )

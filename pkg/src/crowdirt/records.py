"""Parsing, validation and indexing of crowd classification records.

The input is a CSV of individual classifications (one participant's answer
for one elicitation point on one image).  From these we derive daily
classification occasions, code correctness against a gold standard, and
build the dense index structure the model consumes.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

import numpy as np

CSV_HEADER = [
    "participant_id",
    "image_id",
    "point_id",
    "camera_id",
    "timestamp",
    "answer",
    "duration_secs",
    "truth",
]

ANSWER_VALUES = ("present", "absent", "unsure")
TRUTH_VALUES = ("present", "absent")


class DataError(ValueError):
    """Hard failure in input data (schema violation, empty file, ...)."""


@dataclass(frozen=True)
class ClassificationRecord:
    participant_id: str
    image_id: str
    point_id: str
    camera_id: str
    timestamp: datetime
    answer: str
    duration_secs: float
    truth: str | None = None
    occasion: int | None = None

    @property
    def point_key(self) -> tuple[str, str]:
        return (self.image_id, self.point_id)


@dataclass
class ValidationReport:
    record_count: int = 0
    participant_count: int = 0
    image_count: int = 0
    point_count: int = 0
    camera_count: int = 0
    dropped_records: list[tuple[int, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def kept_count(self) -> int:
        return self.record_count - len(self.dropped_records)


@dataclass(frozen=True)
class GoldStandard:
    """Known true labels keyed by (image_id, point_id)."""

    truth: dict[tuple[str, str], str]

    def __post_init__(self):
        for key, value in self.truth.items():
            if value not in TRUTH_VALUES:
                raise DataError(f"gold standard label for {key} must be present/absent, got {value!r}")

    def __len__(self) -> int:
        return len(self.truth)

    def __contains__(self, key) -> bool:
        return key in self.truth

    def __getitem__(self, key) -> str:
        return self.truth[key]

    @classmethod
    def from_records(cls, records, image_ids=None) -> "GoldStandard":
        """Collect truth labels carried on records, optionally restricted to a set of images."""
        truth = {}
        for rec in records:
            if rec.truth is None:
                continue
            if image_ids is not None and rec.image_id not in image_ids:
                continue
            truth[rec.point_key] = rec.truth
        return cls(truth)


@dataclass(frozen=True)
class ResponseMatrix:
    """Correctness-coded observations restricted to gold-standard points.

    ``observations`` has one row per kept record with columns
    (participant_index, point_index, camera_index, occasion_index, correct),
    all 0-based; occasion_index is ``occasion - 1``.
    """

    observations: np.ndarray
    participants: list[str]
    points: list[tuple[str, str]]
    cameras: list[str]
    n_occasions: int

    @property
    def n_participants(self) -> int:
        return len(self.participants)

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_cameras(self) -> int:
        return len(self.cameras)

    @property
    def n_observations(self) -> int:
        return self.observations.shape[0]


def _parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_classifications(stream) -> tuple[list[ClassificationRecord], ValidationReport]:
    """Parse a CSV byte/text stream into records plus a validation report.

    Malformed rows are dropped with a reason code; duplicate
    (participant, image, point) keys keep the first occurrence.
    """
    if isinstance(stream, bytes):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    elif hasattr(stream, "read") and isinstance(stream.read(0), bytes):
        stream = io.TextIOWrapper(stream, encoding="utf-8")

    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty file: no header row") from None
    header = [h.strip() for h in header]
    for col in CSV_HEADER:
        if col not in header:
            raise DataError(f"missing column: {col}")
    for col in header:
        if col not in CSV_HEADER:
            raise DataError(f"unknown column: {col}")
    pos = {col: header.index(col) for col in CSV_HEADER}

    records: list[ClassificationRecord] = []
    report = ValidationReport()
    seen_keys: set[tuple[str, str, str]] = set()
    for row_number, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        report.record_count += 1
        if len(row) != len(header):
            report.dropped_records.append((row_number, "bad_row_length"))
            continue
        get = lambda col: row[pos[col]].strip()
        answer = get("answer")
        if answer not in ANSWER_VALUES:
            report.dropped_records.append((row_number, "bad_answer"))
            continue
        truth = get("truth") or None
        if truth is not None and truth not in TRUTH_VALUES:
            report.dropped_records.append((row_number, "bad_truth"))
            continue
        try:
            ts = _parse_timestamp(get("timestamp"))
        except ValueError:
            report.dropped_records.append((row_number, "bad_timestamp"))
            continue
        try:
            duration = float(get("duration_secs"))
        except ValueError:
            report.dropped_records.append((row_number, "bad_duration"))
            continue
        if duration < 0 or not np.isfinite(duration):
            report.dropped_records.append((row_number, "bad_duration"))
            continue
        pid, img, pt, cam = (get("participant_id"), get("image_id"), get("point_id"), get("camera_id"))
        if not (pid and img and pt and cam):
            report.dropped_records.append((row_number, "missing_field"))
            continue
        key = (pid, img, pt)
        if key in seen_keys:
            report.dropped_records.append((row_number, "duplicate_key"))
            continue
        seen_keys.add(key)
        records.append(
            ClassificationRecord(
                participant_id=pid,
                image_id=img,
                point_id=pt,
                camera_id=cam,
                timestamp=ts,
                answer=answer,
                duration_secs=duration,
                truth=truth,
            )
        )

    if report.record_count == 0:
        raise DataError("empty file: no data rows")
    report.participant_count = len({r.participant_id for r in records})
    report.image_count = len({r.image_id for r in records})
    report.point_count = len({r.point_key for r in records})
    report.camera_count = len({r.camera_id for r in records})
    report.warnings = [f"row {n}: {reason}" for n, reason in report.dropped_records]
    return records, report


def write_classifications(records, stream) -> None:
    """Serialize records back to the input CSV schema (RFC 3339 timestamps)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        ts = rec.timestamp.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")
        writer.writerow(
            [
                rec.participant_id,
                rec.image_id,
                rec.point_id,
                rec.camera_id,
                ts,
                rec.answer,
                repr(rec.duration_secs),
                rec.truth or "",
            ]
        )


def derive_occasions(records) -> list[ClassificationRecord]:
    """Number each participant's distinct UTC calendar dates 1..T_i ascending."""
    dates_by_participant: dict[str, set] = {}
    for rec in records:
        dates_by_participant.setdefault(rec.participant_id, set()).add(rec.timestamp.date())
    numbering = {
        pid: {d: t for t, d in enumerate(sorted(dates), start=1)}
        for pid, dates in dates_by_participant.items()
    }
    return [
        replace(rec, occasion=numbering[rec.participant_id][rec.timestamp.date()])
        for rec in records
    ]


def build_response_matrix(records, gold: GoldStandard) -> ResponseMatrix:
    """Code correctness against the gold standard and build dense indices.

    Records outside the gold standard or with an ``unsure`` answer are
    excluded.  Index maps are in first-appearance order over the kept
    observations.
    """
    if len(gold) == 0:
        raise DataError("gold standard is empty")
    if any(rec.occasion is None for rec in records):
        records = derive_occasions(records)

    participants: dict[str, int] = {}
    points: dict[tuple[str, str], int] = {}
    cameras: dict[str, int] = {}
    rows = []
    max_occasion = 0
    for rec in records:
        if rec.answer == "unsure" or rec.point_key not in gold:
            continue
        i = participants.setdefault(rec.participant_id, len(participants))
        k = points.setdefault(rec.point_key, len(points))
        l = cameras.setdefault(rec.camera_id, len(cameras))
        t = rec.occasion - 1
        max_occasion = max(max_occasion, rec.occasion)
        correct = 1 if rec.answer == gold[rec.point_key] else 0
        rows.append((i, k, l, t, correct))
    if not rows:
        raise DataError("no_gold_overlap: no non-unsure records match the gold standard")
    return ResponseMatrix(
        observations=np.asarray(rows, dtype=np.int64),
        participants=list(participants),
        points=list(points),
        cameras=list(cameras),
        n_occasions=max_occasion,
    )


def split_gold_standard(image_ids, fraction: float, seed) -> tuple[set[str], set[str]]:
    """Select round(fraction * n) images uniformly at random as the gold set."""
    if not 0.0 < fraction <= 1.0:
        raise DataError(f"gold fraction must be in (0, 1], got {fraction}")
    unique = sorted(set(image_ids))
    if len(unique) < 2:
        raise DataError("need at least 2 images to split")
    n_gold = round(fraction * len(unique))
    if n_gold < 1:
        raise DataError(f"fraction {fraction} selects no images out of {len(unique)}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(unique), size=n_gold, replace=False)
    gold = {unique[i] for i in chosen}
    return gold, set(unique) - gold

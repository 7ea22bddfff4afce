"""Parse raw treatment logs and derive model-ready datasets.

Hospital systems export one CSV per task type, and the schemas disagree:
some carry explicit start/end times, others only a single operation
timestamp per visit.  This module normalizes those exports into
:class:`TreatmentRecord` rows with a duration in seconds, then packs them
into a numeric :class:`Dataset` for the forest trainer.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Sequence

import numpy as np

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"

# Fixed feature layout of every dataset and trained model.
FEATURE_NAMES = ("gender", "age", "department", "doctor", "week_day", "hour_of_day")
FEATURE_KINDS = (
    "categorical",
    "numeric",
    "categorical",
    "categorical",
    "cyclic-ordinal",
    "cyclic-ordinal",
)

# Duration modes: explicit start/end endpoints, or gap to the next row of
# the same service group (single-timestamp exports such as payment logs).
MODE_INTERVAL = "interval_endpoints"
MODE_INTER_ARRIVAL = "inter_arrival"

# Placeholder for tasks that have no assigned doctor (self-service counters).
NO_DOCTOR = "none"

DROP_REASONS = ("incomplete", "inconsistent", "unmapped_task", "no_successor")


class DataError(ValueError):
    """Raised when input data cannot produce a usable dataset."""


class Gender(enum.Enum):
    FEMALE = "female"
    MALE = "male"


@dataclass(frozen=True)
class ColumnFormat:
    """Maps logical record fields to CSV column names.

    A field set to ``None`` means the export does not carry that column at
    all; parse_records leaves the field empty instead of failing.
    """

    patient_card_no: str = "patient_card_no"
    gender: str | None = "gender"
    age: str | None = "age"
    task_name: str | None = "task_name"
    department: str | None = "department"
    doctor_name: str | None = "doctor_name"
    start_time: str | None = "start_time"
    end_time: str | None = "end_time"


@dataclass
class RawRow:
    """One parsed CSV row before any validation beyond field typing."""

    patient_card_no: str
    gender: str | None
    age: int | None
    task_name: str | None
    department: str
    doctor_name: str | None
    start_time: datetime | None
    end_time: datetime | None


@dataclass(frozen=True)
class TreatmentRecord:
    """One cleaned treatment with a derived duration."""

    patient_card_no: str
    gender: Gender
    age: int
    task: str
    department: str
    doctor: str
    start_time: datetime
    duration_s: float
    week_day: int
    hour_of_day: int


@dataclass
class CleanStats:
    """Bookkeeping for clean_and_derive: every input row is kept or counted."""

    kept: int = 0
    dropped: dict[str, int] = field(
        default_factory=lambda: {reason: 0 for reason in DROP_REASONS}
    )

    @property
    def total(self) -> int:
        return self.kept + sum(self.dropped.values())

    def report(self) -> str:
        lines = [f"kept: {self.kept}"]
        lines += [f"{reason}: {self.dropped[reason]}" for reason in DROP_REASONS]
        return "\n".join(lines)


def _parse_cell(raw: str | None) -> str | None:
    if raw is None:
        return None
    raw = raw.strip()
    return raw or None


def _parse_timestamp(raw: str) -> datetime:
    return datetime.strptime(raw, TIMESTAMP_FORMAT)


def parse_records(
    rows: Iterable[Sequence[str]], fmt: ColumnFormat
) -> tuple[list[RawRow], list[tuple[int, str]]]:
    """Parse header+data rows into RawRow values plus per-row errors.

    ``rows`` is an iterable of already-split CSV rows (header first).
    A cell that is present but unparseable makes the row malformed; a
    column that the format maps to ``None`` or that is missing from the
    header just leaves the field empty.  Errors are (data_row_index,
    reason) pairs, 0-based over the data rows.
    """
    it = iter(rows)
    try:
        header = [cell.strip() for cell in next(it)]
    except StopIteration:
        raise DataError("input has no header row") from None
    positions: dict[str, int | None] = {}
    for fld in (
        "patient_card_no",
        "gender",
        "age",
        "task_name",
        "department",
        "doctor_name",
        "start_time",
        "end_time",
    ):
        column = getattr(fmt, fld)
        positions[fld] = header.index(column) if column in header else None
    if positions["patient_card_no"] is None:
        raise DataError(f"header lacks patient column {fmt.patient_card_no!r}")

    parsed: list[RawRow] = []
    errors: list[tuple[int, str]] = []
    for index, row in enumerate(it):
        if len(row) != len(header):
            errors.append((index, f"expected {len(header)} columns, got {len(row)}"))
            continue

        def cell(fld: str) -> str | None:
            pos = positions[fld]
            return _parse_cell(row[pos]) if pos is not None else None

        try:
            age_raw = cell("age")
            start_raw = cell("start_time")
            end_raw = cell("end_time")
            parsed.append(
                RawRow(
                    patient_card_no=cell("patient_card_no") or "",
                    gender=cell("gender"),
                    age=int(age_raw) if age_raw is not None else None,
                    task_name=cell("task_name"),
                    department=cell("department") or "",
                    doctor_name=cell("doctor_name"),
                    start_time=_parse_timestamp(start_raw) if start_raw else None,
                    end_time=_parse_timestamp(end_raw) if end_raw else None,
                )
            )
        except ValueError as exc:
            errors.append((index, str(exc)))
    return parsed, errors


_GENDERS = {"male": Gender.MALE, "female": Gender.FEMALE}


def clean_and_derive(
    rows: Sequence[RawRow], task_modes: Mapping[str, str]
) -> tuple[list[TreatmentRecord], CleanStats]:
    """Validate rows and derive durations; every drop is counted once.

    Interval tasks need both endpoints and a nonnegative span.  Inter-arrival
    tasks derive each row's duration from the next row of the same
    (task, department, doctor) group ordered by start time; the last row of
    a group has no successor and is dropped.
    """
    stats = CleanStats()
    # (original index, row) pairs surviving validation, per derivation mode.
    interval_rows: list[tuple[int, RawRow]] = []
    gap_groups: dict[tuple[str, str, str], list[tuple[int, RawRow]]] = {}

    for index, row in enumerate(rows):
        task = row.task_name
        if task is None:
            stats.dropped["incomplete"] += 1
            continue
        mode = task_modes.get(task)
        if mode is None:
            stats.dropped["unmapped_task"] += 1
            continue
        gender = _GENDERS.get(row.gender.lower()) if row.gender else None
        if (
            gender is None
            or row.age is None
            or not 0 <= row.age <= 130
            or row.start_time is None
            or (mode == MODE_INTERVAL and row.end_time is None)
        ):
            stats.dropped["incomplete"] += 1
            continue
        if mode == MODE_INTERVAL:
            if (row.end_time - row.start_time).total_seconds() < 0:
                stats.dropped["inconsistent"] += 1
                continue
            interval_rows.append((index, row))
        else:
            key = (task, row.department, row.doctor_name or NO_DOCTOR)
            gap_groups.setdefault(key, []).append((index, row))

    out: list[tuple[int, TreatmentRecord]] = []
    for index, row in interval_rows:
        duration = (row.end_time - row.start_time).total_seconds()
        out.append((index, _make_record(row, duration)))

    for group in gap_groups.values():
        group.sort(key=lambda pair: (pair[1].start_time, pair[0]))
        for (index, row), (_, successor) in zip(group, group[1:]):
            gap = (successor.start_time - row.start_time).total_seconds()
            out.append((index, _make_record(row, gap)))
        stats.dropped["no_successor"] += 1 if group else 0

    out.sort(key=lambda pair: pair[0])
    stats.kept = len(out)
    return [record for _, record in out], stats


def _make_record(row: RawRow, duration_s: float) -> TreatmentRecord:
    return TreatmentRecord(
        patient_card_no=row.patient_card_no,
        gender=_GENDERS[row.gender.lower()],
        age=row.age,
        task=row.task_name,
        department=row.department,
        doctor=row.doctor_name or NO_DOCTOR,
        start_time=row.start_time,
        duration_s=duration_s,
        week_day=row.start_time.weekday(),
        hour_of_day=row.start_time.hour,
    )


@dataclass(frozen=True)
class FeatureSchema:
    """Feature layout plus the category dictionaries baked into a model.

    Dictionaries map raw string values to dense ids assigned in sorted
    value order, so identical inputs always produce identical encodings.
    """

    features: tuple[tuple[str, str], ...]
    dictionaries: dict[str, dict[str, int]]

    def encode(
        self,
        gender: Gender,
        age: float,
        department: str,
        doctor: str,
        week_day: int,
        hour_of_day: int,
    ) -> np.ndarray:
        """Encode one feature vector; unseen categories map to -1."""
        return np.array(
            [
                float(self.dictionaries["gender"].get(gender.value, -1)),
                float(age),
                float(self.dictionaries["department"].get(department, -1)),
                float(self.dictionaries["doctor"].get(doctor, -1)),
                float(week_day),
                float(hour_of_day),
            ]
        )

    def to_json(self) -> dict:
        return {
            "features": [list(pair) for pair in self.features],
            "dictionaries": self.dictionaries,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "FeatureSchema":
        return cls(
            features=tuple((name, kind) for name, kind in payload["features"]),
            dictionaries={
                feature: dict(mapping)
                for feature, mapping in payload["dictionaries"].items()
            },
        )


@dataclass
class Dataset:
    """Numeric matrix view of cleaned records, ready for training."""

    X: np.ndarray
    y: np.ndarray
    schema: FeatureSchema

    @property
    def n(self) -> int:
        return int(self.y.shape[0])


def _dictionary(values: Iterable[str]) -> dict[str, int]:
    return {value: index for index, value in enumerate(sorted(set(values)))}


def build_dataset(records: Sequence[TreatmentRecord]) -> Dataset:
    """Pack records into float matrices with dense category dictionaries."""
    if not records:
        raise DataError("cannot build a dataset from zero records")
    dictionaries = {
        "gender": _dictionary(record.gender.value for record in records),
        "department": _dictionary(record.department for record in records),
        "doctor": _dictionary(record.doctor for record in records),
    }
    schema = FeatureSchema(
        features=tuple(zip(FEATURE_NAMES, FEATURE_KINDS)),
        dictionaries=dictionaries,
    )
    X = np.empty((len(records), len(FEATURE_NAMES)), dtype=np.float64)
    y = np.empty(len(records), dtype=np.float64)
    for i, record in enumerate(records):
        X[i] = schema.encode(
            record.gender,
            record.age,
            record.department,
            record.doctor,
            record.week_day,
            record.hour_of_day,
        )
        y[i] = record.duration_s
    return Dataset(X=X, y=y, schema=schema)

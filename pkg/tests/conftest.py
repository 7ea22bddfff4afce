"""Shared fixtures and small builders used across the test modules."""
from __future__ import annotations

from datetime import datetime

import numpy as np
import pytest

from hqrec.records import (
    FEATURE_KINDS,
    FEATURE_NAMES,
    FeatureSchema,
    Gender,
    TreatmentRecord,
)


def make_schema(kinds: tuple[str, ...]) -> FeatureSchema:
    """Schema with generic feature names f0..fn of the given kinds."""
    return FeatureSchema(
        features=tuple((f"f{i}", kind) for i, kind in enumerate(kinds)),
        dictionaries={"gender": {}, "department": {}, "doctor": {}},
    )


def full_schema() -> FeatureSchema:
    """The six-feature layout produced by build_dataset, empty dictionaries."""
    return FeatureSchema(
        features=tuple(zip(FEATURE_NAMES, FEATURE_KINDS)),
        dictionaries={"gender": {}, "department": {}, "doctor": {}},
    )


def make_record(
    duration_s: float,
    *,
    patient: str = "P1",
    gender: Gender = Gender.FEMALE,
    age: int = 40,
    task: str = "checkup",
    department: str = "clinic-1",
    doctor: str = "Dr. A",
    start: datetime | None = None,
) -> TreatmentRecord:
    start = start or datetime(2015, 10, 5, 9, 0, 0)
    return TreatmentRecord(
        patient_card_no=patient,
        gender=gender,
        age=age,
        task=task,
        department=department,
        doctor=doctor,
        start_time=start,
        duration_s=duration_s,
        week_day=start.weekday(),
        hour_of_day=start.hour,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)

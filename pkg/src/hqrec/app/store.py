"""Live queue state with a revisioned, replayable mutation log.

Every accepted mutation bumps the revision by exactly one and, when a log
path is configured, appends one JSON line describing it.  Replaying the
log against an empty store rebuilds the live state, which is also how the
service recovers queue contents across restarts.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from hqrec.hqr import (
    PATIENT_STATUSES,
    STATUS_IN_SERVICE,
    STATUS_WAITING,
    PatientDescriptor,
    UnknownTaskError,
)
from hqrec.records import Gender

OPS = ("enqueue", "start_service", "complete")


class UnknownPatientError(ValueError):
    def __init__(self, task_id: str, patient_id: str):
        super().__init__(f"no patient {patient_id!r} in queue {task_id!r}")
        self.task_id = task_id
        self.patient_id = patient_id


class IllegalTransitionError(ValueError):
    """Raised for out-of-order lifecycle ops (e.g. complete before start)."""


class LogCorruptError(ValueError):
    """Raised when a mutation log cannot replay cleanly."""


@dataclass(frozen=True)
class TaskQueueSpec:
    """Static description of one task's queue."""

    task_id: str
    department: str
    doctor: str
    windows: int


def _patient_to_json(patient: PatientDescriptor) -> dict:
    return {
        "patient_id": patient.patient_id,
        "gender": patient.gender.value,
        "age": patient.age,
    }


def patient_from_json(payload: Mapping) -> PatientDescriptor:
    try:
        patient_id = payload["patient_id"]
        gender = Gender(payload["gender"])
        age = int(payload["age"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad patient payload: {exc}") from None
    if not isinstance(patient_id, str) or not patient_id:
        raise ValueError("patient_id must be a non-empty string")
    if not 0 <= age <= 130:
        raise ValueError(f"age {age} out of range [0,130]")
    status = payload.get("status", STATUS_WAITING)
    if status not in PATIENT_STATUSES:
        raise ValueError(f"status must be one of {PATIENT_STATUSES}")
    return PatientDescriptor(patient_id=patient_id, gender=gender, age=age, status=status)


class QueueStore:
    """Ordered per-task queues guarded by a lock and an append-only log."""

    def __init__(
        self,
        specs: Mapping[str, TaskQueueSpec],
        log_path: str | Path | None = None,
    ):
        self.specs = dict(specs)
        self._queues: dict[str, list[PatientDescriptor]] = {
            task_id: [] for task_id in self.specs
        }
        self._revision = 0
        self._lock = threading.Lock()
        self._log_path = Path(log_path) if log_path is not None else None
        if self._log_path is not None and self._log_path.exists():
            self._replay_into_self(
                self._log_path.read_text(encoding="utf-8").splitlines()
            )

    @property
    def revision(self) -> int:
        return self._revision

    def mutate(
        self,
        task_id: str,
        op: str,
        patient: PatientDescriptor | None = None,
        patient_id: str | None = None,
    ) -> int:
        """Apply one mutation; returns the new revision.

        enqueue takes a full patient descriptor; start_service and
        complete take a patient_id already present in the queue.
        """
        with self._lock:
            revision = self._apply(task_id, op, patient, patient_id)
            self._append_log(task_id, op, patient, patient_id, revision)
            return revision

    def _apply(
        self,
        task_id: str,
        op: str,
        patient: PatientDescriptor | None,
        patient_id: str | None,
    ) -> int:
        queue = self._queues.get(task_id)
        if queue is None:
            raise UnknownTaskError(task_id)
        if op == "enqueue":
            if patient is None:
                raise ValueError("enqueue needs a patient descriptor")
            if any(p.patient_id == patient.patient_id for p in queue):
                raise IllegalTransitionError(
                    f"patient {patient.patient_id!r} is already in queue {task_id!r}"
                )
            queue.append(
                PatientDescriptor(
                    patient.patient_id, patient.gender, patient.age, STATUS_WAITING
                )
            )
        elif op in ("start_service", "complete"):
            if patient_id is None:
                raise ValueError(f"{op} needs a patient_id")
            index = next(
                (i for i, p in enumerate(queue) if p.patient_id == patient_id), None
            )
            if index is None:
                raise UnknownPatientError(task_id, patient_id)
            current = queue[index]
            if op == "start_service":
                if current.status != STATUS_WAITING:
                    raise IllegalTransitionError(
                        f"patient {patient_id!r} is already in service"
                    )
                queue[index] = PatientDescriptor(
                    current.patient_id, current.gender, current.age, STATUS_IN_SERVICE
                )
            else:
                if current.status != STATUS_IN_SERVICE:
                    raise IllegalTransitionError(
                        f"cannot complete {patient_id!r} before service starts"
                    )
                del queue[index]
        else:
            raise ValueError(f"op must be one of {OPS}")
        self._revision += 1
        return self._revision

    def _append_log(
        self,
        task_id: str,
        op: str,
        patient: PatientDescriptor | None,
        patient_id: str | None,
        revision: int,
    ) -> None:
        if self._log_path is None:
            return
        entry: dict = {"revision": revision, "task": task_id, "op": op}
        if op == "enqueue":
            entry["patient"] = _patient_to_json(patient)
        else:
            entry["patient_id"] = patient_id
        with self._log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def snapshot(self) -> tuple[int, dict[str, tuple[PatientDescriptor, ...]]]:
        """Consistent (revision, queue contents) under the lock."""
        with self._lock:
            return self._revision, {
                task_id: tuple(queue) for task_id, queue in self._queues.items()
            }

    def _replay_into_self(self, lines: Iterable[str]) -> None:
        for number, line in enumerate(lines, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogCorruptError(f"log line {number}: {exc}") from None
            expected = self._revision + 1
            if entry.get("revision") != expected:
                raise LogCorruptError(
                    f"log line {number}: revision {entry.get('revision')} "
                    f"does not continue from {self._revision}"
                )
            patient = (
                patient_from_json(entry["patient"]) if "patient" in entry else None
            )
            try:
                self._apply(
                    entry["task"], entry["op"], patient, entry.get("patient_id")
                )
            except ValueError as exc:
                raise LogCorruptError(f"log line {number}: {exc}") from None

    @classmethod
    def replay(
        cls, specs: Mapping[str, TaskQueueSpec], lines: Iterable[str]
    ) -> "QueueStore":
        """Rebuild a store from logged mutations (no log attached)."""
        store = cls(specs)
        store._replay_into_self(lines)
        return store

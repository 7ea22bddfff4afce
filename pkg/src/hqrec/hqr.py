"""Queue wait estimates and visit-order recommendation.

The wait for a queue is the predicted treatment time of everyone already
in it (waiting or in service) spread across the service windows.  A plan
visits queues in ascending predicted wait, except that a task's
prerequisites are pulled in front of it, keeping their own ascending
order among themselves.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Mapping, Sequence

import numpy as np

from hqrec.forest.model import ForestModel, predict, predict_batch
from hqrec.records import Gender

STATUS_WAITING = "waiting"
STATUS_IN_SERVICE = "in_service"
PATIENT_STATUSES = (STATUS_WAITING, STATUS_IN_SERVICE)


class UnknownTaskError(ValueError):
    """A requested task has no model or no queue."""

    def __init__(self, task_id: str):
        super().__init__(f"unknown task: {task_id!r}")
        self.task_id = task_id


class DependencyCycleError(ValueError):
    """The dependency pairs loop; names the tasks on the cycle."""

    def __init__(self, cycle: Sequence[str]):
        super().__init__("cyclic dependencies: " + " -> ".join(cycle))
        self.cycle = tuple(cycle)


class InvalidRequestError(ValueError):
    """Structurally bad recommendation request (empty or duplicated tasks)."""


@dataclass(frozen=True)
class PatientDescriptor:
    patient_id: str
    gender: Gender
    age: int
    status: str = STATUS_WAITING


@dataclass(frozen=True)
class QueueContext:
    """Where and when the queue is being served."""

    department: str
    doctor: str
    when: datetime


@dataclass(frozen=True)
class QueueState:
    task_id: str
    context: QueueContext
    windows: int
    patients: tuple[PatientDescriptor, ...]


@dataclass(frozen=True)
class TaskRequest:
    patient: PatientDescriptor
    tasks: tuple[str, ...]
    dependencies: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class PlanEntry:
    task_id: str
    predicted_wait_s: float
    queue_length: int


@dataclass(frozen=True)
class RecommendationPlan:
    entries: tuple[PlanEntry, ...]

    @property
    def task_order(self) -> tuple[str, ...]:
        return tuple(entry.task_id for entry in self.entries)


def _encode_patient(
    model: ForestModel, patient: PatientDescriptor, context: QueueContext
) -> np.ndarray:
    return model.schema.encode(
        gender=patient.gender,
        age=patient.age,
        department=context.department,
        doctor=context.doctor,
        week_day=context.when.weekday(),
        hour_of_day=context.when.hour,
    )


def predict_patient_time(
    model: ForestModel, patient: PatientDescriptor, context: QueueContext
) -> float:
    """Predicted treatment seconds for one patient in one queue's context."""
    return predict(model, _encode_patient(model, patient, context))


def predict_queue_wait(model: ForestModel, queue: QueueState) -> float:
    """Expected seconds until a newcomer reaches a window.

    Sums the predicted treatment time of every patient currently in the
    queue (in service counts too) and divides by the window count.  An
    empty queue waits zero seconds.
    """
    if queue.windows < 1:
        raise ValueError(f"queue {queue.task_id!r} must have at least one window")
    if not queue.patients:
        return 0.0
    rows = np.stack(
        [_encode_patient(model, patient, queue.context) for patient in queue.patients]
    )
    return float(predict_batch(model, rows).sum() / queue.windows)


def _check_cycles(tasks: Sequence[str], edges: Sequence[tuple[str, str]]) -> None:
    followers: dict[str, list[str]] = {task: [] for task in tasks}
    pending: dict[str, int] = {task: 0 for task in tasks}
    for before, after in edges:
        followers[before].append(after)
        pending[after] += 1
    frontier = [task for task in tasks if pending[task] == 0]
    seen = 0
    while frontier:
        seen += 1
        for follower in followers[frontier.pop()]:
            pending[follower] -= 1
            if pending[follower] == 0:
                frontier.append(follower)
    if seen != len(tasks):
        cycle = sorted(task for task in tasks if pending[task] > 0)
        raise DependencyCycleError(cycle)


def recommend(
    models: Mapping[str, ForestModel],
    queues: Mapping[str, QueueState],
    request: TaskRequest,
) -> RecommendationPlan:
    """Order the requested tasks by predicted wait, honouring dependencies.

    Dependency pairs whose endpoints are not both in the requested set are
    ignored; the caller may hold one dependency graph for many different
    task subsets.  Raises UnknownTaskError for tasks without a model or
    queue and DependencyCycleError when the relevant pairs loop.
    """
    if not request.tasks:
        raise InvalidRequestError("request contains no tasks")
    if len(set(request.tasks)) != len(request.tasks):
        raise InvalidRequestError("request lists a task twice")
    for task in request.tasks:
        if task not in models or task not in queues:
            raise UnknownTaskError(task)

    requested = set(request.tasks)
    edges = [
        (before, after)
        for before, after in request.dependencies
        if before in requested and after in requested
    ]
    _check_cycles(request.tasks, edges)

    waits = {task: predict_queue_wait(models[task], queues[task]) for task in request.tasks}
    ascending = sorted(request.tasks, key=lambda task: (waits[task], task))
    rank = {task: position for position, task in enumerate(ascending)}
    prerequisites: dict[str, list[str]] = {task: [] for task in request.tasks}
    for before, after in edges:
        prerequisites[after].append(before)
    for befores in prerequisites.values():
        befores.sort(key=rank.__getitem__)

    placed: set[str] = set()
    order: list[str] = []

    def emit(task: str) -> None:
        if task in placed:
            return
        placed.add(task)
        for before in prerequisites[task]:
            emit(before)
        order.append(task)

    for task in ascending:
        emit(task)

    return RecommendationPlan(
        entries=tuple(
            PlanEntry(
                task_id=task,
                predicted_wait_s=waits[task],
                queue_length=len(queues[task].patients),
            )
            for task in order
        )
    )

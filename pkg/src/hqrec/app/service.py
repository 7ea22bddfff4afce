"""HTTP service: live queues, wait predictions and recommendations.

All handlers read one consistent store snapshot per request, so two
requests observing the same revision see identical queue contents.  Waits
travel as minutes rounded to 0.1 to match what patients see on screen.
"""
from __future__ import annotations

from datetime import datetime
from typing import Callable, Mapping

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from hqrec import hqr
from hqrec.app.store import (
    IllegalTransitionError,
    QueueStore,
    TaskQueueSpec,
    UnknownPatientError,
    patient_from_json,
)
from hqrec.forest.model import ForestModel
from hqrec.hqr import (
    DependencyCycleError,
    InvalidRequestError,
    PatientDescriptor,
    QueueContext,
    QueueState,
    UnknownTaskError,
)


def _minutes(seconds: float) -> float:
    return round(seconds / 60.0, 1)


class _ApiError(Exception):
    def __init__(self, status: int, message: str):
        self.status = status
        self.message = message


def create_app(
    models: Mapping[str, ForestModel],
    store: QueueStore,
    clock: Callable[[], datetime] | None = None,
) -> FastAPI:
    """Wire the service around trained models and a queue store.

    Every task in the store must have a model; predictions for a queue
    use that task's department/doctor and the clock's current time.
    """
    missing = sorted(set(store.specs) - set(models))
    if missing:
        raise ValueError(f"no model for tasks: {', '.join(missing)}")
    now = clock if clock is not None else datetime.now

    app = FastAPI(title="treatment queue service")
    # The browser UI may be served from a different origin (static file
    # server); the API is read-mostly and unauthenticated either way.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(_ApiError)
    async def on_api_error(_request: Request, exc: _ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content={"detail": exc.message})

    def queue_state(
        spec: TaskQueueSpec, patients: tuple[PatientDescriptor, ...], when: datetime
    ) -> QueueState:
        return QueueState(
            task_id=spec.task_id,
            context=QueueContext(
                department=spec.department, doctor=spec.doctor, when=when
            ),
            windows=spec.windows,
            patients=patients,
        )

    async def read_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise _ApiError(400, "request body is not valid JSON") from None
        if not isinstance(body, dict):
            raise _ApiError(400, "request body must be a JSON object")
        return body

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "revision": store.revision}

    @app.get("/tasks")
    def list_tasks() -> list[dict]:
        revision, queues = store.snapshot()
        return [
            {
                "task_id": task_id,
                "windows": spec.windows,
                "queue_length": len(queues[task_id]),
                "revision": revision,
            }
            for task_id, spec in sorted(store.specs.items())
        ]

    @app.get("/queues/{task_id}")
    def queue_detail(task_id: str) -> dict:
        revision, queues = store.snapshot()
        spec = store.specs.get(task_id)
        if spec is None:
            raise _ApiError(404, f"unknown task: {task_id!r}")
        when = now()
        state = queue_state(spec, queues[task_id], when)
        model = models[task_id]
        entries = [
            {
                "patient_id": patient.patient_id,
                "gender": patient.gender.value,
                "age": patient.age,
                "status": patient.status,
                "predicted_min": _minutes(
                    hqr.predict_patient_time(model, patient, state.context)
                ),
            }
            for patient in state.patients
        ]
        return {
            "task_id": task_id,
            "revision": revision,
            "windows": spec.windows,
            "department": spec.department,
            "doctor": spec.doctor,
            "queue_length": len(entries),
            "predicted_wait_min": _minutes(hqr.predict_queue_wait(model, state)),
            "patients": entries,
        }

    @app.post("/recommend")
    async def recommend(request: Request) -> dict:
        body = await read_body(request)
        try:
            patient = patient_from_json(body.get("patient") or {})
        except ValueError as exc:
            raise _ApiError(400, str(exc)) from None
        tasks = body.get("tasks")
        if not isinstance(tasks, list) or not all(isinstance(t, str) for t in tasks):
            raise _ApiError(400, "tasks must be a list of task ids")
        raw_deps = body.get("dependencies", [])
        if not isinstance(raw_deps, list) or not all(
            isinstance(d, (list, tuple)) and len(d) == 2 for d in raw_deps
        ):
            raise _ApiError(400, "dependencies must be a list of [before, after] pairs")
        revision, queues = store.snapshot()
        when = now()
        states = {
            task_id: queue_state(spec, queues[task_id], when)
            for task_id, spec in store.specs.items()
        }
        try:
            plan = hqr.recommend(
                models,
                states,
                hqr.TaskRequest(
                    patient=patient,
                    tasks=tuple(tasks),
                    dependencies=tuple((d[0], d[1]) for d in raw_deps),
                ),
            )
        except InvalidRequestError as exc:
            raise _ApiError(400, str(exc)) from None
        except UnknownTaskError as exc:
            raise _ApiError(404, str(exc)) from None
        except DependencyCycleError as exc:
            raise _ApiError(422, str(exc)) from None
        return {
            "revision": revision,
            "plan": [
                {
                    "task_id": entry.task_id,
                    "predicted_wait_min": _minutes(entry.predicted_wait_s),
                    "queue_length": entry.queue_length,
                }
                for entry in plan.entries
            ],
        }

    @app.post("/queues/{task_id}/mutations")
    async def mutate(task_id: str, request: Request) -> dict:
        body = await read_body(request)
        op = body.get("op")
        if op not in ("enqueue", "start_service", "complete"):
            raise _ApiError(400, "op must be enqueue, start_service or complete")
        try:
            if op == "enqueue":
                patient = patient_from_json(body.get("patient") or {})
                revision = store.mutate(task_id, op, patient=patient)
            else:
                patient_id = body.get("patient_id")
                if not isinstance(patient_id, str) or not patient_id:
                    raise _ApiError(400, f"{op} needs a patient_id")
                revision = store.mutate(task_id, op, patient_id=patient_id)
        except UnknownTaskError as exc:
            raise _ApiError(404, str(exc)) from None
        except UnknownPatientError as exc:
            raise _ApiError(404, str(exc)) from None
        except IllegalTransitionError as exc:
            raise _ApiError(409, str(exc)) from None
        except ValueError as exc:
            raise _ApiError(400, str(exc)) from None
        return {"revision": revision}

    return app

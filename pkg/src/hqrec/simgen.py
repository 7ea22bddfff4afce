"""Synthetic treatment history and a discrete-event queue simulator.

The generator replaces a proprietary hospital log: service durations are
log-normal around a per-task base adjusted for age and gender, arrivals
follow a two-peak daily profile, and a configurable fraction of rows is
corrupted to extreme values the way real logs are (records left open for
hours, or closed almost immediately).

The simulator replays synthetic patients through the task queues under
either the recommendation policy or a fixed visit order, with common
random numbers so the two policies see identical arrivals and services.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta
from typing import Mapping, Sequence

import numpy as np

from hqrec import hqr
from hqrec.forest.model import ForestModel
from hqrec.records import NO_DOCTOR, Gender, TreatmentRecord

POLICY_HQR = "hqr"
POLICY_FIFO = "fifo_fixed_order"
POLICIES = (POLICY_HQR, POLICY_FIFO)


class SimConfigError(ValueError):
    """Raised for out-of-range generator or simulation settings."""


@dataclass(frozen=True)
class TaskProfile:
    """Shape of one task's service times and staffing.

    The mean service duration for a patient is base_service_s plus
    age_slope per year over 40, plus young_slope per year under 20, plus
    gender_offset_s for female patients.  Individual draws are log-normal
    around that mean with the given sigma.
    """

    task_id: str
    department: str
    doctor: str | None
    windows: int
    daily_patients: float
    base_service_s: float
    age_slope: float = 0.0
    young_slope: float = 0.0
    gender_offset_s: float = 0.0
    sigma: float = 0.22
    noise_fraction: float = 0.015
    #: Every simulated patient visits mandatory tasks (e.g. the cashier)
    #: regardless of how many tasks they were assigned.
    mandatory: bool = False

    def mean_service_s(self, age: float, gender: Gender) -> float:
        mean = self.base_service_s
        mean += self.age_slope * max(0.0, age - 40.0)
        mean += self.young_slope * max(0.0, 20.0 - age)
        if gender is Gender.FEMALE:
            mean += self.gender_offset_s
        return mean


# Two arrival peaks: registration-heavy mornings and a busy afternoon.
DEFAULT_HOURLY_WEIGHTS = (
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    0.2, 1.0, 5.0, 8.0, 8.0, 6.0,
    2.0, 2.5, 5.0, 7.0, 6.5, 4.0,
    1.5, 0.5, 0.2, 0.0, 0.0, 0.0,
)


def default_task_profiles() -> tuple[TaskProfile, ...]:
    return (
        TaskProfile(
            task_id="checkup", department="outpatient-2", doctor="Dr. Chen",
            windows=22, daily_patients=55, base_service_s=300,
            age_slope=6.0, young_slope=10.0, gender_offset_s=25.0,
        ),
        TaskProfile(
            task_id="CT scan", department="CT-5", doctor="Dr. Li",
            windows=17, daily_patients=40, base_service_s=235,
            age_slope=11.0, young_slope=25.0, gender_offset_s=20.0,
        ),
        TaskProfile(
            task_id="MR scan", department="MR-3", doctor="Dr. Zhou",
            windows=36, daily_patients=25, base_service_s=480,
            age_slope=8.0, young_slope=12.0, gender_offset_s=30.0,
        ),
        TaskProfile(
            task_id="blood test", department="lab-1", doctor="Dr. Sun",
            windows=11, daily_patients=70, base_service_s=150,
            age_slope=2.0, young_slope=6.0, gender_offset_s=10.0,
        ),
        TaskProfile(
            task_id="pharmacy", department="pharmacy-1", doctor=None,
            windows=6, daily_patients=75, base_service_s=120,
            age_slope=1.0, young_slope=0.0, gender_offset_s=5.0,
            mandatory=True,
        ),
        TaskProfile(
            task_id="payment", department="cashier-6", doctor=None,
            windows=3, daily_patients=85, base_service_s=60,
            mandatory=True,
        ),
    )


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    days: int = 30
    start_date: date = date(2015, 10, 5)  # a Monday
    tasks: tuple[TaskProfile, ...] = field(default_factory=default_task_profiles)
    hourly_weights: tuple[float, ...] = DEFAULT_HOURLY_WEIGHTS
    weekend_damping: float = 0.45

    def __post_init__(self) -> None:
        if self.days < 0:
            raise SimConfigError("days must be nonnegative")
        if len(self.hourly_weights) != 24:
            raise SimConfigError("hourly_weights needs exactly 24 entries")
        if any(w < 0 for w in self.hourly_weights):
            raise SimConfigError("hourly weights must be nonnegative")
        if sum(self.hourly_weights) <= 0:
            raise SimConfigError("hourly weights must not all be zero")
        if not 0.0 <= self.weekend_damping <= 1.0:
            raise SimConfigError("weekend_damping must lie in [0,1]")
        for task in self.tasks:
            if not 0.0 <= task.noise_fraction <= 0.5:
                raise SimConfigError(
                    f"noise_fraction for {task.task_id!r} must lie in [0,0.5]"
                )
            if task.windows < 1:
                raise SimConfigError(f"{task.task_id!r} needs at least one window")

    def with_noise(self, noise_fraction: float) -> "GeneratorConfig":
        """Copy of this config with every task's noise set to one value."""
        return replace(
            self,
            tasks=tuple(replace(t, noise_fraction=noise_fraction) for t in self.tasks),
        )


def _draw_duration(
    rng: np.random.Generator, profile: TaskProfile, age: int, gender: Gender
) -> float:
    mean = profile.mean_service_s(age, gender)
    draw = rng.lognormal(math.log(mean) - profile.sigma**2 / 2.0, profile.sigma)
    return max(1.0, float(np.round(draw)))


def _corrupt(rng: np.random.Generator, duration: float) -> float:
    # Both corruption modes seen in real logs: a record left open while the
    # patient was interrupted, or one closed almost immediately.
    if rng.random() < 0.5:
        factor = rng.uniform(4.0, 12.0)
    else:
        factor = rng.uniform(0.02, 0.2)
    return max(1.0, float(np.round(duration * factor)))


def generate_history(config: GeneratorConfig) -> list[TreatmentRecord]:
    """Synthesize a treatment log; identical configs give identical rows."""
    rng = np.random.default_rng(config.seed)
    weights = np.asarray(config.hourly_weights, dtype=np.float64)
    weights = weights / weights.sum()
    records: list[TreatmentRecord] = []
    serial = 0
    for day in range(config.days):
        day_date = config.start_date + timedelta(days=day)
        damping = config.weekend_damping if day_date.weekday() >= 5 else 1.0
        for profile in config.tasks:
            count = int(rng.poisson(profile.daily_patients * damping))
            for _ in range(count):
                serial += 1
                hour = int(rng.choice(24, p=weights))
                minute = int(rng.integers(0, 60))
                second = int(rng.integers(0, 60))
                age = int(rng.integers(1, 96))
                gender = Gender.MALE if rng.random() < 0.5 else Gender.FEMALE
                duration = _draw_duration(rng, profile, age, gender)
                if rng.random() < profile.noise_fraction:
                    duration = _corrupt(rng, duration)
                start = datetime(
                    day_date.year, day_date.month, day_date.day, hour, minute, second
                )
                records.append(
                    TreatmentRecord(
                        patient_card_no=f"P{serial:06d}",
                        gender=gender,
                        age=age,
                        task=profile.task_id,
                        department=profile.department,
                        doctor=profile.doctor or NO_DOCTOR,
                        start_time=start,
                        duration_s=duration,
                        week_day=start.weekday(),
                        hour_of_day=hour,
                    )
                )
    return records


@dataclass(frozen=True)
class SimConfig:
    patients: int = 200
    tasks_per_patient: int = 3
    policy: str = POLICY_HQR
    dependency_fraction: float = 0.25
    seed: int = 0
    day_index: int = 0  # offset from the generator start date (a Monday)

    def __post_init__(self) -> None:
        if self.patients < 1:
            raise SimConfigError("patients must be at least 1")
        if not 2 <= self.tasks_per_patient <= 6:
            raise SimConfigError("tasks_per_patient must lie in [2,6]")
        if self.policy not in POLICIES:
            raise SimConfigError(f"policy must be one of {POLICIES}")
        if not 0.0 <= self.dependency_fraction <= 1.0:
            raise SimConfigError("dependency_fraction must lie in [0,1]")


@dataclass
class SimPatient:
    """One simulated visit with all random draws fixed up front."""

    patient_id: str
    gender: Gender
    age: int
    arrival_s: float
    tasks: tuple[str, ...]
    dependencies: tuple[tuple[str, str], ...]
    service_s: dict[str, float]


@dataclass
class SimResult:
    policy: str
    average_wait_min: float
    waits_min: np.ndarray
    utilization: dict[str, float]
    span_min: float
    service_intervals: dict[str, list[tuple[float, float]]]


def draw_patients(sim: SimConfig, gen: GeneratorConfig) -> list[SimPatient]:
    """Pre-draw every policy-independent random quantity for one run.

    Both policies replay the same list, which is what makes the policy
    comparison a common-random-numbers experiment.  The draws do not
    depend on tasks_per_patient either: each patient gets a full
    priority list over all tasks (mandatory ones first, optional ones by
    popularity) and a run at level L keeps the first L entries.  Runs at
    different levels therefore share the same crowd and differ only in
    how many tasks every patient has to finish.
    """
    if sim.tasks_per_patient > len(gen.tasks):
        raise SimConfigError(
            f"tasks_per_patient {sim.tasks_per_patient} exceeds the "
            f"{len(gen.tasks)} configured tasks"
        )
    rng = np.random.default_rng([sim.seed])
    weights = np.asarray(gen.hourly_weights, dtype=np.float64)
    weights = weights / weights.sum()
    profiles = {profile.task_id: profile for profile in gen.tasks}
    mandatory = [p.task_id for p in gen.tasks if p.mandatory]
    optional = [p.task_id for p in gen.tasks if not p.mandatory]
    # Optional tasks are ranked with popularity proportional to their
    # historical daily volume, so common errands stay common in the
    # simulated crowd.
    opt_weights = np.asarray(
        [profiles[t].daily_patients for t in optional], dtype=np.float64
    )
    opt_weights = opt_weights / opt_weights.sum()
    patients = []
    for i in range(sim.patients):
        hour = int(rng.choice(24, p=weights))
        arrival = hour * 3600.0 + float(rng.integers(0, 3600))
        age = int(rng.integers(1, 96))
        gender = Gender.MALE if rng.random() < 0.5 else Gender.FEMALE
        opt_rank = rng.choice(
            len(optional), size=len(optional), replace=False, p=opt_weights
        )
        priority = [mandatory[j] for j in rng.permutation(len(mandatory))]
        priority += [optional[j] for j in opt_rank]
        keep = set(priority[: sim.tasks_per_patient])
        # Listed order: mandatory counters come first (entry formalities
        # such as paying the registration fee), then the treatments in one
        # full-length shuffle so the order of the kept tasks is stable
        # when the level grows.
        front = [mandatory[j] for j in rng.permutation(len(mandatory))]
        listing = rng.permutation(len(optional))
        rest = (optional[j] for j in listing)
        tasks = tuple(t for t in front if t in keep) + tuple(
            t for t in rest if t in keep
        )
        edge_draws = rng.random(len(priority))
        edges = tuple(
            (tasks[j], tasks[j + 1])
            for j in range(len(tasks) - 1)
            if edge_draws[j] < sim.dependency_fraction
        )
        service = {
            task: _draw_duration(rng, profiles[task], age, gender)
            for task in priority
        }
        patients.append(
            SimPatient(
                patient_id=f"S{i:05d}",
                gender=gender,
                age=age,
                arrival_s=arrival,
                tasks=tasks,
                dependencies=edges,
                service_s={task: service[task] for task in tasks},
            )
        )
    return patients


@dataclass
class _TaskLane:
    """Live state of one task's queue during a run."""

    profile: TaskProfile
    waiting: list[tuple[str, float]] = field(default_factory=list)  # (pid, since)
    in_service: set[str] = field(default_factory=set)
    busy: int = 0
    busy_s: float = 0.0
    intervals: list[tuple[float, float]] = field(default_factory=list)


def run_queue_network(
    patients: Sequence[SimPatient],
    gen: GeneratorConfig,
    policy: str,
    models: Mapping[str, ForestModel] | None,
    day_start: datetime,
) -> SimResult:
    """Event-driven replay of the patients through the task queues.

    Events fire in timestamp order; each task queue is FIFO across its
    parallel windows.  The hqr policy re-plans after every completed task
    against the live queues; the fixed policy follows the patient's listed
    order.  Travel time between tasks is zero.
    """
    if policy not in POLICIES:
        raise SimConfigError(f"policy must be one of {POLICIES}")
    if policy == POLICY_HQR and not models:
        raise SimConfigError("hqr policy needs a model per task")
    lanes = {p.task_id: _TaskLane(profile=p) for p in gen.tasks}
    by_id = {patient.patient_id: patient for patient in patients}
    remaining = {p.patient_id: set(p.tasks) for p in patients}
    waits = {p.patient_id: 0.0 for p in patients}
    genders = {p.patient_id: p.gender for p in patients}
    ages = {p.patient_id: p.age for p in patients}

    heap: list[tuple[float, int, str, str, str]] = []
    seq = 0
    for patient in patients:
        heapq.heappush(heap, (patient.arrival_s, seq, "arrive", patient.patient_id, ""))
        seq += 1

    def snapshot(task_id: str, now: float) -> hqr.QueueState:
        lane = lanes[task_id]
        members = [
            hqr.PatientDescriptor(pid, genders[pid], ages[pid], hqr.STATUS_IN_SERVICE)
            for pid in sorted(lane.in_service)
        ] + [
            hqr.PatientDescriptor(pid, genders[pid], ages[pid], hqr.STATUS_WAITING)
            for pid, _ in lane.waiting
        ]
        return hqr.QueueState(
            task_id=task_id,
            context=hqr.QueueContext(
                department=lane.profile.department,
                doctor=lane.profile.doctor or NO_DOCTOR,
                when=day_start + timedelta(seconds=now),
            ),
            windows=lane.profile.windows,
            patients=tuple(members),
        )

    def next_task(patient: SimPatient, now: float) -> str:
        todo = remaining[patient.patient_id]
        done = [t for t in patient.tasks if t not in todo]
        if policy == POLICY_FIFO:
            blocked = {
                after
                for before, after in patient.dependencies
                if before not in done
            }
            for task in patient.tasks:
                if task in todo and task not in blocked:
                    return task
            raise RuntimeError("dependency deadlock in fixed-order policy")
        request = hqr.TaskRequest(
            patient=hqr.PatientDescriptor(
                patient.patient_id, patient.gender, patient.age
            ),
            tasks=tuple(t for t in patient.tasks if t in todo),
            dependencies=tuple(
                (b, a) for b, a in patient.dependencies if b in todo and a in todo
            ),
        )
        queues = {task: snapshot(task, now) for task in request.tasks}
        plan = hqr.recommend(models, queues, request)
        return plan.entries[0].task_id

    def start_service(task_id: str, pid: str, now: float) -> None:
        nonlocal seq
        lane = lanes[task_id]
        lane.busy += 1
        lane.in_service.add(pid)
        duration = by_id[pid].service_s[task_id]
        lane.busy_s += duration
        lane.intervals.append((now, now + duration))
        heapq.heappush(heap, (now + duration, seq, "depart", pid, task_id))
        seq += 1

    def join(task_id: str, pid: str, now: float) -> None:
        lane = lanes[task_id]
        if lane.busy < lane.profile.windows:
            start_service(task_id, pid, now)
        else:
            lane.waiting.append((pid, now))

    first_arrival = min(p.arrival_s for p in patients)
    last_event = first_arrival
    while heap:
        now, _, kind, pid, task_id = heapq.heappop(heap)
        last_event = max(last_event, now)
        if kind == "arrive":
            join(next_task(by_id[pid], now), pid, now)
            continue
        lane = lanes[task_id]
        lane.busy -= 1
        lane.in_service.discard(pid)
        if lane.waiting:
            waiter, since = lane.waiting.pop(0)
            waits[waiter] += now - since
            start_service(task_id, waiter, now)
        remaining[pid].discard(task_id)
        if remaining[pid]:
            join(next_task(by_id[pid], now), pid, now)

    span_s = max(1.0, last_event - first_arrival)
    waits_min = np.array([waits[p.patient_id] for p in patients]) / 60.0
    utilization = {
        task_id: lane.busy_s / (lane.profile.windows * span_s)
        for task_id, lane in lanes.items()
    }
    return SimResult(
        policy=policy,
        average_wait_min=float(waits_min.mean()),
        waits_min=waits_min,
        utilization=utilization,
        span_min=span_s / 60.0,
        service_intervals={t: lane.intervals for t, lane in lanes.items()},
    )


def simulate(
    models: Mapping[str, ForestModel] | None,
    sim: SimConfig,
    gen: GeneratorConfig,
) -> SimResult:
    """Draw one synthetic day of patients and replay it under sim.policy."""
    patients = draw_patients(sim, gen)
    day_start = datetime.combine(
        gen.start_date + timedelta(days=sim.day_index), datetime.min.time()
    )
    return run_queue_network(patients, gen, sim.policy, models, day_start)


@dataclass(frozen=True)
class ComparisonRow:
    tasks_per_patient: int
    avg_wait_hqr_min: float
    avg_wait_without_min: float

    @property
    def ratio(self) -> float:
        if self.avg_wait_without_min == 0.0:
            return 1.0
        return self.avg_wait_hqr_min / self.avg_wait_without_min

    @property
    def gap_min(self) -> float:
        return self.avg_wait_without_min - self.avg_wait_hqr_min


def compare_policies(
    models: Mapping[str, ForestModel],
    sim: SimConfig,
    gen: GeneratorConfig,
    levels: Sequence[int] = (2, 3, 4, 5, 6),
) -> list[ComparisonRow]:
    """Run both policies per tasks-per-patient level on identical draws."""
    rows = []
    for level in levels:
        base = replace(sim, tasks_per_patient=level)
        with_hqr = simulate(models, replace(base, policy=POLICY_HQR), gen)
        without = simulate(models, replace(base, policy=POLICY_FIFO), gen)
        rows.append(
            ComparisonRow(
                tasks_per_patient=level,
                avg_wait_hqr_min=with_hqr.average_wait_min,
                avg_wait_without_min=without.average_wait_min,
            )
        )
    return rows


def comparison_csv(rows: Sequence[ComparisonRow]) -> str:
    """CSV rendering of a policy comparison (one line per level/policy)."""
    lines = ["level,policy,avg_wait_min"]
    for row in rows:
        lines.append(f"{row.tasks_per_patient},hqr,{row.avg_wait_hqr_min:.2f}")
        lines.append(
            f"{row.tasks_per_patient},fifo_fixed_order,{row.avg_wait_without_min:.2f}"
        )
    return "\n".join(lines) + "\n"

"""Discrete-event simulation of the swarm, the uplink, and the edge server.

Each robot generates tasks by a Poisson process; every generated task ends in
exactly one TaskOutcome, either locally (policy choice or rejection) or
through the server queue. Runs are deterministic given (config, policy seed):
events are processed in (time, sequence) order and all randomness flows from
one seeded generator.
"""

from __future__ import annotations

import enum
import heapq
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .channel import ChannelParams
from .mobility import Plane, advance, random_initial_states
from .model import CostParams, RobotState, Task, TaskOutcome, local_energy, local_time, objective
from .queueing import ServerQueue
from .scheduler import (
    Decision,
    DecisionContext,
    DecisionKind,
    Env,
    Policy,
    evaluate_local_option,
)


class EventKind(enum.Enum):
    TASK_GENERATED = "task_generated"
    UPLOAD_COMPLETE = "upload_complete"
    COMPUTE_COMPLETE = "compute_complete"
    PERIOD_BOUNDARY = "period_boundary"


@dataclass(frozen=True, order=True)
class Event:
    time: float
    sequence: int
    kind: EventKind = field(compare=False)
    task_id: int = field(compare=False, default=-1)


@dataclass(frozen=True)
class SimConfig:
    """Every physical, cost, and workload constant of one run."""

    n_rb: int = 10
    plane_edge: float = 30.0  # meters
    speed: float = 2.0  # meters/second
    lambda_intensity: float = 10.0  # swarm-total task arrivals per second
    capacity_m: int = 10  # waiting-line length limit M
    cost: CostParams = field(default_factory=CostParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    n_range: Tuple[float, float] = (120_000.0, 300_000.0)  # task size, bits
    d_range: Tuple[float, float] = (0.5, 2.0)  # deadline budget, seconds
    duration: float = 60.0  # arrival window, seconds
    seed: int = 0
    drain: bool = True  # keep processing events after `duration` until empty

    def validate(self) -> None:
        if self.n_rb < 1:
            raise ValueError("n_rb must be >= 1")
        if self.plane_edge <= 0:
            raise ValueError("plane_edge must be positive")
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        if self.lambda_intensity <= 0:
            raise ValueError("lambda_intensity must be positive")
        if self.capacity_m < 1:
            raise ValueError("capacity_m must be >= 1")
        if not (0 < self.n_range[0] < self.n_range[1]):
            raise ValueError("n_range must be increasing and positive")
        if not (0 < self.d_range[0] < self.d_range[1]):
            raise ValueError("d_range must be increasing and positive")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        self.cost.validate()
        self.channel.validate()

    @property
    def plane(self) -> Plane:
        return Plane(edge=self.plane_edge)

    @property
    def env(self) -> Env:
        return Env(plane=self.plane, channel=self.channel, cost=self.cost)


def generate_arrivals(
    lam: float,
    duration: float,
    n_rb: int,
    rng: np.random.Generator,
) -> List[List[float]]:
    """Per-robot sorted arrival times on [0, duration).

    `lam` is the swarm-total intensity; each robot runs an independent
    homogeneous Poisson process at lam/n_rb (their superposition has
    intensity lam), sampled by exponential inter-arrival gaps.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    per_robot = lam / n_rb
    arrivals: List[List[float]] = []
    for _ in range(n_rb):
        times = []
        t = rng.exponential(1.0 / per_robot)
        while t < duration:
            times.append(t)
            t += rng.exponential(1.0 / per_robot)
        arrivals.append(times)
    return arrivals


def generate_tasks(config: SimConfig, rng: np.random.Generator) -> List[Task]:
    """All tasks of a run, chronologically ordered, with uniform sizes/deadlines."""
    arrivals = generate_arrivals(config.lambda_intensity, config.duration, config.n_rb, rng)
    stream = sorted(
        ((t, rid) for rid, times in enumerate(arrivals) for t in times),
        key=lambda p: (p[0], p[1]),
    )
    tasks = []
    for i, (t_gen, rid) in enumerate(stream):
        n = rng.uniform(config.n_range[0], config.n_range[1])
        d = rng.uniform(config.d_range[0], config.d_range[1])
        tasks.append(Task(id=i, robot_id=rid, n=n, d=d, t_gen=t_gen))
    return tasks


@dataclass
class RunResult:
    outcomes: List[TaskOutcome]
    decisions: Dict[int, Decision]  # task_id -> decision applied
    tasks: Dict[int, Task]
    service_intervals: List[Tuple[int, float, float]]  # (task_id, start, finish)
    generated: int
    in_flight: int  # tasks not completed when a non-drain run stopped
    n_events: int  # heap events processed (engine soak accounting)
    max_waiting: int  # largest waiting-line length ever observed
    trace: Optional[List[dict]] = None

    @property
    def rejected(self) -> int:
        return sum(1 for d in self.decisions.values() if d.kind is DecisionKind.REJECT)


@dataclass(frozen=True)
class MetricsReport:
    avg_objective: float
    avg_energy: float  # joules per task
    avg_delay: float  # seconds per task
    deadline_miss_ratio: float
    rejection_rate: float
    count: int


def evaluate(result: RunResult, cost: CostParams) -> MetricsReport:
    """Aggregate per-run metrics; an empty run reports zeros with count 0."""
    outcomes = result.outcomes
    n = len(outcomes)
    if n == 0:
        return MetricsReport(0.0, 0.0, 0.0, 0.0, 0.0, 0)
    completed_ids = {o.task_id for o in outcomes}
    rejected = sum(
        1
        for tid, d in result.decisions.items()
        if d.kind is DecisionKind.REJECT and tid in completed_ids
    )
    return MetricsReport(
        avg_objective=objective(outcomes, cost) / n,
        avg_energy=sum(o.E_i for o in outcomes) / n,
        avg_delay=sum(o.T_i for o in outcomes) / n,
        deadline_miss_ratio=sum(o.missed_deadline for o in outcomes) / n,
        rejection_rate=rejected / n,
        count=n,
    )


class _Engine:
    def __init__(self, config: SimConfig, policy: Policy, record_trace: bool):
        config.validate()
        self.cfg = config
        self.policy = policy
        self.env = config.env
        rng = np.random.default_rng(config.seed)
        self.robots0 = random_initial_states(config.n_rb, config.plane, config.speed, rng)
        self.tasks = {t.id: t for t in generate_tasks(config, rng)}
        self.queue = ServerQueue(capacity_M=config.capacity_m)
        self.heap: List[Event] = []
        self.seq = 0
        self.outcomes: List[TaskOutcome] = []
        self.decisions: Dict[int, Decision] = {}
        self.pending_edge: Dict[int, Decision] = {}
        self.service_intervals: List[Tuple[int, float, float]] = []
        self.trace: Optional[List[dict]] = [] if record_trace else None
        self.buffered: deque = deque()
        self.remaining_generations = len(self.tasks)
        self.n_events = 0
        self.max_waiting = 0

    # -- plumbing ----------------------------------------------------------

    def _push(self, time: float, kind: EventKind, task_id: int = -1) -> None:
        self.seq += 1
        heapq.heappush(self.heap, Event(time=time, sequence=self.seq, kind=kind, task_id=task_id))

    def _record(self, rec: dict) -> None:
        if self.trace is not None:
            self.trace.append(rec)

    def robot_state_at(self, robot_id: int, t: float) -> RobotState:
        return advance(self.robots0[robot_id], t, self.cfg.plane)

    # -- event handlers ----------------------------------------------------

    def _finish_local(self, task: Task, now: float, decision: Decision) -> None:
        wait = now - task.t_gen
        T_i = wait + local_time(task.n, self.cfg.cost)
        E_i = local_energy(task.n, self.cfg.cost) + wait * self.cfg.cost.p_idl
        self.decisions[task.id] = decision
        self.outcomes.append(
            TaskOutcome(
                task_id=task.id,
                executed_at="local",
                position=None,
                T_i=T_i,
                E_i=E_i,
                d=task.d,
                missed_deadline=T_i > task.d,
            )
        )
        self._record(
            {
                "kind": "outcome",
                "t": task.t_gen + T_i,
                "task_id": task.id,
                "executed_at": "local",
                "T_i": T_i,
                "E_i": E_i,
            }
        )

    def _admit(self, ctx: DecisionContext, decision: Decision) -> None:
        entry = ctx.candidate_entry
        self.decisions[ctx.task.id] = decision
        self.pending_edge[ctx.task.id] = decision
        self.queue = self.queue.insert(entry, decision.position)
        self.max_waiting = max(self.max_waiting, self.queue.length)
        self._push(entry.arrival_complete_at, EventKind.UPLOAD_COMPLETE, ctx.task.id)
        if self.queue.in_service is None:
            self.queue = self.queue.promote(ctx.now)
            svc = self.queue.in_service
            self._push(svc.finishes_at, EventKind.COMPUTE_COMPLETE, svc.entry.task.id)

    def _decide(self, task: Task, now: float) -> None:
        robot = self.robot_state_at(task.robot_id, now)
        ctx = DecisionContext(task=task, robot=robot, queue=self.queue, now=now, env=self.env)
        if self.queue.is_full:
            decision = Decision(
                kind=DecisionKind.REJECT, expected_cost=evaluate_local_option(ctx).value
            )
        else:
            decision = self.policy.decide(ctx)
        self._record(
            {
                "kind": "decision",
                "t": now,
                "task_id": task.id,
                "decision": decision.kind.value,
                "position": decision.position,
                "expected_cost": decision.expected_cost,
            }
        )
        if decision.kind is DecisionKind.INSERT:
            self._admit(ctx, decision)
        else:
            self._finish_local(task, now, decision)

    def _on_generated(self, ev: Event) -> None:
        task = self.tasks[ev.task_id]
        self.remaining_generations -= 1
        self._record(
            {
                "kind": "task_generated",
                "t": ev.time,
                "task_id": task.id,
                "robot_id": task.robot_id,
                "n": task.n,
                "d": task.d,
            }
        )
        if self.policy.period is not None:
            self.buffered.append(task.id)
            return
        self._decide(task, ev.time)

    def _on_compute_complete(self, ev: Event) -> None:
        now = ev.time
        svc = self.queue.in_service
        if svc is None or svc.entry.task.id != ev.task_id:
            raise RuntimeError("compute completion does not match the in-service task")
        self.queue, finished = self.queue.complete_head(now)
        task = finished.entry.task
        self.service_intervals.append((task.id, finished.started_at, now))
        t_tra = finished.entry.arrival_complete_at - finished.entry.enqueued_at
        T_i = now - task.t_gen
        E_i = (
            t_tra * self.cfg.cost.p_tra
            + (finished.started_at - task.t_gen - t_tra) * self.cfg.cost.p_idl
        )
        decision = self.pending_edge.pop(task.id)
        self.outcomes.append(
            TaskOutcome(
                task_id=task.id,
                executed_at="edge",
                position=decision.position,
                T_i=T_i,
                E_i=E_i,
                d=task.d,
                missed_deadline=T_i > task.d,
            )
        )
        self._record(
            {
                "kind": "outcome",
                "t": now,
                "task_id": task.id,
                "executed_at": "edge",
                "T_i": T_i,
                "E_i": E_i,
            }
        )
        if self.queue.in_service is not None:
            nxt = self.queue.in_service
            self._push(nxt.finishes_at, EventKind.COMPUTE_COMPLETE, nxt.entry.task.id)

    def _on_boundary(self, ev: Event) -> None:
        self._record({"kind": "period_boundary", "t": ev.time})
        while self.buffered:
            self._decide(self.tasks[self.buffered.popleft()], ev.time)
        if self.remaining_generations > 0:
            self._push(ev.time + self.policy.period, EventKind.PERIOD_BOUNDARY)

    # -- main loop ----------------------------------------------------------

    def run(self) -> RunResult:
        if hasattr(self.policy, "on_run_start"):
            self.policy.on_run_start(self.cfg)
        for task in self.tasks.values():
            self._push(task.t_gen, EventKind.TASK_GENERATED, task.id)
        if self.policy.period is not None and self.tasks:
            self._push(self.policy.period, EventKind.PERIOD_BOUNDARY)
        while self.heap:
            ev = heapq.heappop(self.heap)
            if not self.cfg.drain and ev.time > self.cfg.duration:
                break
            self.n_events += 1
            if ev.kind is EventKind.TASK_GENERATED:
                self._on_generated(ev)
            elif ev.kind is EventKind.COMPUTE_COMPLETE:
                self._on_compute_complete(ev)
            elif ev.kind is EventKind.PERIOD_BOUNDARY:
                self._on_boundary(ev)
            else:  # UPLOAD_COMPLETE is a trace marker; promotion handles idling
                self._record({"kind": "upload_complete", "t": ev.time, "task_id": ev.task_id})
        if hasattr(self.policy, "on_run_end"):
            self.policy.on_run_end()
        return RunResult(
            outcomes=self.outcomes,
            decisions=self.decisions,
            tasks=self.tasks,
            service_intervals=self.service_intervals,
            generated=len(self.tasks),
            in_flight=len(self.tasks) - len(self.outcomes),
            n_events=self.n_events,
            max_waiting=self.max_waiting,
            trace=self.trace,
        )


def run(config: SimConfig, policy: Policy, record_trace: bool = False) -> RunResult:
    """Simulate one seeded run under the given policy."""
    return _Engine(config, policy, record_trace).run()


def trace_lines(trace: Sequence[dict]) -> Iterator[str]:
    """Line-delimited trace records with stable field order."""
    for rec in trace:
        yield json.dumps(rec, sort_keys=True)

"""Offloading decisions: the greedy queue-cut insertion search, baseline
policies, and an exhaustive small-instance oracle.

For each arriving request the server weighs L+2 options: compute locally
(also the outcome of a rejection), or insert at one of the L+1 waiting-line
positions. An insertion at position k is charged both its own weighted
energy/delay cost and the loss it inflicts on the tasks it pushes back,
sum(T_add_i / d_i) over the disturbed entries.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .channel import ChannelParams, transmission_delay
from .mobility import Plane
from .model import (
    CostParams,
    RobotState,
    Task,
    edge_compute_time,
    local_energy,
    local_time,
    task_cost,
    task_delay_energy,
)
from .queueing import QueueEntry, ServerQueue


class DecisionKind(enum.Enum):
    LOCAL = "local"
    INSERT = "insert"
    REJECT = "reject"


@dataclass(frozen=True)
class Decision:
    kind: DecisionKind
    position: Optional[int] = None  # 1..L+1, only for INSERT
    expected_cost: float = math.nan  # weighted cost of the chosen option

    @property
    def offloads(self) -> bool:
        return self.kind is DecisionKind.INSERT


@dataclass(frozen=True)
class Env:
    """Physical parameters a decision needs, bundled."""

    plane: Plane
    channel: ChannelParams
    cost: CostParams


@dataclass
class DecisionContext:
    """Everything known to the server when it handles one request.

    `now` is the decision instant; for batched policies it is later than the
    task's generation time, and option costs account for the wait.
    """

    task: Task
    robot: RobotState  # state at `now`
    queue: ServerQueue
    now: float
    env: Env

    @cached_property
    def t_loc(self) -> float:
        return local_time(self.task.n, self.env.cost)

    @cached_property
    def e_loc(self) -> float:
        return local_energy(self.task.n, self.env.cost)

    @cached_property
    def t_com(self) -> float:
        return edge_compute_time(self.task.n, self.env.cost)

    @cached_property
    def t_tra(self) -> float:
        return transmission_delay(
            self.task.n, self.robot, self.env.plane, self.env.cost.p_tra, self.env.channel
        )

    @cached_property
    def candidate_entry(self) -> QueueEntry:
        return QueueEntry(
            task=self.task,
            arrival_complete_at=self.now + self.t_tra,
            t_com=self.t_com,
            enqueued_at=self.now,
            reported=self.robot,
        )

    @property
    def wait_before_decision(self) -> float:
        return self.now - self.task.t_gen


@dataclass(frozen=True)
class OptionEval:
    """Predicted outcome of one option for the requesting task."""

    T_i: float
    E_i: float
    l_s: float  # deadline-normalized loss inflicted on disturbed entries
    value: float  # alpha*E + beta*((T-d)/d + l_s)


def insertion_loss(q: ServerQueue, e: QueueEntry, position: int, now: float) -> float:
    """l_s: sum of T_add/d over the waiting entries delayed by inserting e."""
    return sum(t_add / q.waiting[i].task.d for i, (_, t_add) in enumerate(q.delta_delays(e, position, now)))


def evaluate_local_option(ctx: DecisionContext) -> OptionEval:
    wait = ctx.wait_before_decision
    T_i = wait + ctx.t_loc
    E_i = ctx.e_loc + wait * ctx.env.cost.p_idl
    return OptionEval(T_i, E_i, 0.0, task_cost(T_i, E_i, ctx.task.d, ctx.env.cost))


def evaluate_insert_option(ctx: DecisionContext, position: int) -> OptionEval:
    p = ctx.env.cost
    t_rea = ctx.queue.ready_time(position, ctx.now)
    T_svc, E_svc = task_delay_energy(1, ctx.t_tra, t_rea, ctx.t_com, 0.0, 0.0, p)
    wait = ctx.wait_before_decision
    T_i = wait + T_svc
    E_i = E_svc + wait * p.p_idl
    l_s = insertion_loss(ctx.queue, ctx.candidate_entry, position, ctx.now)
    value = p.alpha * E_i + p.beta * ((T_i - ctx.task.d) / ctx.task.d + l_s)
    return OptionEval(T_i, E_i, l_s, value)


def greedy_decide(q: ServerQueue, task: Task, robot: RobotState, env: Env) -> Decision:
    """Algorithm: scan local plus every insertion position, keep the argmin.

    Ties prefer local execution, then the smallest position. A full waiting
    line means the request is rejected outright (computed locally).
    """
    ctx = DecisionContext(task=task, robot=robot, queue=q, now=task.t_gen, env=env)
    return decide_from_context(ctx, reject_when_full=True)


def decide_from_context(ctx: DecisionContext, reject_when_full: bool = True) -> Decision:
    local = evaluate_local_option(ctx)
    if ctx.queue.is_full:
        kind = DecisionKind.REJECT if reject_when_full else DecisionKind.LOCAL
        return Decision(kind=kind, expected_cost=local.value)
    best_value = local.value
    best_pos = None
    for pos in range(1, ctx.queue.length + 2):
        opt = evaluate_insert_option(ctx, pos)
        if opt.value < best_value:
            best_value = opt.value
            best_pos = pos
    if best_pos is None:
        return Decision(kind=DecisionKind.LOCAL, expected_cost=local.value)
    return Decision(kind=DecisionKind.INSERT, position=best_pos, expected_cost=best_value)


# ---------------------------------------------------------------------------
# Exhaustive oracle for small simultaneous batches
# ---------------------------------------------------------------------------


class TooManyTasksError(ValueError):
    pass


@dataclass(frozen=True)
class BatchTaskInfo:
    t_loc: float
    e_loc: float
    t_tra: float
    t_com: float
    d: float


@dataclass(frozen=True)
class ScheduleResult:
    x: Tuple[int, ...]  # 1 = offloaded, per task
    j: Tuple[int, ...]  # service position, 0 = local, per task
    cost: float


def batch_task_infos(
    tasks: Sequence[Task], robots: Dict[int, RobotState], env: Env
) -> List[BatchTaskInfo]:
    infos = []
    for t in tasks:
        r = robots[t.robot_id]
        infos.append(
            BatchTaskInfo(
                t_loc=local_time(t.n, env.cost),
                e_loc=local_energy(t.n, env.cost),
                t_tra=transmission_delay(t.n, r, env.plane, env.cost.p_tra, env.channel),
                t_com=edge_compute_time(t.n, env.cost),
                d=t.d,
            )
        )
    return infos


def evaluate_assignment(
    infos: Sequence[BatchTaskInfo], order: Sequence[int], p: CostParams
) -> float:
    """Exact total cost of serving `order` on the edge (others local).

    Replays the in-order queue: each offloaded task starts at
    max(server free, own upload completion); all uploads start at t=0.
    """
    offloaded = set(order)
    total = 0.0
    free = 0.0
    for idx in order:
        info = infos[idx]
        start = max(free, info.t_tra)
        T_i = start + info.t_com
        E_i = info.t_tra * p.p_tra + (start - info.t_tra) * p.p_idl
        total += p.alpha * E_i + p.beta * (T_i - info.d) / info.d
        free = T_i
    for idx, info in enumerate(infos):
        if idx not in offloaded:
            total += p.alpha * info.e_loc + p.beta * (info.t_loc - info.d) / info.d
    return total


def brute_force_schedule(
    tasks: Sequence[Task],
    robots: Dict[int, RobotState],
    q0: ServerQueue,
    env: Env,
) -> ScheduleResult:
    """Global optimum over every offload subset and service order.

    Only valid for small simultaneous batches; enumeration is
    sum_k C(n,k) k! configurations. Subsets are visited smallest-first and
    orders lexicographically, and strict improvement is required to replace
    the incumbent, so ties resolve deterministically (all-local first).
    """
    if len(tasks) > 6:
        raise TooManyTasksError(f"brute force capped at 6 tasks, got {len(tasks)}")
    if q0.in_service is not None or q0.waiting:
        raise ValueError("brute force expects an initially empty server")
    t0 = tasks[0].t_gen if tasks else 0.0
    if any(t.t_gen != t0 for t in tasks):
        raise ValueError("brute force expects simultaneous tasks")
    infos = batch_task_infos(tasks, robots, env)
    max_offload = min(len(tasks), q0.capacity_M + 1)  # one in service + M waiting

    best_cost = math.inf
    best_order: Tuple[int, ...] = ()
    indices = range(len(tasks))
    for k in range(0, max_offload + 1):
        for subset in itertools.combinations(indices, k):
            for order in itertools.permutations(subset):
                cost = evaluate_assignment(infos, order, env.cost)
                if cost < best_cost:
                    best_cost = cost
                    best_order = order
    x = tuple(1 if i in best_order else 0 for i in indices)
    j = [0] * len(tasks)
    for pos, idx in enumerate(best_order, start=1):
        j[idx] = pos
    return ScheduleResult(x=x, j=tuple(j), cost=best_cost)


def sequential_greedy_schedule(
    tasks: Sequence[Task],
    robots: Dict[int, RobotState],
    q0: ServerQueue,
    env: Env,
) -> ScheduleResult:
    """Feed a simultaneous batch through greedy_decide one task at a time.

    Returns the realized assignment and its exact replay cost (the same
    evaluator the brute-force oracle uses), so results are comparable.
    """
    if q0.in_service is not None or q0.waiting:
        raise ValueError("expected an initially empty server")
    t0 = tasks[0].t_gen if tasks else 0.0
    q = q0
    admitted: List[int] = []  # task indices in service order
    for i, task in enumerate(tasks):
        ctx = DecisionContext(task=task, robot=robots[task.robot_id], queue=q, now=t0, env=env)
        decision = decide_from_context(ctx)
        if decision.kind is DecisionKind.INSERT:
            # position is relative to the waiting line; the in-service task
            # (first admitted) can no longer be cut.
            offset = 1 if q.in_service is not None else 0
            admitted.insert(decision.position - 1 + offset, i)
            q = q.insert(ctx.candidate_entry, decision.position).promote(t0)
    infos = batch_task_infos(tasks, robots, env)
    cost = evaluate_assignment(infos, admitted, env.cost)
    x = tuple(1 if i in admitted else 0 for i in range(len(tasks)))
    j = [0] * len(tasks)
    for pos, idx in enumerate(admitted, start=1):
        j[idx] = pos
    return ScheduleResult(x=x, j=tuple(j), cost=cost)


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


class Policy:
    """Decision surface the simulator drives.

    `period` None means decisions happen at request time; a positive period
    makes the engine buffer requests and replay them at period boundaries
    through `decide` (FIFO).
    """

    name = "policy"
    period: Optional[float] = None

    def decide(self, ctx: DecisionContext) -> Decision:
        raise NotImplementedError


class LocalOnlyPolicy(Policy):
    name = "local"

    def decide(self, ctx: DecisionContext) -> Decision:
        return Decision(kind=DecisionKind.LOCAL, expected_cost=evaluate_local_option(ctx).value)


class FifoOffloadPolicy(Policy):
    """Always appends to the tail; rejection handled by the engine when full."""

    name = "fifo"

    def decide(self, ctx: DecisionContext) -> Decision:
        pos = ctx.queue.length + 1
        return Decision(
            kind=DecisionKind.INSERT,
            position=pos,
            expected_cost=evaluate_insert_option(ctx, pos).value,
        )


class PeriodicBatchPolicy(FifoOffloadPolicy):
    """Tail-inserts like FIFO, but only at period boundaries."""

    name = "periodic"

    def __init__(self, period: float = 1.0):
        if period <= 0:
            raise ValueError("period must be positive")
        self.period = period


class RandomPolicy(Policy):
    """Uniform choice among the currently feasible options."""

    name = "random"

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def decide(self, ctx: DecisionContext) -> Decision:
        n_options = ctx.queue.length + 2  # local + L+1 positions
        pick = int(self.rng.integers(0, n_options))
        if pick == 0:
            return Decision(kind=DecisionKind.LOCAL, expected_cost=evaluate_local_option(ctx).value)
        return Decision(
            kind=DecisionKind.INSERT,
            position=pick,
            expected_cost=evaluate_insert_option(ctx, pick).value,
        )


class GreedyPolicy(Policy):
    name = "greedy"

    def decide(self, ctx: DecisionContext) -> Decision:
        return decide_from_context(ctx)

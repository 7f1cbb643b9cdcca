"""Domain types and closed-form per-task cost formulas.

All quantities are SI: bits, seconds, joules, watts, meters, CPU cycles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple


class InvalidDeadlineError(ValueError):
    pass


@dataclass(frozen=True)
class Task:
    """One unit of work generated by a robot."""

    id: int
    robot_id: int
    n: float  # task size, bits
    d: float  # deadline budget, seconds from generation to completion
    t_gen: float  # generation wall-clock time, seconds

    def validate(self) -> None:
        if self.n <= 0:
            raise ValueError(f"task {self.id}: size must be positive, got {self.n}")
        if self.d <= 0:
            raise ValueError(f"task {self.id}: deadline must be positive, got {self.d}")
        if self.t_gen < 0:
            raise ValueError(f"task {self.id}: generation time must be >= 0")


@dataclass(frozen=True)
class RobotState:
    """Kinematic state of one robot on the bounded plane."""

    robot_id: int
    l: Tuple[float, float]  # position, meters
    v: Tuple[float, float]  # heading, unit vector
    speed: float  # meters/second

    def validate(self, plane_edge: float) -> None:
        if not (0.0 <= self.l[0] <= plane_edge and 0.0 <= self.l[1] <= plane_edge):
            raise ValueError(f"robot {self.robot_id}: position {self.l} outside plane")
        norm = math.hypot(*self.v)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"robot {self.robot_id}: heading {self.v} is not unit length")
        if self.speed < 0:
            raise ValueError(f"robot {self.robot_id}: speed must be >= 0")


@dataclass(frozen=True)
class CostParams:
    """Compute and energy model constants shared by robots and the server."""

    f_loc: float = 2e8  # robot CPU, cycles/second
    f_edg: float = 2e9  # server CPU, cycles/second
    c: float = 1000.0  # CPU cycles per bit
    gamma: float = 1e-27  # effective capacitance coefficient
    p_tra: float = 0.05  # transmit power, watts
    p_idl: float = 0.0005  # idle power while waiting, watts
    alpha: float = 0.5  # energy weight
    beta: float = 0.5  # normalized-delay weight

    def validate(self) -> None:
        for name in ("f_loc", "f_edg", "c", "gamma", "p_tra", "p_idl"):
            if getattr(self, name) <= 0:
                raise ValueError(f"cost parameter {name} must be strictly positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("cost weights must be non-negative")


@dataclass(frozen=True)
class TaskOutcome:
    """Final accounting for one completed task."""

    task_id: int
    executed_at: str  # "local" or "edge"
    position: Optional[int]  # insertion position at decision time, edge only
    T_i: float  # total completion delay from generation, seconds
    E_i: float  # robot-side energy, joules
    d: float  # deadline budget, seconds
    missed_deadline: bool


def local_time(n: float, p: CostParams) -> float:
    """Seconds for the robot to compute an n-bit task itself."""
    return n * p.c / p.f_loc


def local_energy(n: float, p: CostParams) -> float:
    """Joules for the robot to compute an n-bit task itself."""
    return p.gamma * n * p.c * p.f_loc**2


def edge_compute_time(n: float, p: CostParams) -> float:
    """Seconds of server CPU time for an n-bit task."""
    return n * p.c / p.f_edg


def task_cost(T_i: float, E_i: float, d: float, p: CostParams) -> float:
    """Weighted per-task cost alpha*E + beta*(T-d)/d.

    The delay term is negative when the task finishes before its deadline.
    """
    if d <= 0:
        raise InvalidDeadlineError(f"deadline must be positive, got {d}")
    return p.alpha * E_i + p.beta * (T_i - d) / d


def task_delay_energy(
    x: int,
    T_tra: float,
    T_rea: float,
    T_com: float,
    T_loc: float,
    E_loc: float,
    p: CostParams,
) -> Tuple[float, float]:
    """Delay and robot energy of one task under offload decision x.

    x = 0: computed locally. x = 1: uploaded (T_tra), possibly waiting for the
    server (T_rea), then computed there (T_com); the robot transmits at p_tra
    and idles at p_idl between upload end and service start.
    """
    if x == 0:
        return T_loc, E_loc
    wait = max(T_rea, T_tra)
    return wait + T_com, T_tra * p.p_tra + (wait - T_tra) * p.p_idl


def objective(outcomes: Iterable[TaskOutcome], p: CostParams) -> float:
    """System objective: alpha * total energy + beta * sum of (T-d)/d."""
    total = 0.0
    for o in outcomes:
        total += task_cost(o.T_i, o.E_i, o.d, p)
    return total

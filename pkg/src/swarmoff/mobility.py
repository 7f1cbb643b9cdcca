"""Constant-speed straight-line robot motion with specular wall reflection.

Trajectories are evaluated in closed form by unfolding the billiard map, so
position queries are exact for any time offset; no time-stepping is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

from .model import RobotState


@dataclass(frozen=True)
class Plane:
    """Square arena with the server fixed at its center."""

    edge: float  # side length, meters

    @property
    def server_pos(self) -> Tuple[float, float]:
        return (self.edge / 2.0, self.edge / 2.0)

    def validate(self) -> None:
        if self.edge <= 0:
            raise ValueError("plane edge must be positive")


def _fold(x0: float, u: float, travel: float, edge: float) -> Tuple[float, float]:
    """Fold an unbounded 1-D coordinate back into [0, edge].

    Returns the reflected coordinate and the sign applied to the heading
    component. `travel` is speed*dt (meters), `u` the heading component.
    """
    raw = x0 + u * travel
    period = 2.0 * edge
    y = raw % period  # in [0, period)
    if y > edge:
        return period - y, -1.0
    return y, 1.0


def advance(state: RobotState, dt: float, plane: Plane) -> RobotState:
    """State after dt seconds of straight-line motion with wall reflections."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0.0 or state.speed == 0.0:
        return state
    travel = state.speed * dt
    x, sx = _fold(state.l[0], state.v[0], travel, plane.edge)
    y, sy = _fold(state.l[1], state.v[1], travel, plane.edge)
    return RobotState(
        robot_id=state.robot_id,
        l=(x, y),
        v=(state.v[0] * sx, state.v[1] * sy),
        speed=state.speed,
    )


def position_at(state: RobotState, t_offset: float, plane: Plane) -> Tuple[float, float]:
    """Position t_offset seconds into the future; pure query."""
    return advance(state, t_offset, plane).l


def random_initial_states(
    n_rb: int,
    plane: Plane,
    speed: float,
    rng_seed: Union[int, np.random.Generator],
) -> List[RobotState]:
    """Robots placed i.i.d. uniform on the plane with uniform random headings."""
    if n_rb < 1:
        raise ValueError("n_rb must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    states = []
    for i in range(n_rb):
        x = rng.uniform(0.0, plane.edge)
        y = rng.uniform(0.0, plane.edge)
        theta = rng.uniform(0.0, 2.0 * math.pi)
        states.append(
            RobotState(robot_id=i, l=(x, y), v=(math.cos(theta), math.sin(theta)), speed=speed)
        )
    return states

"""Mobility-aware computation offloading for robot swarms: simulator,
schedulers, and a deep-Q-network policy for a single resource-limited edge
server."""

from .channel import ChannelParams, channel_gain, instantaneous_rate, transmission_delay
from .mobility import Plane, advance, position_at, random_initial_states
from .model import (
    CostParams,
    RobotState,
    Task,
    TaskOutcome,
    edge_compute_time,
    local_energy,
    local_time,
    objective,
    task_cost,
    task_delay_energy,
)
from .queueing import InService, QueueEntry, QueueFullError, ServerQueue
from .scheduler import (
    Decision,
    DecisionContext,
    DecisionKind,
    Env,
    brute_force_schedule,
    greedy_decide,
    insertion_loss,
)
from .sim import MetricsReport, RunResult, SimConfig, evaluate, generate_arrivals, run

__version__ = "0.1.0"

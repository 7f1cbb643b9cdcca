"""State encoding, action masking, reward shaping, replay buffer, and the
inference-time policy wrapper around a trained Q-network.

The state is one 7-feature block per queue slot in service order
[d, v_x, v_y, l_x, l_y, n, occupied], an 8-feature block for the in-service
task (the same plus its remaining compute time), and a 7-feature block for
the requesting task: 7M + 15 features, all normalized into [-1, 1]. Action 0
computes locally; action k >= 1 inserts at waiting position k.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..model import CostParams, RobotState, Task, edge_compute_time
from ..queueing import ServerQueue
from ..scheduler import (
    Decision,
    DecisionContext,
    DecisionKind,
    Policy,
    evaluate_insert_option,
    evaluate_local_option,
)
from .network import Network, forward

BLOCK = 7  # features per task block


@dataclass(frozen=True)
class StateNorms:
    """Reference scales that map raw features into [-1, 1]."""

    d_ref: float  # max deadline budget, seconds
    n_ref: float  # max task size, bits
    edge: float  # plane side length, meters
    t_com_ref: float  # max server compute time, seconds

    @classmethod
    def from_config(cls, config) -> "StateNorms":
        return cls(
            d_ref=config.d_range[1],
            n_ref=config.n_range[1],
            edge=config.plane_edge,
            t_com_ref=edge_compute_time(config.n_range[1], config.cost),
        )


class StateEncoder:
    def __init__(self, m: int, norms: StateNorms):
        self.m = m
        self.norms = norms
        self.dim = BLOCK * m + (BLOCK + 1) + BLOCK

    def _block(self, out: np.ndarray, at: int, task: Task, reported: Optional[RobotState]) -> None:
        nm = self.norms
        out[at] = task.d / nm.d_ref
        if reported is not None:
            out[at + 1] = reported.v[0]
            out[at + 2] = reported.v[1]
            out[at + 3] = reported.l[0] / nm.edge
            out[at + 4] = reported.l[1] / nm.edge
        out[at + 5] = task.n / nm.n_ref
        out[at + 6] = 1.0

    def encode(self, queue: ServerQueue, task: Task, robot: RobotState, now: float) -> np.ndarray:
        out = np.zeros(self.dim)
        for i, entry in enumerate(queue.waiting[: self.m]):
            self._block(out, BLOCK * i, entry.task, entry.reported)
        at = BLOCK * self.m
        svc = queue.in_service
        if svc is not None:
            self._block(out, at, svc.entry.task, svc.entry.reported)
            out[at + BLOCK] = max(0.0, svc.finishes_at - now) / self.norms.t_com_ref
        self._block(out, at + BLOCK + 1, task, robot)
        np.clip(out, -1.0, 1.0, out=out)
        return out

    def encode_ctx(self, ctx: DecisionContext) -> np.ndarray:
        return self.encode(ctx.queue, ctx.task, ctx.robot, ctx.now)


def action_mask(queue: ServerQueue, m: int) -> np.ndarray:
    """Valid actions: 0 always; insertion positions 1..L+1 while not full."""
    mask = np.zeros(m + 1, dtype=bool)
    mask[0] = True
    if not queue.is_full:
        mask[1 : queue.length + 2] = True
    return mask


def select_action(
    net: Network,
    s: np.ndarray,
    mask: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy over the masked Q-values; ties go to the lowest index."""
    valid = np.flatnonzero(mask)
    if valid.size == 0:
        raise ValueError("action mask has no valid entry")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(valid[rng.integers(0, valid.size)])
    q = forward(net, s)
    q = np.where(mask, q, -np.inf)
    return int(np.argmax(q))


def immediate_reward(
    T_i: float,
    E_i: float,
    d: float,
    losses: Sequence[Tuple[float, float]],
    p: CostParams,
    scale: float,
) -> float:
    """Stored reward: minus the task's weighted cost minus the disturbance it
    inflicts (extra idle energy T_add*p_idl and delay loss T_add/d per pushed
    entry), scaled and clipped into [-1, 1]. The bootstrap term is applied at
    target computation, not stored.
    """
    raw = p.alpha * E_i + p.beta * (T_i - d) / d
    for t_add, d_k in losses:
        raw += p.alpha * t_add * p.p_idl + p.beta * t_add / d_k
    return float(np.clip(-scale * raw, -1.0, 1.0))


def raw_option_cost(ctx: DecisionContext, action: int, p: CostParams) -> float:
    """Unscaled cost of taking `action`: own weighted cost plus disturbances,
    from decision-time exact predictions."""
    if action == 0:
        opt = evaluate_local_option(ctx)
        losses: List[Tuple[float, float]] = []
    else:
        opt = evaluate_insert_option(ctx, action)
        losses = [
            (t_add, ctx.queue.waiting[i].task.d)
            for i, (_, t_add) in enumerate(
                ctx.queue.delta_delays(ctx.candidate_entry, action, ctx.now)
            )
        ]
    raw = p.alpha * opt.E_i + p.beta * (opt.T_i - ctx.task.d) / ctx.task.d
    for t_add, d_k in losses:
        raw += p.alpha * t_add * p.p_idl + p.beta * t_add / d_k
    return raw


def chosen_option_reward(
    ctx: DecisionContext, action: int, p: CostParams, scale: float
) -> float:
    """Stored (scaled, clipped) reward of taking `action` in `ctx`."""
    return float(np.clip(-scale * raw_option_cost(ctx, action, p), -1.0, 1.0))


@dataclass
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    next_mask: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity ring buffer; oldest transitions evicted first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._data: List[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._data)

    def push(self, tr: Transition) -> None:
        if len(self._data) < self.capacity:
            self._data.append(tr)
        else:
            self._data[self._next] = tr
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        if batch_size > len(self._data):
            raise ValueError("not enough transitions to sample")
        idx = rng.choice(len(self._data), size=batch_size, replace=False)
        return [self._data[i] for i in idx]


class DqnPolicy(Policy):
    """Greedy (epsilon = 0) decisions from a trained network."""

    name = "drl"

    def __init__(self, net: Network, encoder: StateEncoder):
        if net.dims[0] != encoder.dim or net.dims[-1] != encoder.m + 1:
            raise ValueError("network dimensions do not match the state encoder")
        self.net = net
        self.encoder = encoder

    @classmethod
    def from_checkpoint(cls, net: Network, meta: dict, config) -> "DqnPolicy":
        m = int(meta["m"])
        if m != config.capacity_m:
            raise ValueError(
                f"checkpoint was trained for queue length M={m}, config has M={config.capacity_m}"
            )
        norms = StateNorms(
            d_ref=float(meta["norm_d_ref"]),
            n_ref=float(meta["norm_n_ref"]),
            edge=float(meta["norm_edge"]),
            t_com_ref=float(meta["norm_t_com_ref"]),
        )
        return cls(net, StateEncoder(m, norms))

    def decide(self, ctx: DecisionContext) -> Decision:
        s = self.encoder.encode_ctx(ctx)
        mask = action_mask(ctx.queue, self.encoder.m)
        q = np.where(mask, forward(self.net, s), -np.inf)
        action = int(np.argmax(q))
        if action == 0:
            return Decision(
                kind=DecisionKind.LOCAL, expected_cost=evaluate_local_option(ctx).value
            )
        return Decision(
            kind=DecisionKind.INSERT,
            position=action,
            expected_cost=evaluate_insert_option(ctx, action).value,
        )

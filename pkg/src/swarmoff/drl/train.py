"""DQN training loop over the offloading simulator.

Episodes are independent seeded simulation runs; every real decision epoch
(queue not full) yields one stored transition. Q(s, a) is regressed onto
r + discount * max over valid actions of Q_target(s'), with the target
network hard-synced at a fixed interval. The whole loop is single-threaded
and bit-reproducible from (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from ..scheduler import Decision, DecisionContext, DecisionKind, Policy
from ..sim import SimConfig, evaluate, run
from .agent import (
    ReplayBuffer,
    StateEncoder,
    StateNorms,
    Transition,
    action_mask,
    chosen_option_reward,
    raw_option_cost,
    select_action,
)
from .network import AdamState, Network, adam_step, backward, forward, init_network

HIDDEN_WIDTH = 128
N_HIDDEN = 3  # four fully connected layers in total


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 1e-3
    discount: float = 0.5  # bootstrap weight; keeps returns inside Tanh range
    replay_capacity: int = 100_000
    batch_size: int = 64
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 20_000
    target_sync_interval: int = 500
    reward_scale: Optional[float] = None  # None: calibrate on a random warm-up
    target_clip: float = 0.98  # regression targets clamped inside Tanh range
    episode_duration: float = 30.0  # simulated seconds per episode
    episodes: int = 200
    min_replay: int = 1_000
    warmup_episodes: int = 2  # random-policy episodes for scale calibration

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must be in [0, 1)")
        if self.replay_capacity < self.batch_size:
            raise ValueError("replay_capacity must hold at least one batch")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("epsilon schedule must satisfy 0 <= end <= start <= 1")
        if self.epsilon_decay_steps < 1 or self.target_sync_interval < 1:
            raise ValueError("schedule intervals must be >= 1")
        if not 0.0 < self.target_clip <= 1.0:
            raise ValueError("target_clip must be in (0, 1]")
        if self.episode_duration <= 0 or self.episodes < 0:
            raise ValueError("episode_duration must be positive, episodes >= 0")
        if self.min_replay < self.batch_size:
            raise ValueError("min_replay must be >= batch_size")
        if self.reward_scale is not None and self.reward_scale <= 0:
            raise ValueError("reward_scale must be positive")


@dataclass(frozen=True)
class EpisodeLog:
    episode: int
    transitions: int
    epsilon: float
    mean_loss: float
    avg_objective: float


@dataclass
class TrainResult:
    network: Network
    norms: StateNorms
    reward_scale: float
    log: List[EpisodeLog]
    transitions: int
    config: TrainerConfig
    seed: int


class _RewardProbe(Policy):
    """Uniform-random policy that records raw (unscaled) decision costs."""

    name = "reward-probe"

    def __init__(self, encoder: StateEncoder, cost, rng: np.random.Generator):
        self.encoder = encoder
        self.cost = cost
        self.rng = rng
        self.raw: List[float] = []

    def decide(self, ctx: DecisionContext) -> Decision:
        mask = action_mask(ctx.queue, self.encoder.m)
        valid = np.flatnonzero(mask)
        action = int(valid[self.rng.integers(0, valid.size)])
        self.raw.append(raw_option_cost(ctx, action, self.cost))
        return _to_decision(ctx, action)


def _to_decision(ctx: DecisionContext, action: int) -> Decision:
    if action == 0:
        return Decision(kind=DecisionKind.LOCAL)
    return Decision(kind=DecisionKind.INSERT, position=action)


class _TrainingPolicy(Policy):
    """Epsilon-greedy actor that stores transitions and steps the learner."""

    name = "drl-training"

    def __init__(self, trainer: "_Trainer"):
        self.tr = trainer
        self._pending = None  # (s, a, r) awaiting its successor state

    def decide(self, ctx: DecisionContext) -> Decision:
        tr = self.tr
        s = tr.encoder.encode_ctx(ctx)
        mask = action_mask(ctx.queue, tr.encoder.m)
        if self._pending is not None:
            ps, pa, pr = self._pending
            tr.store(Transition(ps, pa, pr, s, mask, terminal=False))
        action = select_action(tr.net, s, mask, tr.epsilon(), tr.rng_explore)
        r = chosen_option_reward(ctx, action, tr.cost, tr.reward_scale)
        self._pending = (s, action, r)
        return _to_decision(ctx, action)

    def on_run_end(self) -> None:
        if self._pending is not None:
            ps, pa, pr = self._pending
            dummy = np.zeros(self.tr.encoder.dim)
            mask = np.zeros(self.tr.encoder.m + 1, dtype=bool)
            mask[0] = True
            self.tr.store(Transition(ps, pa, pr, dummy, mask, terminal=True))
            self._pending = None


class _Trainer:
    def __init__(self, sim_config: SimConfig, cfg: TrainerConfig, seed: int):
        self.sim_config = sim_config
        self.cfg = cfg
        self.cost = sim_config.cost
        self.norms = StateNorms.from_config(sim_config)
        self.encoder = StateEncoder(sim_config.capacity_m, self.norms)
        ss = np.random.SeedSequence(seed)
        init_ss, explore_ss, replay_ss, probe_ss = ss.spawn(4)
        dims = [self.encoder.dim] + [HIDDEN_WIDTH] * N_HIDDEN + [sim_config.capacity_m + 1]
        self.net = init_network(dims, np.random.default_rng(init_ss))
        self.target = self.net.copy()
        self.rng_explore = np.random.default_rng(explore_ss)
        self.rng_replay = np.random.default_rng(replay_ss)
        self.rng_probe = np.random.default_rng(probe_ss)
        self.replay = ReplayBuffer(cfg.replay_capacity)
        self.adam = AdamState.for_params(self.net.params)
        self.steps = 0  # stored transitions
        self.learn_steps = 0
        self.losses: List[float] = []
        self.reward_scale = cfg.reward_scale if cfg.reward_scale is not None else 1.0

    def epsilon(self) -> float:
        c = self.cfg
        frac = min(1.0, self.steps / c.epsilon_decay_steps)
        return c.epsilon_start + (c.epsilon_end - c.epsilon_start) * frac

    def calibrate_scale(self, episode_seeds: List[int]) -> None:
        """reward_scale maps the 99th percentile |raw cost| to 1.0."""
        probe = _RewardProbe(self.encoder, self.cost, self.rng_probe)
        for s in episode_seeds:
            cfg = replace(
                self.sim_config, seed=s, duration=self.cfg.episode_duration, drain=True
            )
            run(cfg, probe)
        if probe.raw:
            q99 = float(np.quantile(np.abs(probe.raw), 0.99))
            if q99 > 0:
                self.reward_scale = 1.0 / q99

    def store(self, tr: Transition) -> None:
        self.replay.push(tr)
        self.steps += 1
        self.learn()

    def learn(self) -> None:
        c = self.cfg
        if len(self.replay) < c.min_replay:
            return
        batch = self.replay.sample(c.batch_size, self.rng_replay)
        s = np.stack([b.s for b in batch])
        a = np.array([b.a for b in batch])
        r = np.array([b.r for b in batch])
        s_next = np.stack([b.s_next for b in batch])
        terminal = np.array([b.terminal for b in batch])
        masks = np.stack([b.next_mask for b in batch])
        q_next = forward(self.target, s_next)
        q_next = np.where(masks, q_next, -np.inf)
        bootstrap = np.where(terminal, 0.0, q_next.max(axis=1))
        targets = np.clip(r + c.discount * bootstrap, -c.target_clip, c.target_clip)
        grads, loss = backward(self.net, s, a, targets)
        adam_step(self.net.params, grads, self.adam, c.learning_rate)
        self.net.assert_finite()
        self.losses.append(loss)
        self.learn_steps += 1
        if self.learn_steps % c.target_sync_interval == 0:
            self.target = self.net.copy()


def train(
    sim_config: SimConfig,
    cfg: TrainerConfig,
    episodes: Optional[int] = None,
    seed: int = 0,
) -> TrainResult:
    """Train a Q-network on seeded simulator episodes.

    Zero episodes returns the freshly initialized network unchanged (useful
    for smoke tests); the training log has one row per episode.
    """
    cfg.validate()
    sim_config.validate()
    n_episodes = cfg.episodes if episodes is None else episodes
    trainer = _Trainer(sim_config, cfg, seed)
    ep_ss = np.random.SeedSequence((seed, 0xE9150DE))
    seeds = [int(s.generate_state(1)[0]) for s in ep_ss.spawn(n_episodes + cfg.warmup_episodes)]
    if cfg.reward_scale is None and n_episodes > 0:
        trainer.calibrate_scale(seeds[:cfg.warmup_episodes])
    log: List[EpisodeLog] = []
    policy = _TrainingPolicy(trainer)
    for ep in range(n_episodes):
        ep_cfg = replace(
            sim_config,
            seed=seeds[cfg.warmup_episodes + ep],
            duration=cfg.episode_duration,
            drain=True,
        )
        loss_mark = len(trainer.losses)
        result = run(ep_cfg, policy)
        report = evaluate(result, sim_config.cost)
        new_losses = trainer.losses[loss_mark:]
        log.append(
            EpisodeLog(
                episode=ep,
                transitions=trainer.steps,
                epsilon=trainer.epsilon(),
                mean_loss=float(np.mean(new_losses)) if new_losses else 0.0,
                avg_objective=report.avg_objective,
            )
        )
    return TrainResult(
        network=trainer.net,
        norms=trainer.norms,
        reward_scale=trainer.reward_scale,
        log=log,
        transitions=trainer.steps,
        config=cfg,
        seed=seed,
    )

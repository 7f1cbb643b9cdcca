"""Parameter-sweep experiment harness with deterministic CSV emission.

A sweep is the cross product values x policies x seeds over one swept
parameter (mean task size, arrival intensity, or queue length). Rows are
independent seeded runs, so they may execute in parallel; output order and
bytes depend only on the spec.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .scheduler import (
    FifoOffloadPolicy,
    GreedyPolicy,
    LocalOnlyPolicy,
    PeriodicBatchPolicy,
    Policy,
    RandomPolicy,
)
from .sim import MetricsReport, SimConfig, evaluate, run

SWEEP_PARAMETERS = ("task_size", "lambda", "queue_m")
POLICY_NAMES = ("drl", "greedy", "local", "fifo", "periodic", "random")

CSV_HEADER = "parameter,policy,seed,avg_objective,avg_energy_J,avg_delay_s,miss_ratio,rejection_rate"

# Separates policy RNG streams from the environment stream of the same seed.
_POLICY_SEED_OFFSET = 1_000_000_007


@dataclass(frozen=True)
class SweepSpec:
    parameter: str  # one of SWEEP_PARAMETERS
    values: Tuple[float, ...]
    policies: Tuple[str, ...]
    seeds: Tuple[int, ...]
    base: SimConfig
    periodic_period: float = 1.0
    checkpoint: Optional[str] = None  # required when "drl" is swept

    def validate(self) -> None:
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}")
        if not self.values or not self.policies or not self.seeds:
            raise ValueError("sweep values, policies and seeds must be non-empty")
        for p in self.policies:
            if p not in POLICY_NAMES:
                raise ValueError(f"unknown policy {p!r}")
        if "drl" in self.policies and not self.checkpoint:
            raise ValueError("drl policy in a sweep requires a checkpoint")
        self.base.validate()


@dataclass(frozen=True)
class SweepRow:
    parameter_value: float
    policy: str
    seed: int
    report: MetricsReport


def apply_parameter(config: SimConfig, parameter: str, value: float) -> SimConfig:
    if parameter == "task_size":
        # value is the mean size in bits; the uniform range keeps its width.
        width = config.n_range[1] - config.n_range[0]
        lo, hi = value - width / 2.0, value + width / 2.0
        if lo <= 0:
            raise ValueError(f"mean task size {value} leaves a non-positive lower bound")
        return replace(config, n_range=(lo, hi))
    if parameter == "lambda":
        return replace(config, lambda_intensity=float(value))
    if parameter == "queue_m":
        return replace(config, capacity_m=int(value))
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def build_policy(
    name: str,
    config: SimConfig,
    checkpoint: Optional[str] = None,
    periodic_period: float = 1.0,
) -> Policy:
    if name == "local":
        return LocalOnlyPolicy()
    if name == "fifo":
        return FifoOffloadPolicy()
    if name == "greedy":
        return GreedyPolicy()
    if name == "periodic":
        return PeriodicBatchPolicy(period=periodic_period)
    if name == "random":
        return RandomPolicy(seed=config.seed + _POLICY_SEED_OFFSET)
    if name == "drl":
        if not checkpoint:
            raise ValueError("drl policy requires a checkpoint path")
        from .drl.agent import DqnPolicy  # deferred: keeps sweep import light
        from .drl.checkpoint import load_checkpoint

        net, meta = load_checkpoint(checkpoint)
        return DqnPolicy.from_checkpoint(net, meta, config)
    raise ValueError(f"unknown policy {name!r}")


def _run_row(args: Tuple[SimConfig, str, Optional[str], float]) -> MetricsReport:
    config, policy_name, checkpoint, period = args
    policy = build_policy(policy_name, config, checkpoint=checkpoint, periodic_period=period)
    return evaluate(run(config, policy), config.cost)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> List[SweepRow]:
    """One row per (value, policy, seed), in spec order regardless of jobs."""
    spec.validate()
    cells = []
    for value in spec.values:
        cfg_v = apply_parameter(spec.base, spec.parameter, value)
        for policy_name in spec.policies:
            for seed in spec.seeds:
                cells.append((value, policy_name, seed, replace(cfg_v, seed=seed)))
    args = [(cfg, pol, spec.checkpoint, spec.periodic_period) for (_, pol, _, cfg) in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_row, args))
    else:
        reports = [_run_row(a) for a in args]
    return [
        SweepRow(parameter_value=value, policy=pol, seed=seed, report=rep)
        for (value, pol, seed, _), rep in zip(cells, reports)
    ]


@dataclass(frozen=True)
class SummaryRow:
    parameter_value: float
    policy: str
    n_seeds: int
    mean: Dict[str, float]
    std: Dict[str, float]


_METRIC_FIELDS = ("avg_objective", "avg_energy", "avg_delay", "deadline_miss_ratio", "rejection_rate")


def summarize(rows: Sequence[SweepRow]) -> List[SummaryRow]:
    """Per-(value, policy) mean and population standard deviation over seeds."""
    groups: Dict[Tuple[float, str], List[MetricsReport]] = {}
    order: List[Tuple[float, str]] = []
    for row in rows:
        key = (row.parameter_value, row.policy)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row.report)
    out = []
    for key in order:
        reports = groups[key]
        mean = {}
        std = {}
        for f in _METRIC_FIELDS:
            vals = [getattr(r, f) for r in reports]
            mean[f] = statistics.fmean(vals)
            std[f] = statistics.pstdev(vals)
        out.append(SummaryRow(key[0], key[1], len(reports), mean, std))
    return out


def fmt9(x: float) -> str:
    """Floats rendered with 9 significant digits."""
    return format(float(x), ".9g")


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        rep = r.report
        lines.append(
            ",".join(
                [
                    fmt9(r.parameter_value),
                    r.policy,
                    str(r.seed),
                    fmt9(rep.avg_objective),
                    fmt9(rep.avg_energy),
                    fmt9(rep.avg_delay),
                    fmt9(rep.deadline_miss_ratio),
                    fmt9(rep.rejection_rate),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def summary_to_csv(rows: Sequence[SummaryRow]) -> str:
    header = ["parameter", "policy", "n_seeds"]
    for f in _METRIC_FIELDS:
        header += [f"{f}_mean", f"{f}_std"]
    lines = [",".join(header)]
    for r in rows:
        cells = [fmt9(r.parameter_value), r.policy, str(r.n_seeds)]
        for f in _METRIC_FIELDS:
            cells += [fmt9(r.mean[f]), fmt9(r.std[f])]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_csv(text: str, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)

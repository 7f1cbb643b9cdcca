"""Command-line surface: train, eval, sweep, verify, trace.

One declarative JSON config file drives every subcommand; unknown keys are
rejected so a config cannot silently drift from the code. Each run writes the
fully resolved configuration next to its outputs, and identical
(config, seed) inputs produce byte-identical outputs.

Exit codes: 0 success, 1 validation/usage error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .channel import ChannelParams
from .drl.agent import DqnPolicy
from .drl.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .drl.train import TrainerConfig, TrainResult, train
from .metrics import (
    POLICY_NAMES,
    SweepSpec,
    build_policy,
    fmt9,
    rows_to_csv,
    run_sweep,
    summarize,
    summary_to_csv,
    write_csv,
)
from .model import CostParams
from .sim import SimConfig, evaluate, run, trace_lines
from .verify import run_suites

OUT_ENV_VAR = "SWARMOFF_OUT"

EVAL_CSV_HEADER = "policy,seed,avg_objective,avg_energy_J,avg_delay_s,miss_ratio,rejection_rate"
TRAIN_LOG_HEADER = "episode,transitions,epsilon,mean_loss,avg_objective"


class ValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems are validation errors
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


# ---------------------------------------------------------------------------
# Config loading
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class CliConfig:
    sim: SimConfig
    trainer: TrainerConfig
    sweep: Optional[dict]  # raw sweep section; materialized by cmd_sweep
    periodic_period: float = 1.0


def _from_section(cls, data: dict, where: str, converters: Optional[dict] = None):
    field_names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - field_names
    if unknown:
        raise ValidationError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    kwargs = dict(data)
    if converters:
        for key, conv in converters.items():
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = conv(kwargs[key])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad {where} section: {exc}") from exc


def load_config(path: str) -> CliConfig:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError(f"config file {p} must contain a JSON object")
    known = {"sim", "trainer", "sweep", "policies"}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")

    sim_raw = dict(raw.get("sim", {}))
    cost = _from_section(CostParams, sim_raw.pop("cost", {}), "sim.cost")
    channel = _from_section(ChannelParams, sim_raw.pop("channel", {}), "sim.channel")
    sim = _from_section(
        SimConfig,
        {**sim_raw, "cost": cost, "channel": channel},
        "sim",
        converters={"n_range": tuple, "d_range": tuple},
    )
    trainer = _from_section(TrainerConfig, raw.get("trainer", {}), "trainer")
    policies_raw = raw.get("policies", {})
    unknown_p = set(policies_raw) - {"periodic_period"}
    if unknown_p:
        raise ValidationError(f"unknown key(s) in policies: {', '.join(sorted(unknown_p))}")
    sweep = raw.get("sweep")
    if sweep is not None and not isinstance(sweep, dict):
        raise ValidationError("sweep section must be an object")
    try:
        sim.validate()
        trainer.validate()
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    return CliConfig(
        sim=sim,
        trainer=trainer,
        sweep=sweep,
        periodic_period=float(policies_raw.get("periodic_period", 1.0)),
    )


def resolved_config_json(cfg: CliConfig) -> str:
    doc = {
        "sim": dataclasses.asdict(cfg.sim),
        "trainer": dataclasses.asdict(cfg.trainer),
        "policies": {"periodic_period": cfg.periodic_period},
    }
    if cfg.sweep is not None:
        doc["sweep"] = cfg.sweep
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _out_dir(arg: Optional[str]) -> Path:
    out = Path(arg or os.environ.get(OUT_ENV_VAR, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _parse_seeds(text: str) -> List[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"bad seed list {text!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_train(cfg: CliConfig, out_dir: Path, episodes: Optional[int], seed: Optional[int]) -> int:
    seed = cfg.sim.seed if seed is None else seed
    result = train(cfg.sim, cfg.trainer, episodes=episodes, seed=seed)
    ckpt = out_dir / "checkpoint.bin"
    save_checkpoint(ckpt, result.network, cfg.sim.capacity_m, training_meta(result))
    log_lines = [TRAIN_LOG_HEADER]
    for row in result.log:
        log_lines.append(
            ",".join(
                [
                    str(row.episode),
                    str(row.transitions),
                    fmt9(row.epsilon),
                    fmt9(row.mean_loss),
                    fmt9(row.avg_objective),
                ]
            )
        )
    _write(out_dir / "training_log.csv", "\n".join(log_lines) + "\n")
    _write(out_dir / "resolved_config.json", resolved_config_json(cfg))
    print(f"trained {result.transitions} transitions over {len(result.log)} episodes")
    print(f"checkpoint: {ckpt}")
    return 0


def training_meta(result: TrainResult) -> Dict[str, object]:
    c = result.config
    return {
        "seed": result.seed,
        "episodes": len(result.log),
        "transitions": result.transitions,
        "learning_rate": c.learning_rate,
        "discount": c.discount,
        "replay_capacity": c.replay_capacity,
        "batch_size": c.batch_size,
        "epsilon_start": c.epsilon_start,
        "epsilon_end": c.epsilon_end,
        "epsilon_decay_steps": c.epsilon_decay_steps,
        "target_sync_interval": c.target_sync_interval,
        "target_clip": c.target_clip,
        "episode_duration": c.episode_duration,
        "reward_scale": result.reward_scale,
        "norm_d_ref": result.norms.d_ref,
        "norm_n_ref": result.norms.n_ref,
        "norm_edge": result.norms.edge,
        "norm_t_com_ref": result.norms.t_com_ref,
    }


def cmd_eval(
    cfg: CliConfig,
    out_dir: Path,
    policy_name: str,
    checkpoint: Optional[str],
    seeds: List[int],
) -> int:
    if policy_name == "drl" and not checkpoint:
        raise ValidationError("policy 'drl' requires --checkpoint")
    if policy_name != "drl" and checkpoint:
        raise ValidationError("--checkpoint only applies to the drl policy")
    train_seed: Optional[int] = None
    if policy_name == "drl":
        try:
            net, meta = load_checkpoint(checkpoint)
        except CheckpointError as exc:
            raise ValidationError(str(exc)) from exc
        try:
            base_policy = DqnPolicy.from_checkpoint(net, meta, cfg.sim)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        train_seed = int(meta["seed"]) if "seed" in meta else None
        if train_seed is not None and train_seed in seeds:
            raise ValidationError(
                f"evaluation seeds must be disjoint from the training seed {train_seed}"
            )
    lines = [EVAL_CSV_HEADER]
    for seed in seeds:
        run_cfg = dataclasses.replace(cfg.sim, seed=seed)
        if policy_name == "drl":
            policy = base_policy
        else:
            policy = build_policy(
                policy_name, run_cfg, periodic_period=cfg.periodic_period
            )
        report = evaluate(run(run_cfg, policy), run_cfg.cost)
        lines.append(
            ",".join(
                [
                    policy_name,
                    str(seed),
                    fmt9(report.avg_objective),
                    fmt9(report.avg_energy),
                    fmt9(report.avg_delay),
                    fmt9(report.deadline_miss_ratio),
                    fmt9(report.rejection_rate),
                ]
            )
        )
    _write(out_dir / "eval.csv", "\n".join(lines) + "\n")
    _write(out_dir / "resolved_config.json", resolved_config_json(cfg))
    print(f"evaluated policy {policy_name} on {len(seeds)} seed(s)")
    print(f"results: {out_dir / 'eval.csv'}")
    return 0


def cmd_sweep(cfg: CliConfig, out_dir: Path, checkpoint: Optional[str], jobs: int) -> int:
    if cfg.sweep is None:
        raise ValidationError("config has no sweep section")
    raw = dict(cfg.sweep)
    unknown = set(raw) - {"parameter", "values", "policies", "seeds"}
    if unknown:
        raise ValidationError(f"unknown key(s) in sweep: {', '.join(sorted(unknown))}")
    try:
        spec = SweepSpec(
            parameter=raw["parameter"],
            values=tuple(float(v) for v in raw["values"]),
            policies=tuple(raw["policies"]),
            seeds=tuple(int(s) for s in raw["seeds"]),
            base=cfg.sim,
            periodic_period=cfg.periodic_period,
            checkpoint=checkpoint,
        )
        spec.validate()
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"bad sweep section: {exc}") from exc
    rows = run_sweep(spec, jobs=jobs)
    write_csv(rows_to_csv(rows), str(out_dir / "sweep.csv"))
    write_csv(summary_to_csv(summarize(rows)), str(out_dir / "sweep_summary.csv"))
    _write(out_dir / "resolved_config.json", resolved_config_json(cfg))
    print(f"{len(rows)} sweep rows -> {out_dir / 'sweep.csv'}")
    return 0


def cmd_verify(scale: str) -> int:
    results = run_suites(scale)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: {r.measured} (tolerance: {r.tolerance}; {r.detail}; {r.seconds:.1f}s)")
        failed += not r.passed
    if failed:
        print(f"{failed}/{len(results)} suite(s) failed")
        return 2
    print(f"all {len(results)} suites passed")
    return 0


def cmd_trace(
    cfg: CliConfig, out_dir: Path, policy_name: str, checkpoint: Optional[str], seed: Optional[int]
) -> int:
    run_cfg = cfg.sim if seed is None else dataclasses.replace(cfg.sim, seed=seed)
    policy = build_policy(
        policy_name, run_cfg, checkpoint=checkpoint, periodic_period=cfg.periodic_period
    )
    result = run(run_cfg, policy, record_trace=True)
    _write(out_dir / "trace.jsonl", "\n".join(trace_lines(result.trace)) + "\n")
    _write(out_dir / "resolved_config.json", resolved_config_json(cfg))
    print(f"{len(result.trace)} trace records -> {out_dir / 'trace.jsonl'}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="swarmoff", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="path to the JSON config file")
        p.add_argument("--out", default=None, help=f"output directory (or ${OUT_ENV_VAR})")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p_train = sub.add_parser("train", help="train the DQN policy and write a checkpoint")
    add_common(p_train)
    p_train.add_argument("--episodes", type=int, default=None, help="override trainer.episodes")

    p_eval = sub.add_parser("eval", help="evaluate one policy over seeds")
    add_common(p_eval)
    p_eval.add_argument("--policy", required=True, choices=POLICY_NAMES)
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--seeds", default=None, help="comma-separated evaluation seeds")

    p_sweep = sub.add_parser("sweep", help="run the configured parameter sweep")
    add_common(p_sweep)
    p_sweep.add_argument("--checkpoint", default=None)
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel row execution")

    p_verify = sub.add_parser("verify", help="run the oracle verification suites")
    p_verify.add_argument("--scale", choices=("quick", "full"), default="full")

    p_trace = sub.add_parser("trace", help="dump one seeded run's event trace")
    add_common(p_trace)
    p_trace.add_argument("--policy", required=True, choices=POLICY_NAMES)
    p_trace.add_argument("--checkpoint", default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "verify":
            return cmd_verify(args.scale)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, seed=args.seed))
        out_dir = _out_dir(args.out)
        if args.command == "train":
            return cmd_train(cfg, out_dir, args.episodes, args.seed)
        if args.command == "eval":
            seeds = _parse_seeds(args.seeds) if args.seeds else [cfg.sim.seed]
            return cmd_eval(cfg, out_dir, args.policy, args.checkpoint, seeds)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir, args.checkpoint, args.jobs)
        if args.command == "trace":
            return cmd_trace(cfg, out_dir, args.policy, args.checkpoint, args.seed)
        raise ValidationError(f"unknown command {args.command!r}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

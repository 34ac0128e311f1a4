"""Experiment harness: configuration, seeding, orchestration, CLI.

Configs are flat `key = value` text files (see CONFIG_SCHEMA for the keys;
omitted keys take the reference defaults). Every command is deterministic
given the config and seeds: result tables are byte-identical across reruns.
Outputs are CSV tables plus a JSON metadata sidecar.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import subprocess
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import neuralnet
from .agent import EvalStats, TrainConfig, TrainReport, evaluate, train
from .env import RelayNetworkEnv, SimParams, observation_dim, action_count
from .neuralnet import Architecture, load_params, save_params
from .oracle import (
    build_mdp,
    relative_value_iteration,
    rollout_quantized,
    simulate_policy,
)
from .policies import PolicyKind, get_policy, rollout

DDQN_POLICY = "ddqn"
HEURISTICS = tuple(k.value for k in PolicyKind)
ALL_POLICIES = (DDQN_POLICY,) + HEURISTICS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: simulation constants, training hyperparameters, the
    policies to compare, the seed list, and an optional sweep axis."""

    sim: SimParams = field(default_factory=SimParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    policies: tuple = (DDQN_POLICY, "maxlink", "greedy", "dbrs")
    seeds: tuple = tuple(range(101, 111))
    train_seed: int = 1
    sweep: str = "none"  # none | k | emax
    sweep_values: tuple = ()
    eval_slots: int = 100_000
    mask_infeasible: bool = True
    train_missing: bool = True

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.sweep not in ("none", "k", "emax"):
            raise ConfigError(f"unknown sweep axis {self.sweep!r}")
        if self.sweep != "none" and not self.sweep_values:
            raise ConfigError("sweep_values must be set for a sweep")
        if any(v < 1 for v in self.sweep_values):
            raise ConfigError("sweep_values must be positive integers")
        for p in self.policies:
            if p not in ALL_POLICIES:
                raise ConfigError(f"unknown policy {p!r}")


# key -> (section, field, parser). Parsers raise ValueError on bad input.


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> tuple:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _parse_float_list(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _parse_str_list(text: str) -> tuple:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _parse_opt_float(text: str) -> Optional[float]:
    if text.strip().lower() in ("auto", "none"):
        return None
    return float(text)


CONFIG_SCHEMA = {
    "n_relays": ("sim", "n_relays", int),
    "lambda": ("sim", "arrival_prob", float),
    "aoi_cap": ("sim", "aoi_cap", int),
    "energy_cap": ("sim", "energy_cap", int),
    "eta": ("sim", "eh_efficiency", float),
    "power_source": ("sim", "power_source", float),
    "power_relay": ("sim", "power_relay", float),
    "noise_power": ("sim", "noise_power", float),
    "target_rate": ("sim", "target_rate", float),
    "snr_threshold": ("sim", "snr_threshold", _parse_opt_float),
    "slot_duration": ("sim", "slot_duration", float),
    "dist_sr": ("sim", "dist_sr", _parse_float_list),
    "dist_rd": ("sim", "dist_rd", _parse_float_list),
    "infeasible_penalty": ("sim", "infeasible_penalty", _parse_opt_float),
    "initial_energy": ("sim", "initial_energy_intervals", int),
    "episodes": ("train", "episodes", int),
    "steps_per_episode": ("train", "steps_per_episode", int),
    "discount": ("train", "discount", float),
    "step_size": ("train", "step_size", float),
    "sync_period": ("train", "sync_period", int),
    "eps_start": ("train", "eps_start", float),
    "eps_end": ("train", "eps_end", float),
    "eps_decay_frac": ("train", "eps_decay_frac", float),
    "per_alpha": ("train", "per_alpha", float),
    "per_beta": ("train", "per_beta", float),
    "priority_offset": ("train", "priority_offset", float),
    "memory_size": ("train", "memory_size", int),
    "batch_size": ("train", "batch_size", int),
    "hidden_dims": ("train", "hidden_dims", _parse_int_list),
    "optimizer": ("train", "optimizer", str.strip),
    "policies": ("top", "policies", _parse_str_list),
    "seeds": ("top", "seeds", _parse_int_list),
    "train_seed": ("top", "train_seed", int),
    "sweep": ("top", "sweep", str.strip),
    "sweep_values": ("top", "sweep_values", _parse_int_list),
    "eval_slots": ("top", "eval_slots", int),
    "mask_infeasible": ("top", "mask_infeasible", _parse_bool),
    "train_missing": ("top", "train_missing", _parse_bool),
}


def parse_config_text(text: str) -> ExperimentConfig:
    sections = {"sim": {}, "train": {}, "top": {}}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value': {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        section, attr, parser = CONFIG_SCHEMA[key]
        try:
            sections[section][attr] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: {exc}") from exc
    try:
        sim = SimParams(**sections["sim"])
        train_cfg = TrainConfig(**sections["train"])
        return ExperimentConfig(sim=sim, train=train_cfg, **sections["top"])
    except ValueError as exc:
        message = str(exc)
        # report the config key, not the internal field name
        for key, (_, attr, _) in CONFIG_SCHEMA.items():
            if attr != key and attr in message:
                message = f"key {key!r}: {message}"
                break
        raise ConfigError(message) from exc


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file; paper defaults fill omitted keys."""
    return parse_config_text(Path(path).read_text())


def _format_value(section: str, attr: str, value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def dump_config(config: ExperimentConfig) -> str:
    """Serialize a config so that load(dump(c)) == c."""
    lines = []
    for key, (section, attr, _) in CONFIG_SCHEMA.items():
        if section == "sim":
            value = getattr(config.sim, attr)
        elif section == "train":
            value = getattr(config.train, attr)
        else:
            value = getattr(config, attr)
        lines.append(f"{key} = {_format_value(section, attr, value)}")
    return "\n".join(lines) + "\n"


def seed_streams(master_seed: int, labels: Sequence[str]) -> dict:
    """Independent named random streams derived from one master seed.

    The derivation hashes each label, so adding a consumer never perturbs
    the existing streams, and it is identical across platforms.
    """
    out = {}
    for label in labels:
        digest = hashlib.sha256(label.encode("utf-8")).digest()
        words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
        ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF] + words)
        out[label] = np.random.default_rng(ss)
    return out


def make_env(params: SimParams, seed: int, label: str = "env") -> RelayNetworkEnv:
    rng = seed_streams(seed, [label])[label]
    return RelayNetworkEnv(params, rng)


@dataclass
class ResultRow:
    """One evaluation measurement (or a per-cell aggregate)."""

    policy: str
    n_relays: int
    energy_cap: int
    seed: str  # seed number, or "aggregate"
    slots: int
    mean_aoi: float
    aoi_stderr: Optional[float]
    relay_discard_rate: float
    source_drop_rate: float
    stale_drop_rate: float
    delivered: float


RESULT_HEADER = [
    "policy", "n_relays", "energy_cap", "seed", "slots", "mean_aoi",
    "aoi_stderr", "relay_discard_rate", "source_drop_rate",
    "stale_drop_rate", "delivered",
]


def write_rows_csv(rows: Sequence[ResultRow], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_HEADER)
        for r in rows:
            writer.writerow([
                r.policy, r.n_relays, r.energy_cap, r.seed, r.slots,
                repr(r.mean_aoi),
                "" if r.aoi_stderr is None else repr(r.aoi_stderr),
                repr(r.relay_discard_rate), repr(r.source_drop_rate),
                repr(r.stale_drop_rate), repr(r.delivered),
            ])


def _git_revision() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def write_sidecar(path, config: ExperimentConfig, command: str,
                  extra: Optional[dict] = None) -> None:
    meta = {
        "command": command,
        "config": dump_config(config),
        "seeds": list(config.seeds),
        "git_revision": _git_revision(),
    }
    if extra:
        meta.update(extra)
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _config_fingerprint(params: SimParams, train_cfg: TrainConfig,
                        seed: int) -> str:
    blob = json.dumps({
        "sim": {f.name: getattr(params, f.name) for f in fields(params)},
        "train": {f.name: getattr(train_cfg, f.name) for f in fields(train_cfg)},
        "seed": seed,
    }, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def checkpoint_name(params: SimParams, train_cfg: TrainConfig, seed: int) -> str:
    tag = _config_fingerprint(params, train_cfg, seed)
    return (f"ddqn_k{params.n_relays}_e{params.energy_cap}"
            f"_seed{seed}_{tag}.npz")


def run_training(params: SimParams, train_cfg: TrainConfig, seed: int,
                 out_dir) -> tuple[Path, TrainReport]:
    """Train one agent; write the checkpoint and the per-episode trace CSV.
    Reuses an existing checkpoint with the same fingerprint."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / checkpoint_name(params, train_cfg, seed)
    trace_path = ckpt_path.with_suffix(".trace.csv")
    if ckpt_path.exists() and trace_path.exists():
        return ckpt_path, None
    env = make_env(params, seed, "train-env")
    rng = seed_streams(seed, ["train-agent"])["train-agent"]
    report = train(env, train_cfg, rng)
    save_params(report.params, ckpt_path)
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["episode", "mean_loss", "mean_aoi", "reward_sum"])
        for ep in range(len(report.mean_loss)):
            loss = report.mean_loss[ep]
            writer.writerow([
                ep + 1,
                "" if math.isnan(loss) else repr(loss),
                repr(report.mean_aoi[ep]),
                repr(report.reward_sum[ep]),
            ])
    return ckpt_path, report


def _swept_params(config: ExperimentConfig) -> list:
    base = config.sim
    if config.sweep == "none":
        return [base]
    out = []
    for v in config.sweep_values:
        if config.sweep == "k":
            # Distances replicate the first entry when the relay count changes.
            out.append(replace(base, n_relays=v,
                               dist_sr=(base.dist_sr[0],) * v,
                               dist_rd=(base.dist_rd[0],) * v))
        else:
            initial = min(base.initial_energy_intervals, v)
            out.append(replace(base, energy_cap=v,
                               initial_energy_intervals=initial))
    return out


def _eval_heuristic(policy_name: str, params: SimParams, slots: int,
                    seeds: Sequence[int]) -> EvalStats:
    policy = get_policy(policy_name)
    per_seed = []
    discards = drops = stale = delivered = generated = 0
    for seed in seeds:
        label = f"eval/{policy_name}/k{params.n_relays}/e{params.energy_cap}"
        streams = seed_streams(seed, [label, label + "/policy"])
        env = RelayNetworkEnv(params, streams[label])
        per_seed.append(rollout(env, policy, slots, streams[label + "/policy"]))
        t = env.totals
        discards += t.relay_discards
        drops += t.source_drops
        stale += t.stale_drops
        delivered += t.delivered
        generated += t.generated
    arr = np.asarray(per_seed)
    stderr = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
    gen = max(1, generated)
    return EvalStats(
        mean_aoi=float(arr.mean()), stderr_aoi=stderr, per_seed_aoi=per_seed,
        relay_discard_rate=discards / gen, source_drop_rate=drops / gen,
        stale_drop_rate=stale / gen, delivered=delivered / len(seeds),
        generated=generated / len(seeds),
    )


def _eval_ddqn(params: SimParams, config: ExperimentConfig,
               checkpoint_dir) -> EvalStats:
    ckpt = Path(checkpoint_dir) / checkpoint_name(params, config.train,
                                                  config.train_seed)
    if not ckpt.exists():
        if not config.train_missing:
            raise FileNotFoundError(f"missing checkpoint {ckpt} "
                                    "(training disabled)")
        run_training(params, config.train, config.train_seed, checkpoint_dir)
    net = load_params(ckpt)

    def factory(seed: int) -> RelayNetworkEnv:
        label = f"eval/ddqn/k{params.n_relays}/e{params.energy_cap}"
        return make_env(params, seed, label)

    return evaluate(net, factory, config.eval_slots, config.seeds,
                    config.mask_infeasible)


def run_compare(config: ExperimentConfig, checkpoint_dir) -> list:
    """Evaluate every configured policy over the sweep and the seed list.

    One data row per (policy, sweep value, seed), plus one aggregate row
    (mean and standard error across seeds) per (policy, sweep value). Rows
    come out sorted, so the table is deterministic."""
    rows = []
    for params in _swept_params(config):
        for policy_name in config.policies:
            if policy_name == DDQN_POLICY:
                stats = _eval_ddqn(params, config, checkpoint_dir)
            else:
                stats = _eval_heuristic(policy_name, params,
                                        config.eval_slots, config.seeds)
            for seed, aoi in zip(config.seeds, stats.per_seed_aoi):
                rows.append(ResultRow(
                    policy=policy_name, n_relays=params.n_relays,
                    energy_cap=params.energy_cap, seed=str(seed),
                    slots=config.eval_slots, mean_aoi=aoi, aoi_stderr=None,
                    relay_discard_rate=stats.relay_discard_rate,
                    source_drop_rate=stats.source_drop_rate,
                    stale_drop_rate=stats.stale_drop_rate,
                    delivered=stats.delivered,
                ))
            rows.append(ResultRow(
                policy=policy_name, n_relays=params.n_relays,
                energy_cap=params.energy_cap, seed="aggregate",
                slots=config.eval_slots, mean_aoi=stats.mean_aoi,
                aoi_stderr=stats.stderr_aoi,
                relay_discard_rate=stats.relay_discard_rate,
                source_drop_rate=stats.source_drop_rate,
                stale_drop_rate=stats.stale_drop_rate,
                delivered=stats.delivered,
            ))
    rows.sort(key=lambda r: (r.n_relays, r.energy_cap, r.policy,
                             r.seed != "aggregate", r.seed))
    return rows


def run_oracle_check(n_relays: int = 1, energy_cap: int = 2, aoi_cap: int = 10,
                     age_clamp: int = 5, arrival_prob: float = 0.3,
                     sim_slots: int = 1_000_000, seed: int = 7) -> dict:
    """Build the standard miniature, solve it, and cross-check the solution
    against simulation and the heuristics."""
    params = SimParams(n_relays=n_relays, arrival_prob=arrival_prob,
                       aoi_cap=aoi_cap, energy_cap=energy_cap,
                       horizon=sim_slots)
    mdp = build_mdp(params, age_clamp=age_clamp)
    solution = relative_value_iteration(mdp)
    streams = seed_streams(seed, ["oracle-sim"] + [f"h/{h}" for h in HEURISTICS])
    sim_mean = simulate_policy(mdp, solution.policy, sim_slots,
                               streams["oracle-sim"])
    heur = {}
    for name in HEURISTICS:
        fn = get_policy(name)
        heur[name] = rollout_quantized(mdp, fn, sim_slots // 10,
                                       streams[f"h/{name}"])
    return {
        "average_cost": solution.average_cost,
        "residual_span": solution.residual_span,
        "iterations": solution.iterations,
        "simulated_mean_aoi": sim_mean,
        "relative_gap": abs(sim_mean - solution.average_cost)
        / solution.average_cost,
        "heuristic_mean_aoi": heur,
        "n_states": mdp.n_states,
    }


def run_grad_check(n_nets: int = 100, seed: int = 3) -> float:
    """Max relative error between analytic and central-difference gradients
    over randomized small networks (the standing correctness check)."""
    from .neuralnet import backward, forward, init_network, weighted_td_loss
    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    while checked < n_nets:
        arch = Architecture(input_dim=5, hidden_dims=(8,), output_dim=4)
        net = init_network(arch, rng)
        x = rng.uniform(-1.0, 1.0, size=5)
        pre = x @ net.weights[0] + net.biases[0]
        if np.abs(pre).min() < 1e-3:
            continue  # stay away from rectifier kinks for finite differences
        a = int(rng.integers(4))
        y = float(rng.normal())
        w = float(rng.uniform(0.1, 1.0))
        q = forward(net, x)[a]
        _, dpred = weighted_td_loss(q, y, w)
        grad = backward(net, x, a, dpred)
        h = 1e-5
        for li in range(2):
            mats = (net.weights[li], net.biases[li])
            grads = (grad.weights[li], grad.biases[li])
            for mat, gan in zip(mats, grads):
                flat = mat.reshape(-1)
                gflat = gan.reshape(-1)
                for i in range(flat.size):
                    orig = flat[i]
                    flat[i] = orig + h
                    lp = w * (y - forward(net, x)[a]) ** 2
                    flat[i] = orig - h
                    lm = w * (y - forward(net, x)[a]) ** 2
                    flat[i] = orig
                    fd = (lp - lm) / (2 * h)
                    denom = max(abs(fd), abs(gflat[i]), 1e-8)
                    worst = max(worst, abs(fd - gflat[i]) / denom)
        checked += 1
    return worst


def run_selftest() -> dict:
    """Fast invariant smoke test (a trimmed version of the test suite)."""
    from .policies import random_select
    params = SimParams(n_relays=2, horizon=200)
    env = make_env(params, 11, "selftest")
    env.reset()
    prev_aoi = env.state.aoi.aoi
    rng = seed_streams(11, ["selftest/actions"])["selftest/actions"]
    for _ in range(2000):
        env.step(random_select(env.state, rng))
        aoi = env.state.aoi.aoi
        assert 1 <= aoi <= params.aoi_cap
        assert aoi <= prev_aoi + 1
        prev_aoi = aoi
        for r in env.state.relays:
            assert 0 <= r.energy_intervals(params) <= params.energy_cap
    t = env.totals
    resident = env.resident_packets()
    identity = (t.delivered + t.relay_discards + t.source_drops
                + t.stale_drops + resident)
    assert identity == t.generated, "packet accounting identity broken"
    return {"slots": 2000, "generated": t.generated, "delivered": t.delivered}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehrelay",
        description="Energy-harvesting relay status-update experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="config file (key = value lines)")
        p.add_argument("--out", type=Path, default=Path("results"),
                       help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the training master seed")

    p_train = sub.add_parser("train", help="train the relay-selection agent")
    common(p_train)
    p_eval = sub.add_parser("eval", help="evaluate a trained checkpoint")
    common(p_eval)
    p_eval.add_argument("--checkpoint", type=Path, required=True)
    p_eval.add_argument("--mask-infeasible", action="store_true", default=None)
    p_cmp = sub.add_parser("compare", help="compare all configured policies")
    common(p_cmp)
    p_cmp.add_argument("--policy", action="append", default=None,
                       help="restrict to one policy (repeatable)")
    p_k = sub.add_parser("sweep-k", help="average AoI vs number of relays")
    common(p_k)
    p_k.add_argument("--values", type=str, default="2,3,4,5")
    p_e = sub.add_parser("sweep-emax", help="average AoI vs energy buffer size")
    common(p_e)
    p_e.add_argument("--values", type=str, default="1,2,3,4")
    p_o = sub.add_parser("oracle-check", help="exact miniature cross-check")
    common(p_o)
    p_g = sub.add_parser("grad-check", help="finite-difference gradient check")
    common(p_g)
    sub.add_parser("selftest", help="fast invariant smoke test")
    return parser


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        config = replace(config, train_seed=args.seed)
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "selftest":
        print(json.dumps(run_selftest()))
        return 0
    config = _load(args) if cmd != "grad-check" else None
    out: Path = getattr(args, "out", Path("results"))
    if cmd == "train":
        ckpt, report = run_training(config.sim, config.train,
                                    config.train_seed, out)
        extra = {"checkpoint": ckpt.name}
        if report is not None:
            extra["timing"] = {"elapsed_s": report.elapsed_s}
        write_sidecar(ckpt.with_suffix(".meta.json"), config, "train", extra)
        print(f"checkpoint: {ckpt}")
        return 0
    if cmd == "eval":
        net = load_params(args.checkpoint)
        mask = config.mask_infeasible if args.mask_infeasible is None \
            else args.mask_infeasible

        def factory(seed):
            return make_env(config.sim, seed, "eval/ddqn/cli")

        stats = evaluate(net, factory, config.eval_slots, config.seeds, mask)
        print(json.dumps({
            "mean_aoi": stats.mean_aoi, "stderr_aoi": stats.stderr_aoi,
            "relay_discard_rate": stats.relay_discard_rate,
            "source_drop_rate": stats.source_drop_rate,
            "stale_drop_rate": stats.stale_drop_rate,
        }))
        return 0
    if cmd in ("compare", "sweep-k", "sweep-emax"):
        if cmd == "sweep-k":
            config = replace(config, sweep="k",
                             sweep_values=_parse_int_list(args.values))
        elif cmd == "sweep-emax":
            config = replace(config, sweep="emax",
                             sweep_values=_parse_int_list(args.values))
        elif getattr(args, "policy", None):
            config = replace(config, policies=tuple(args.policy))
        rows = run_compare(config, out / "checkpoints")
        table = out / f"{cmd}.csv"
        write_rows_csv(rows, table)
        write_sidecar(out / f"{cmd}.meta.json", config, cmd)
        print(f"table: {table}")
        return 0
    if cmd == "oracle-check":
        report = run_oracle_check()
        out.mkdir(parents=True, exist_ok=True)
        (out / "oracle_check.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n")
        print(json.dumps(report, sort_keys=True))
        return 0
    if cmd == "grad-check":
        worst = run_grad_check()
        print(json.dumps({"max_relative_error": worst, "tolerance": 1e-4}))
        return 0 if worst < 1e-4 else 2
    raise RuntimeError(f"unhandled command {cmd}")


if __name__ == "__main__":
    sys.exit(main())

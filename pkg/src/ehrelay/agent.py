"""DDQN relay-selection agent with prioritized replay.

Action selection is epsilon-greedy on the main network; targets decouple
selection (main network) from evaluation (target network). Each slot one
prioritized minibatch is sampled, the importance-weighted change is
accumulated across the batch, and a single optimizer step is applied; the
target network synchronizes with the main network every `sync_period` steps.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .env import (
    Action,
    RelayNetworkEnv,
    SimParams,
    action_count,
    action_from_index,
    check_feasible,
    observation_dim,
    observe,
)
from .neuralnet import (
    Architecture,
    GradientSet,
    QNetworkParams,
    backward_batch,
    clone_params,
    forward,
    forward_batch,
    _forward_cached,
    init_network,
    make_optimizer,
)
from .replay import PrioritizedReplay, Transition


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the training loop. Paper-scale defaults; step
    size, sync period, epsilon schedule and optimizer are free choices."""

    episodes: int = 1000
    steps_per_episode: int = 2000
    discount: float = 1.0
    step_size: float = 1e-3
    sync_period: int = 1000  # steps between target synchronizations
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_frac: float = 0.5  # fraction of total steps spent decaying
    per_alpha: float = 0.6
    per_beta: float = 0.4
    priority_offset: float = 1e-4  # added to |loss| so priorities stay positive
    memory_size: int = 10000
    batch_size: int = 32
    hidden_dims: tuple = (80,)
    optimizer: str = "sgd"  # or "adam"

    def __post_init__(self):
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        for name in ("eps_start", "eps_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.batch_size > self.memory_size:
            raise ValueError("batch_size must not exceed memory_size")
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))


@dataclass
class TrainReport:
    """Per-episode traces plus the final parameters."""

    mean_loss: list  # nan for episodes with no parameter update
    mean_aoi: list
    reward_sum: list
    params: QNetworkParams
    elapsed_s: float


def epsilon_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Exploration probability: linear from eps_start to eps_end over the
    first eps_decay_frac of total steps, then constant."""
    decay_steps = max(1.0, cfg.eps_decay_frac * total_steps)
    frac = min(1.0, step / decay_steps)
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac


def select_action(params: QNetworkParams, obs: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy action index: uniform with probability epsilon, else
    the arg-max action value (lowest index on ties)."""
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(params.arch.output_dim))
    return int(np.argmax(forward(params, obs)))


def ddqn_target(reward: float, obs_next: np.ndarray, terminal: bool,
                main: QNetworkParams, target: QNetworkParams,
                discount: float) -> float:
    """Double-DQN target: the main network picks the next action, the target
    network values it; terminal transitions bootstrap nothing."""
    if terminal:
        return float(reward)
    q_main = forward(main, obs_next)
    a_star = int(np.argmax(q_main))
    q_target = forward(target, obs_next)
    return float(reward + discount * q_target[a_star])


def _ddqn_targets_batch(rewards: np.ndarray, next_obs: np.ndarray,
                        terminals: np.ndarray, main: QNetworkParams,
                        target: QNetworkParams, discount: float) -> np.ndarray:
    a_star = np.argmax(forward_batch(main, next_obs), axis=1)
    boot = forward_batch(target, next_obs)[np.arange(len(rewards)), a_star]
    return rewards + discount * boot * (~terminals)


def train_step(main: QNetworkParams, target: QNetworkParams,
               memory: PrioritizedReplay, cfg: TrainConfig,
               rng: np.random.Generator, optimizer) -> Optional[float]:
    """One prioritized update. Returns the mean batch loss, or None while the
    memory is still shorter than a minibatch (warm-up)."""
    if len(memory) < cfg.batch_size:
        return None
    batch = memory.sample(cfg.batch_size, cfg.per_alpha, cfg.per_beta, rng)
    ys = _ddqn_targets_batch(batch.rewards, batch.next_obs, batch.terminals,
                             main, target, cfg.discount)
    q_all, acts = _forward_cached(main, batch.obs)
    preds = q_all[np.arange(len(ys)), batch.actions]
    errs = ys - preds
    losses = errs * errs
    upstreams = -2.0 * batch.weights * errs  # dloss/dpred, importance-weighted
    grad = backward_batch(main, batch.obs, batch.actions, upstreams, acts=acts)
    optimizer.apply(main, grad.scale(-1.0))  # descent direction
    memory.update_priorities(batch.indices, losses, cfg.priority_offset)
    return float(losses.mean())


def train(env: RelayNetworkEnv, cfg: TrainConfig,
          rng: np.random.Generator) -> TrainReport:
    """Full training run: episodes of fixed length, one environment step and
    one prioritized update per slot, periodic target synchronization. Each
    episode resets the network buffers (data empty, energy at the configured
    initial fill)."""
    p = env.params
    arch = Architecture(
        input_dim=observation_dim(p.n_relays),
        hidden_dims=cfg.hidden_dims,
        output_dim=action_count(p.n_relays),
    )
    main = init_network(arch, rng)
    target = clone_params(main)
    memory = PrioritizedReplay(cfg.memory_size)
    optimizer = make_optimizer(cfg.optimizer, cfg.step_size)
    total_steps = cfg.episodes * cfg.steps_per_episode
    n_actions = action_count(p.n_relays)

    mean_loss: list = []
    mean_aoi: list = []
    reward_sum: list = []
    t0 = time.perf_counter()
    global_step = 0
    for _ in range(cfg.episodes):
        env.reset()
        obs = env.observe()
        loss_total = 0.0
        loss_count = 0
        aoi_total = 0
        r_total = 0.0
        for n in range(1, cfg.steps_per_episode + 1):
            eps = epsilon_at(global_step, total_steps, cfg)
            a = select_action(main, obs, eps, rng)
            reward, _ = env.step(action_from_index(a, p.n_relays))
            obs_next = env.observe()
            memory.push(Transition(obs, a, reward, obs_next,
                                   terminal=(n == cfg.steps_per_episode)))
            loss = train_step(main, target, memory, cfg, rng, optimizer)
            if loss is not None:
                loss_total += loss
                loss_count += 1
            global_step += 1
            if global_step % cfg.sync_period == 0:
                target = clone_params(main)
            aoi_total += env.state.aoi.aoi
            r_total += reward
            obs = obs_next
        mean_loss.append(loss_total / loss_count if loss_count else float("nan"))
        mean_aoi.append(aoi_total / cfg.steps_per_episode)
        reward_sum.append(r_total)
    return TrainReport(
        mean_loss=mean_loss,
        mean_aoi=mean_aoi,
        reward_sum=reward_sum,
        params=main,
        elapsed_s=time.perf_counter() - t0,
    )


def make_greedy_policy(params: QNetworkParams,
                       mask_infeasible: bool = True) -> Callable:
    """Deterministic policy from trained parameters.

    With masking, the arg-max runs over the actions passing the feasibility
    check; when none pass it falls back to the unmasked arg-max.
    """

    def policy(state, sim_params: SimParams, rng) -> Action:
        obs = observe(state, sim_params)
        q = forward(params, obs)
        n = sim_params.n_relays
        if mask_infeasible:
            order = np.argsort(-q, kind="stable")
            for idx in order:
                action = action_from_index(int(idx), n)
                if check_feasible(state, action, sim_params)[0]:
                    return action
        return action_from_index(int(np.argmax(q)), n)

    return policy


@dataclass
class EvalStats:
    """Aggregate evaluation outcome across seeds."""

    mean_aoi: float
    stderr_aoi: float
    per_seed_aoi: list
    relay_discard_rate: float
    source_drop_rate: float
    stale_drop_rate: float
    delivered: float
    generated: float


def evaluate(params: QNetworkParams, env_factory: Callable[[int], RelayNetworkEnv],
             slots: int, seeds: Sequence[int],
             mask_infeasible: bool = True) -> EvalStats:
    """Greedy-policy evaluation over independent seeded trajectories."""
    from .policies import rollout  # local import avoids a cycle

    policy = make_greedy_policy(params, mask_infeasible)
    per_seed = []
    discards = drops = stale = delivered = generated = 0
    for seed in seeds:
        env = env_factory(seed)
        per_seed.append(rollout(env, policy, slots, env.rng))
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
        mean_aoi=float(arr.mean()),
        stderr_aoi=stderr,
        per_seed_aoi=per_seed,
        relay_discard_rate=discards / gen,
        source_drop_rate=drops / gen,
        stale_drop_rate=stale / gen,
        delivered=delivered / len(seeds),
        generated=generated / len(seeds),
    )

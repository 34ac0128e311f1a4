"""Exact average-cost oracle for quantized miniatures of the relay network.

The continuous network is intractable as a lookup-table MDP, so tiny
instances are quantized: channels become per-link pass/fail bits with their
closed-form success probabilities, energy moves in whole transmission
intervals (a harvesting relay gains one interval per slot with probability
equal to the continuous model's mean interval-completion rate), and relative
ages live in clamped integer buckets. Relative value iteration then yields
the optimal average AoI, which both validates the simulator dynamics and
lower-bounds every heuristic on the same miniature.

The kernel builder re-derives the protocol constraints from scratch, while
the matched sampling environment goes through the simulator's own
feasibility check; their state-by-state agreement is a standing cross-check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .env import (
    Action,
    AoiTracker,
    ChannelRealization,
    Direction,
    NetworkState,
    RelayState,
    SimParams,
    check_feasible,
)

MAX_STATES = 1_000_000


def link_success_prob(power: float, distance: float, gamma_th: float,
                      noise: float) -> float:
    """P(snr >= gamma_th) for a Rayleigh link: exp(-gamma_th N0 d^2 / P)."""
    if power <= 0 or distance <= 0 or gamma_th <= 0 or noise <= 0:
        raise ValueError("all inputs must be positive")
    return math.exp(-gamma_th * noise * distance * distance / power)


def interval_completion_prob(params: SimParams, k: int) -> float:
    """Mean whole energy intervals a harvesting relay completes per slot in
    the continuous model, capped at one: eta P_S E[|h_k|^2] / P_R."""
    mean_harvest = (params.eh_efficiency * params.power_source
                    * params.dist_sr[k] ** -2.0)
    return min(1.0, mean_harvest / params.power_relay)


# A quantized state is the tuple (aoi, arrival, hbits, gbits, relays) with
# relays a tuple of (has_packet, energy_intervals, age_bucket); the bucket is
# zero whenever the data buffer is empty.


@dataclass
class QuantizedMdp:
    """Enumerated miniature with its transition kernel in flat CSR form."""

    params: SimParams
    age_clamp: int
    sr_pass_prob: tuple
    rd_pass_prob: tuple
    harvest_prob: tuple
    states: list
    index: dict
    actions: list  # 2K link actions followed by None (idle)
    cost: np.ndarray  # (n_states * n_actions,), expected next-slot AoI
    succ_idx: np.ndarray
    succ_p: np.ndarray
    offsets: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def row(self, s: int, a: int) -> dict:
        """Successor distribution of one state-action, merged by successor."""
        flat = s * self.n_actions + a
        out: dict = {}
        for j in range(self.offsets[flat], self.offsets[flat + 1]):
            t = self.states[self.succ_idx[j]]
            out[t] = out.get(t, 0.0) + self.succ_p[j]
        return out


def _relay_domain(params: SimParams, clamp: int) -> list:
    out = []
    for eps in range(params.energy_cap + 1):
        out.append((0, eps, 0))
    for eps in range(params.energy_cap + 1):
        for b in range(-clamp, clamp + 1):
            out.append((1, eps, b))
    return out


def _resolve_action(state: tuple, action: Optional[Action], params: SimParams,
                    clamp: int) -> tuple:
    """Deterministic slot resolution before harvest and redraw.

    Returns (new_aoi, new_relays as list of lists, harvester index tuple).
    Constraints are written out from the protocol definition on purpose; the
    sampling environment resolves the same slot through the simulator's
    feasibility check instead.
    """
    aoi, arrival, hbits, gbits, relays = state
    rel = [list(r) for r in relays]
    harvesters: tuple = ()
    stored_at = None
    delivered_bucket = None
    if action is not None:
        k = action.relay
        if action.direction is Direction.SR:
            if arrival:
                # The source transmits on any reception attempt with a packet
                # present; decoding additionally needs the first-hop bit.
                harvesters = tuple(j for j in range(len(rel)) if j != k)
                if hbits[k]:
                    stored_at = k
        else:
            has, eps, bucket = rel[k]
            if (not arrival and has and eps >= 1 and gbits[k] and bucket > 0):
                delivered_bucket = bucket
                rel[k] = [0, eps - 1, 0]
    if delivered_bucket is not None:
        new_aoi = max(1, aoi + 1 - delivered_bucket)
        for r in rel:
            if r[0]:
                r[2] = max(-clamp, min(clamp, r[2] - delivered_bucket))
    else:
        new_aoi = min(aoi + 1, params.aoi_cap)
    if stored_at is not None:
        r = rel[stored_at]
        rel[stored_at] = [1, r[1], min(new_aoi, clamp)]
    return new_aoi, rel, harvesters


def build_mdp(params: SimParams, age_clamp: int = 5,
              link_probs: Optional[tuple] = None,
              harvest_probs: Optional[Sequence[float]] = None) -> QuantizedMdp:
    """Enumerate the quantized miniature and its exact transition kernel.

    `link_probs` may override the closed-form (sr, rd) pass probabilities and
    `harvest_probs` the per-relay interval-completion probabilities, which
    keeps corner cases (perfect channels) exactly representable.
    """
    k_total = params.n_relays
    clamp = age_clamp
    if clamp > params.aoi_cap:
        raise ValueError("age_clamp must not exceed aoi_cap")
    gamma_th = params.gamma_th
    if link_probs is None:
        p_h = tuple(
            link_success_prob(params.power_source, params.dist_sr[k], gamma_th,
                              params.noise_power) for k in range(k_total))
        p_g = tuple(
            link_success_prob(params.power_relay, params.dist_rd[k], gamma_th,
                              params.noise_power) for k in range(k_total))
    else:
        p_h = tuple(link_probs[0])
        p_g = tuple(link_probs[1])
    if harvest_probs is None:
        q = tuple(interval_completion_prob(params, k) for k in range(k_total))
    else:
        q = tuple(harvest_probs)

    relay_dom = _relay_domain(params, clamp)
    n_states_predicted = (params.aoi_cap * len(relay_dom) ** k_total
                          * 2 * 4 ** k_total)
    if n_states_predicted > MAX_STATES:
        raise ValueError(
            f"{n_states_predicted} states exceed the {MAX_STATES} cap")
    cores = [
        (aoi, relays)
        for aoi in range(1, params.aoi_cap + 1)
        for relays in itertools.product(relay_dom, repeat=k_total)
    ]
    bit_combos = list(itertools.product((0, 1), repeat=k_total))
    exo = []
    for arrival in (0, 1):
        pa = params.arrival_prob if arrival else 1.0 - params.arrival_prob
        for hb in bit_combos:
            ph = math.prod(p_h[j] if hb[j] else 1.0 - p_h[j]
                           for j in range(k_total))
            for gb in bit_combos:
                pg = math.prod(p_g[j] if gb[j] else 1.0 - p_g[j]
                               for j in range(k_total))
                exo.append((arrival, hb, gb, pa * ph * pg))
    n_exo = len(exo)
    exo_probs = np.array([e[3] for e in exo])
    # zero-probability outcomes (degenerate arrival or channel probabilities)
    # are dead weight in the kernel
    exo_live = np.flatnonzero(exo_probs > 0.0)
    exo_live_probs = exo_probs[exo_live]

    n_states = len(cores) * n_exo
    if n_states > MAX_STATES:
        raise ValueError(f"{n_states} states exceed the {MAX_STATES} cap")
    states = []
    core_index = {}
    for ci, (aoi, relays) in enumerate(cores):
        core_index[(aoi, relays)] = ci
        for arrival, hb, gb, _ in exo:
            states.append((aoi, arrival, hb, gb, relays))
    index = {s: i for i, s in enumerate(states)}

    actions = (
        [Action(Direction.SR, k) for k in range(k_total)]
        + [Action(Direction.RD, k) for k in range(k_total)]
        + [None]
    )
    n_actions = len(actions)

    cost = np.zeros(n_states * n_actions)
    chunks_idx = []
    chunks_p = []
    lengths = np.zeros(n_states * n_actions, dtype=np.int64)

    for si, state in enumerate(states):
        for ai, action in enumerate(actions):
            new_aoi, rel, harvesters = _resolve_action(state, action, params,
                                                       clamp)
            flat = si * n_actions + ai
            cost[flat] = float(new_aoi)
            n_chunks = 0
            for gains in itertools.product((0, 1), repeat=len(harvesters)):
                p_harvest = 1.0
                rel2 = [list(r) for r in rel]
                for j, gain in zip(harvesters, gains):
                    p_harvest *= q[j] if gain else 1.0 - q[j]
                    if gain:
                        rel2[j][1] = min(rel2[j][1] + 1, params.energy_cap)
                if p_harvest == 0.0:
                    continue
                core_key = (new_aoi, tuple(tuple(r) for r in rel2))
                base = core_index[core_key] * n_exo
                chunks_idx.append(base + exo_live)
                chunks_p.append(p_harvest * exo_live_probs)
                n_chunks += 1
            lengths[flat] = n_chunks * len(exo_live)

    succ_idx = np.concatenate(chunks_idx)
    succ_p = np.concatenate(chunks_p)
    offsets = np.zeros(n_states * n_actions + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    return QuantizedMdp(
        params=params,
        age_clamp=clamp,
        sr_pass_prob=p_h,
        rd_pass_prob=p_g,
        harvest_prob=q,
        states=states,
        index=index,
        actions=actions,
        cost=cost,
        succ_idx=succ_idx,
        succ_p=succ_p,
        offsets=offsets,
    )


@dataclass
class OracleSolution:
    """Output of the average-cost solver."""

    average_cost: float
    bias: np.ndarray
    policy: np.ndarray  # per-state index into mdp.actions
    residual_span: float
    iterations: int


def relative_value_iteration(mdp: QuantizedMdp, tol: float = 1e-9,
                             max_iter: int = 200_000,
                             damping: float = 0.5) -> OracleSolution:
    """Solve for the optimal average cost with damped relative value
    iteration; damping makes the iteration aperiodicity-proof without
    changing the gain."""
    n_s, n_a = mdp.n_states, mdp.n_actions
    starts = mdp.offsets[:-1]
    v = np.zeros(n_s)
    gain = math.nan
    for it in range(1, max_iter + 1):
        ev = np.add.reduceat(mdp.succ_p * v[mdp.succ_idx], starts)
        tv = (mdp.cost + ev).reshape(n_s, n_a).min(axis=1)
        vn = damping * v + (1.0 - damping) * tv
        diff = vn - v
        hi = diff.max()
        lo = diff.min()
        gain = (hi + lo) / 2.0 / (1.0 - damping)
        v = vn - vn[0]
        if (hi - lo) / (1.0 - damping) < tol:
            break
    else:
        raise RuntimeError(f"no convergence within {max_iter} iterations")
    ev = np.add.reduceat(mdp.succ_p * v[mdp.succ_idx], starts)
    q = (mdp.cost + ev).reshape(n_s, n_a)
    tv = q.min(axis=1)
    residual = tv - v - gain
    return OracleSolution(
        average_cost=float(gain),
        bias=v,
        policy=q.argmin(axis=1),
        residual_span=float(residual.max() - residual.min()),
        iterations=it,
    )


class QuantizedRelayEnv:
    """Sampling twin of the quantized miniature.

    Carries the same clamped state tuples as the kernel but resolves every
    slot through the simulator's feasibility check on a synthesized network
    view, so heuristic policies run on it unchanged and kernel/simulator
    disagreements surface in the cross-check.
    """

    def __init__(self, params: SimParams, age_clamp: int,
                 sr_pass_prob: Sequence[float], rd_pass_prob: Sequence[float],
                 harvest_prob: Sequence[float], rng: np.random.Generator):
        self.params = params
        self.clamp = age_clamp
        self.p_h = tuple(sr_pass_prob)
        self.p_g = tuple(rd_pass_prob)
        self.q = tuple(harvest_prob)
        self.rng = rng
        self._h_pass = math.sqrt(params.gamma_th * params.noise_power
                                 / params.power_source)
        self._g_pass = math.sqrt(params.gamma_th * params.noise_power
                                 / params.power_relay)
        self.aoi = params.aoi_cap
        self.arrival = 0
        self.hbits = (0,) * params.n_relays
        self.gbits = (0,) * params.n_relays
        self.relays = [[0, 0, 0] for _ in range(params.n_relays)]

    @classmethod
    def from_mdp(cls, mdp: QuantizedMdp,
                 rng: np.random.Generator) -> "QuantizedRelayEnv":
        return cls(mdp.params, mdp.age_clamp, mdp.sr_pass_prob,
                   mdp.rd_pass_prob, mdp.harvest_prob, rng)

    def reset(self) -> tuple:
        p = self.params
        self.aoi = p.aoi_cap
        self.relays = [[0, p.initial_energy_intervals, 0]
                       for _ in range(p.n_relays)]
        self._redraw()
        return self.state_tuple()

    def load_state(self, state: tuple) -> None:
        aoi, arrival, hbits, gbits, relays = state
        self.aoi = aoi
        self.arrival = arrival
        self.hbits = tuple(hbits)
        self.gbits = tuple(gbits)
        self.relays = [list(r) for r in relays]

    def state_tuple(self) -> tuple:
        return (self.aoi, self.arrival, self.hbits, self.gbits,
                tuple(tuple(r) for r in self.relays))

    def network_view(self) -> NetworkState:
        """Absolute-coordinate view of the clamped state, good for one slot
        of feasibility checks and policy selection. The reference generation
        time is pinned at zero so stored buckets read back as relative ages."""
        p = self.params
        relays = [
            RelayState(has_packet=bool(r[0]), gen_time=r[2],
                       energy_joules=r[1] * p.interval_joules)
            for r in self.relays
        ]
        channels = ChannelRealization(
            h_mag=np.array([self._h_pass if b else 0.0 for b in self.hbits]),
            g_mag=np.array([self._g_pass if b else 0.0 for b in self.gbits]),
        )
        return NetworkState(
            slot=self.aoi + 1,
            relays=relays,
            aoi=AoiTracker(aoi=self.aoi, last_gen=0),
            channels=channels,
            arrival=bool(self.arrival),
        )

    def step(self, action: Optional[Action],
             draws: Optional[tuple] = None) -> int:
        """Advance one slot and return the end-of-slot AoI (the stage cost).

        `draws` may inject (harvest_bits, next_arrival, next_hbits,
        next_gbits) for exhaustive enumeration; otherwise they are sampled.
        """
        p = self.params
        view = self.network_view()
        delivered_bucket = None
        stored_at = None
        harvest_targets: tuple = ()
        if action is not None:
            feasible, _ = check_feasible(view, action, p)
            k = action.relay
            if action.direction is Direction.SR:
                if self.arrival:
                    harvest_targets = tuple(
                        j for j in range(p.n_relays) if j != k)
                    if feasible:
                        stored_at = k
            elif feasible:
                delivered_bucket = self.relays[k][2]
                self.relays[k][0] = 0
                self.relays[k][1] -= 1
                self.relays[k][2] = 0
        if delivered_bucket is not None:
            self.aoi = max(1, self.aoi + 1 - delivered_bucket)
            for r in self.relays:
                if r[0]:
                    r[2] = max(-self.clamp,
                               min(self.clamp, r[2] - delivered_bucket))
        else:
            self.aoi = min(self.aoi + 1, p.aoi_cap)
        if stored_at is not None:
            self.relays[stored_at][0] = 1
            self.relays[stored_at][2] = min(self.aoi, self.clamp)

        if draws is None:
            for j in harvest_targets:
                if self.rng.random() < self.q[j]:
                    self.relays[j][1] = min(self.relays[j][1] + 1,
                                            p.energy_cap)
            self._redraw()
        else:
            harvest_bits, next_arrival, next_h, next_g = draws
            for j in harvest_targets:
                if harvest_bits[j]:
                    self.relays[j][1] = min(self.relays[j][1] + 1,
                                            p.energy_cap)
            self.arrival = next_arrival
            self.hbits = tuple(next_h)
            self.gbits = tuple(next_g)
        return self.aoi

    def _redraw(self) -> None:
        p = self.params
        self.arrival = int(self.rng.random() < p.arrival_prob)
        self.hbits = tuple(int(self.rng.random() < ph) for ph in self.p_h)
        self.gbits = tuple(int(self.rng.random() < pg) for pg in self.p_g)


def simulate_policy(mdp: QuantizedMdp, policy: np.ndarray, slots: int,
                    rng: np.random.Generator) -> float:
    """Long-run mean AoI of a tabular policy inside the sampling twin."""
    env = QuantizedRelayEnv.from_mdp(mdp, rng)
    env.reset()
    total = 0
    for _ in range(slots):
        state = env.state_tuple()
        try:
            si = mdp.index[state]
        except KeyError:
            raise KeyError(f"state {state} outside the kernel table "
                           "(quantization mismatch)") from None
        total += env.step(mdp.actions[policy[si]])
    return total / slots


def rollout_quantized(mdp: QuantizedMdp, policy_fn, slots: int,
                      rng: np.random.Generator) -> float:
    """Mean AoI of a (state, params, rng) -> action policy on the miniature."""
    env = QuantizedRelayEnv.from_mdp(mdp, rng)
    env.reset()
    total = 0
    for _ in range(slots):
        action = policy_fn(env.network_view(), mdp.params, rng)
        total += env.step(action)
    return total / slots


def verify_kernel_matches_env(mdp: QuantizedMdp,
                              state_indices: Optional[Sequence[int]] = None,
                              tol: float = 1e-9) -> int:
    """Exhaustively re-derive kernel rows by stepping the sampling twin over
    every draw combination and compare the resulting distributions.

    Returns the number of (state, action) rows checked; raises AssertionError
    on the first mismatch.
    """
    p = mdp.params
    k_total = p.n_relays
    env = QuantizedRelayEnv.from_mdp(mdp, np.random.default_rng(0))
    bit_combos = list(itertools.product((0, 1), repeat=k_total))
    if state_indices is None:
        state_indices = range(mdp.n_states)
    checked = 0
    for si in state_indices:
        state = mdp.states[si]
        for ai, action in enumerate(mdp.actions):
            dist: dict = {}
            for harvest in bit_combos:
                ph_h = 1.0
                for j in range(k_total):
                    ph_h *= mdp.harvest_prob[j] if harvest[j] \
                        else 1.0 - mdp.harvest_prob[j]
                for arrival in (0, 1):
                    pa = p.arrival_prob if arrival else 1.0 - p.arrival_prob
                    for hb in bit_combos:
                        phh = math.prod(
                            mdp.sr_pass_prob[j] if hb[j]
                            else 1.0 - mdp.sr_pass_prob[j]
                            for j in range(k_total))
                        for gb in bit_combos:
                            pgg = math.prod(
                                mdp.rd_pass_prob[j] if gb[j]
                                else 1.0 - mdp.rd_pass_prob[j]
                                for j in range(k_total))
                            prob = ph_h * pa * phh * pgg
                            if prob == 0.0:
                                continue
                            env.load_state(state)
                            env.step(action, draws=(harvest, arrival, hb, gb))
                            succ = env.state_tuple()
                            dist[succ] = dist.get(succ, 0.0) + prob
            kernel_row = mdp.row(si, ai)
            assert set(dist) == set(kernel_row), (
                f"successor sets differ at state {state}, action {action}")
            for succ, prob in dist.items():
                assert abs(prob - kernel_row[succ]) < tol, (
                    f"probability mismatch at {state} -> {succ}: "
                    f"{prob} vs {kernel_row[succ]}")
            checked += 1
    return checked

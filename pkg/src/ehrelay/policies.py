"""Baseline relay-selection policies.

All policies are pure functions of (state, params, random stream) returning
an Action, or None to leave the slot idle. Direction is dictated by the
arrival flag for every baseline: a slot with a fresh packet at the source is
a reception turn, any other slot is a transmission turn (a slot-parity
schedule deadlocks at low arrival rates).
"""

from __future__ import annotations

from enum import Enum
from typing import Callable, Optional

import numpy as np

from .env import (
    Action,
    Direction,
    NetworkState,
    RelayNetworkEnv,
    SimParams,
    action_count,
    action_from_index,
    check_feasible,
    rd_snr,
    sr_snr,
)


class PolicyKind(str, Enum):
    MAX_LINK = "maxlink"
    GREEDY = "greedy"
    DBRS_VARIANT = "dbrs"
    RANDOM = "random"


def _rd_buffers_ok(state: NetworkState, params: SimParams, k: int) -> bool:
    """Transmission buffer constraints: stored packet plus stored energy."""
    r = state.relays[k]
    return r.has_packet and r.energy_intervals(params) >= 1


def max_link_select(state: NetworkState, params: SimParams) -> Optional[Action]:
    """Activate the eligible link with the highest instantaneous SNR.

    Reception links are eligible on arrival slots when decodable;
    transmission links on the remaining slots when the buffer and SNR
    constraints hold. Eligibility deliberately ignores packet freshness, so
    the scheme may transmit an outdated packet and burn the slot on the
    penalty path. Ties go to the lowest (direction, relay) index. Returns
    None when nothing is eligible.
    """
    gamma_th = params.gamma_th
    best = None
    best_snr = -1.0
    for k in range(params.n_relays):
        if state.arrival:
            snr = sr_snr(state, params, k)
            action = Action(Direction.SR, k)
        else:
            if not _rd_buffers_ok(state, params, k):
                continue
            snr = rd_snr(state, params, k)
            action = Action(Direction.RD, k)
        if snr >= gamma_th and snr > best_snr:
            best = action
            best_snr = snr
    return best


def greedy_select(state: NetworkState, params: SimParams,
                  rng: np.random.Generator) -> Optional[Action]:
    """Select by packet generation times, ignoring channel state.

    Reception turn: an empty-buffer relay gets priority (uniform tie-break);
    with every buffer occupied, the relay holding the earliest-generated
    packet receives. Transmission turn: among relays satisfying the full
    transmission feasibility, the one with the latest generation time sends;
    None when no relay qualifies. Reception choices may violate the SNR
    constraint by design; the environment then applies the penalty path.
    """
    if state.arrival:
        empty = [k for k, r in enumerate(state.relays) if not r.has_packet]
        if empty:
            k = empty[int(rng.integers(len(empty)))]
        else:
            k = min(range(params.n_relays),
                    key=lambda i: (state.relays[i].gen_time, i))
        return Action(Direction.SR, k)
    eligible = [
        k for k in range(params.n_relays)
        if check_feasible(state, Action(Direction.RD, k), params)[0]
    ]
    if not eligible:
        return None
    k = max(eligible, key=lambda i: (state.relays[i].gen_time, -i))
    return Action(Direction.RD, k)


def dbrs_variant_select(state: NetworkState,
                        params: SimParams) -> Optional[Action]:
    """Dual-buffer selection variant: joint data-buffer, energy-buffer and
    CSI rule in the direction forced by the arrival flag.

    Reception goes to the free data buffer holding the most energy (such a
    relay can forward immediately, and the harvest it forfeits while
    receiving would mostly overflow anyway), with the worst-hop SNR
    min(snr_sr, snr_rd) as tie-break; with no free buffer it overwrites by
    the same rule rather than idling, because relays harvest only while
    some relay receives. Transmission picks the feasible relay with the
    best worst hop; None when no relay qualifies. This is a documented
    variant, not a reproduction of the original dual-buffer algorithm.
    """
    if state.arrival:
        eligible = [
            k for k, r in enumerate(state.relays) if not r.has_packet
        ] or list(range(params.n_relays))
        k = max(eligible,
                key=lambda i: (state.relays[i].energy_intervals(params),
                               min(sr_snr(state, params, i),
                                   rd_snr(state, params, i)), -i))
        return Action(Direction.SR, k)
    eligible = [
        k for k in range(params.n_relays)
        if check_feasible(state, Action(Direction.RD, k), params)[0]
    ]
    if not eligible:
        return None
    k = max(eligible,
            key=lambda i: (min(sr_snr(state, params, i),
                               rd_snr(state, params, i)), -i))
    return Action(Direction.RD, k)


def random_select(state: NetworkState,
                  rng: np.random.Generator) -> Action:
    """Uniform draw over the 2K real actions (sanity baseline)."""
    n = len(state.relays)
    return action_from_index(int(rng.integers(action_count(n))), n)


PolicyFn = Callable[[NetworkState, SimParams, np.random.Generator],
                    Optional[Action]]


def get_policy(kind: PolicyKind | str) -> PolicyFn:
    """Uniform-signature wrapper around the named baseline."""
    kind = PolicyKind(kind)
    if kind is PolicyKind.MAX_LINK:
        return lambda state, params, rng: max_link_select(state, params)
    if kind is PolicyKind.GREEDY:
        return greedy_select
    if kind is PolicyKind.DBRS_VARIANT:
        return lambda state, params, rng: dbrs_variant_select(state, params)
    return lambda state, params, rng: random_select(state, rng)


def rollout(env: RelayNetworkEnv, policy: PolicyFn, slots: int,
            rng: np.random.Generator) -> float:
    """Run a policy for a number of slots on a freshly reset environment and
    return the time-average AoI. Packet accounting accumulates in
    env.totals."""
    env.reset()
    aoi_sum = 0
    for _ in range(slots):
        action = policy(env.state, env.params, rng)
        env.step(action)
        aoi_sum += env.state.aoi.aoi
    return aoi_sum / slots

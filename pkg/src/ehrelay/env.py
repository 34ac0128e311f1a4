"""Discrete-time simulator of a dual-hop status-update network served by
energy-harvesting relays.

A source generates status packets at random. K half-duplex decode-and-forward
relays, each with a single-packet data buffer and a finite energy buffer,
carry the packets to a destination that has no direct link to the source.
Per slot at most one link is activated: either the source transmits to a
chosen relay (every other relay harvests energy from the source signal), or
a chosen relay spends one energy interval to forward its buffered packet.
Freshness at the destination is tracked as age of information (AoI): the
number of slots elapsed since the generation of the newest accepted packet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

# Slot counting starts at 1; the pre-delivery reference generation time is
# FIRST_SLOT - aoi_cap so that every real packet has positive relative age.
FIRST_SLOT = 1


def derived_snr_threshold(target_rate: float) -> float:
    """Decoding threshold 2^(2R - 1) for target rate R in bit/s/Hz."""
    return 2.0 ** (2.0 * target_rate - 1.0)


@dataclass(frozen=True)
class SimParams:
    """Physical and protocol constants of the network.

    Defaults correspond to the reference operating point: 70 dB source SNR
    (power_source / noise_power = 1e7), 1000:1 source-to-relay power ratio,
    all links 36 m, Bernoulli(0.3) packet generation, AoI capped at 100.
    """

    n_relays: int = 3
    arrival_prob: float = 0.3
    aoi_cap: int = 100
    energy_cap: int = 3  # energy buffer size, in transmission intervals
    eh_efficiency: float = 0.5
    power_source: float = 1.0e5  # watts
    power_relay: float = 1.0e2  # watts
    noise_power: float = 1.0e-2  # watts
    target_rate: float = 1.0  # bit/s/Hz
    snr_threshold: Optional[float] = None  # derived from target_rate when None
    slot_duration: float = 1.0  # seconds
    dist_sr: tuple = ()  # source-relay distances, metres; () means all 36 m
    dist_rd: tuple = ()  # relay-destination distances, metres
    infeasible_penalty: Optional[float] = None  # reward; -aoi_cap when None
    initial_energy_intervals: int = 1
    horizon: int = 2000  # slots per training episode

    def __post_init__(self):
        if self.n_relays < 1:
            raise ValueError("n_relays must be >= 1")
        if not 0.0 <= self.arrival_prob <= 1.0:
            raise ValueError("arrival_prob must lie in [0, 1]")
        if self.aoi_cap < 1:
            raise ValueError("aoi_cap must be >= 1")
        if self.energy_cap < 1:
            raise ValueError("energy_cap must be >= 1")
        if not 0.0 < self.eh_efficiency < 1.0:
            raise ValueError("eh_efficiency must lie in (0, 1)")
        for name in ("power_source", "power_relay", "noise_power",
                     "slot_duration"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        if not self.dist_sr:
            object.__setattr__(self, "dist_sr", (36.0,) * self.n_relays)
        if not self.dist_rd:
            object.__setattr__(self, "dist_rd", (36.0,) * self.n_relays)
        object.__setattr__(self, "dist_sr", tuple(float(d) for d in self.dist_sr))
        object.__setattr__(self, "dist_rd", tuple(float(d) for d in self.dist_rd))
        if len(self.dist_sr) != self.n_relays or len(self.dist_rd) != self.n_relays:
            raise ValueError("dist_sr/dist_rd must have one entry per relay")
        if min(self.dist_sr) <= 0.0 or min(self.dist_rd) <= 0.0:
            raise ValueError("distances must be > 0")
        if self.snr_threshold is not None and self.snr_threshold <= 0.0:
            raise ValueError("snr_threshold must be > 0")
        if not 0 <= self.initial_energy_intervals <= self.energy_cap:
            raise ValueError(
                "initial_energy_intervals must lie in [0, energy_cap]")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def gamma_th(self) -> float:
        """Effective SNR decoding threshold (linear scale)."""
        if self.snr_threshold is not None:
            return self.snr_threshold
        return derived_snr_threshold(self.target_rate)

    @property
    def interval_joules(self) -> float:
        """Energy of one interval: the cost of one relay transmission."""
        return self.power_relay * self.slot_duration

    @property
    def energy_cap_joules(self) -> float:
        return self.energy_cap * self.interval_joules

    @property
    def penalty(self) -> float:
        """Reward assigned to infeasible actions."""
        if self.infeasible_penalty is not None:
            return self.infeasible_penalty
        return -float(self.aoi_cap)

    @cached_property
    def sr_gain_mean(self) -> np.ndarray:
        """Mean of |h_k|^2 per relay (Rayleigh fading, pathloss exponent 2)."""
        return np.array([d ** -2.0 for d in self.dist_sr])

    @cached_property
    def rd_gain_mean(self) -> np.ndarray:
        return np.array([d ** -2.0 for d in self.dist_rd])


@dataclass
class ChannelRealization:
    """Magnitudes of the fading coefficients for one slot."""

    h_mag: np.ndarray  # |h_k|, source-relay
    g_mag: np.ndarray  # |g_k|, relay-destination


@dataclass
class RelayState:
    """Data and energy buffer of one relay."""

    has_packet: bool = False
    gen_time: int = 0  # generation slot of the buffered packet; valid iff has_packet
    energy_joules: float = 0.0

    def energy_intervals(self, params: SimParams) -> int:
        """Whole transmission intervals currently stored."""
        return int(self.energy_joules // params.interval_joules)


@dataclass
class AoiTracker:
    """Destination-side freshness state."""

    aoi: int
    last_gen: Optional[int] = None  # generation slot of freshest accepted packet

    def reference_gen(self, aoi_cap: int) -> int:
        """Generation time the relative age is measured against.

        Before the first delivery this is FIRST_SLOT - aoi_cap, which makes
        every real packet strictly fresh and keeps the tracker consistent
        with an initial AoI pinned at the cap.
        """
        if self.last_gen is None:
            return FIRST_SLOT - aoi_cap
        return self.last_gen


@dataclass
class NetworkState:
    """Complete simulator state at the start of a slot."""

    slot: int
    relays: list  # list[RelayState]
    aoi: AoiTracker
    channels: ChannelRealization
    arrival: bool  # a fresh packet exists at the source this slot


class Direction(IntEnum):
    SR = 0  # source -> relay reception
    RD = 1  # relay -> destination transmission


@dataclass(frozen=True)
class Action:
    """Activate one link. The relay index is 0-based. Baseline policies may
    return None instead of an Action to leave the slot idle; the learning
    agent always picks from the 2K real actions."""

    direction: Direction
    relay: int


def action_count(n_relays: int) -> int:
    return 2 * n_relays


def action_from_index(index: int, n_relays: int) -> Action:
    """Map a flat index in [0, 2K) to an Action: SR block first, then RD."""
    if not 0 <= index < 2 * n_relays:
        raise ValueError(f"action index {index} outside [0, {2 * n_relays})")
    if index < n_relays:
        return Action(Direction.SR, index)
    return Action(Direction.RD, index - n_relays)


def action_to_index(action: Action, n_relays: int) -> int:
    return action.relay + (n_relays if action.direction is Direction.RD else 0)


class Violation(Enum):
    """First violated feasibility condition, in check order."""

    NO_ARRIVAL = "no_arrival"  # SR chosen but no packet at the source
    ARRIVAL_PENDING = "arrival_pending"  # RD chosen while a packet waits at S
    DATA_EMPTY = "data_empty"
    ENERGY_EMPTY = "energy_empty"
    SNR_BELOW = "snr_below"
    OUTDATED = "outdated"  # buffered packet not fresher than the destination's


@dataclass
class StepInfo:
    """Per-slot event record."""

    feasible: bool
    violation: Optional[Violation]
    delivered_gen: Optional[int]  # generation time of a packet accepted at D
    generated: int
    relay_discards: int
    source_drops: int
    stale_drops: int
    harvested_joules: np.ndarray


@dataclass
class TrafficTotals:
    """Cumulative packet accounting over a trajectory."""

    generated: int = 0
    delivered: int = 0
    relay_discards: int = 0
    source_drops: int = 0
    stale_drops: int = 0

    def add(self, info: StepInfo) -> None:
        self.generated += info.generated
        self.delivered += 1 if info.delivered_gen is not None else 0
        self.relay_discards += info.relay_discards
        self.source_drops += info.source_drops
        self.stale_drops += info.stale_drops


def sample_channels(rng: np.random.Generator, params: SimParams) -> ChannelRealization:
    """Draw one slot's fading magnitudes.

    |h_k|^2 is exponential with mean d_sr[k]^-2 and |g_k|^2 exponential with
    mean d_rd[k]^-2, independent across links and slots.
    """
    k = params.n_relays
    u = rng.exponential(1.0, size=2 * k)
    h2 = u[:k] * params.sr_gain_mean
    g2 = u[k:] * params.rd_gain_mean
    return ChannelRealization(h_mag=np.sqrt(h2), g_mag=np.sqrt(g2))


def harvested_energy(h_mag: float, params: SimParams) -> float:
    """Energy (joules) one relay harvests from the source signal in a slot."""
    return (params.eh_efficiency * params.power_source * h_mag * h_mag
            * params.slot_duration)


def credit_energy(relay: RelayState, delta: float, params: SimParams) -> None:
    """Add harvested energy to a relay buffer; overflow above the cap is lost."""
    relay.energy_joules = min(relay.energy_joules + delta, params.energy_cap_joules)


def update_aoi(tracker: AoiTracker, delivery_gen: Optional[int], slot: int,
               aoi_cap: int) -> bool:
    """Advance the destination AoI for one slot.

    With an accepted delivery the AoI resets to the delivered packet's age;
    a delivery older than aoi_cap is discarded at the destination and the
    AoI accumulates as if nothing arrived. Returns True iff a delivery was
    accepted. A delivery that is not strictly fresher than the current
    reference signals an upstream feasibility bug and raises.
    """
    if delivery_gen is not None:
        if tracker.last_gen is not None and delivery_gen <= tracker.last_gen:
            raise ValueError(
                f"delivery gen {delivery_gen} not fresher than {tracker.last_gen}")
        if slot - delivery_gen <= aoi_cap:
            tracker.aoi = slot - delivery_gen
            tracker.last_gen = delivery_gen
            return True
    tracker.aoi = min(tracker.aoi + 1, aoi_cap)
    return False


def relative_age(relay: RelayState, tracker: AoiTracker, aoi_cap: int) -> int:
    """Signed freshness of a buffered packet vs the destination's newest.

    Positive values mean the buffered packet is fresher; empty buffers count
    as zero.
    """
    if not relay.has_packet:
        return 0
    return relay.gen_time - tracker.reference_gen(aoi_cap)


def sr_snr(state: NetworkState, params: SimParams, k: int) -> float:
    h = state.channels.h_mag[k]
    return h * h * params.power_source / params.noise_power


def rd_snr(state: NetworkState, params: SimParams, k: int) -> float:
    g = state.channels.g_mag[k]
    return g * g * params.power_relay / params.noise_power


def check_feasible(state: NetworkState, action: Action,
                   params: SimParams) -> tuple[bool, Optional[Violation]]:
    """Test an action against the protocol constraints.

    Reception (SR) needs a packet at the source and a decodable first hop.
    Transmission (RD) needs an idle source, a stored packet, at least one
    energy interval, a decodable second hop, and positive relative age.
    The violation names the first failed condition in that order.
    """
    k = action.relay
    if not 0 <= k < params.n_relays:
        raise ValueError(f"relay index {k} outside [0, {params.n_relays})")
    gamma_th = params.gamma_th
    if action.direction is Direction.SR:
        if not state.arrival:
            return False, Violation.NO_ARRIVAL
        if sr_snr(state, params, k) < gamma_th:
            return False, Violation.SNR_BELOW
        return True, None
    relay = state.relays[k]
    if not relay.has_packet:
        return False, Violation.DATA_EMPTY
    if relay.energy_intervals(params) < 1:
        return False, Violation.ENERGY_EMPTY
    if rd_snr(state, params, k) < gamma_th:
        return False, Violation.SNR_BELOW
    if relative_age(relay, state.aoi, params.aoi_cap) <= 0:
        return False, Violation.OUTDATED
    if state.arrival:
        return False, Violation.ARRIVAL_PENDING
    return True, None


def observation_dim(n_relays: int) -> int:
    return 5 * n_relays + 1


def observe(state: NetworkState, params: SimParams) -> np.ndarray:
    """Build the flat 5K+1 agent observation.

    Blocks, in order: source-relay magnitudes normalized by their maximum,
    relay-destination magnitudes likewise, data-buffer bits, energy levels
    over the buffer size, relative ages over the AoI cap clamped to [-1, 1]
    (zero for empty buffers), and the arrival bit.
    """
    k = params.n_relays
    out = np.empty(5 * k + 1)
    h = state.channels.h_mag
    g = state.channels.g_mag
    h_max = h.max()
    g_max = g.max()
    out[0:k] = h / h_max if h_max > 0.0 else 0.0
    out[k:2 * k] = g / g_max if g_max > 0.0 else 0.0
    cap = params.aoi_cap
    for i, relay in enumerate(state.relays):
        out[2 * k + i] = 1.0 if relay.has_packet else 0.0
        out[3 * k + i] = relay.energy_intervals(params) / params.energy_cap
        if relay.has_packet:
            age = relative_age(relay, state.aoi, cap) / cap
            out[4 * k + i] = min(1.0, max(-1.0, age))
        else:
            out[4 * k + i] = 0.0
    out[5 * k] = 1.0 if state.arrival else 0.0
    return out


class RelayNetworkEnv:
    """Stateful slot-by-slot simulator.

    A single instance owns its state and random stream; independent instances
    may run concurrently. `step` consumes the current slot's channels and
    arrival flag, applies the chosen action, advances the AoI, then draws the
    next slot's randomness.
    """

    def __init__(self, params: SimParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        self.state: Optional[NetworkState] = None
        self.totals = TrafficTotals()

    def reset(self) -> NetworkState:
        """Start a fresh trajectory: empty data buffers, the configured
        initial energy, AoI pinned at the cap (nothing delivered yet)."""
        p = self.params
        relays = [
            RelayState(energy_joules=p.initial_energy_intervals * p.interval_joules)
            for _ in range(p.n_relays)
        ]
        self.state = NetworkState(
            slot=FIRST_SLOT,
            relays=relays,
            aoi=AoiTracker(aoi=p.aoi_cap, last_gen=None),
            channels=sample_channels(self.rng, p),
            arrival=bool(self.rng.random() < p.arrival_prob),
        )
        self.totals = TrafficTotals()
        return self.state

    def observe(self) -> np.ndarray:
        return observe(self.state, self.params)

    def step(self, action: Optional[Action]) -> tuple[float, StepInfo]:
        """Advance one slot. `action` is an Action or None for an idle slot
        (baselines only: nothing transmits, nothing harvests)."""
        p = self.params
        s = self.state
        n = s.slot
        k_sel = -1
        feasible = True
        violation = None
        delivery_gen = None
        stored = False
        relay_discards = 0
        reward = 0.0
        harvested = np.zeros(p.n_relays)

        if action is not None:
            feasible, violation = check_feasible(s, action, p)
            k_sel = action.relay
            if feasible and action.direction is Direction.SR:
                self._harvest_others(k_sel, harvested)
                relay = s.relays[k_sel]
                if relay.has_packet:
                    relay_discards += 1
                relay.has_packet = True
                relay.gen_time = n
                stored = True
            elif feasible:
                relay = s.relays[k_sel]
                reward = float(relative_age(relay, s.aoi, p.aoi_cap))
                relay.energy_joules -= p.interval_joules
                relay.has_packet = False
                delivery_gen = relay.gen_time
            else:
                reward = p.penalty
                # The source is oblivious to the downlink SNR: if it was told
                # to transmit and only decoding failed, the signal still went
                # out and the other relays harvest from it.
                if (action.direction is Direction.SR and s.arrival
                        and violation is Violation.SNR_BELOW):
                    self._harvest_others(k_sel, harvested)

        accepted = update_aoi(s.aoi, delivery_gen, n, p.aoi_cap)
        stale_drops = 1 if (delivery_gen is not None and not accepted) else 0
        generated = 1 if s.arrival else 0
        source_drops = 1 if (generated and not stored) else 0

        if feasible and action is not None and action.direction is Direction.SR:
            # Reward of a reception slot: total relative age of all buffered
            # packets at the end of the slot, the fresh one included.
            reward = float(sum(
                relative_age(r, s.aoi, p.aoi_cap) for r in s.relays))

        info = StepInfo(
            feasible=feasible,
            violation=violation,
            delivered_gen=delivery_gen if accepted else None,
            generated=generated,
            relay_discards=relay_discards,
            source_drops=source_drops,
            stale_drops=stale_drops,
            harvested_joules=harvested,
        )
        self.totals.add(info)

        s.slot = n + 1
        s.channels = sample_channels(self.rng, p)
        s.arrival = bool(self.rng.random() < p.arrival_prob)
        return reward, info

    def _harvest_others(self, k_sel: int, harvested: np.ndarray) -> None:
        s = self.state
        p = self.params
        for j, relay in enumerate(s.relays):
            if j == k_sel:
                continue
            delta = harvested_energy(s.channels.h_mag[j], p)
            credit_energy(relay, delta, p)
            harvested[j] = delta

    def resident_packets(self) -> int:
        return sum(1 for r in self.state.relays if r.has_packet)

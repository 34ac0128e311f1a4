"""Environment dynamics, reward, and bookkeeping tests."""

import copy

import numpy as np
import pytest

from ehrelay.env import (
    Action,
    AoiTracker,
    ChannelRealization,
    Direction,
    NetworkState,
    RelayNetworkEnv,
    RelayState,
    SimParams,
    Violation,
    action_from_index,
    action_to_index,
    check_feasible,
    credit_energy,
    harvested_energy,
    observe,
    relative_age,
    rd_snr,
    sample_channels,
    sr_snr,
    update_aoi,
)

# Magnitudes far above / below the default decoding threshold.
H_PASS, H_FAIL = 1.0, 1e-6
G_PASS, G_FAIL = 1.0, 1e-6


def make_state(params, slot=10, aoi=5, last_gen=4, arrival=False,
               h=None, g=None, relays=None):
    k = params.n_relays
    h = np.full(k, H_PASS) if h is None else np.asarray(h, dtype=float)
    g = np.full(k, G_PASS) if g is None else np.asarray(g, dtype=float)
    if relays is None:
        relays = [RelayState() for _ in range(k)]
    return NetworkState(
        slot=slot,
        relays=relays,
        aoi=AoiTracker(aoi=aoi, last_gen=last_gen),
        channels=ChannelRealization(h_mag=h, g_mag=g),
        arrival=arrival,
    )


def env_with_state(params, state, seed=0):
    env = RelayNetworkEnv(params, np.random.default_rng(seed))
    env.state = state
    return env


class TestSimParams:
    def test_threshold_derived_from_rate(self):
        assert SimParams().gamma_th == 2.0  # 2^(2*1 - 1)
        assert SimParams(target_rate=2.0).gamma_th == 8.0
        assert SimParams(snr_threshold=3.0).gamma_th == 3.0

    def test_default_operating_point(self):
        p = SimParams()
        assert p.power_source / p.noise_power == pytest.approx(1e7)  # 70 dB
        assert p.power_source / p.power_relay == pytest.approx(1000.0)
        assert p.dist_sr == (36.0,) * 3

    def test_validation(self):
        with pytest.raises(ValueError):
            SimParams(arrival_prob=1.5)
        with pytest.raises(ValueError):
            SimParams(eh_efficiency=1.0)
        with pytest.raises(ValueError):
            SimParams(energy_cap=0)
        with pytest.raises(ValueError):
            SimParams(dist_sr=(36.0,))  # wrong length for 3 relays


class TestSampleChannels:
    def test_unit_distance_mean(self):
        # E[|h|^2] = d^-2 = 1 at unit distance.
        params = SimParams(n_relays=100, dist_sr=(1.0,) * 100,
                           dist_rd=(1.0,) * 100)
        rng = np.random.default_rng(1)
        total = 0.0
        n_draws = 2000
        for _ in range(n_draws):
            total += float(np.sum(sample_channels(rng, params).h_mag ** 2))
        mean = total / (n_draws * 100)
        assert mean == pytest.approx(1.0, rel=0.02)

    def test_paper_distance_mean_within_one_percent(self):
        # 10^6 draws against the closed-form mean 36^-2.
        params = SimParams(n_relays=100)
        rng = np.random.default_rng(2)
        total = 0.0
        for _ in range(10_000):
            total += float(np.sum(sample_channels(rng, params).h_mag ** 2))
        mean = total / 1e6
        assert abs(mean - 36.0 ** -2) / 36.0 ** -2 < 0.01

    def test_deterministic_given_stream_state(self):
        params = SimParams()
        a = sample_channels(np.random.default_rng(77), params)
        b = sample_channels(np.random.default_rng(77), params)
        np.testing.assert_array_equal(a.h_mag, b.h_mag)
        np.testing.assert_array_equal(a.g_mag, b.g_mag)

    def test_success_probability_matches_closed_form(self):
        # P(snr >= th) = exp(-th N0 d^2 / P), checked at 3 sigma binomial.
        params = SimParams(n_relays=200)
        rng = np.random.default_rng(3)
        n_calls = 5000
        n = 200 * n_calls
        th = params.gamma_th
        hits_h = hits_g = 0
        for _ in range(n_calls):
            ch = sample_channels(rng, params)
            gam_h = ch.h_mag ** 2 * params.power_source / params.noise_power
            gam_g = ch.g_mag ** 2 * params.power_relay / params.noise_power
            hits_h += int(np.sum(gam_h >= th))
            hits_g += int(np.sum(gam_g >= th))
        for hits, power in ((hits_h, params.power_source),
                            (hits_g, params.power_relay)):
            p_true = np.exp(-th * params.noise_power * 36.0 ** 2 / power)
            sigma = np.sqrt(p_true * (1 - p_true) / n)
            assert abs(hits / n - p_true) < 3 * max(sigma, 1e-9)


class TestHarvestedEnergy:
    def test_direct_substitution(self):
        p = SimParams(eh_efficiency=0.5, power_source=2.0)
        assert harvested_energy(1.0, p) == pytest.approx(1.0)

    def test_zero_input(self):
        assert harvested_energy(0.0, SimParams()) == 0.0

    def test_paper_efficiency_point(self):
        # eta = 0.5, P_S = 1e5 W, |h|^2 = 1e-3, one-second slot.
        p = SimParams()
        assert harvested_energy(np.sqrt(1e-3), p) == pytest.approx(50.0)


class TestCreditEnergy:
    def test_one_full_interval(self):
        p = SimParams()
        r = RelayState()
        credit_energy(r, p.interval_joules, p)
        assert r.energy_intervals(p) == 1

    def test_saturation_at_cap(self):
        p = SimParams()
        r = RelayState(energy_joules=p.energy_cap_joules)
        credit_energy(r, 123.0, p)
        assert r.energy_joules == p.energy_cap_joules

    def test_floor_semantics(self):
        p = SimParams()
        r = RelayState(energy_joules=0.6 * p.interval_joules)
        credit_energy(r, 0.5 * p.interval_joules, p)
        assert r.energy_joules == pytest.approx(1.1 * p.interval_joules)
        assert r.energy_intervals(p) == 1


class TestUpdateAoi:
    def test_no_delivery_increments(self):
        t = AoiTracker(aoi=5, last_gen=2)
        assert update_aoi(t, None, 10, 100) is False
        assert t.aoi == 6

    def test_delivery_resets_to_age(self):
        t = AoiTracker(aoi=5, last_gen=4)
        assert update_aoi(t, 7, 10, 100) is True
        assert t.aoi == 3
        assert t.last_gen == 7

    def test_cap(self):
        t = AoiTracker(aoi=100, last_gen=None)
        update_aoi(t, None, 500, 100)
        assert t.aoi == 100

    def test_stale_delivery_discarded(self):
        t = AoiTracker(aoi=90, last_gen=1)
        accepted = update_aoi(t, 2, 150, 100)  # age 148 > 100
        assert accepted is False
        assert t.aoi == 91
        assert t.last_gen == 1

    def test_non_fresher_delivery_raises(self):
        t = AoiTracker(aoi=5, last_gen=9)
        with pytest.raises(ValueError):
            update_aoi(t, 9, 12, 100)


class TestRelativeAge:
    def test_fresh_packet(self):
        r = RelayState(has_packet=True, gen_time=12)
        assert relative_age(r, AoiTracker(aoi=3, last_gen=9), 100) == 3

    def test_outdated_packet(self):
        r = RelayState(has_packet=True, gen_time=5)
        assert relative_age(r, AoiTracker(aoi=3, last_gen=9), 100) == -4

    def test_empty_buffer(self):
        assert relative_age(RelayState(), AoiTracker(aoi=3, last_gen=9), 100) == 0

    def test_before_first_delivery_every_packet_is_fresh(self):
        r = RelayState(has_packet=True, gen_time=1)
        t = AoiTracker(aoi=100, last_gen=None)
        assert relative_age(r, t, 100) == 100  # 1 - (1 - 100)


class TestCheckFeasible:
    def test_rd_energy_empty(self):
        p = SimParams(n_relays=1)
        relays = [RelayState(has_packet=True, gen_time=8)]
        s = make_state(p, relays=relays)
        ok, code = check_feasible(s, Action(Direction.RD, 0), p)
        assert not ok and code is Violation.ENERGY_EMPTY

    def test_rd_outdated(self):
        p = SimParams(n_relays=1)
        relays = [RelayState(has_packet=True, gen_time=2,
                             energy_joules=p.interval_joules)]
        s = make_state(p, last_gen=4)  # relative age -2
        s.relays = relays
        ok, code = check_feasible(s, Action(Direction.RD, 0), p)
        assert not ok and code is Violation.OUTDATED

    def test_sr_no_arrival(self):
        p = SimParams(n_relays=1)
        s = make_state(p, arrival=False)
        ok, code = check_feasible(s, Action(Direction.SR, 0), p)
        assert not ok and code is Violation.NO_ARRIVAL

    def test_sr_snr_below(self):
        p = SimParams(n_relays=1)
        s = make_state(p, arrival=True, h=[H_FAIL])
        ok, code = check_feasible(s, Action(Direction.SR, 0), p)
        assert not ok and code is Violation.SNR_BELOW

    def test_violation_order_data_before_energy(self):
        p = SimParams(n_relays=1)
        s = make_state(p)  # empty buffer, zero energy
        ok, code = check_feasible(s, Action(Direction.RD, 0), p)
        assert not ok and code is Violation.DATA_EMPTY

    def test_rd_blocked_by_arrival(self):
        p = SimParams(n_relays=1)
        relays = [RelayState(has_packet=True, gen_time=8,
                             energy_joules=p.interval_joules)]
        s = make_state(p, arrival=True, relays=relays)
        ok, code = check_feasible(s, Action(Direction.RD, 0), p)
        assert not ok and code is Violation.ARRIVAL_PENDING

    def test_feasible_both_directions(self):
        p = SimParams(n_relays=1)
        relays = [RelayState(has_packet=True, gen_time=8,
                             energy_joules=p.interval_joules)]
        s = make_state(p, relays=relays)
        assert check_feasible(s, Action(Direction.RD, 0), p) == (True, None)
        s.arrival = True
        assert check_feasible(s, Action(Direction.SR, 0), p) == (True, None)

    def test_bad_relay_index(self):
        p = SimParams(n_relays=2)
        s = make_state(p)
        with pytest.raises(ValueError):
            check_feasible(s, Action(Direction.SR, 2), p)


class TestActionIndexing:
    def test_round_trip(self):
        for k in (1, 2, 5):
            for i in range(2 * k):
                assert action_to_index(action_from_index(i, k), k) == i

    def test_bad_index(self):
        with pytest.raises(ValueError):
            action_from_index(6, 3)


class TestStep:
    def test_feasible_rd_composition(self):
        # Pre-delivery relative age 4, packet age 2: reward 4, next AoI 2,
        # one interval spent.
        p = SimParams(n_relays=1)
        relays = [RelayState(has_packet=True, gen_time=8,
                             energy_joules=p.interval_joules)]
        s = make_state(p, slot=10, aoi=5, last_gen=4, relays=relays)
        env = env_with_state(p, s)
        reward, info = env.step(Action(Direction.RD, 0))
        assert reward == 4.0
        assert env.state.aoi.aoi == 2
        assert env.state.aoi.last_gen == 8
        assert relays[0].energy_joules == 0.0
        assert not relays[0].has_packet
        assert info.delivered_gen == 8

    def test_feasible_sr_reward_sums_relative_ages(self):
        # Relay 1 holds a packet with relative age 3; a fresh packet lands on
        # relay 0, contributing slot - last_gen.
        p = SimParams(n_relays=2)
        relays = [RelayState(),
                  RelayState(has_packet=True, gen_time=8)]
        s = make_state(p, slot=10, aoi=5, last_gen=5, arrival=True,
                       relays=relays)
        env = env_with_state(p, s)
        reward, info = env.step(Action(Direction.SR, 0))
        assert reward == 3.0 + (10 - 5)
        assert relays[0].has_packet and relays[0].gen_time == 10
        assert info.relay_discards == 0
        # non-selected relay harvested
        assert relays[1].energy_joules > 0.0

    def test_sr_overwrite_counts_relay_discard(self):
        p = SimParams(n_relays=2)
        relays = [RelayState(has_packet=True, gen_time=6), RelayState()]
        s = make_state(p, slot=10, arrival=True, relays=relays)
        env = env_with_state(p, s)
        _, info = env.step(Action(Direction.SR, 0))
        assert info.relay_discards == 1
        assert relays[0].gen_time == 10

    def test_infeasible_action_penalty_and_aoi(self):
        p = SimParams(n_relays=1)
        s = make_state(p, aoi=7, arrival=False)
        env = env_with_state(p, s)
        reward, info = env.step(Action(Direction.SR, 0))
        assert reward == p.penalty == -100.0
        assert not info.feasible
        assert env.state.aoi.aoi == 8

    def test_sr_snr_fail_still_harvests_and_drops(self):
        # Packet present but the chosen first hop cannot decode: the source
        # transmits anyway, the packet dies, the other relay harvests.
        p = SimParams(n_relays=2)
        s = make_state(p, arrival=True, h=[H_FAIL, H_PASS])
        env = env_with_state(p, s)
        reward, info = env.step(Action(Direction.SR, 0))
        assert reward == p.penalty
        assert info.source_drops == 1
        assert info.violation is Violation.SNR_BELOW
        assert env.state.relays[1].energy_joules > 0.0
        assert env.state.relays[0].energy_joules == 0.0

    def test_rd_during_arrival_drops_packet_no_harvest(self):
        p = SimParams(n_relays=2)
        relays = [RelayState(has_packet=True, gen_time=8,
                             energy_joules=p.interval_joules), RelayState()]
        s = make_state(p, arrival=True, relays=relays)
        env = env_with_state(p, s)
        reward, info = env.step(Action(Direction.RD, 0))
        assert reward == p.penalty
        assert info.source_drops == 1
        assert info.violation is Violation.ARRIVAL_PENDING
        assert all(r.energy_joules in (0.0, p.interval_joules)
                   for r in relays)
        assert relays[0].has_packet  # nothing transmitted

    def test_stale_delivery_counted_and_aoi_accumulates(self):
        p = SimParams(n_relays=1)
        relays = [RelayState(has_packet=True, gen_time=2,
                             energy_joules=p.interval_joules)]
        s = make_state(p, slot=150, aoi=100, last_gen=1, relays=relays)
        env = env_with_state(p, s)
        reward, info = env.step(Action(Direction.RD, 0))
        assert reward == 1.0  # relative age before the attempt
        assert info.stale_drops == 1
        assert info.delivered_gen is None
        assert env.state.aoi.aoi == 100
        assert env.state.aoi.last_gen == 1

    def test_idle_slot(self):
        p = SimParams(n_relays=1)
        s = make_state(p, aoi=7, arrival=True)
        env = env_with_state(p, s)
        reward, info = env.step(None)
        assert reward == 0.0
        assert info.feasible and info.violation is None
        assert info.source_drops == 1  # the arrival died unserved
        assert env.state.aoi.aoi == 8

    def test_slot_advances_and_redraws(self):
        p = SimParams(n_relays=1)
        env = RelayNetworkEnv(p, np.random.default_rng(5))
        env.reset()
        before = env.state.channels.h_mag.copy()
        env.step(None)
        assert env.state.slot == 2
        assert not np.array_equal(env.state.channels.h_mag, before)


class TestReset:
    def test_initial_conditions(self):
        p = SimParams()
        env = RelayNetworkEnv(p, np.random.default_rng(0))
        s = env.reset()
        assert s.slot == 1
        assert s.aoi.aoi == p.aoi_cap and s.aoi.last_gen is None
        for r in s.relays:
            assert not r.has_packet
            assert r.energy_intervals(p) == 1


class TestObserve:
    def test_single_relay_self_normalizes(self):
        p = SimParams(n_relays=1)
        s = make_state(p, h=[0.123], g=[4.56])
        obs = observe(s, p)
        assert obs[0] == 1.0 and obs[1] == 1.0

    def test_energy_normalization(self):
        p = SimParams(n_relays=2)
        relays = [RelayState(energy_joules=1 * p.interval_joules),
                  RelayState(energy_joules=3 * p.interval_joules)]
        s = make_state(p, relays=relays)
        obs = observe(s, p)
        np.testing.assert_allclose(obs[6:8], [1 / 3, 1.0])

    def test_relative_age_clamped(self):
        p = SimParams(n_relays=2)
        relays = [RelayState(has_packet=True, gen_time=-146),
                  RelayState(has_packet=True, gen_time=24)]
        s = make_state(p, last_gen=4)  # ages -150 and +20
        s.relays = relays
        obs = observe(s, p)
        np.testing.assert_allclose(obs[8:10], [-1.0, 0.2])

    def test_layout_and_arrival_bit(self):
        p = SimParams(n_relays=2)
        s = make_state(p, arrival=True)
        obs = observe(s, p)
        assert obs.shape == (11,)
        assert obs[-1] == 1.0
        assert np.max(obs[0:2]) == 1.0 and np.max(obs[2:4]) == 1.0


def random_action_or_idle(state, params, rng):
    """Uniform over 2K actions plus idle, to hit every step branch."""
    i = int(rng.integers(2 * params.n_relays + 1))
    if i == 2 * params.n_relays:
        return None
    return action_from_index(i, params.n_relays)


@pytest.mark.parametrize("n_relays,seed", [(1, 10), (2, 11), (3, 12)])
def test_trajectory_invariants(n_relays, seed):
    """Randomized-rollout invariant suite (short version; the acceptance
    suite runs the million-step variant)."""
    p = SimParams(n_relays=n_relays)
    env = RelayNetworkEnv(p, np.random.default_rng(seed))
    env.reset()
    rng = np.random.default_rng(seed + 1000)
    prev_aoi = env.state.aoi.aoi
    prev_last_gen = env.state.aoi.last_gen
    for _ in range(20_000):
        pre_energy = [r.energy_joules for r in env.state.relays]
        pre_relays = copy.deepcopy(env.state.relays)
        pre_state_view = NetworkState(
            slot=env.state.slot, relays=pre_relays,
            aoi=AoiTracker(env.state.aoi.aoi, env.state.aoi.last_gen),
            channels=env.state.channels, arrival=env.state.arrival)
        action = random_action_or_idle(env.state, p, rng)
        _, info = env.step(action)
        aoi = env.state.aoi.aoi
        assert 1 <= aoi <= p.aoi_cap
        assert aoi <= prev_aoi + 1
        if aoi < min(prev_aoi + 1, p.aoi_cap):
            # A strict drop requires an accepted, strictly fresher delivery.
            assert info.delivered_gen is not None
            if prev_last_gen is not None:
                assert info.delivered_gen > prev_last_gen
        if info.delivered_gen is not None:
            k = action.relay
            pre = pre_relays[k]
            assert pre.has_packet
            assert pre.energy_intervals(p) >= 1
            assert relative_age(pre, pre_state_view.aoi, p.aoi_cap) > 0
            assert rd_snr(pre_state_view, p, k) >= p.gamma_th
        for j, r in enumerate(env.state.relays):
            assert 0 <= r.energy_intervals(p) <= p.energy_cap
            spent = (p.interval_joules
                     if (action is not None and action.direction is Direction.RD
                         and action.relay == j and info.feasible) else 0.0)
            gained = info.harvested_joules[j]
            expected = min(pre_energy[j] + gained, p.energy_cap_joules) - spent
            assert r.energy_joules == pytest.approx(expected)
        prev_aoi = aoi
        prev_last_gen = env.state.aoi.last_gen
    t = env.totals
    resident = env.resident_packets()
    assert (t.delivered + t.relay_discards + t.source_drops + t.stale_drops
            + resident) == t.generated


def test_determinism_same_seed_same_trajectory():
    p = SimParams(n_relays=2)

    def run(seed):
        env = RelayNetworkEnv(p, np.random.default_rng(seed))
        env.reset()
        rng = np.random.default_rng(99)
        trace = []
        for _ in range(500):
            action = random_action_or_idle(env.state, p, rng)
            r, _ = env.step(action)
            trace.append((r, env.state.aoi.aoi))
        return trace

    assert run(42) == run(42)
    assert run(42) != run(43)

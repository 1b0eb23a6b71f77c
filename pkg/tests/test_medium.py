"""Radio medium: range, losses, collisions, CSMA unicast statistics."""

import pytest
from scipy import stats as scipy_stats

from oracles import unicast_expectation
from rplsim.engine import Simulator, derive_stream, to_us
from rplsim.medium import (FrameKind, Medium, MediumConfig, Outcome, in_range)
from rplsim.telemetry import NULL_TRACE, EnergyLedger

SEC = to_us(1.0)


def make_medium(positions, seed=1, trace=None, link_rx=None, **cfg_kwargs):
    sim = Simulator()
    cfg = MediumConfig(**cfg_kwargs)
    ledgers = {nid: EnergyLedger() for nid in positions}
    jitter = {nid: derive_stream(seed, "protocol-jitter", nid)
              for nid in positions}
    medium = Medium(sim, cfg, positions, derive_stream(seed, "medium"),
                    jitter, ledgers, trace or NULL_TRACE, link_rx)
    return sim, medium, ledgers


def collect_frames(medium, nodes):
    """Register recording receivers; returns the shared inbox list."""
    inbox = []
    for nid in nodes:
        medium.set_receiver(nid, lambda frame, src, nid=nid:
                            inbox.append((nid, frame, src)))
    return inbox


class TestInRange:
    def test_zero_distance(self):
        cfg = MediumConfig()
        assert in_range((5.0, 5.0), (5.0, 5.0), cfg)

    def test_boundary_is_closed(self):
        cfg = MediumConfig(tx_range_m=100.0)
        assert in_range((0.0, 0.0), (100.0, 0.0), cfg)

    def test_just_outside(self):
        cfg = MediumConfig(tx_range_m=100.0)
        assert not in_range((0.0, 0.0), (100.01, 0.0), cfg)


class TestConfig:
    def test_rx_ratio_bounds(self):
        with pytest.raises(ValueError):
            MediumConfig(rx_success_ratio=1.3)

    def test_max_transmissions_floor(self):
        with pytest.raises(ValueError):
            MediumConfig(max_transmissions=0)

    def test_airtime_is_exact_at_default_bitrate(self):
        cfg = MediumConfig()
        assert cfg.airtime_us(64) == 2048
        assert cfg.airtime_us(cfg.data_frame_bytes) == 1600
        assert cfg.airtime_us(11) == 352

    def test_ack_timeout_must_cover_ack(self):
        with pytest.raises(ValueError):
            MediumConfig(ack_timeout_s=0.0001)


class TestBroadcast:
    def test_all_receivers_at_ratio_one(self):
        positions = {0: (0.0, 0.0), 1: (50.0, 0.0), 2: (0.0, 50.0),
                     3: (-50.0, 0.0)}
        sim, medium, _ = make_medium(positions, rx_success_ratio=1.0)
        inbox = collect_frames(medium, positions)
        seen = {}
        medium.broadcast(0, FrameKind.DIS, on_done=seen.update)
        sim.run_until(SEC)
        assert seen == {1: Outcome.DELIVERED, 2: Outcome.DELIVERED,
                        3: Outcome.DELIVERED}
        assert sorted(nid for nid, _, _ in inbox) == [1, 2, 3]

    def test_no_receivers_still_charges_sender(self):
        positions = {0: (0.0, 0.0), 1: (500.0, 0.0)}
        sim, medium, ledgers = make_medium(positions)
        seen = {}
        medium.broadcast(0, FrameKind.DIS, on_done=seen.update)
        sim.run_until(SEC)
        assert seen == {}
        assert ledgers[0].tx_us == 2048
        assert ledgers[1].rx_us == 0

    def test_sender_never_receives_own_frame(self):
        positions = {0: (0.0, 0.0), 1: (50.0, 0.0)}
        sim, medium, _ = make_medium(positions)
        inbox = collect_frames(medium, positions)
        medium.broadcast(0, FrameKind.DIS)
        sim.run_until(SEC)
        assert all(nid != 0 for nid, _, _ in inbox)

    def test_hidden_senders_collide_at_shared_receiver(self):
        # 0 and 2 cannot hear each other; both are audible at 1
        positions = {0: (0.0, 0.0), 1: (80.0, 0.0), 2: (160.0, 0.0)}
        sim, medium, _ = make_medium(positions, backoff_window_s=1e-6)
        outcomes = []
        medium.broadcast(0, FrameKind.DIS, on_done=lambda o: outcomes.append((0, o)))
        medium.broadcast(2, FrameKind.DIS, on_done=lambda o: outcomes.append((2, o)))
        sim.run_until(SEC)
        results = dict(outcomes)
        assert results[0][1] is Outcome.LOST_COLLISION
        assert results[2][1] is Outcome.LOST_COLLISION

    def test_delivery_fraction_matches_rx_ratio(self):
        positions = {0: (0.0, 0.0), 1: (50.0, 0.0)}
        sim, medium, _ = make_medium(positions, rx_success_ratio=0.8,
                                     backoff_window_s=0.004)
        delivered = [0]

        def on_done(outcomes):
            if outcomes[1] is Outcome.DELIVERED:
                delivered[0] += 1

        for _ in range(10_000):
            medium.broadcast(0, FrameKind.DIS, on_done=on_done)
        sim.run_until(200 * SEC)
        fraction = delivered[0] / 10_000
        assert 0.78 <= fraction <= 0.82

    def test_delivery_counts_are_binomial(self):
        positions = {0: (0.0, 0.0), 1: (50.0, 0.0), 2: (0.0, 50.0),
                     3: (-50.0, 0.0), 4: (0.0, -50.0)}
        sim, medium, _ = make_medium(positions, rx_success_ratio=0.8,
                                     backoff_window_s=0.004)
        counts = [0] * 5

        def on_done(outcomes):
            counts[sum(o is Outcome.DELIVERED for o in outcomes.values())] += 1

        trials = 5000
        for _ in range(trials):
            medium.broadcast(0, FrameKind.DIS, on_done=on_done)
        sim.run_until(200 * SEC)
        expected = [trials * scipy_stats.binom.pmf(k, 4, 0.8) for k in range(5)]
        statistic, _ = scipy_stats.chisquare(counts, expected)
        assert statistic < scipy_stats.chi2.ppf(0.999, df=4)


class TestUnicast:
    def run_unicasts(self, n, rx, seed=1, max_transmissions=4):
        positions = {0: (0.0, 0.0), 1: (50.0, 0.0)}
        sim, medium, _ = make_medium(positions, seed=seed,
                                     rx_success_ratio=rx,
                                     max_transmissions=max_transmissions,
                                     backoff_window_s=0.004)
        collect_frames(medium, positions)
        results = []
        for _ in range(n):
            medium.unicast_with_ack(
                0, 1, None,
                lambda ok, attempts, truth: results.append((ok, attempts, truth)))
        sim.run_until(2000 * SEC)
        assert len(results) == n
        return results

    def test_perfect_channel_single_attempt(self):
        results = self.run_unicasts(5, rx=1.0)
        assert all(ok and attempts == 1 for ok, attempts, _ in results)

    def test_zero_ratio_exhausts_attempts(self):
        results = self.run_unicasts(5, rx=0.0)
        assert all(not ok and attempts == 4 and not truth
                   for ok, attempts, truth in results)

    def test_attempts_within_bounds(self):
        results = self.run_unicasts(2000, rx=0.8)
        assert all(1 <= attempts <= 4 for _, attempts, _ in results)

    def test_mean_attempts_matches_enumeration(self):
        results = self.run_unicasts(10_000, rx=0.8)
        expected = unicast_expectation(0.8 * 0.8, 4)
        mean_attempts = sum(attempts for _, attempts, _ in results) / len(results)
        assert mean_attempts == pytest.approx(expected["mean_attempts"], rel=0.02)
        p_success = sum(ok for ok, _, _ in results) / len(results)
        assert p_success == pytest.approx(expected["p_success"], abs=0.02)

    def test_ack_only_loss_reports_ground_truth(self):
        # on a very lossy link some jobs fail at the sender even though a
        # data attempt did arrive (only the ACKs were lost); the third
        # callback argument exposes that ground truth
        positions = {0: (0.0, 0.0), 1: (50.0, 0.0)}
        sim, medium, _ = make_medium(positions, seed=5, rx_success_ratio=0.5,
                                     backoff_window_s=0.004)
        collect_frames(medium, positions)
        results = []
        for _ in range(3000):
            medium.unicast_with_ack(
                0, 1, None,
                lambda ok, attempts, truth: results.append((ok, attempts, truth)))
        sim.run_until(2000 * SEC)
        failed_but_arrived = [r for r in results if not r[0] and r[2]]
        assert failed_but_arrived, "expected some ACK-only failures at rx=0.5"

    def test_per_link_override_beats_global_ratio(self):
        positions = {0: (0.0, 0.0), 1: (50.0, 0.0)}
        sim, medium, _ = make_medium(positions, rx_success_ratio=0.0,
                                     backoff_window_s=0.004,
                                     link_rx={(0, 1): 1.0})
        collect_frames(medium, positions)
        results = []
        medium.unicast_with_ack(0, 1, None,
                                lambda ok, a, t: results.append((ok, a)))
        sim.run_until(SEC)
        assert results == [(True, 1)]

import random

import pytest

from vcanlab.bus import (Bus, BusConfig, DuplicateNameError, EventKind,
                         RateDistanceError, RateRangeError, ScheduleEntry,
                         ScheduleForDetachedNodeError, TooManyNodesError,
                         resolve_bit, validate_bus_config)
from vcanlab.codec import DOMINANT, RECESSIVE, frame_bit_length
from vcanlab.frame import data_frame
from vcanlab.node import NodeMode

from oracles import arbitration_winner, random_frame


def kinds(trace):
    return [e.kind for e in trace]


def delivered(trace):
    return [e for e in trace if e.kind is EventKind.FRAME_DELIVERED]


class TestConfigValidation:
    def test_paper_long_haul_point(self):
        # 5 kbps over 10 km sits exactly on the product bound; below the
        # normal band so it needs the explicit slow-rate opt-in.
        validate_bus_config(5_000, 10_000, allow_slow=True)
        with pytest.raises(RateRangeError):
            validate_bus_config(5_000, 10_000)

    def test_max_rate_at_40m(self):
        validate_bus_config(1_000_000, 40)

    def test_product_exceeded(self):
        with pytest.raises(RateDistanceError):
            validate_bus_config(1_000_000, 100)

    def test_rate_band(self):
        with pytest.raises(RateRangeError):
            validate_bus_config(2_000_000, 1)
        validate_bus_config(20_000, 100)

    def test_config_dataclass_validates(self):
        with pytest.raises(RateDistanceError):
            BusConfig(bitrate_bps=1_000_000, distance_m=100)


class TestAttach:
    def test_110_nodes_ok_111th_rejected(self):
        bus = Bus(BusConfig())
        for i in range(110):
            bus.attach_node(f"n{i}")
        with pytest.raises(TooManyNodesError):
            bus.attach_node("n110")

    def test_duplicate_name(self):
        bus = Bus(BusConfig())
        bus.attach_node("a")
        with pytest.raises(DuplicateNameError):
            bus.attach_node("a")

    def test_schedule_for_detached_node(self):
        bus = Bus(BusConfig())
        bus.attach_node("a")
        with pytest.raises(ScheduleForDetachedNodeError):
            bus.run([ScheduleEntry(0, "ghost", data_frame(1, b""))], 100)


class TestResolveBit:
    def test_wired_and(self):
        assert resolve_bit([DOMINANT, RECESSIVE]) == DOMINANT
        assert resolve_bit([RECESSIVE, RECESSIVE]) == RECESSIVE
        assert resolve_bit([]) == RECESSIVE


class TestRun:
    def test_empty_schedule_empty_trace(self):
        bus = Bus(BusConfig())
        bus.attach_node("a")
        assert bus.run([], 10_000) == []

    def test_single_frame_timing(self):
        bus = Bus(BusConfig())
        bus.attach_node("tx")
        bus.attach_node("rx")
        frame = data_frame(0x123, b"\xab\xcd")
        trace = bus.run([ScheduleEntry(0, "tx", frame)], 5_000)
        assert kinds(trace) == [EventKind.TX_START, EventKind.FRAME_DELIVERED]
        expected = frame_bit_length(frame, stuffed=True) + 3
        assert trace[1].time_bits == expected
        assert trace[1].time_s == pytest.approx(expected / 1_000_000)

    def test_arbitration_example(self):
        bus = Bus(BusConfig())
        bus.attach_node("a")
        bus.attach_node("b")
        sched = [ScheduleEntry(0, "a", data_frame(0x100, b"")),
                 ScheduleEntry(0, "b", data_frame(0x0A0, b""))]
        trace = bus.run(sched, 5_000)
        order = [(e.kind, e.node) for e in trace]
        assert order == [
            (EventKind.TX_START, "a"),
            (EventKind.TX_START, "b"),
            (EventKind.ARBITRATION_LOST, "a"),
            (EventKind.FRAME_DELIVERED, "b"),
            (EventKind.RETRANSMIT, "a"),
            (EventKind.FRAME_DELIVERED, "a"),
        ]

    def test_winner_matches_oracle_on_sampled_pairs(self):
        rng = random.Random(123)
        for _ in range(200):
            fa, fb = data_frame(rng.randrange(0x800), b"\x01"), None
            fb = data_frame(rng.randrange(0x800), b"\x02")
            if fa.id == fb.id:
                continue
            bus = Bus(BusConfig())
            bus.attach_node("a")
            bus.attach_node("b")
            trace = bus.run([ScheduleEntry(0, "a", fa),
                             ScheduleEntry(0, "b", fb)], 5_000)
            first = delivered(trace)[0]
            expect = ["a", "b"][arbitration_winner([fa, fb])]
            assert first.node == expect

    def test_non_destructive_latency(self):
        winner = data_frame(0x050, b"\xaa")
        loser = data_frame(0x700, b"\xbb")
        solo = Bus(BusConfig())
        solo.attach_node("w")
        solo.attach_node("rx")
        t_solo = solo.run([ScheduleEntry(0, "w", winner)], 5_000)
        contested = Bus(BusConfig())
        contested.attach_node("w")
        contested.attach_node("l")
        t_both = contested.run([ScheduleEntry(0, "w", winner),
                                ScheduleEntry(0, "l", loser)], 5_000)
        lat_solo = delivered(t_solo)[0].time_bits
        lat_both = [e for e in delivered(t_both) if e.node == "w"][0].time_bits
        assert lat_solo == lat_both

    def test_conservation(self):
        rng = random.Random(55)
        bus = Bus(BusConfig())
        for i in range(5):
            bus.attach_node(f"n{i}")
        sched = [ScheduleEntry(rng.randrange(2_000), f"n{rng.randrange(5)}",
                               random_frame(rng))
                 for _ in range(30)]
        trace = bus.run(sched, 200_000)
        assert len(delivered(trace)) == 30

    def test_determinism(self):
        def one():
            rng = random.Random(77)
            bus = Bus(BusConfig())
            for i in range(4):
                bus.attach_node(f"n{i}")
            sched = [ScheduleEntry(rng.randrange(500), f"n{rng.randrange(4)}",
                                   random_frame(rng)) for _ in range(20)]
            return bus.run(sched, 100_000)
        assert one() == one()

    def test_ack_error_without_receiver(self):
        bus = Bus(BusConfig())
        bus.attach_node("solo")
        trace = bus.run([ScheduleEntry(0, "solo", data_frame(1, b""))], 300)
        assert EventKind.ACK_ERROR in kinds(trace)
        assert EventKind.FRAME_DELIVERED not in kinds(trace)

    def test_later_arrival_waits_for_idle(self):
        bus = Bus(BusConfig())
        bus.attach_node("a")
        bus.attach_node("b")
        frame = data_frame(0x100, bytes(8))
        # second frame arrives mid-transmission of the first
        trace = bus.run([ScheduleEntry(0, "a", frame),
                         ScheduleEntry(20, "b", data_frame(0x050, b""))], 5_000)
        first, second = delivered(trace)
        assert first.node == "a" and second.node == "b"


class TestFaultInjection:
    def test_corrupt_data_bit_causes_retransmit(self):
        bus = Bus(BusConfig())
        bus.attach_node("tx")
        bus.attach_node("rx")
        frame = data_frame(0x123, b"\xde\xad")
        from vcanlab.codec import encode_frame
        stream = encode_frame(frame).stuffed_bits
        pos = 30  # inside the data region
        bus.inject_fault(pos, stream[pos] ^ 1)
        trace = bus.run([ScheduleEntry(0, "tx", frame)], 5_000)
        ks = kinds(trace)
        for k in (EventKind.FAULT_INJECTED, EventKind.ERROR_FRAME,
                  EventKind.RETRANSMIT, EventKind.FRAME_DELIVERED):
            assert k in ks
        assert ks.index(EventKind.ERROR_FRAME) < ks.index(EventKind.RETRANSMIT)
        assert ks.index(EventKind.RETRANSMIT) < ks.index(EventKind.FRAME_DELIVERED)
        assert bus.nodes["tx"].state.tec == 7  # +8 error, -1 on success

    def test_fault_during_idle_is_inert(self):
        bus = Bus(BusConfig())
        bus.attach_node("a")
        bus.inject_fault(50, DOMINANT)
        trace = bus.run([], 200)
        assert kinds(trace) == [EventKind.FAULT_INJECTED]

    def test_sixteen_corrupted_attempts_reach_error_passive(self):
        frame = data_frame(0x123, bytes(range(8)))
        from vcanlab.codec import encode_frame
        stream = encode_frame(frame).stuffed_bits
        d = 50
        bus = Bus(BusConfig())
        bus.attach_node("victim")
        bus.attach_node("obs")
        for i in range(16):
            bus.inject_fault(i * (d + 4) + d, stream[d] ^ 1)
        bus.run([ScheduleEntry(0, "victim", frame)], 16 * (d + 4) + 5)
        victim = bus.nodes["victim"]
        assert victim.state.tec == 128
        assert victim.state.mode is NodeMode.ERROR_PASSIVE

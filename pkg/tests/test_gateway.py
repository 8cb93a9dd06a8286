import threading

import numpy as np
import pytest

from rehabhome.gateway import (
    ClockModel,
    FilterDecision,
    GaitSegment,
    Gateway,
    RejectReason,
    SegmentFlags,
    count_strides,
    detect_bouts,
    edge_case_filter,
    pair_pressure_streams,
    segment_walks,
    synchronize,
)
from rehabhome.gateway.clock import correction_for_skew
from rehabhome.records import AmbientSample, Modality, PhysioSample, SensorPacket
from rehabhome.sim import ImpairmentLevel, default_gait_params, generate_walk


def zero_segment():
    return GaitSegment("P", 0, np.zeros((1000, 48)), np.zeros((1000, 48)))


def square_wave_matrix(n_plateaus, frames_on=120, frames_off=80):
    total = n_plateaus * (frames_on + frames_off)
    mat = np.zeros((max(total, 1000), 48))
    for k in range(n_plateaus):
        start = k * (frames_on + frames_off)
        mat[start : start + frames_on, :] = 2.0
    return mat[:1000]


def walk_segment(level=ImpairmentLevel.MILD, seed=3, flags=None):
    params = default_gait_params(level, seed)
    left, right = generate_walk(params, 5.0, seed=seed)
    return GaitSegment(
        "P",
        0,
        np.stack([f.channels() for f in left]),
        np.stack([f.channels() for f in right]),
        flags=flags or SegmentFlags(),
    )


class TestSynchronize:
    def test_identity(self):
        assert synchronize(1234.0, ClockModel()) == 1234

    def test_offset(self):
        assert synchronize(1000.0, ClockModel(offset_ms=500)) == 1500

    def test_drift_closed_form(self):
        # 100 ppm over 1e7 ms is a 1000 ms correction
        assert synchronize(1e7, ClockModel(drift_ppm=100)) == 10_001_000

    def test_excessive_drift_rejected(self):
        with pytest.raises(ValueError):
            ClockModel(drift_ppm=1500)

    def test_two_skewed_sources_agree_within_2ms(self):
        skews = [(500.0, 200.0), (-300.0, -150.0)]
        for true_ts in (0.0, 123456.789, 3.6e6, 1e7):
            unified = []
            for offset, drift in skews:
                device_ts = true_ts + offset + drift * true_ts / 1e6
                unified.append(synchronize(device_ts, correction_for_skew(offset, drift)))
            assert abs(unified[0] - unified[1]) <= 2

    def test_unknown_source_errors(self):
        gw = Gateway()
        packet = SensorPacket("ghost", Modality.PHYSIO, 0.0, PhysioSample(0.0, 70, 50, 36.5))
        with pytest.raises(KeyError):
            gw.ingest(packet)


class TestIngest:
    def test_valid_packet_queued(self):
        gw = Gateway()
        gw.register_clock("wristband")
        ack = gw.ingest(SensorPacket("wristband", Modality.PHYSIO, 0.0, PhysioSample(0.0, 70, 50, 36.5)))
        assert ack.accepted
        gw.flush(final=True)
        assert len(gw.timeline) == 1

    def test_modality_mismatch_rejected(self):
        gw = Gateway()
        gw.register_clock("wristband")
        ack = gw.ingest(SensorPacket("wristband", Modality.AMBIENT, 0.0, PhysioSample(0.0, 70, 50, 36.5)))
        assert not ack.accepted
        assert "does not match modality" in ack.reason
        assert gw.metrics["rejected_malformed"] == 1

    def test_invalid_payload_rejected(self):
        gw = Gateway()
        gw.register_clock("wristband")
        ack = gw.ingest(SensorPacket("wristband", Modality.PHYSIO, 0.0, PhysioSample(0.0, 900, 50, 36.5)))
        assert not ack.accepted

    def test_concurrent_producers_exact_count(self):
        gw = Gateway()
        for i in range(10):
            gw.register_clock(f"src{i}")

        def produce(i):
            for k in range(1000):
                gw.ingest(SensorPacket(f"src{i}", Modality.AMBIENT, float(k), AmbientSample(float(k), 100.0, 0.0)))

        threads = [threading.Thread(target=produce, args=(i,)) for i in range(10)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        gw.flush(final=True)
        assert len(gw.timeline) == 10000
        ts = [r.ts_ms for r in gw.timeline.records]
        assert ts == sorted(ts)

    def test_late_packet_beyond_horizon_dropped(self):
        gw = Gateway()
        gw.register_clock("s")
        for k in (0, 4500, 5000):
            gw.ingest(SensorPacket("s", Modality.AMBIENT, float(k), AmbientSample(float(k), 1.0, 0.0)))
        gw.flush()  # horizon commits the frontier up to 4500
        assert [r.ts_ms for r in gw.timeline.records] == [0, 4500]
        gw.ingest(SensorPacket("s", Modality.AMBIENT, 100.0, AmbientSample(100.0, 1.0, 0.0)))
        gw.flush(final=True)
        assert gw.metrics["late_dropped"] == 1
        assert [r.ts_ms for r in gw.timeline.records] == [0, 4500, 5000]

    def test_within_horizon_reordered(self):
        gw = Gateway()
        gw.register_clock("s")
        for k in (1000.0, 800.0, 900.0):
            gw.ingest(SensorPacket("s", Modality.AMBIENT, k, AmbientSample(k, 1.0, 0.0)))
        gw.flush(final=True)
        assert [r.ts_ms for r in gw.timeline.records] == [800, 900, 1000]
        assert gw.metrics["late_dropped"] == 0


class TestCountStrides:
    def test_all_zero(self):
        assert count_strides(zero_segment()) == (0, 0)

    def test_square_wave_four_plateaus(self):
        seg = GaitSegment("P", 0, square_wave_matrix(4), square_wave_matrix(4))
        assert count_strides(seg) == (4, 4)

    def test_synthetic_walk_count(self):
        params = default_gait_params(ImpairmentLevel.MILD, 2)
        seg = walk_segment(seed=2)
        left, right = count_strides(seg)
        expected = 5.0 * params.cadence
        assert abs(left - expected) <= 1
        assert abs(right - expected) <= 1


class TestEdgeCaseFilter:
    def test_short_walk_rejected(self):
        seg = GaitSegment("P", 0, square_wave_matrix(2), square_wave_matrix(2))
        decision = edge_case_filter(seg)
        assert not decision.accepted
        assert decision.reason is RejectReason.SHORT_WALK

    def test_assisted_rejected_even_with_strides(self):
        seg = walk_segment(flags=SegmentFlags(assisted=True))
        assert count_strides(seg)[0] >= 3
        decision = edge_case_filter(seg)
        assert not decision.accepted
        assert decision.reason is RejectReason.ASSISTED

    def test_speed_change_accepted(self):
        seg = walk_segment(flags=SegmentFlags(speed_change=True))
        decision = edge_case_filter(seg)
        assert decision.accepted
        assert decision.reason is None


def frames_to_stream(frames, offset_ms=0.0):
    return [(int(round(f.timestamp + offset_ms)), f.channels()) for f in frames]


def paired_walk(duration_s, seed=4, level=ImpairmentLevel.MILD, offset_ms=0.0):
    params = default_gait_params(level, seed)
    left, right = generate_walk(params, duration_s, seed=seed)
    return pair_pressure_streams(frames_to_stream(left, offset_ms), frames_to_stream(right, offset_ms))


class TestSegmentWalks:
    def test_12s_bout_two_segments(self):
        paired = paired_walk(12.0)
        bouts = detect_bouts(paired)
        assert len(bouts) == 1
        segments = segment_walks(paired, bouts, patient_ref="P")
        assert len(segments) == 2

    def test_short_bout_no_segments(self):
        paired = paired_walk(4.9)
        segments = segment_walks(paired, detect_bouts(paired), patient_ref="P")
        assert segments == []

    def test_60s_walk_twelve_segments(self):
        paired = paired_walk(60.0)
        segments = segment_walks(paired, detect_bouts(paired), patient_ref="P")
        assert len(segments) == 12
        for seg in segments:
            seg.validate()
            assert seg.left.shape == (1000, 48)
            assert np.all(seg.left >= 0) and np.all(seg.right >= 0)

    def test_idempotent(self):
        paired = paired_walk(15.0)
        bouts = detect_bouts(paired)
        a = segment_walks(paired, bouts, patient_ref="P")
        b = segment_walks(paired, bouts, patient_ref="P")
        assert len(a) == len(b)
        for sa, sb in zip(a, b):
            assert sa.start_ts == sb.start_ts
            assert np.array_equal(sa.left, sb.left)
            assert np.array_equal(sa.right, sb.right)

    def test_two_bouts_split_by_gap(self):
        params = default_gait_params(ImpairmentLevel.MILD, 4)
        l1, r1 = generate_walk(params, 6.0, seed=4)
        l2, r2 = generate_walk(params, 6.0, seed=5)
        left = frames_to_stream(l1) + frames_to_stream(l2, offset_ms=20000.0)
        right = frames_to_stream(r1) + frames_to_stream(r2, offset_ms=20000.0)
        paired = pair_pressure_streams(left, right)
        bouts = detect_bouts(paired)
        assert len(bouts) == 2
        assert len(segment_walks(paired, bouts, patient_ref="P")) == 2

    def test_large_gap_drops_segment(self):
        params = default_gait_params(ImpairmentLevel.MILD, 6)
        left, right = generate_walk(params, 10.0, seed=6)
        # knock a 100 ms hole in the right stream inside the first window
        right_stream = [(int(round(f.timestamp)), f.channels()) for f in right if not (2000 <= f.timestamp < 2100)]
        paired = pair_pressure_streams(frames_to_stream(left), right_stream)
        counters = {}
        segments = segment_walks(paired, detect_bouts(paired), patient_ref="P", counters=counters)
        assert counters["segments_dropped_gap"] == 1
        assert len(segments) == 1  # the second window survives

    def test_flags_inherited_from_walk_meta(self):
        paired = paired_walk(6.0)
        bouts = detect_bouts(paired)
        meta = [(0.0, SegmentFlags(assisted=True))]
        segments = segment_walks(paired, bouts, patient_ref="P", walk_meta=meta)
        assert segments and all(s.flags.assisted for s in segments)

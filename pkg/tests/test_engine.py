import math

import numpy as np
import pytest

from soundscape.audio import ENGINE_RATE, AudioBuffer
from soundscape.binaural import DistanceModel, synthetic_head_hrirs
from soundscape.engine import (
    BLOCK_FRAMES,
    Engine,
    EngineError,
    MessageError,
    build_engine,
    prepare_assets,
)
from soundscape.model import Room, TimingConstraint

from conftest import constant_wav, make_wav, simple_scape, simple_source

HRIRS = synthetic_head_hrirs()
MODEL = DistanceModel()


def engine_for(scape, **kwargs):
    assets = prepare_assets(scape)
    return build_engine(scape, assets, HRIRS, MODEL, **kwargs)


def dc_source(source_id, value=0.5, frames=ENGINE_RATE, **kwargs):
    kwargs.setdefault("spatialized", False)
    return simple_source(source_id, wav=constant_wav(value, frames), **kwargs)


def run_blocks(engine, count):
    return np.concatenate([engine.process_block() for _ in range(count)], axis=1)


# --- building ---


def test_empty_soundscape_renders_silence():
    engine = engine_for(simple_scape([]))
    engine.apply({"type": "transport", "value": "play"})
    out = run_blocks(engine, 4)
    assert np.array_equal(out, np.zeros((2, 4 * BLOCK_FRAMES)))


def test_two_lanes_idle_until_play(two_source_scape):
    engine = engine_for(two_source_scape)
    assert len(engine.lanes) == 2
    out = run_blocks(engine, 2)
    assert np.array_equal(out, np.zeros((2, 2 * BLOCK_FRAMES)))
    assert all(not lane.playing for lane in engine.lanes.values())


def test_missing_asset_names_source(two_source_scape):
    assets = prepare_assets(two_source_scape)
    del assets["b"]
    with pytest.raises(EngineError, match="'b'"):
        build_engine(two_source_scape, assets, HRIRS, MODEL)


def test_invalid_soundscape_rejected():
    scape = simple_scape([simple_source("dup"), simple_source("dup")])
    with pytest.raises(EngineError, match="duplicate"):
        engine_for(scape)


# --- control messages ---


def test_pose_clamped_to_rectangle():
    engine = engine_for(simple_scape([], width=10.0, depth=6.0))
    engine.apply({"type": "pose", "x": 99.0, "y": -50.0, "yaw": 0.0})
    assert engine.listener_position == (5.0, -3.0)


def test_pose_clamped_radially_in_round_room():
    scape = simple_scape([])
    scape.room = Room(shape="round", width=10.0, depth=10.0)
    engine = engine_for(scape)
    engine.apply({"type": "pose", "x": 8.0, "y": 6.0, "yaw": 0.0})
    x, y = engine.listener_position
    assert math.hypot(x / 5.0, y / 5.0) == pytest.approx(1.0)
    assert y / x == pytest.approx(6.0 / 8.0)


def test_stop_resets_cursors():
    engine = engine_for(simple_scape([dc_source("hum", loop=True)]))
    engine.apply({"type": "transport", "value": "play"})
    run_blocks(engine, 3)
    assert engine.lanes["hum"].cursor == 3 * BLOCK_FRAMES
    engine.apply({"type": "transport", "value": "stop"})
    assert engine.lanes["hum"].cursor == 0
    out = run_blocks(engine, 2)
    assert np.array_equal(out, np.zeros_like(out))


def test_unknown_source_rejected_and_engine_unchanged(two_source_scape):
    engine = engine_for(two_source_scape)
    with pytest.raises(MessageError, match="unknown source"):
        engine.apply({"type": "set", "source": "ghost", "path": "gain_db", "value": -3})
    engine.post({"type": "set", "source": "ghost", "path": "gain_db", "value": -3})
    engine.process_block()
    assert len(engine.rejected) == 1


def test_set_position_clamps_absolute_sources(two_source_scape):
    engine = engine_for(two_source_scape)
    engine.apply({"type": "set", "source": "a", "path": "position", "value": {"x": 99.0, "y": 0.0}})
    assert engine.lanes["a"].src.position == (5.0, 0.0)  # same rule as pose clamping


def test_immutable_param_rejected(two_source_scape):
    engine = engine_for(two_source_scape)
    with pytest.raises(MessageError, match="not mutable"):
        engine.apply({"type": "set", "source": "a", "path": "id", "value": "zzz"})


def test_volume_change_ramps_over_one_block():
    engine = engine_for(simple_scape([dc_source("hum", value=0.5, loop=True)]))
    engine.apply({"type": "transport", "value": "play"})
    run_blocks(engine, 2)
    engine.apply({"type": "set", "source": "hum", "path": "gain_db", "value": -6.0205999})
    block = engine.process_block()
    # ramps linearly from 1.0 toward ~0.5 gain: no jump bigger than ramp step
    diffs = np.abs(np.diff(block[0]))
    assert diffs.max() < (0.5 * 0.51) / BLOCK_FRAMES * 1.1
    after = engine.process_block()
    assert after[0, 0] == pytest.approx(0.25, abs=1e-4)


def test_master_gain_message():
    engine = engine_for(simple_scape([dc_source("hum", loop=True)]))
    engine.apply({"type": "transport", "value": "play"})
    run_blocks(engine, 1)
    engine.apply({"type": "master_gain", "value_db": -20.0})
    run_blocks(engine, 1)  # ramp block
    out = engine.process_block()
    assert out[0, 0] == pytest.approx(0.5 * 10 ** (-1.0), rel=1e-9)


# --- reach ---


def reach_scape(fade=1.0, radius=2.0, frames=ENGINE_RATE * 4):
    src = dc_source("zone", frames=frames, loop=True,
                    reach_enabled=True, reach_radius=radius, reach_fade_duration=fade)
    src.position = (0.0, 0.0)
    return simple_scape([src], width=30.0, depth=30.0)


def test_reach_gain_inside_and_boundary():
    engine = engine_for(reach_scape(fade=0.0))
    engine.apply({"type": "transport", "value": "play"})
    engine.apply({"type": "pose", "x": 0.0, "y": 0.0, "yaw": 0.0})
    engine.process_block()
    assert engine.reach_gain_value("zone") == 1.0
    engine.apply({"type": "pose", "x": 2.0, "y": 0.0, "yaw": 0.0})  # exactly at radius
    engine.process_block()
    assert engine.reach_gain_value("zone") == 1.0
    engine.apply({"type": "pose", "x": 2.0001, "y": 0.0, "yaw": 0.0})
    engine.process_block()
    assert engine.reach_gain_value("zone") == 0.0


def test_reach_fade_reaches_half_after_half_duration():
    engine = engine_for(reach_scape(fade=1.0))
    engine.apply({"type": "transport", "value": "play"})
    engine.apply({"type": "pose", "x": 0.0, "y": 0.0, "yaw": 0.0})
    engine.process_block()
    assert engine.reach_gain_value("zone") == 1.0
    engine.apply({"type": "pose", "x": 10.0, "y": 0.0, "yaw": 0.0})  # cross outward
    half_second_blocks = int(0.5 * ENGINE_RATE / BLOCK_FRAMES)
    run_blocks(engine, half_second_blocks)
    assert engine.reach_gain_value("zone") == pytest.approx(0.5, abs=BLOCK_FRAMES / ENGINE_RATE)


def test_reach_continuity_bound():
    fade = 0.25
    engine = engine_for(reach_scape(fade=fade))
    engine.apply({"type": "transport", "value": "play"})
    engine.apply({"type": "pose", "x": 0.0, "y": 0.0, "yaw": 0.0})
    out = [run_blocks(engine, 4)]
    engine.apply({"type": "pose", "x": 9.0, "y": 0.0, "yaw": 0.0})
    out.append(run_blocks(engine, int(fade * ENGINE_RATE / BLOCK_FRAMES) + 4))
    y = np.concatenate(out, axis=1)[0]
    per_sample = 0.5 / (fade * ENGINE_RATE)  # asset amplitude x fade slope
    assert np.max(np.abs(np.diff(y))) <= per_sample + 1e-12
    assert y[-1] == 0.0


# --- scheduling ---


def seconds_of_samples(sec):
    return int(sec * ENGINE_RATE)


def test_after_completes_starts_at_first_boundary():
    scape = simple_scape(
        [
            dc_source("a", frames=seconds_of_samples(2.0)),
            dc_source("b", frames=1000, timings=[TimingConstraint("a", "after_completes")]),
        ]
    )
    engine = engine_for(scape)
    engine.apply({"type": "transport", "value": "play"})
    blocks_for_a = math.ceil(seconds_of_samples(2.0) / BLOCK_FRAMES)
    run_blocks(engine, blocks_for_a + 1)
    assert engine.lanes["a"].start_clock == 0
    assert engine.lanes["b"].start_clock == blocks_for_a * BLOCK_FRAMES
    assert engine.lanes["b"].start_clock / ENGINE_RATE >= 2.0


def test_after_completes_chain():
    one_sec = seconds_of_samples(1.0)
    scape = simple_scape(
        [
            dc_source("a", frames=one_sec),
            dc_source("b", frames=one_sec, timings=[TimingConstraint("a", "after_completes")]),
            dc_source("c", frames=one_sec, timings=[TimingConstraint("b", "after_completes")]),
        ]
    )
    engine = engine_for(scape)
    engine.apply({"type": "transport", "value": "play"})
    run_blocks(engine, math.ceil(2.2 * ENGINE_RATE / BLOCK_FRAMES))
    assert engine.lanes["c"].start_clock is not None
    assert engine.lanes["c"].start_clock / ENGINE_RATE >= 2.0


def test_after_starts_chain_begins_together():
    scape = simple_scape(
        [
            dc_source("a", frames=4000),
            dc_source("b", frames=4000, timings=[TimingConstraint("a", "after_starts")]),
        ]
    )
    engine = engine_for(scape)
    engine.apply({"type": "transport", "value": "play"})
    engine.process_block()
    assert engine.lanes["a"].start_clock == 0
    assert engine.lanes["b"].start_clock == 0


def test_start_on_enter_gates_until_entry():
    src = dc_source("gate", loop=False, reach_enabled=True, reach_radius=1.0,
                    start_on_enter=True)
    src.position = (5.0, 5.0)
    scape = simple_scape([src], width=20.0, depth=20.0)
    engine = engine_for(scape)
    engine.apply({"type": "transport", "value": "play"})
    run_blocks(engine, 10)
    assert engine.lanes["gate"].start_clock is None  # never entered: never starts
    engine.apply({"type": "pose", "x": 5.0, "y": 5.0, "yaw": 0.0})
    engine.process_block()
    assert engine.lanes["gate"].start_clock is not None


def test_start_on_enter_retriggers_per_visit():
    src = dc_source("gate", frames=BLOCK_FRAMES * 2, reach_enabled=True,
                    reach_radius=1.0, start_on_enter=True, reach_fade_duration=0.0)
    src.position = (5.0, 5.0)
    scape = simple_scape([src], width=20.0, depth=20.0)
    engine = engine_for(scape)
    engine.apply({"type": "transport", "value": "play"})
    engine.apply({"type": "pose", "x": 5.0, "y": 5.0, "yaw": 0.0})
    run_blocks(engine, 4)  # source plays its 2 blocks and completes
    assert engine.lanes["gate"].completed_count == 1
    run_blocks(engine, 2)
    assert engine.lanes["gate"].completed_count == 1  # still inside: no retrigger
    engine.apply({"type": "pose", "x": 0.0, "y": 0.0, "yaw": 0.0})  # leave
    run_blocks(engine, 2)
    engine.apply({"type": "pose", "x": 5.0, "y": 5.0, "yaw": 0.0})  # re-enter
    run_blocks(engine, 4)
    assert engine.lanes["gate"].completed_count == 2  # restarted from 0


def test_looping_source_completes_each_wrap():
    frames = BLOCK_FRAMES * 2
    scape = simple_scape(
        [
            dc_source("short", frames=frames, loop=True),
            dc_source("dep", frames=1000, timings=[TimingConstraint("short", "after_completes")]),
        ]
    )
    engine = engine_for(scape)
    engine.apply({"type": "transport", "value": "play"})
    run_blocks(engine, 9)
    assert engine.lanes["short"].completed_count == 4
    assert engine.lanes["short"].playing  # loops continue
    assert engine.lanes["dep"].start_clock == frames  # after first wrap


# --- rendering ---


def test_bypass_lane_splits_equally():
    engine = engine_for(simple_scape([dc_source("hum", value=0.5, loop=True)]))
    engine.apply({"type": "transport", "value": "play"})
    out = engine.process_block()
    assert np.all(out[0] == 0.5)
    assert np.all(out[1] == 0.5)


def test_two_bypass_sources_sum_without_normalization():
    scape = simple_scape([dc_source("x", loop=True), dc_source("y", loop=True)])
    engine = engine_for(scape)
    engine.apply({"type": "transport", "value": "play"})
    out = engine.process_block()
    assert np.all(out[0] == 1.0)
    assert np.all(out[1] == 1.0)


def test_spatialized_source_left_of_listener_is_louder_left():
    src = simple_source("s", x=-2.0, y=0.0, wav=constant_wav(0.5, ENGINE_RATE), loop=True)
    engine = engine_for(simple_scape([src]))
    engine.apply({"type": "transport", "value": "play"})
    out = run_blocks(engine, 20)
    rms = np.sqrt((out**2).mean(axis=1))
    assert rms[0] > rms[1] * 1.5


def test_relative_source_sticks_with_listener():
    src = simple_source("s", x=1.0, y=0.0, wav=constant_wav(0.5, ENGINE_RATE), loop=True)
    src.position_mode = "relative"  # one metre to the listener's right
    engine = engine_for(simple_scape([src], width=20.0, depth=20.0))
    engine.apply({"type": "transport", "value": "play"})
    a = run_blocks(engine, 10)
    engine2 = engine_for(simple_scape([src], width=20.0, depth=20.0))
    engine2.apply({"type": "pose", "x": 3.0, "y": -4.0, "yaw": 0.9})
    engine2.apply({"type": "transport", "value": "play"})
    b = run_blocks(engine2, 10)
    np.testing.assert_allclose(a, b, atol=1e-12)  # pose-invariant by rigidity
    rms = np.sqrt((a**2).mean(axis=1))
    assert rms[1] > rms[0]  # right of the listener: right ear louder


def test_stopped_transport_emits_exact_zeros(two_source_scape):
    engine = engine_for(two_source_scape)
    engine.apply({"type": "transport", "value": "play"})
    run_blocks(engine, 3)
    engine.apply({"type": "transport", "value": "stop"})
    out = run_blocks(engine, 3)
    assert np.array_equal(out, np.zeros_like(out))


# --- recording ---


def test_record_silence():
    engine = engine_for(simple_scape([]))
    engine.start_record()
    run_blocks(engine, 10)
    rec = engine.stop_record()
    assert rec.channels == 2
    assert rec.frames == 10 * BLOCK_FRAMES
    assert np.array_equal(rec.data, np.zeros((2, 1280)))


def test_record_tees_processed_blocks():
    engine = engine_for(simple_scape([dc_source("hum", loop=True)]))
    engine.apply({"type": "transport", "value": "play"})
    engine.start_record()
    blocks = run_blocks(engine, 5)
    rec = engine.stop_record()
    assert np.array_equal(rec.data, blocks)


def test_record_empty_interval():
    engine = engine_for(simple_scape([]))
    engine.start_record()
    rec = engine.stop_record()
    assert rec.frames == 0


def test_record_stop_without_start():
    engine = engine_for(simple_scape([]))
    with pytest.raises(MessageError, match="without start"):
        engine.stop_record()


# --- global properties ---


def message_schedule():
    return {
        2: [{"type": "pose", "x": 1.0, "y": 1.0, "yaw": 0.3}],
        5: [{"type": "pose", "x": -2.0, "y": 0.5, "yaw": -0.8}],
        9: [{"type": "master_gain", "value_db": -3.0}],
    }


def render_with_schedule(scape, blocks, schedule):
    engine = engine_for(scape)
    engine.apply({"type": "transport", "value": "play"})
    out = []
    for b in range(blocks):
        for msg in schedule.get(b, []):
            engine.apply(msg)
        out.append(engine.process_block())
    return np.concatenate(out, axis=1)


def test_posted_messages_apply_in_arrival_order_at_boundary():
    engine = engine_for(simple_scape([], width=20.0, depth=20.0))
    engine.post({"type": "pose", "x": 1.0, "y": 0.0, "yaw": 0.0})
    engine.post({"type": "pose", "x": 2.0, "y": 0.0, "yaw": 0.0})
    assert engine.listener_position == (0.0, 0.0)  # nothing applied yet
    engine.process_block()
    assert engine.listener_position == (2.0, 0.0)  # last arrival wins


def test_bit_deterministic(two_source_scape):
    a = render_with_schedule(two_source_scape, 40, message_schedule())
    b = render_with_schedule(two_source_scape, 40, message_schedule())
    assert np.array_equal(a, b)


def test_superposition():
    src_a = simple_source("a", 2.0, 1.0, loop=True)
    src_b = simple_source("b", -1.0, -2.0, wav=constant_wav(0.3, 20000), loop=True)
    sched = message_schedule()
    both = render_with_schedule(simple_scape([src_a, src_b]), 30, sched)
    only_a = render_with_schedule(simple_scape([src_a]), 30, sched)
    only_b = render_with_schedule(simple_scape([src_b]), 30, sched)
    np.testing.assert_allclose(both, only_a + only_b, atol=1e-12)


def test_high_performance_mode_runs():
    hr = synthetic_head_hrirs(azimuth_step_deg=90, elevations_deg=(0.0,), length=32)
    src = simple_source("s", x=-2.0, y=0.0, wav=constant_wav(0.5, ENGINE_RATE), loop=True)
    scape = simple_scape([src])
    engine = build_engine(scape, prepare_assets(scape), hr, MODEL, mode="high_performance")
    engine.apply({"type": "transport", "value": "play"})
    out = run_blocks(engine, 20)
    rms = np.sqrt((out**2).mean(axis=1))
    assert rms[0] > rms[1]  # lateralization survives the IIR approximation

import dataclasses
import json

import pytest

from lockstep.config import parse_config
from lockstep.datapacks import Doc
from lockstep.engine import EngineScript, ENGINE_TYPES
from lockstep.errors import ConfigError, InvalidTimestep, MalformedDocument
from lockstep.loop import (
    EXIT_COMPLETED,
    EXIT_ENGINE_FAULT,
    Simulation,
    SimulationReport,
    loop_fps,
    real_time_factor,
    run_simulation,
)
from lockstep.wire import Codec

from conftest import load_fixture_config


class StepRecorder(EngineScript):
    """Counts run_loop invocations; used to observe scheduling."""

    def __init__(self, engine_name, extra=None):
        super().__init__(engine_name, extra)
        self.calls = 0

    def initialize(self):
        self.register_datapack("steps", "doc")
        self.set_datapack("steps", Doc({"n": 0}))

    def run_loop(self, timestep_ns):
        self.calls += 1
        self.set_datapack("steps", Doc({"n": self.calls}))


@pytest.fixture(autouse=True)
def recorder_type(monkeypatch):
    monkeypatch.setitem(ENGINE_TYPES, "recorder", StepRecorder)


def simple_cfg(**overrides):
    doc = {
        "SimulationName": "unit",
        "SimulationTimeout": 1,
        "EngineConfigs": [
            {"EngineName": "rec_a", "EngineType": "recorder"},
            {"EngineName": "rec_b", "EngineType": "recorder"},
        ],
    }
    doc.update(overrides)
    return parse_config(json.dumps(doc))


class TestLoopArithmetic:
    def test_timeout_one_second_gives_100_steps(self):
        sim = Simulation(simple_cfg())
        report = sim.run()
        assert report.steps == 100
        assert report.sim_time_ns == 1_000_000_000
        assert report.exit_reason == EXIT_COMPLETED
        for handle in sim.handles.values():
            assert handle.script.calls == 100

    def test_coarse_engine_stepped_every_other_iteration(self):
        cfg = simple_cfg(EngineConfigs=[
            {"EngineName": "fast", "EngineType": "recorder"},
            {"EngineName": "slow", "EngineType": "recorder",
             "EngineTimestep": 0.02},
        ])
        cfg = dataclasses.replace(cfg, simulation_timeout=1)
        sim = Simulation(cfg)
        report = sim.run(max_steps=4)
        assert report.steps == 4
        # hand-simulated: slow engine overshoots to 2dt on step 1, skips
        # step 2, runs again on step 3, skips step 4
        assert sim.handles["fast"].script.calls == 4
        assert sim.handles["slow"].script.calls == 2
        assert sim.handles["slow"].engine_time_ns == 40_000_000

    def test_no_functions_engines_still_advance(self):
        sim = Simulation(simple_cfg())
        report = sim.run(max_steps=5)
        assert report.steps == 5
        assert sim.handles["rec_a"].engine_time_ns == 50_000_000
        assert report.bytes_binary > 0  # RunStep traffic only

    def test_zero_engines_rejected_before_looping(self):
        with pytest.raises(MalformedDocument):
            simple_cfg(EngineConfigs=[])

    def test_unbounded_config_needs_max_steps(self):
        cfg = simple_cfg(SimulationTimeout=0)
        with pytest.raises(ConfigError):
            Simulation(cfg).run()

    def test_non_nanosecond_timestep_rejected(self):
        cfg = simple_cfg(SimulationTimestep=1e-10)
        with pytest.raises(InvalidTimestep):
            Simulation(cfg)


class TestRates:
    def test_rtf_and_fps_arithmetic(self):
        report = SimulationReport("r", "binary", steps=100,
                                  sim_time_ns=1_000_000_000, wall_time_s=0.5)
        assert real_time_factor(report) == pytest.approx(2.0)
        assert loop_fps(report) == pytest.approx(200.0)

    def test_zero_step_report_guarded(self):
        report = SimulationReport("r", "binary", steps=0, wall_time_s=1.0)
        with pytest.raises(ValueError):
            real_time_factor(report)
        with pytest.raises(ValueError):
            loop_fps(report)


class TestDeterminism:
    def test_demo_trace_hash_stable_across_runs(self):
        results = []
        for _ in range(2):
            cfg = load_fixture_config("demo_control_only.json", timeout=1)
            results.append(run_simulation(cfg, Codec.BINARY))
        assert results[0].trace_hash == results[1].trace_hash
        assert results[0].trajectory == results[1].trajectory

    def test_trace_hash_identical_across_codecs(self):
        hashes = []
        for codec in (Codec.BINARY, Codec.TEXT):
            cfg = load_fixture_config("demo_control_only.json", timeout=1)
            hashes.append(run_simulation(cfg, codec).trace_hash)
        assert hashes[0] == hashes[1]

    def test_different_config_different_hash(self):
        cfg_a = load_fixture_config("demo_control_only.json", timeout=1)
        report_a = run_simulation(cfg_a, Codec.BINARY)
        cfg_b = load_fixture_config("demo_full.json", timeout=1)
        report_b = run_simulation(cfg_b, Codec.BINARY)
        assert report_a.trace_hash != report_b.trace_hash


class TestFaultHandling:
    def test_engine_fault_aborts_with_partial_report(self):
        cfg = simple_cfg(EngineConfigs=[
            {"EngineName": "rec", "EngineType": "recorder",
             "Extra": {"FaultAtStep": 40}},
        ])
        report = Simulation(cfg).run()
        assert report.exit_reason == EXIT_ENGINE_FAULT
        assert report.steps == 40
        assert "injected fault" in report.error

    def test_fault_on_first_step(self):
        cfg = simple_cfg(EngineConfigs=[
            {"EngineName": "rec", "EngineType": "recorder",
             "Extra": {"FaultAtStep": 0}},
        ])
        report = Simulation(cfg).run()
        assert report.steps == 0
        assert report.exit_reason == EXIT_ENGINE_FAULT


class TestDataFlow:
    def test_control_loop_moves_vehicle(self):
        cfg = load_fixture_config("demo_control_only.json", timeout=2)
        report = run_simulation(cfg, Codec.BINARY)
        assert report.exit_reason == EXIT_COMPLETED
        assert report.steps == 200
        assert len(report.trajectory) == 200
        # vehicle accelerates toward 2 m/s cruise and drives along +x
        t, x, y, yaw = report.trajectory[-1]
        assert t == pytest.approx(2.0)
        assert x > 2.0
        assert abs(y) < 0.1

    def test_full_demo_logs_detections(self):
        cfg = load_fixture_config("demo_full.json", timeout=1)
        cfg = _shrink_camera(cfg, 64, 32)
        report = run_simulation(cfg, Codec.BINARY)
        assert report.exit_reason == EXIT_COMPLETED
        # one detection per step after the one-step pipeline latency
        assert len(report.detections) == report.steps - 1
        first = report.detections[0]
        assert first[0] == 1
        assert (first[1], first[2]) == (0, 0)

    def test_per_engine_latencies_reported(self):
        cfg = load_fixture_config("demo_control_only.json", timeout=1)
        report = run_simulation(cfg, Codec.BINARY)
        assert set(report.per_engine_step_ms) == {"vehicle", "controller"}
        for stats in report.per_engine_step_ms.values():
            assert stats["p95"] >= stats["p50"] >= 0.0

    def test_preprocessing_outputs_never_reach_engines(self, monkeypatch):
        from lockstep.engine import EngineHandle

        delivered = []
        original = EngineHandle.set_datapacks

        def recording(self, packs):
            delivered.extend(pack.id.name for pack in packs)
            return original(self, packs)

        monkeypatch.setattr(EngineHandle, "set_datapacks", recording)
        cfg = _shrink_camera(load_fixture_config("demo_full.json", timeout=1), 64, 32)
        report = run_simulation(cfg, Codec.BINARY)
        assert report.exit_reason == EXIT_COMPLETED
        assert report.detections, "preprocessing function did run"
        assert "detection_log" not in delivered

    def test_rtf_text_below_binary_with_camera_load(self):
        def rate(codec):
            cfg = _shrink_camera(load_fixture_config("demo_full.json"), 736, 480)
            report = Simulation(cfg, codec).run(max_steps=8)
            return real_time_factor(report)

        assert rate(Codec.TEXT) < 0.9 * rate(Codec.BINARY)


def _shrink_camera(cfg, width, height):
    engines = []
    for engine in cfg.engine_configs:
        if engine.engine_type == "camera":
            extra = dict(engine.extra)
            extra["Width"] = width
            extra["Height"] = height
            engine = dataclasses.replace(engine, extra=extra)
        engines.append(engine)
    return dataclasses.replace(cfg, engine_configs=tuple(engines))

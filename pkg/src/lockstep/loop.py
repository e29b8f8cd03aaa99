"""Fixed-timestep simulation loop: ordering, routing, metrics, determinism.

Each iteration advances simulation time by exactly one timestep through
four phases:

  1. every engine whose local time is behind the new target receives a
     blocking RunStep, in ascending engine-name order;
  2. all datapacks referenced by function inputs are fetched, grouped per
     engine, engines again in ascending name order;
  3. the function pipeline runs (preprocessing first, then transceivers,
     configuration order within each kind); preprocessing outputs go to
     the cache;
  4. transceiver outputs are delivered per target engine in ascending
     engine-name order, datapacks in function-output order.

Time is integer nanoseconds throughout, so step accounting is exact. Every
fetched, cached, or delivered datapack feeds a rolling 64-bit trace hash;
two runs of the same configuration must produce the same hash.
"""

from __future__ import annotations

import hashlib
import logging
import struct
import time
from dataclasses import dataclass, field
from typing import Optional

from .config import SimulationConfig
from .controller import quaternion_to_yaw
from .datapacks import DataPack, DataPackCache, DataPackIdentifier, Detection, LinkState
from .engine import EngineHandle, launch_engine, seconds_to_ns
from .errors import ConfigError, LockstepError, ZeroQuaternion
from .functions import FunctionKind, build_function_specs, execute_function, pipeline_order
from .wire import Codec, encode_datapack_canonical

logger = logging.getLogger(__name__)

EXIT_COMPLETED = "completed"
EXIT_ENGINE_FAULT = "engine_fault"
EXIT_MAX_STEPS = "max_steps"


class MetricsSink:
    """Collects per-run measurements and the determinism witness."""

    def __init__(self):
        self.step_wall_s: list[float] = []
        self.engine_step_s: dict[str, list[float]] = {}
        self.phase_s = {"run": 0.0, "get": 0.0, "functions": 0.0, "set": 0.0}
        self.bytes_by_codec = {Codec.TEXT: 0, Codec.BINARY: 0}
        self.trajectory: list[tuple[float, float, float, float]] = []
        self.detections: list[tuple[int, int, int, int, int, float]] = []
        self._hasher = hashlib.blake2b(digest_size=8)

    def count_bytes(self, codec: Codec, n: int) -> None:
        self.bytes_by_codec[codec] += n

    def record_engine_step(self, engine_name: str, seconds: float) -> None:
        self.engine_step_s.setdefault(engine_name, []).append(seconds)

    def record_routed_pack(self, pack: DataPack) -> None:
        blob = encode_datapack_canonical(pack)
        self._hasher.update(struct.pack(">I", len(blob)))
        self._hasher.update(blob)

    def record_pose(self, t_s: float, link: LinkState) -> None:
        try:
            yaw = quaternion_to_yaw(link.rot)
        except ZeroQuaternion:
            yaw = 0.0
        self.trajectory.append((t_s, link.pos[0], link.pos[1], yaw))

    def record_detection(self, step: int, det: Detection) -> None:
        self.detections.append(
            (step, det.x_min, det.y_min, det.x_max, det.y_max, det.score)
        )

    def trace_hash(self) -> str:
        return self._hasher.copy().hexdigest()


def _percentile(samples: list[float], q: float) -> float:
    if not samples:
        return 0.0
    ordered = sorted(samples)
    pos = min(len(ordered) - 1, max(0, round(q * (len(ordered) - 1))))
    return ordered[pos]


@dataclass
class SimulationReport:
    simulation_name: str
    codec: str
    steps: int = 0
    sim_time_ns: int = 0
    wall_time_s: float = 0.0
    exit_reason: str = EXIT_COMPLETED
    error: str = ""
    trace_hash: str = ""
    per_engine_step_ms: dict = field(default_factory=dict)
    phase_ms: dict = field(default_factory=dict)
    bytes_text: int = 0
    bytes_binary: int = 0
    trajectory: list = field(default_factory=list)
    detections: list = field(default_factory=list)


def real_time_factor(report: SimulationReport) -> float:
    """Simulated seconds per wall-clock second over the whole run."""
    if report.steps < 1:
        raise ValueError("real_time_factor needs at least one completed step")
    return (report.sim_time_ns / 1e9) / report.wall_time_s


def loop_fps(report: SimulationReport) -> float:
    """Completed loop iterations per wall-clock second."""
    if report.steps < 1:
        raise ValueError("loop_fps needs at least one completed step")
    return report.steps / report.wall_time_s


class Simulation:
    """Owns engine handles, the cache, and the loop state for one run."""

    def __init__(self, cfg: SimulationConfig, codec: Codec = Codec.BINARY,
                 function_registry: Optional[dict] = None):
        from .config import validate_wiring

        validate_wiring(cfg, function_registry)
        self.cfg = cfg
        self.codec = codec
        self.timestep_ns = seconds_to_ns(cfg.simulation_timestep, "SimulationTimestep")
        self.timeout_ns = cfg.simulation_timeout * 1_000_000_000
        self.specs = build_function_specs(cfg, function_registry)
        self.plan = pipeline_order(self.specs)
        self.metrics = MetricsSink()
        self.cache = DataPackCache()
        self.handles: dict[str, EngineHandle] = {}
        self.sim_time_ns = 0
        self.step_index = 0
        self._engine_names = set(cfg.engine_names)

        # Datapacks to fetch each step: per engine, first-reference order.
        self._input_ids: dict[str, list[DataPackIdentifier]] = {}
        seen = set()
        for spec in self.specs:
            for _, ident in spec.inputs:
                key = (ident.name, ident.engine_name)
                if key in seen:
                    continue
                seen.add(key)
                self._input_ids.setdefault(ident.engine_name, []).append(ident)

    def launch(self) -> None:
        """Start every engine, in ascending name order; all or nothing."""
        try:
            for engine_cfg in sorted(self.cfg.engine_configs,
                                     key=lambda e: e.engine_name):
                self.handles[engine_cfg.engine_name] = launch_engine(
                    engine_cfg, self.codec, byte_counter=self.metrics.count_bytes
                )
        except Exception:
            self.shutdown()
            raise

    def shutdown(self) -> None:
        for name in sorted(self.handles):
            try:
                self.handles[name].shutdown()
            except Exception:
                logger.exception("engine %s: shutdown failed", name)

    def _loop_step(self) -> None:
        target_ns = self.sim_time_ns + self.timestep_ns
        metrics = self.metrics

        # (1) advance engines that are behind the new target
        t_phase = time.perf_counter()
        for name in sorted(self.handles):
            handle = self.handles[name]
            if handle.engine_time_ns < target_ns:
                t0 = time.perf_counter()
                handle.run_to(target_ns)
                metrics.record_engine_step(name, time.perf_counter() - t0)
        metrics.phase_s["run"] += time.perf_counter() - t_phase

        # (2) fetch every datapack referenced by function inputs
        t_phase = time.perf_counter()
        engine_packs: dict[tuple[str, str], DataPack] = {}
        pose_recorded = False
        for engine_name in sorted(self._input_ids):
            packs = self.handles[engine_name].get_datapacks(self._input_ids[engine_name])
            for pack in packs:
                engine_packs[(pack.id.name, pack.id.engine_name)] = pack
                metrics.record_routed_pack(pack)
                if not pose_recorded and isinstance(pack.payload, LinkState):
                    metrics.record_pose(target_ns / 1e9, pack.payload)
                    pose_recorded = True
        metrics.phase_s["get"] += time.perf_counter() - t_phase

        # (3) run the pipeline; preprocessing outputs go to the cache
        t_phase = time.perf_counter()
        deliveries: dict[str, list[DataPack]] = {}
        for spec in self.plan:
            outputs = execute_function(spec, self.cache, engine_packs,
                                       known_engines=self._engine_names)
            for pack in outputs:
                if isinstance(pack.payload, Detection):
                    metrics.record_detection(self.step_index, pack.payload)
                if spec.kind is FunctionKind.PREPROCESSING:
                    self.cache.store(pack)
                    metrics.record_routed_pack(pack)
                else:
                    deliveries.setdefault(pack.id.engine_name, []).append(pack)
        metrics.phase_s["functions"] += time.perf_counter() - t_phase

        # (4) deliver transceiver outputs per target engine
        t_phase = time.perf_counter()
        for engine_name in sorted(deliveries):
            packs = deliveries[engine_name]
            self.handles[engine_name].set_datapacks(packs)
            for pack in packs:
                metrics.record_routed_pack(pack)
        metrics.phase_s["set"] += time.perf_counter() - t_phase

        self.sim_time_ns = target_ns
        self.step_index += 1

    def run(self, max_steps: Optional[int] = None) -> SimulationReport:
        """Launch (if needed), loop to the timeout, shut engines down."""
        if self.timeout_ns == 0 and max_steps is None:
            raise ConfigError(
                "SimulationTimeout is 0 (run until externally stopped); "
                "pass max_steps to bound the run"
            )
        report = SimulationReport(
            simulation_name=self.cfg.simulation_name,
            codec=self.codec.wire_name,
        )
        if not self.handles:
            self.launch()

        exit_reason = EXIT_COMPLETED
        error = ""
        start = time.perf_counter()
        try:
            while self.timeout_ns == 0 or self.sim_time_ns < self.timeout_ns:
                if max_steps is not None and self.step_index >= max_steps:
                    exit_reason = EXIT_MAX_STEPS
                    break
                step_start = time.perf_counter()
                self._loop_step()
                self.metrics.step_wall_s.append(time.perf_counter() - step_start)
        except LockstepError as exc:
            logger.error("aborting at step %d: %s", self.step_index, exc)
            exit_reason = EXIT_ENGINE_FAULT
            error = str(exc)
        finally:
            wall = time.perf_counter() - start
            self.shutdown()

        metrics = self.metrics
        report.steps = self.step_index
        report.sim_time_ns = self.sim_time_ns
        report.wall_time_s = wall
        report.exit_reason = exit_reason
        report.error = error
        report.trace_hash = metrics.trace_hash()
        report.per_engine_step_ms = {
            name: {
                "p50": _percentile(samples, 0.50) * 1e3,
                "p95": _percentile(samples, 0.95) * 1e3,
            }
            for name, samples in sorted(metrics.engine_step_s.items())
        }
        report.phase_ms = {k: v * 1e3 for k, v in metrics.phase_s.items()}
        report.bytes_text = metrics.bytes_by_codec[Codec.TEXT]
        report.bytes_binary = metrics.bytes_by_codec[Codec.BINARY]
        report.trajectory = list(metrics.trajectory)
        report.detections = list(metrics.detections)
        return report


def run_simulation(cfg: SimulationConfig, codec: Codec = Codec.BINARY,
                   max_steps: Optional[int] = None,
                   function_registry: Optional[dict] = None) -> SimulationReport:
    """Validate, launch, run to the configured timeout, and shut down."""
    return Simulation(cfg, codec, function_registry).run(max_steps=max_steps)

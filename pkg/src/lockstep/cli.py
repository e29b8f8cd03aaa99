"""Command-line entry point: run simulations, benchmark transports,
generate trajectories.

Exit codes: 0 success, 1 configuration error, 2 engine fault or launch
failure. stdout carries machine-readable output only (benchmark CSV,
generated trajectories); diagnostics go to stderr. Log verbosity comes
from the NRPL_LOG environment variable (error, warn, info, debug).
"""

from __future__ import annotations

import argparse
import dataclasses
import importlib.resources
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from . import engines  # noqa: F401  (registers the built-in engine types)
from .config import SimulationConfig, parse_config, validate_wiring
from .controller import densify_polygon, trajectory_to_csv
from .errors import ConfigError, LockstepError
from .loop import (
    EXIT_ENGINE_FAULT,
    SimulationReport,
    loop_fps,
    real_time_factor,
    run_simulation,
)
from .transport import measure_throughput
from .wire import Codec

logger = logging.getLogger(__name__)

LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

DEFAULT_BENCH_SIZES = [736 * 480 * 3]  # one full camera frame
FIXTURE_NAMES = ("demo_control_only.json", "demo_full.json")


def fixture_path(name: str) -> Path:
    """Filesystem path of a packaged demo fixture."""
    return Path(importlib.resources.files("lockstep.fixtures") / name)


def _resolve_config_path(arg: str) -> Path:
    """The given path, or the packaged fixture of the same name."""
    path = Path(arg)
    if path.exists():
        return path
    if path.name in FIXTURE_NAMES and str(path) == path.name:
        return fixture_path(path.name)
    raise FileNotFoundError(f"config file not found: {arg}")


def _resolve_relative_paths(cfg: SimulationConfig, base_dir: Path) -> SimulationConfig:
    """Rewrite per-engine file references to be relative to the config file."""
    engines_out = []
    for engine in cfg.engine_configs:
        extra = dict(engine.extra)
        traj = extra.get("TrajectoryFile")
        if isinstance(traj, str) and traj and not Path(traj).is_absolute():
            extra["TrajectoryFile"] = str(base_dir / traj)
        engines_out.append(dataclasses.replace(engine, extra=extra))
    return dataclasses.replace(cfg, engine_configs=tuple(engines_out))


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def export_report(report: SimulationReport, out_dir: str | Path) -> dict[str, Path]:
    """Write trajectory.csv, detections.csv, and metrics.json atomically."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lines = ["t,x,y,yaw"]
    lines += [f"{t!r},{x!r},{y!r},{yaw!r}" for t, x, y, yaw in report.trajectory]
    trajectory_path = out / "trajectory.csv"
    _atomic_write(trajectory_path, "\n".join(lines) + "\n")

    lines = ["step,x_min,y_min,x_max,y_max,score"]
    lines += [
        f"{step},{x0},{y0},{x1},{y1},{score!r}"
        for step, x0, y0, x1, y1, score in report.detections
    ]
    detections_path = out / "detections.csv"
    _atomic_write(detections_path, "\n".join(lines) + "\n")

    metrics = {
        "simulation_name": report.simulation_name,
        "codec": report.codec,
        "steps": report.steps,
        "sim_time_s": report.sim_time_ns / 1e9,
        "wall_time_s": report.wall_time_s,
        "exit_reason": report.exit_reason,
        "error": report.error,
        "loop_fps": loop_fps(report) if report.steps else None,
        "real_time_factor": real_time_factor(report) if report.steps else None,
        "per_engine_step_ms": report.per_engine_step_ms,
        "phase_ms": report.phase_ms,
        "bytes_text": report.bytes_text,
        "bytes_binary": report.bytes_binary,
        "trace_hash": report.trace_hash,
    }
    metrics_path = out / "metrics.json"
    _atomic_write(metrics_path, json.dumps(metrics, indent=2) + "\n")

    return {
        "trajectory": trajectory_path,
        "detections": detections_path,
        "metrics": metrics_path,
    }


def _cmd_run(args) -> int:
    try:
        config_path = _resolve_config_path(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        cfg = parse_config(config_path.read_bytes())
        cfg = _resolve_relative_paths(cfg, config_path.parent.resolve())
        validate_wiring(cfg)
        if cfg.simulation_timeout == 0:
            raise ConfigError(
                "SimulationTimeout is 0 (run until externally stopped); "
                "the CLI needs a bounded run"
            )
    except ConfigError as exc:
        print(f"error: {config_path}: {exc}", file=sys.stderr)
        return 1

    codec = Codec.from_name(args.codec)
    try:
        report = run_simulation(cfg, codec)
    except LockstepError as exc:
        print(f"error: engine launch failed: {exc}", file=sys.stderr)
        return 2

    paths = export_report(report, args.out)
    logger.info("artifacts written to %s", Path(args.out).resolve())
    if report.exit_reason == EXIT_ENGINE_FAULT:
        print(
            f"error: engine fault after {report.steps} steps: {report.error}",
            file=sys.stderr,
        )
        return 2
    print(
        f"{report.simulation_name or config_path.name}: {report.steps} steps, "
        f"sim {report.sim_time_ns / 1e9:g} s, wall {report.wall_time_s:.3f} s, "
        f"trace {report.trace_hash}",
        file=sys.stderr,
    )
    return 0


def _cmd_bench_transport(args) -> int:
    print("codec,payload_bytes,frame_bytes,iterations,bytes_per_sec,round_trips_per_sec")
    for size in args.sizes:
        for codec in (Codec.BINARY, Codec.TEXT):
            result = measure_throughput(codec, size, args.iters)
            print(
                f"{codec.wire_name},{result.payload_bytes},{result.frame_bytes},"
                f"{result.iterations},{result.bytes_per_sec:.1f},"
                f"{result.round_trips_per_sec:.3f}"
            )
            sys.stdout.flush()
    return 0


def _cmd_gen_trajectory(args) -> int:
    if args.shape == "rect":
        corners = [
            (0.0, 0.0),
            (args.width, 0.0),
            (args.width, args.height),
            (0.0, args.height),
        ]
    else:
        import math

        n = max(4, int(round(math.tau * args.radius / args.spacing)))
        corners = [
            (args.radius * math.cos(k * math.tau / n) - args.radius,
             args.radius * math.sin(k * math.tau / n))
            for k in range(n)
        ]
    points = densify_polygon(corners, spacing=args.spacing)
    text = trajectory_to_csv(points)
    if args.out:
        _atomic_write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lockstep",
        description="Deterministic lockstep co-simulation runner.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser(
        "run",
        help="run a simulation config and export its artifacts",
        description="Run a simulation. The config argument may name a "
                    "packaged demo fixture (demo_control_only.json, "
                    "demo_full.json) when no such file exists.",
    )
    run.add_argument("-c", "--config", required=True, help="config JSON file")
    run.add_argument("--codec", choices=["text", "binary"], default="binary",
                     help="wire codec for every engine link (default: binary)")
    run.add_argument("--out", default="out",
                     help="artifact output directory (default: ./out)")
    run.set_defaults(func=_cmd_run)

    bench = sub.add_parser(
        "bench-transport",
        help="measure echo round-trip throughput for both codecs",
        description="Prints CSV to stdout, one row per (size, codec).",
    )
    bench.add_argument("--sizes", type=int, nargs="+", default=DEFAULT_BENCH_SIZES,
                       help="payload sizes in bytes (default: one camera frame)")
    bench.add_argument("--iters", type=int, default=10,
                       help="round trips per measurement (default: 10)")
    bench.set_defaults(func=_cmd_bench_transport)

    gen = sub.add_parser(
        "gen-trajectory",
        help="emit a waypoint CSV for the controller engine",
    )
    gen.add_argument("--shape", choices=["rect", "circle"], required=True)
    gen.add_argument("--spacing", type=float, default=1.0,
                     help="waypoint spacing in meters (default: 1.0)")
    gen.add_argument("--width", type=float, default=20.0,
                     help="rectangle width in meters (default: 20)")
    gen.add_argument("--height", type=float, default=20.0,
                     help="rectangle height in meters (default: 20)")
    gen.add_argument("--radius", type=float, default=10.0,
                     help="circle radius in meters (default: 10)")
    gen.add_argument("--out", help="output file (default: stdout)")
    gen.set_defaults(func=_cmd_gen_trajectory)
    return parser


def main(argv=None) -> int:
    level = LOG_LEVELS.get(os.environ.get("NRPL_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

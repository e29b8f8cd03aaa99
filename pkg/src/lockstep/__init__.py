"""Deterministic lockstep co-simulation kernel.

Engines advance in fixed time steps behind a blocking request/reply
protocol; transceiver and preprocessing functions route datapacks between
them each step. Built-in engines cover a kinematic Ackermann vehicle, a
waypoint controller, a synthetic camera, and a threshold detector.
"""

__version__ = "0.1.0"

from . import engines as _engines  # noqa: F401  (registers built-in engine types)
from .config import (
    EngineConfig,
    FunctionConfig,
    InProcess,
    InputBinding,
    SimulationConfig,
    Subprocess,
    parse_config,
    print_config,
    validate_wiring,
)
from .datapacks import (
    CameraFrame,
    DataPack,
    DataPackCache,
    DataPackIdentifier,
    Detection,
    Doc,
    JointCommand,
    JointTargetType,
    LinkState,
)
from .engine import EngineHandle, EngineScript, launch_engine, serve_engine
from .errors import LockstepError
from .functions import FunctionContext, FunctionKind, FunctionSpec, register_function
from .loop import (
    Simulation,
    SimulationReport,
    loop_fps,
    real_time_factor,
    run_simulation,
)
from .transport import measure_throughput
from .wire import Codec, decode_message, encode_message

__all__ = [
    "CameraFrame",
    "Codec",
    "DataPack",
    "DataPackCache",
    "DataPackIdentifier",
    "Detection",
    "Doc",
    "EngineConfig",
    "EngineHandle",
    "EngineScript",
    "FunctionConfig",
    "FunctionContext",
    "FunctionKind",
    "FunctionSpec",
    "InProcess",
    "InputBinding",
    "JointCommand",
    "JointTargetType",
    "LinkState",
    "LockstepError",
    "Simulation",
    "SimulationConfig",
    "SimulationReport",
    "Subprocess",
    "decode_message",
    "encode_message",
    "launch_engine",
    "loop_fps",
    "measure_throughput",
    "parse_config",
    "print_config",
    "real_time_factor",
    "register_function",
    "run_simulation",
    "serve_engine",
    "validate_wiring",
]

"""Simulation configuration: parsing, validation, defaults, serialization.

The configuration is a single UTF-8 JSON object. Top-level keys:

    SimulationName                optional string
    SimulationDescription         optional string
    SimulationTimeout             integer seconds >= 0, default 0 (unbounded)
    SimulationTimestep            float seconds > 0, default 0.01
    SimulationLoop                only "FTILoop" is supported
    DataPackProcessor             only "tf" is supported
    ProcessLauncherType           accepted and recorded, not interpreted
    EngineConfigs                 non-empty array of engine objects
    DataPackProcessingFunctions   array of function objects

Engine object keys: EngineName and EngineType (required), EngineTimestep,
EngineCommandTimeout, EngineProcCmd / EngineProcStartParams /
EngineEnvParams (their presence selects a subprocess launch), Extra
(engine-type-specific settings). Unrecognized engine keys are folded into
Extra so foreign configs still parse.

Function object keys: Name (required), FunctionId (or FileName, whose value
is then used verbatim as the function id), IsPreprocessing, LinkedEngine,
Inputs (array of {Keyword, DataPackName, EngineName}).

Keys naming features this runtime does not provide (ConnectROS,
ConnectMQTT, ComputationalGraph, StatusFunction, EventLoop settings,
ExternalProcesses, SimulationLoop="EventLoop", DataPackProcessor="cg") are
rejected loudly rather than ignored: a silently dropped key is usually a
typo or a feature someone relies on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import (
    DuplicateEngineName,
    DuplicateFunctionName,
    MalformedDocument,
    MissingField,
    UnknownEngineRef,
    UnknownFunctionId,
    UnknownKey,
    UnsupportedFeature,
)

DEFAULT_SIMULATION_TIMESTEP = 0.01
DEFAULT_ENGINE_TIMESTEP = 0.01
DEFAULT_ENGINE_COMMAND_TIMEOUT = 0.0  # 0 means wait forever

SUPPORTED_ENGINE_TYPES = ("vehicle_sim", "controller", "camera", "detector")
# Recognized from other runtimes' vocabulary; rejected with a clear message.
FOREIGN_ENGINE_TYPES = ("python_json", "gazebo")

_REJECTED_TOP_KEYS = (
    "ConnectROS",
    "ConnectMQTT",
    "ComputationalGraph",
    "StatusFunction",
    "EventLoopTimeout",
    "EventLoopTimestep",
    "ExternalProcesses",
)
_ACCEPTED_TOP_KEYS = {
    "SimulationName",
    "SimulationDescription",
    "SimulationTimeout",
    "SimulationTimestep",
    "SimulationLoop",
    "DataPackProcessor",
    "ProcessLauncherType",
    "EngineConfigs",
    "DataPackProcessingFunctions",
}
_KNOWN_ENGINE_KEYS = {
    "EngineName",
    "EngineType",
    "EngineTimestep",
    "EngineCommandTimeout",
    "EngineProcCmd",
    "EngineProcStartParams",
    "EngineEnvParams",
    "Extra",
}
_KNOWN_FUNCTION_KEYS = {
    "Name",
    "FunctionId",
    "FileName",
    "IsPreprocessing",
    "LinkedEngine",
    "Inputs",
}


@dataclass(frozen=True)
class InProcess:
    """Run the engine inside the orchestrator process, behind a queue pair."""


@dataclass(frozen=True)
class Subprocess:
    cmd: str
    args: tuple[str, ...] = ()
    env: tuple[str, ...] = ()  # "KEY=VALUE" entries


@dataclass(frozen=True)
class InputBinding:
    keyword: str
    datapack_name: str
    engine_name: str


@dataclass(frozen=True)
class FunctionConfig:
    name: str
    function_id: str
    is_preprocessing: bool = False
    linked_engine: str = ""
    inputs: tuple[InputBinding, ...] = ()


@dataclass(frozen=True)
class EngineConfig:
    engine_name: str
    engine_type: str
    engine_timestep: float = DEFAULT_ENGINE_TIMESTEP
    engine_command_timeout: float = DEFAULT_ENGINE_COMMAND_TIMEOUT
    launch: InProcess | Subprocess = InProcess()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.engine_timestep <= 0:
            raise MalformedDocument(
                f"engine {self.engine_name!r}: EngineTimestep must be > 0"
            )


@dataclass(frozen=True)
class SimulationConfig:
    simulation_name: str = ""
    simulation_description: str = ""
    simulation_timeout: int = 0
    simulation_timestep: float = DEFAULT_SIMULATION_TIMESTEP
    engine_configs: tuple[EngineConfig, ...] = ()
    functions: tuple[FunctionConfig, ...] = ()
    datapack_processor: str = "tf"
    unsupported_keys_seen: tuple[str, ...] = field(default=(), compare=False)

    def engine(self, name: str) -> EngineConfig:
        for cfg in self.engine_configs:
            if cfg.engine_name == name:
                return cfg
        raise KeyError(name)

    @property
    def engine_names(self) -> tuple[str, ...]:
        return tuple(e.engine_name for e in self.engine_configs)


def _expect(obj: Any, typ, what: str):
    if typ is float and isinstance(obj, int) and not isinstance(obj, bool):
        return float(obj)
    if not isinstance(obj, typ) or isinstance(obj, bool) and typ is not bool:
        raise MalformedDocument(f"{what} has wrong type {type(obj).__name__}")
    return obj


def _parse_engine(entry: Any, index: int) -> EngineConfig:
    where = f"EngineConfigs[{index}]"
    if not isinstance(entry, dict):
        raise MalformedDocument(f"{where} must be an object")
    if "EngineName" not in entry:
        raise MissingField("EngineName", where)
    if "EngineType" not in entry:
        raise MissingField("EngineType", where)
    name = _expect(entry["EngineName"], str, f"{where}.EngineName")
    if not name:
        raise MalformedDocument(f"{where}.EngineName must be non-empty")

    timestep = _expect(
        entry.get("EngineTimestep", DEFAULT_ENGINE_TIMESTEP),
        float,
        f"{where}.EngineTimestep",
    )
    timeout = _expect(
        entry.get("EngineCommandTimeout", DEFAULT_ENGINE_COMMAND_TIMEOUT),
        float,
        f"{where}.EngineCommandTimeout",
    )
    if timeout < 0:
        timeout = 0.0  # negative means "no timeout", same as zero

    launch: InProcess | Subprocess
    if "EngineProcCmd" in entry:
        launch = Subprocess(
            cmd=_expect(entry["EngineProcCmd"], str, f"{where}.EngineProcCmd"),
            args=tuple(
                _expect(a, str, f"{where}.EngineProcStartParams[*]")
                for a in entry.get("EngineProcStartParams", [])
            ),
            env=tuple(
                _expect(a, str, f"{where}.EngineEnvParams[*]")
                for a in entry.get("EngineEnvParams", [])
            ),
        )
    else:
        launch = InProcess()

    extra = dict(_expect(entry.get("Extra", {}), dict, f"{where}.Extra"))
    for key, value in entry.items():
        if key not in _KNOWN_ENGINE_KEYS:
            extra.setdefault(key, value)

    return EngineConfig(
        engine_name=name,
        engine_type=_expect(entry["EngineType"], str, f"{where}.EngineType"),
        engine_timestep=timestep,
        engine_command_timeout=timeout,
        launch=launch,
        extra=extra,
    )


def _parse_function(entry: Any, index: int) -> FunctionConfig:
    where = f"DataPackProcessingFunctions[{index}]"
    if not isinstance(entry, dict):
        raise MalformedDocument(f"{where} must be an object")
    for key in entry:
        if key not in _KNOWN_FUNCTION_KEYS:
            raise UnknownKey(f"{where}: unknown key {key!r}")
    if "Name" not in entry:
        raise MissingField("Name", where)
    function_id = entry.get("FunctionId", entry.get("FileName"))
    if function_id is None:
        raise MissingField("FunctionId", where)

    bindings = []
    seen_keywords = set()
    for j, binding in enumerate(entry.get("Inputs", [])):
        bwhere = f"{where}.Inputs[{j}]"
        if not isinstance(binding, dict):
            raise MalformedDocument(f"{bwhere} must be an object")
        try:
            parsed = InputBinding(
                keyword=_expect(binding["Keyword"], str, f"{bwhere}.Keyword"),
                datapack_name=_expect(binding["DataPackName"], str, f"{bwhere}.DataPackName"),
                engine_name=_expect(binding["EngineName"], str, f"{bwhere}.EngineName"),
            )
        except KeyError as exc:
            raise MissingField(exc.args[0], bwhere) from None
        if parsed.keyword in seen_keywords:
            raise MalformedDocument(f"{bwhere}: duplicate keyword {parsed.keyword!r}")
        seen_keywords.add(parsed.keyword)
        bindings.append(parsed)

    return FunctionConfig(
        name=_expect(entry["Name"], str, f"{where}.Name"),
        function_id=_expect(function_id, str, f"{where}.FunctionId"),
        is_preprocessing=_expect(
            entry.get("IsPreprocessing", False), bool, f"{where}.IsPreprocessing"
        ),
        linked_engine=_expect(entry.get("LinkedEngine", ""), str, f"{where}.LinkedEngine"),
        inputs=tuple(bindings),
    )


def parse_config(text: bytes | str) -> SimulationConfig:
    """Parse and validate a configuration document.

    Defaults are applied only for absent keys. Keys naming unsupported
    features raise UnsupportedFeature; genuinely unknown top-level keys
    raise UnknownKey.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocument(f"config is not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedDocument("config root must be a JSON object")

    rejected = [k for k in _REJECTED_TOP_KEYS if k in doc]
    recorded = list(rejected)

    loop_kind = doc.get("SimulationLoop", "FTILoop")
    if loop_kind != "FTILoop":
        recorded.append(f"SimulationLoop={loop_kind}")
        rejected.append(f"SimulationLoop={loop_kind}")
    processor = doc.get("DataPackProcessor", "tf")
    if processor != "tf":
        recorded.append(f"DataPackProcessor={processor}")
        rejected.append(f"DataPackProcessor={processor}")
    if "ProcessLauncherType" in doc:
        # Accepted for compatibility; launching is decided per engine here.
        recorded.append("ProcessLauncherType")

    if rejected:
        raise UnsupportedFeature(rejected)

    for key in doc:
        if key not in _ACCEPTED_TOP_KEYS:
            raise UnknownKey(f"unknown top-level key {key!r}")

    engines_doc = doc.get("EngineConfigs")
    if not isinstance(engines_doc, list) or not engines_doc:
        raise MalformedDocument("EngineConfigs must be a non-empty array")
    engines = tuple(_parse_engine(e, i) for i, e in enumerate(engines_doc))
    seen = set()
    for engine in engines:
        if engine.engine_name in seen:
            raise DuplicateEngineName(f"duplicate engine name {engine.engine_name!r}")
        seen.add(engine.engine_name)

    functions_doc = doc.get("DataPackProcessingFunctions", [])
    if not isinstance(functions_doc, list):
        raise MalformedDocument("DataPackProcessingFunctions must be an array")
    functions = tuple(_parse_function(f, i) for i, f in enumerate(functions_doc))
    seen = set()
    for fn in functions:
        if fn.name in seen:
            raise DuplicateFunctionName(f"duplicate function name {fn.name!r}")
        seen.add(fn.name)

    timeout = doc.get("SimulationTimeout", 0)
    if isinstance(timeout, bool) or not isinstance(timeout, int):
        raise MalformedDocument("SimulationTimeout must be an integer")
    if timeout < 0:
        raise MalformedDocument("SimulationTimeout must be >= 0")

    timestep = _expect(
        doc.get("SimulationTimestep", DEFAULT_SIMULATION_TIMESTEP),
        float,
        "SimulationTimestep",
    )
    if timestep <= 0:
        raise MalformedDocument("SimulationTimestep must be > 0")

    return SimulationConfig(
        simulation_name=_expect(doc.get("SimulationName", ""), str, "SimulationName"),
        simulation_description=_expect(
            doc.get("SimulationDescription", ""), str, "SimulationDescription"
        ),
        simulation_timeout=timeout,
        simulation_timestep=timestep,
        engine_configs=engines,
        functions=functions,
        datapack_processor="tf",
        unsupported_keys_seen=tuple(recorded),
    )


def print_config(cfg: SimulationConfig) -> str:
    """Serialize a configuration such that parse_config(print_config(c)) == c."""
    doc: dict[str, Any] = {}
    if cfg.simulation_name:
        doc["SimulationName"] = cfg.simulation_name
    if cfg.simulation_description:
        doc["SimulationDescription"] = cfg.simulation_description
    doc["SimulationTimeout"] = cfg.simulation_timeout
    doc["SimulationTimestep"] = cfg.simulation_timestep
    doc["DataPackProcessor"] = cfg.datapack_processor

    engines = []
    for engine in cfg.engine_configs:
        entry: dict[str, Any] = {
            "EngineName": engine.engine_name,
            "EngineType": engine.engine_type,
            "EngineTimestep": engine.engine_timestep,
            "EngineCommandTimeout": engine.engine_command_timeout,
        }
        if isinstance(engine.launch, Subprocess):
            entry["EngineProcCmd"] = engine.launch.cmd
            entry["EngineProcStartParams"] = list(engine.launch.args)
            entry["EngineEnvParams"] = list(engine.launch.env)
        if engine.extra:
            entry["Extra"] = engine.extra
        engines.append(entry)
    doc["EngineConfigs"] = engines

    doc["DataPackProcessingFunctions"] = [
        {
            "Name": fn.name,
            "FunctionId": fn.function_id,
            "IsPreprocessing": fn.is_preprocessing,
            "LinkedEngine": fn.linked_engine,
            "Inputs": [
                {
                    "Keyword": b.keyword,
                    "DataPackName": b.datapack_name,
                    "EngineName": b.engine_name,
                }
                for b in fn.inputs
            ],
        }
        for fn in cfg.functions
    ]
    return json.dumps(doc, indent=2, sort_keys=False)


def validate_wiring(cfg: SimulationConfig, registry: Optional[dict] = None) -> None:
    """Check cross-references: engine types, function ids, input bindings.

    `registry` maps function ids to bodies; the built-in registry is used
    when omitted. Raises on the first problem found.
    """
    if registry is None:
        from .functions import FUNCTION_REGISTRY

        registry = FUNCTION_REGISTRY
    from .engine import ENGINE_TYPES

    names = set(cfg.engine_names)
    for engine in cfg.engine_configs:
        if engine.engine_type not in ENGINE_TYPES:
            detail = (
                "is recognized but not supported by this runtime"
                if engine.engine_type in FOREIGN_ENGINE_TYPES
                else "is not a known engine type"
            )
            raise UnsupportedFeature(
                [f"EngineType={engine.engine_type}"],
                f"engine {engine.engine_name!r}: type {engine.engine_type!r} {detail}",
            )

    for fn in cfg.functions:
        if fn.function_id not in registry:
            raise UnknownFunctionId(
                f"function {fn.name!r}: no registered body {fn.function_id!r}"
            )
        if fn.linked_engine not in names:
            raise UnknownEngineRef(fn.name, fn.linked_engine)
        for binding in fn.inputs:
            if binding.engine_name not in names:
                raise UnknownEngineRef(fn.name, binding.engine_name)
            if fn.is_preprocessing and binding.engine_name != fn.linked_engine:
                raise MalformedDocument(
                    f"preprocessing function {fn.name!r} takes input "
                    f"{binding.datapack_name!r} from foreign engine "
                    f"{binding.engine_name!r}; preprocessing inputs must come "
                    f"from the linked engine {fn.linked_engine!r}"
                )

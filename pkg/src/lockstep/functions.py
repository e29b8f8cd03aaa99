"""Declarative datapack-processing functions and their execution.

Two kinds exist. Transceiver functions move data between engines: their
output datapacks are sent to whichever engine each output names.
Preprocessing functions refine data from one engine: they may only read
from their linked engine and their outputs land in the local cache, never
on an engine. All preprocessing functions run before all transceiver
functions; within a kind, configuration order is preserved.

Bodies are pure callables from a FunctionContext to a list of datapacks.
The built-in bodies cover the autonomous-driving demo: pose forwarding,
motor command fan-out, camera frame lowering, and detection logging.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .config import SimulationConfig
from .datapacks import (
    DataPack,
    DataPackCache,
    DataPackIdentifier,
    Doc,
    JointCommand,
    JointTargetType,
)
from .errors import BodyFault, OutputToUnknownEngine, UnknownFunctionId
from .vehicle import (
    FRONT_LEFT_STEERING,
    FRONT_RIGHT_STEERING,
    REAR_LEFT_WHEEL,
    REAR_RIGHT_WHEEL,
)

__all__ = [
    "FUNCTION_REGISTRY",
    "FunctionContext",
    "FunctionKind",
    "FunctionSpec",
    "build_function_specs",
    "execute_function",
    "pipeline_order",
    "register_function",
]


class FunctionKind(enum.Enum):
    TRANSCEIVER = "transceiver"
    PREPROCESSING = "preprocessing"


@dataclass(frozen=True)
class FunctionContext:
    """What a body sees: resolved inputs by keyword plus its linked engine."""

    inputs: dict
    linked_engine: str

    def single(self, keyword: str) -> DataPack:
        """The input bound to `keyword`, or the sole input if only one exists."""
        if keyword in self.inputs:
            return self.inputs[keyword]
        if len(self.inputs) == 1:
            return next(iter(self.inputs.values()))
        raise KeyError(
            f"no input bound to keyword {keyword!r} "
            f"(have: {sorted(self.inputs)})"
        )


FunctionBody = Callable[[FunctionContext], list]


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    kind: FunctionKind
    linked_engine: str
    inputs: tuple[tuple[str, DataPackIdentifier], ...]
    body: FunctionBody

    def __post_init__(self):
        keywords = [kw for kw, _ in self.inputs]
        if len(keywords) != len(set(keywords)):
            raise ValueError(f"function {self.name!r}: duplicate input keywords")
        if self.kind is FunctionKind.PREPROCESSING:
            for kw, ident in self.inputs:
                if ident.engine_name != self.linked_engine:
                    raise ValueError(
                        f"preprocessing function {self.name!r} input {kw!r} reads "
                        f"from {ident.engine_name!r}, not its linked engine "
                        f"{self.linked_engine!r}"
                    )


FUNCTION_REGISTRY: dict[str, FunctionBody] = {}


def register_function(function_id: str):
    def deco(body: FunctionBody) -> FunctionBody:
        FUNCTION_REGISTRY[function_id] = body
        return body
    return deco


def pipeline_order(specs: Iterable[FunctionSpec]) -> list[FunctionSpec]:
    """Execution plan: preprocessing first, then transceivers, stable within each."""
    specs = list(specs)
    pre = [s for s in specs if s.kind is FunctionKind.PREPROCESSING]
    trans = [s for s in specs if s.kind is FunctionKind.TRANSCEIVER]
    return pre + trans


def _resolve_input(ident: DataPackIdentifier, cache: DataPackCache,
                   engine_packs: dict) -> DataPack:
    """Engine data wins, then cached preprocessing output, then an empty pack."""
    pack = engine_packs.get((ident.name, ident.engine_name))
    if pack is not None and not pack.is_empty():
        return pack
    cached = cache.fetch_or_none(ident)
    if cached is not None and not cached.is_empty():
        return cached
    if pack is not None:
        return pack
    return DataPack.empty(ident.name, ident.engine_name, ident.type_tag or "")


def execute_function(spec: FunctionSpec, cache: DataPackCache,
                     engine_packs: dict,
                     known_engines: Optional[set] = None) -> list[DataPack]:
    """Run one function body over resolved inputs and return its outputs.

    Missing inputs are delivered as empty datapacks. Transceiver outputs
    naming an engine outside `known_engines` raise OutputToUnknownEngine;
    the caller routes outputs (to engines or to the cache) by spec.kind.
    """
    inputs = {
        kw: _resolve_input(ident, cache, engine_packs)
        for kw, ident in spec.inputs
    }
    try:
        outputs = spec.body(FunctionContext(inputs, spec.linked_engine))
    except Exception as exc:
        raise BodyFault(spec.name, exc) from exc
    if outputs is None:
        outputs = []
    outputs = list(outputs)
    for pack in outputs:
        if not isinstance(pack, DataPack):
            raise BodyFault(
                spec.name,
                TypeError(f"body returned {type(pack).__name__}, not DataPack"),
            )
    if spec.kind is FunctionKind.TRANSCEIVER and known_engines is not None:
        for pack in outputs:
            if pack.id.engine_name not in known_engines:
                raise OutputToUnknownEngine(spec.name, pack.id.engine_name)
    return outputs


def build_function_specs(cfg: SimulationConfig,
                         registry: Optional[dict] = None) -> list[FunctionSpec]:
    """Bind configured functions to registered bodies."""
    registry = FUNCTION_REGISTRY if registry is None else registry
    specs = []
    for fn in cfg.functions:
        try:
            body = registry[fn.function_id]
        except KeyError:
            raise UnknownFunctionId(
                f"function {fn.name!r}: no registered body {fn.function_id!r}"
            ) from None
        specs.append(FunctionSpec(
            name=fn.name,
            kind=(FunctionKind.PREPROCESSING if fn.is_preprocessing
                  else FunctionKind.TRANSCEIVER),
            linked_engine=fn.linked_engine,
            inputs=tuple(
                (b.keyword, DataPackIdentifier(b.datapack_name, "", b.engine_name))
                for b in fn.inputs
            ),
            body=body,
        ))
    return specs


# --- built-in bodies -----------------------------------------------------------

@register_function("state_tf")
def state_tf(ctx: FunctionContext) -> list[DataPack]:
    """Forward chassis pose to the controller as a flat document.

    Only planar position and the orientation quaternion travel; that keeps
    the document small.
    """
    pack = ctx.single("state")
    if pack.is_empty():
        return []
    link = pack.data
    doc = Doc({
        "location_x": link.pos[0],
        "location_y": link.pos[1],
        "qtn_x": link.rot[0],
        "qtn_y": link.rot[1],
        "qtn_z": link.rot[2],
        "qtn_w": link.rot[3],
    })
    return [DataPack.of("state_location", ctx.linked_engine, doc)]


@register_function("motor_set_tf")
def motor_set_tf(ctx: FunctionContext) -> list[DataPack]:
    """Fan the actors document out into four joint commands.

    angular_L/angular_R are steering angles (rad, position joints);
    linear_L/linear_R are wheel speeds (rad/s, velocity joints).
    """
    pack = ctx.single("actors")
    if pack.is_empty():
        return []
    doc = pack.data
    commands = (
        JointCommand(REAR_LEFT_WHEEL, JointTargetType.VELOCITY, float(doc["linear_L"])),
        JointCommand(REAR_RIGHT_WHEEL, JointTargetType.VELOCITY, float(doc["linear_R"])),
        JointCommand(FRONT_LEFT_STEERING, JointTargetType.POSITION, float(doc["angular_L"])),
        JointCommand(FRONT_RIGHT_STEERING, JointTargetType.POSITION, float(doc["angular_R"])),
    )
    return [DataPack.of(cmd.joint_name, ctx.linked_engine, cmd) for cmd in commands]


@register_function("camera_tf")
def camera_tf(ctx: FunctionContext) -> list[DataPack]:
    """Lower a camera frame into the document the detector consumes.

    The pixel buffer is passed through as a byte string; it only becomes an
    integer array on the text codec's wire form.
    """
    pack = ctx.single("camera")
    if pack.is_empty():
        return []
    frame = pack.data
    doc = Doc({
        "c_imageHeight": frame.image_height,
        "c_imageWidth": frame.image_width,
        "current_image_frame": frame.image_data,
    })
    return [DataPack.of("camera_img", ctx.linked_engine, doc)]


@register_function("detection_log_tf")
def detection_log_tf(ctx: FunctionContext) -> list[DataPack]:
    """Re-emit the detector's finding so the run loop can log it.

    Configured as a preprocessing function in the demo, so its output goes
    to the cache; the metrics sink records every routed detection payload
    into the detections log.
    """
    pack = ctx.single("detections")
    if pack.is_empty():
        return []
    return [DataPack.of("detection_log", ctx.linked_engine, pack.data)]

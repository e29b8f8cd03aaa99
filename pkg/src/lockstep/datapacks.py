"""Core data model: datapacks, identifiers, payload variants, and the cache.

A DataPack is the routed unit of data between engines and functions. It is
an identifier plus an optional payload; a pack without a payload is "empty"
and reading its data raises EmptyDataPackError. Payloads come in five
variants: a generic string-keyed document (Doc) and four typed records
(LinkState, JointCommand, CameraFrame, Detection).

All values here are treated as immutable once constructed; they may be
shared freely between threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional, Union

from .errors import (
    DataPackNotFound,
    DocValueError,
    EmptyDataPackError,
)

__all__ = [
    "DataPack",
    "DataPackCache",
    "DataPackIdentifier",
    "Detection",
    "Doc",
    "JointCommand",
    "JointTargetType",
    "LinkState",
    "CameraFrame",
    "Payload",
    "payload_type_tag",
]

_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1

# Reserved by the text codec to carry byte strings inside a Doc; user keys
# may not collide with it.
BYTES_ESCAPE_KEY = "__bytes__"


def _check_doc_value(value: Any, path: str) -> None:
    if isinstance(value, bool):
        return
    if isinstance(value, int):
        if not _INT64_MIN <= value <= _INT64_MAX:
            raise DocValueError(f"{path}: integer out of 64-bit range")
        return
    if isinstance(value, (float, str, bytes)):
        return
    if isinstance(value, list):
        for i, item in enumerate(value):
            _check_doc_value(item, f"{path}[{i}]")
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise DocValueError(f"{path}: non-string key {key!r}")
            if key == BYTES_ESCAPE_KEY:
                raise DocValueError(f"{path}: key {BYTES_ESCAPE_KEY!r} is reserved")
            _check_doc_value(item, f"{path}.{key}")
        return
    raise DocValueError(f"{path}: unsupported value type {type(value).__name__}")


@dataclass(frozen=True)
class Doc:
    """Tree of string keys to scalars, byte strings, arrays, or nested maps.

    Supported scalar types: bool, 64-bit int, float, str, bytes. This is the
    variant the text codec can represent directly.
    """

    data: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_doc_value(self.data, "doc")

    def __getitem__(self, key: str) -> Any:
        return self.data[key]

    def __contains__(self, key: str) -> bool:
        return key in self.data

    def get(self, key: str, default: Any = None) -> Any:
        return self.data.get(key, default)

    def __eq__(self, other):
        if not isinstance(other, Doc):
            return NotImplemented
        return self.data == other.data


@dataclass(frozen=True)
class LinkState:
    """Rigid-body link pose and twist.

    Quaternion component order is (x, y, z, w).
    """

    pos: tuple[float, float, float]
    rot: tuple[float, float, float, float]
    lin_vel: tuple[float, float, float] = (0.0, 0.0, 0.0)
    ang_vel: tuple[float, float, float] = (0.0, 0.0, 0.0)


class JointTargetType(enum.Enum):
    VELOCITY = "velocity"
    POSITION = "position"


@dataclass(frozen=True)
class JointCommand:
    """Setpoint for one named joint: rad/s for velocity, rad for position."""

    joint_name: str
    target_type: JointTargetType
    target_value: float


@dataclass(frozen=True)
class CameraFrame:
    """Raw image: row-major, channel-interleaved bytes, length h * w * depth.

    The constructor does not validate; see perception.reshape_frame for the
    length check and perception.check_frame for the dimension warning.
    """

    image_height: int
    image_width: int
    image_depth: int
    image_data: bytes


@dataclass(frozen=True)
class Detection:
    """Axis-aligned bounding box in pixel coordinates, inclusive bounds."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int
    score: float
    label: str

    def __post_init__(self):
        if not (0 <= self.x_min <= self.x_max and 0 <= self.y_min <= self.y_max):
            raise ValueError(f"inverted or negative box: {self}")


Payload = Union[Doc, LinkState, JointCommand, CameraFrame, Detection]

_PAYLOAD_TAGS: dict[type, str] = {
    Doc: "doc",
    LinkState: "link_state",
    JointCommand: "joint_command",
    CameraFrame: "camera_frame",
    Detection: "detection",
}

TAG_TO_PAYLOAD_TYPE = {tag: cls for cls, tag in _PAYLOAD_TAGS.items()}


def payload_type_tag(payload: Payload) -> str:
    """Return the machine-oriented variant name for a payload value."""
    try:
        return _PAYLOAD_TAGS[type(payload)]
    except KeyError:
        raise TypeError(f"not a payload variant: {type(payload).__name__}") from None


@dataclass(frozen=True)
class DataPackIdentifier:
    """(name, type tag, engine name) triple naming one datapack.

    Equality and hashing are structural over all three fields. Within one
    simulation the (name, engine_name) pair is unique.
    """

    name: str
    type_tag: str
    engine_name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("datapack name must be non-empty")
        if not self.engine_name:
            raise ValueError("engine name must be non-empty")


@dataclass(frozen=True)
class DataPack:
    """An identifier plus an optional payload.

    Use DataPack.of() to derive the type tag from the payload, and
    DataPack.empty() when there is no payload (the tag must then be given
    explicitly so routing stays typed).
    """

    id: DataPackIdentifier
    payload: Optional[Payload] = None

    @classmethod
    def of(cls, name: str, engine_name: str, payload: Payload) -> "DataPack":
        tag = payload_type_tag(payload)
        return cls(DataPackIdentifier(name, tag, engine_name), payload)

    @classmethod
    def empty(cls, name: str, engine_name: str, type_tag: str) -> "DataPack":
        return cls(DataPackIdentifier(name, type_tag, engine_name), None)

    def is_empty(self) -> bool:
        return self.payload is None

    @property
    def data(self) -> Payload:
        """The payload; raises EmptyDataPackError when there is none."""
        if self.payload is None:
            raise EmptyDataPackError(
                f"datapack {self.id.name!r}@{self.id.engine_name!r} is empty"
            )
        return self.payload


class DataPackCache:
    """Cache of the most recent datapack per (name, engine_name) pair.

    Insertion is last-writer-wins; fetching never mutates. Fetching a pair
    that was never stored raises DataPackNotFound, which is deliberately
    distinct from fetching a stored-but-empty datapack.
    """

    def __init__(self):
        self._entries: dict[tuple[str, str], DataPack] = {}

    def store(self, pack: DataPack) -> None:
        self._entries[(pack.id.name, pack.id.engine_name)] = pack

    def fetch(self, ident: DataPackIdentifier) -> DataPack:
        try:
            return self._entries[(ident.name, ident.engine_name)]
        except KeyError:
            raise DataPackNotFound(
                f"no datapack {ident.name!r}@{ident.engine_name!r} in cache"
            ) from None

    def fetch_or_none(self, ident: DataPackIdentifier) -> Optional[DataPack]:
        return self._entries.get((ident.name, ident.engine_name))

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[DataPack]:
        return iter(self._entries.values())

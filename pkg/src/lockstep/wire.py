"""Framed request/reply wire protocol with two payload codecs.

Frame layout (all integers big-endian):

    offset  size  field
    0       4     magic, ASCII "NRPL"
    4       1     version, 0x01
    5       1     codec: 0x00 text, 0x01 binary
    6       1     message type
    7       1     reserved, 0x00
    8       4     payload length (unsigned)
    12      n     payload

Message types:

    0x01 Init            0x81 InitReply
    0x02 RunStep         0x82 RunStepReply
    0x03 GetDataPacks    0x83 GetDataPacksReply
    0x04 SetDataPacks    0x84 SetDataPacksAck
    0x05 Shutdown        0x85 ShutdownAck
    0xFF ErrorReply

The text codec carries a UTF-8 JSON document with lexicographically sorted
keys; typed payloads are lowered to plain documents (pixel bytes become an
array of integers, which is deliberately expensive). The binary codec uses
fixed field order, 64-bit floats, and length-prefixed strings/byte arrays,
so images travel as raw bytes. Encoding is deterministic for both codecs:
the same message always produces the same frame.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from typing import Union

from .datapacks import (
    BYTES_ESCAPE_KEY,
    CameraFrame,
    DataPack,
    DataPackIdentifier,
    Detection,
    Doc,
    JointCommand,
    JointTargetType,
    LinkState,
    Payload,
)
from .errors import (
    BadMagic,
    BadVersion,
    CodecMismatch,
    MalformedPayload,
    Truncated,
    UnencodablePayload,
)

MAGIC = b"NRPL"
VERSION = 0x01
HEADER = struct.Struct(">4sBBBBI")
HEADER_SIZE = HEADER.size  # 12
MAX_PAYLOAD_LEN = 2**32 - 1

_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")
_F64 = struct.Struct(">d")


class Codec(enum.Enum):
    TEXT = 0x00
    BINARY = 0x01

    @classmethod
    def from_name(cls, name: str) -> "Codec":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown codec {name!r}") from None

    @property
    def wire_name(self) -> str:
        return self.name.lower()


class MsgType(enum.IntEnum):
    INIT = 0x01
    RUN_STEP = 0x02
    GET_DATAPACKS = 0x03
    SET_DATAPACKS = 0x04
    SHUTDOWN = 0x05
    INIT_REPLY = 0x81
    RUN_STEP_REPLY = 0x82
    GET_DATAPACKS_REPLY = 0x83
    SET_DATAPACKS_ACK = 0x84
    SHUTDOWN_ACK = 0x85
    ERROR_REPLY = 0xFF


# --- message variants --------------------------------------------------------

@dataclass(frozen=True)
class Init:
    engine_name: str
    engine_timestep_ns: int


@dataclass(frozen=True)
class InitReply:
    engine_name: str


@dataclass(frozen=True)
class RunStep:
    until_ns: int


@dataclass(frozen=True)
class RunStepReply:
    engine_time_ns: int


@dataclass(frozen=True)
class GetDataPacks:
    ids: tuple[DataPackIdentifier, ...]


@dataclass(frozen=True)
class GetDataPacksReply:
    packs: tuple[DataPack, ...]


@dataclass(frozen=True)
class SetDataPacks:
    packs: tuple[DataPack, ...]


@dataclass(frozen=True)
class SetDataPacksAck:
    pass


@dataclass(frozen=True)
class Shutdown:
    pass


@dataclass(frozen=True)
class ShutdownAck:
    pass


@dataclass(frozen=True)
class ErrorReply:
    code: str
    message: str


Message = Union[
    Init,
    InitReply,
    RunStep,
    RunStepReply,
    GetDataPacks,
    GetDataPacksReply,
    SetDataPacks,
    SetDataPacksAck,
    Shutdown,
    ShutdownAck,
    ErrorReply,
]

_MSG_TYPE_OF = {
    Init: MsgType.INIT,
    RunStep: MsgType.RUN_STEP,
    GetDataPacks: MsgType.GET_DATAPACKS,
    SetDataPacks: MsgType.SET_DATAPACKS,
    Shutdown: MsgType.SHUTDOWN,
    InitReply: MsgType.INIT_REPLY,
    RunStepReply: MsgType.RUN_STEP_REPLY,
    GetDataPacksReply: MsgType.GET_DATAPACKS_REPLY,
    SetDataPacksAck: MsgType.SET_DATAPACKS_ACK,
    ShutdownAck: MsgType.SHUTDOWN_ACK,
    ErrorReply: MsgType.ERROR_REPLY,
}


# --- binary primitives -------------------------------------------------------

def _pack_str(out: list, s: str) -> None:
    raw = s.encode("utf-8")
    out.append(_U32.pack(len(raw)))
    out.append(raw)


def _pack_bytes(out: list, b: bytes) -> None:
    out.append(_U32.pack(len(b)))
    out.append(b)


class _Reader:
    """Sequential reader over one payload; every underrun is Truncated."""

    def __init__(self, buf: bytes):
        self._buf = buf
        self._pos = 0

    def take(self, n: int) -> bytes:
        end = self._pos + n
        if end > len(self._buf):
            raise Truncated(f"payload ends {end - len(self._buf)} bytes early")
        chunk = self._buf[self._pos:end]
        self._pos = end
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def f64(self) -> float:
        return _F64.unpack(self.take(8))[0]

    def str_(self) -> str:
        raw = self.take(self.u32())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedPayload(f"bad UTF-8 string: {exc}") from None

    def bytes_(self) -> bytes:
        return self.take(self.u32())

    def done(self) -> None:
        if self._pos != len(self._buf):
            raise MalformedPayload(
                f"{len(self._buf) - self._pos} trailing bytes in payload"
            )


# --- Doc values, binary form -------------------------------------------------

_DOC_BOOL, _DOC_INT, _DOC_FLOAT, _DOC_STR, _DOC_BYTES, _DOC_LIST, _DOC_MAP = range(1, 8)


def _pack_doc_value(out: list, value) -> None:
    if isinstance(value, bool):
        out.append(bytes((_DOC_BOOL, 1 if value else 0)))
    elif isinstance(value, int):
        out.append(bytes((_DOC_INT,)))
        out.append(struct.pack(">q", value))
    elif isinstance(value, float):
        out.append(bytes((_DOC_FLOAT,)))
        out.append(_F64.pack(value))
    elif isinstance(value, str):
        out.append(bytes((_DOC_STR,)))
        _pack_str(out, value)
    elif isinstance(value, bytes):
        out.append(bytes((_DOC_BYTES,)))
        _pack_bytes(out, value)
    elif isinstance(value, list):
        out.append(bytes((_DOC_LIST,)))
        out.append(_U32.pack(len(value)))
        for item in value:
            _pack_doc_value(out, item)
    elif isinstance(value, dict):
        out.append(bytes((_DOC_MAP,)))
        out.append(_U32.pack(len(value)))
        for key in sorted(value):
            _pack_str(out, key)
            _pack_doc_value(out, value[key])
    else:
        raise MalformedPayload(f"unencodable doc value {type(value).__name__}")


def _read_doc_value(r: _Reader):
    kind = r.u8()
    if kind == _DOC_BOOL:
        return r.u8() != 0
    if kind == _DOC_INT:
        return struct.unpack(">q", r.take(8))[0]
    if kind == _DOC_FLOAT:
        return r.f64()
    if kind == _DOC_STR:
        return r.str_()
    if kind == _DOC_BYTES:
        return r.bytes_()
    if kind == _DOC_LIST:
        return [_read_doc_value(r) for _ in range(r.u32())]
    if kind == _DOC_MAP:
        return {r.str_(): _read_doc_value(r) for _ in range(r.u32())}
    raise MalformedPayload(f"unknown doc value kind {kind}")


# --- payload variants, binary form --------------------------------------------

_VARIANT_CODES = {
    "doc": 1,
    "link_state": 2,
    "joint_command": 3,
    "camera_frame": 4,
    "detection": 5,
}
_VARIANT_BY_CODE = {v: k for k, v in _VARIANT_CODES.items()}


def _pack_payload(out: list, payload: Payload) -> None:
    if isinstance(payload, Doc):
        out.append(bytes((_VARIANT_CODES["doc"],)))
        _pack_doc_value(out, payload.data)
    elif isinstance(payload, LinkState):
        out.append(bytes((_VARIANT_CODES["link_state"],)))
        for vec in (payload.pos, payload.rot, payload.lin_vel, payload.ang_vel):
            for x in vec:
                out.append(_F64.pack(x))
    elif isinstance(payload, JointCommand):
        out.append(bytes((_VARIANT_CODES["joint_command"],)))
        _pack_str(out, payload.joint_name)
        out.append(bytes((1 if payload.target_type is JointTargetType.POSITION else 0,)))
        out.append(_F64.pack(payload.target_value))
    elif isinstance(payload, CameraFrame):
        out.append(bytes((_VARIANT_CODES["camera_frame"],)))
        out.append(_U32.pack(payload.image_height))
        out.append(_U32.pack(payload.image_width))
        out.append(_U32.pack(payload.image_depth))
        _pack_bytes(out, payload.image_data)
    elif isinstance(payload, Detection):
        out.append(bytes((_VARIANT_CODES["detection"],)))
        for v in (payload.x_min, payload.y_min, payload.x_max, payload.y_max):
            out.append(_U32.pack(v))
        out.append(_F64.pack(payload.score))
        _pack_str(out, payload.label)
    else:
        raise MalformedPayload(f"unencodable payload {type(payload).__name__}")


def _read_payload(r: _Reader) -> Payload:
    code = r.u8()
    variant = _VARIANT_BY_CODE.get(code)
    if variant == "doc":
        data = _read_doc_value(r)
        if not isinstance(data, dict):
            raise MalformedPayload("doc payload root must be a map")
        return Doc(data)
    if variant == "link_state":
        vals = [r.f64() for _ in range(13)]
        return LinkState(
            pos=tuple(vals[0:3]),
            rot=tuple(vals[3:7]),
            lin_vel=tuple(vals[7:10]),
            ang_vel=tuple(vals[10:13]),
        )
    if variant == "joint_command":
        name = r.str_()
        ttype = JointTargetType.POSITION if r.u8() else JointTargetType.VELOCITY
        return JointCommand(name, ttype, r.f64())
    if variant == "camera_frame":
        h, w, d = r.u32(), r.u32(), r.u32()
        return CameraFrame(h, w, d, r.bytes_())
    if variant == "detection":
        x0, y0, x1, y1 = (r.u32() for _ in range(4))
        score = r.f64()
        try:
            return Detection(x0, y0, x1, y1, score, r.str_())
        except ValueError as exc:
            raise MalformedPayload(str(exc)) from None
    raise MalformedPayload(f"unknown payload variant code {code}")


def _pack_identifier(out: list, ident: DataPackIdentifier) -> None:
    _pack_str(out, ident.name)
    _pack_str(out, ident.type_tag)
    _pack_str(out, ident.engine_name)


def _read_identifier(r: _Reader) -> DataPackIdentifier:
    name, tag, engine = r.str_(), r.str_(), r.str_()
    try:
        return DataPackIdentifier(name, tag, engine)
    except ValueError as exc:
        raise MalformedPayload(str(exc)) from None


def _pack_datapack(out: list, pack: DataPack) -> None:
    _pack_identifier(out, pack.id)
    if pack.payload is None:
        out.append(b"\x00")
    else:
        out.append(b"\x01")
        _pack_payload(out, pack.payload)


def _read_datapack(r: _Reader) -> DataPack:
    ident = _read_identifier(r)
    if r.u8():
        return DataPack(ident, _read_payload(r))
    return DataPack(ident, None)


def encode_datapack_canonical(pack: DataPack) -> bytes:
    """Deterministic, codec-independent byte form of a datapack.

    Used for the determinism trace hash, so that the witness does not depend
    on which codec a run happened to use.
    """
    out: list = []
    _pack_datapack(out, pack)
    return b"".join(out)


# --- payload variants, text (JSON) form ---------------------------------------

def _doc_to_json(value):
    if isinstance(value, bytes):
        return {BYTES_ESCAPE_KEY: list(value)}
    if isinstance(value, list):
        return [_doc_to_json(v) for v in value]
    if isinstance(value, dict):
        return {k: _doc_to_json(v) for k, v in value.items()}
    return value


def _doc_from_json(value):
    if isinstance(value, list):
        return [_doc_from_json(v) for v in value]
    if isinstance(value, dict):
        if set(value.keys()) == {BYTES_ESCAPE_KEY}:
            items = value[BYTES_ESCAPE_KEY]
            if not isinstance(items, list) or not all(
                isinstance(i, int) and 0 <= i <= 255 for i in items
            ):
                raise MalformedPayload("bad byte-string escape")
            return bytes(items)
        return {k: _doc_from_json(v) for k, v in value.items()}
    return value


def _payload_to_json(payload: Payload):
    if isinstance(payload, Doc):
        return _doc_to_json(payload.data)
    if isinstance(payload, LinkState):
        return {
            "pos": list(payload.pos),
            "rot": list(payload.rot),
            "lin_vel": list(payload.lin_vel),
            "ang_vel": list(payload.ang_vel),
        }
    if isinstance(payload, JointCommand):
        key = "position" if payload.target_type is JointTargetType.POSITION else "velocity"
        return {"joint_name": payload.joint_name, key: payload.target_value}
    if isinstance(payload, CameraFrame):
        return {
            "image_height": payload.image_height,
            "image_width": payload.image_width,
            "image_depth": payload.image_depth,
            "image_data": list(payload.image_data),
        }
    if isinstance(payload, Detection):
        return {
            "x_min": payload.x_min,
            "y_min": payload.y_min,
            "x_max": payload.x_max,
            "y_max": payload.y_max,
            "score": payload.score,
            "label": payload.label,
        }
    raise MalformedPayload(f"unencodable payload {type(payload).__name__}")


def _vec(obj, key, n) -> tuple:
    val = obj.get(key)
    if not isinstance(val, list) or len(val) != n:
        raise MalformedPayload(f"{key} must be a {n}-element array")
    return tuple(float(x) for x in val)


def _payload_from_json(type_tag: str, obj) -> Payload:
    try:
        if type_tag == "doc":
            if not isinstance(obj, dict):
                raise MalformedPayload("doc payload must be an object")
            return Doc(_doc_from_json(obj))
        if type_tag == "link_state":
            return LinkState(
                pos=_vec(obj, "pos", 3),
                rot=_vec(obj, "rot", 4),
                lin_vel=_vec(obj, "lin_vel", 3),
                ang_vel=_vec(obj, "ang_vel", 3),
            )
        if type_tag == "joint_command":
            name = obj["joint_name"]
            if "position" in obj:
                return JointCommand(name, JointTargetType.POSITION, float(obj["position"]))
            return JointCommand(name, JointTargetType.VELOCITY, float(obj["velocity"]))
        if type_tag == "camera_frame":
            data = obj["image_data"]
            return CameraFrame(
                int(obj["image_height"]),
                int(obj["image_width"]),
                int(obj["image_depth"]),
                bytes(data),
            )
        if type_tag == "detection":
            return Detection(
                int(obj["x_min"]),
                int(obj["y_min"]),
                int(obj["x_max"]),
                int(obj["y_max"]),
                float(obj["score"]),
                str(obj["label"]),
            )
    except MalformedPayload:
        raise
    except Exception as exc:
        raise MalformedPayload(f"bad {type_tag} payload: {exc}") from None
    raise MalformedPayload(f"unknown payload type tag {type_tag!r}")


def _datapack_to_json(pack: DataPack):
    return {
        "name": pack.id.name,
        "type_tag": pack.id.type_tag,
        "engine_name": pack.id.engine_name,
        "data": None if pack.payload is None else _payload_to_json(pack.payload),
    }


def _datapack_from_json(obj) -> DataPack:
    try:
        ident = DataPackIdentifier(obj["name"], obj["type_tag"], obj["engine_name"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedPayload(f"bad datapack identifier: {exc}") from None
    data = obj.get("data")
    if data is None:
        return DataPack(ident, None)
    return DataPack(ident, _payload_from_json(ident.type_tag, data))


def _identifier_from_json(obj) -> DataPackIdentifier:
    try:
        return DataPackIdentifier(obj["name"], obj["type_tag"], obj["engine_name"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedPayload(f"bad identifier: {exc}") from None


# --- message payload encoders/decoders -----------------------------------------

def _encode_payload_binary(msg: Message) -> bytes:
    out: list = []
    if isinstance(msg, Init):
        _pack_str(out, msg.engine_name)
        out.append(_U64.pack(msg.engine_timestep_ns))
    elif isinstance(msg, InitReply):
        _pack_str(out, msg.engine_name)
    elif isinstance(msg, RunStep):
        out.append(_U64.pack(msg.until_ns))
    elif isinstance(msg, RunStepReply):
        out.append(_U64.pack(msg.engine_time_ns))
    elif isinstance(msg, GetDataPacks):
        out.append(_U32.pack(len(msg.ids)))
        for ident in msg.ids:
            _pack_identifier(out, ident)
    elif isinstance(msg, (GetDataPacksReply, SetDataPacks)):
        out.append(_U32.pack(len(msg.packs)))
        for pack in msg.packs:
            _pack_datapack(out, pack)
    elif isinstance(msg, (SetDataPacksAck, Shutdown, ShutdownAck)):
        pass
    elif isinstance(msg, ErrorReply):
        _pack_str(out, msg.code)
        _pack_str(out, msg.message)
    else:
        raise TypeError(f"not a message: {type(msg).__name__}")
    return b"".join(out)


def _decode_payload_binary(msg_type: MsgType, payload: bytes) -> Message:
    r = _Reader(payload)
    if msg_type is MsgType.INIT:
        msg: Message = Init(r.str_(), r.u64())
    elif msg_type is MsgType.INIT_REPLY:
        msg = InitReply(r.str_())
    elif msg_type is MsgType.RUN_STEP:
        msg = RunStep(r.u64())
    elif msg_type is MsgType.RUN_STEP_REPLY:
        msg = RunStepReply(r.u64())
    elif msg_type is MsgType.GET_DATAPACKS:
        msg = GetDataPacks(tuple(_read_identifier(r) for _ in range(r.u32())))
    elif msg_type is MsgType.GET_DATAPACKS_REPLY:
        msg = GetDataPacksReply(tuple(_read_datapack(r) for _ in range(r.u32())))
    elif msg_type is MsgType.SET_DATAPACKS:
        msg = SetDataPacks(tuple(_read_datapack(r) for _ in range(r.u32())))
    elif msg_type is MsgType.SET_DATAPACKS_ACK:
        msg = SetDataPacksAck()
    elif msg_type is MsgType.SHUTDOWN:
        msg = Shutdown()
    elif msg_type is MsgType.SHUTDOWN_ACK:
        msg = ShutdownAck()
    elif msg_type is MsgType.ERROR_REPLY:
        msg = ErrorReply(r.str_(), r.str_())
    else:  # pragma: no cover - enum is exhaustive
        raise MalformedPayload(f"unknown message type {msg_type}")
    r.done()
    return msg


def _encode_payload_text(msg: Message) -> bytes:
    if isinstance(msg, Init):
        obj = {"engine_name": msg.engine_name, "engine_timestep_ns": msg.engine_timestep_ns}
    elif isinstance(msg, InitReply):
        obj = {"engine_name": msg.engine_name}
    elif isinstance(msg, RunStep):
        obj = {"until_ns": msg.until_ns}
    elif isinstance(msg, RunStepReply):
        obj = {"engine_time_ns": msg.engine_time_ns}
    elif isinstance(msg, GetDataPacks):
        obj = {
            "ids": [
                {"name": i.name, "type_tag": i.type_tag, "engine_name": i.engine_name}
                for i in msg.ids
            ]
        }
    elif isinstance(msg, (GetDataPacksReply, SetDataPacks)):
        obj = {"packs": [_datapack_to_json(p) for p in msg.packs]}
    elif isinstance(msg, (SetDataPacksAck, Shutdown, ShutdownAck)):
        return b""
    elif isinstance(msg, ErrorReply):
        obj = {"code": msg.code, "message": msg.message}
    else:
        raise TypeError(f"not a message: {type(msg).__name__}")
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _decode_payload_text(msg_type: MsgType, payload: bytes) -> Message:
    if msg_type in (MsgType.SET_DATAPACKS_ACK, MsgType.SHUTDOWN, MsgType.SHUTDOWN_ACK):
        if payload:
            raise MalformedPayload("unexpected payload on bodyless message")
        if msg_type is MsgType.SHUTDOWN:
            return Shutdown()
        return SetDataPacksAck() if msg_type is MsgType.SET_DATAPACKS_ACK else ShutdownAck()
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedPayload(f"bad JSON payload: {exc}") from None
    try:
        if msg_type is MsgType.INIT:
            return Init(str(obj["engine_name"]), int(obj["engine_timestep_ns"]))
        if msg_type is MsgType.INIT_REPLY:
            return InitReply(str(obj["engine_name"]))
        if msg_type is MsgType.RUN_STEP:
            return RunStep(int(obj["until_ns"]))
        if msg_type is MsgType.RUN_STEP_REPLY:
            return RunStepReply(int(obj["engine_time_ns"]))
        if msg_type is MsgType.GET_DATAPACKS:
            return GetDataPacks(tuple(_identifier_from_json(i) for i in obj["ids"]))
        if msg_type is MsgType.GET_DATAPACKS_REPLY:
            return GetDataPacksReply(tuple(_datapack_from_json(p) for p in obj["packs"]))
        if msg_type is MsgType.SET_DATAPACKS:
            return SetDataPacks(tuple(_datapack_from_json(p) for p in obj["packs"]))
        if msg_type is MsgType.ERROR_REPLY:
            return ErrorReply(str(obj["code"]), str(obj["message"]))
    except MalformedPayload:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedPayload(f"bad message body: {exc}") from None
    raise MalformedPayload(f"unknown message type {msg_type}")  # pragma: no cover


# --- public API ----------------------------------------------------------------

def encode_message(msg: Message, codec: Codec) -> bytes:
    """Encode a message into one complete wire frame."""
    try:
        msg_type = _MSG_TYPE_OF[type(msg)]
    except KeyError:
        raise TypeError(f"not a message: {type(msg).__name__}") from None
    if codec is Codec.TEXT:
        payload = _encode_payload_text(msg)
    else:
        payload = _encode_payload_binary(msg)
    if len(payload) > MAX_PAYLOAD_LEN:
        raise UnencodablePayload(
            f"payload of {len(payload)} bytes exceeds the 32-bit frame limit"
        )
    return HEADER.pack(MAGIC, VERSION, codec.value, msg_type, 0, len(payload)) + payload


def decode_message(frame: bytes, expect: Codec) -> Message:
    """Decode one complete wire frame; the inverse of encode_message."""
    if len(frame) < HEADER_SIZE:
        raise Truncated(f"frame header needs {HEADER_SIZE} bytes, got {len(frame)}")
    magic, version, codec_byte, type_byte, reserved, length = HEADER.unpack_from(frame)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported version {version:#x}")
    if codec_byte != expect.value:
        raise CodecMismatch(
            f"expected {expect.wire_name} frame, got codec byte {codec_byte:#x}"
        )
    if reserved != 0:
        raise MalformedPayload(f"reserved byte must be zero, got {reserved:#x}")
    body = frame[HEADER_SIZE:]
    if len(body) < length:
        raise Truncated(f"payload declares {length} bytes but {len(body)} follow")
    if len(body) > length:
        raise MalformedPayload(f"{len(body) - length} trailing bytes after frame")
    try:
        msg_type = MsgType(type_byte)
    except ValueError:
        raise MalformedPayload(f"unknown message type byte {type_byte:#x}") from None
    if expect is Codec.TEXT:
        return _decode_payload_text(msg_type, body)
    return _decode_payload_binary(msg_type, body)


class FrameSplitter:
    """Incremental splitter turning an arbitrary byte stream into frames.

    Frames are self-delimiting, so feeding the same bytes in different chunk
    sizes always yields the same frame sequence.
    """

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[bytes]:
        self._buf.extend(data)
        frames = []
        while True:
            if len(self._buf) < HEADER_SIZE:
                break
            magic, version, _, _, _, length = HEADER.unpack_from(self._buf)
            if magic != MAGIC:
                raise BadMagic(f"bad magic {bytes(magic)!r} in stream")
            if version != VERSION:
                raise BadVersion(f"unsupported version {version:#x} in stream")
            total = HEADER_SIZE + length
            if len(self._buf) < total:
                break
            frames.append(bytes(self._buf[:total]))
            del self._buf[:total]
        return frames

    @property
    def pending(self) -> int:
        return len(self._buf)

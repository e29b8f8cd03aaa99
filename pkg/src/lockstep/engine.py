"""Engine runtime: script lifecycle, per-engine datapack registry, server
loop, client handle, and launching.

An engine script owns a registry of named datapacks. Names must be
registered during initialize(); after that the registration window is
sealed and both the script and incoming writes may only touch known names.
Each name's payload variant is fixed by its first non-empty value (or
explicitly at registration) and may not change afterwards.

The server answers one request at a time: RunStep advances the script in
whole engine timesteps until engine time reaches the requested target
(overshoot is allowed and reported), Get/SetDataPacks access the registry,
and Shutdown stops the server. A script exception becomes an ErrorReply
with code ENGINE_FAULT; the server stays alive so the orchestrator can
still shut it down cleanly.
"""

from __future__ import annotations

import logging
import os
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

from .config import EngineConfig, InProcess, Subprocess
from .datapacks import DataPack, DataPackIdentifier, Payload, payload_type_tag
from .errors import (
    ConnectionClosed,
    HandshakeTimeout,
    InvalidTimestep,
    NameMismatch,
    RegisterAfterInit,
    RemoteError,
    RequestTimeout,
    SpawnFailed,
    TypeTagMismatch,
    UnregisteredName,
    UnsupportedFeature,
)
from .transport import Connection, EngineClient, dial, free_port, queue_pair
from .wire import (
    Codec,
    ErrorReply,
    GetDataPacks,
    GetDataPacksReply,
    Init,
    InitReply,
    Message,
    RunStep,
    RunStepReply,
    SetDataPacks,
    SetDataPacksAck,
    Shutdown,
    ShutdownAck,
    decode_message,
    encode_message,
)

logger = logging.getLogger(__name__)

DEFAULT_HANDSHAKE_TIMEOUT = 10.0  # s
SHUTDOWN_GRACE = 2.0  # s

PORT_ENV_VAR = "NRPL_PORT"


def seconds_to_ns(seconds: float, what: str = "timestep") -> int:
    """Convert seconds to integer nanoseconds, requiring exactness.

    Times are kept in integer nanoseconds end to end; a duration that does
    not round-trip through whole nanoseconds would silently drift, so it is
    rejected instead.
    """
    if seconds <= 0:
        raise InvalidTimestep(f"{what} must be > 0, got {seconds}")
    ns = round(seconds * 1e9)
    if ns <= 0 or ns / 1e9 != seconds:
        raise InvalidTimestep(
            f"{what} {seconds!r} is not representable in whole nanoseconds"
        )
    return ns


class _RegistryEntry:
    __slots__ = ("type_tag", "payload")

    def __init__(self, type_tag: Optional[str]):
        self.type_tag = type_tag
        self.payload: Optional[Payload] = None


class DataPackRegistry:
    """Engine-local store of named datapacks with fixed payload variants."""

    def __init__(self, engine_name: str):
        self.engine_name = engine_name
        self._entries: dict[str, _RegistryEntry] = {}
        self._sealed = False

    def seal(self) -> None:
        self._sealed = True

    def register(self, name: str, type_tag: Optional[str] = None) -> None:
        if self._sealed:
            raise RegisterAfterInit(
                f"cannot register {name!r} after initialization"
            )
        self._entries[name] = _RegistryEntry(type_tag)

    def is_registered(self, name: str) -> bool:
        return name in self._entries

    def _entry(self, name: str) -> _RegistryEntry:
        try:
            return self._entries[name]
        except KeyError:
            raise UnregisteredName(
                f"datapack {name!r} is not registered on engine "
                f"{self.engine_name!r}"
            ) from None

    def set(self, name: str, payload: Optional[Payload]) -> None:
        entry = self._entry(name)
        if payload is not None:
            tag = payload_type_tag(payload)
            if entry.type_tag is None:
                entry.type_tag = tag
            elif entry.type_tag != tag:
                raise TypeTagMismatch(
                    f"datapack {name!r} is {entry.type_tag!r}, got {tag!r}"
                )
        entry.payload = payload

    def get(self, name: str) -> Optional[Payload]:
        return self._entry(name).payload

    def as_pack(self, name: str) -> DataPack:
        """Current datapack for a name; unknown names yield an empty pack.

        An engine asked for something it cannot provide answers with an
        empty datapack rather than an error.
        """
        entry = self._entries.get(name)
        if entry is None:
            return DataPack(DataPackIdentifier(name, "", self.engine_name), None)
        tag = entry.type_tag if entry.type_tag is not None else ""
        return DataPack(DataPackIdentifier(name, tag, self.engine_name), entry.payload)


class EngineScript:
    """Base class for engine behavior.

    Subclasses override initialize(), run_loop(timestep_ns), and
    shutdown(). Datapacks are accessed through register_datapack /
    set_datapack / get_datapack; registration is only allowed inside
    initialize(). Scripts must be deterministic: any randomness has to be
    seeded from `extra`.

    The extra key "FaultAtStep" (an integer N) makes the server raise on
    the Nth run_loop call; it exists for fault-handling tests.
    """

    def __init__(self, engine_name: str, extra: Optional[dict] = None):
        self.engine_name = engine_name
        self.extra = dict(extra or {})
        self.registry = DataPackRegistry(engine_name)
        fault = self.extra.get("FaultAtStep")
        self.fault_at_step: Optional[int] = int(fault) if fault is not None else None

    def register_datapack(self, name: str, type_tag: Optional[str] = None) -> None:
        self.registry.register(name, type_tag)

    def set_datapack(self, name: str, payload: Optional[Payload]) -> None:
        self.registry.set(name, payload)

    def get_datapack(self, name: str) -> Optional[Payload]:
        """Last value set for a registered name; None when it is empty."""
        return self.registry.get(name)

    def initialize(self) -> None:
        pass

    def run_loop(self, timestep_ns: int) -> None:
        pass

    def shutdown(self) -> None:
        pass


# --- engine type registry -------------------------------------------------------

EngineFactory = Callable[[str, dict], EngineScript]
ENGINE_TYPES: dict[str, EngineFactory] = {}


def register_engine_type(type_name: str):
    def deco(factory: EngineFactory) -> EngineFactory:
        ENGINE_TYPES[type_name] = factory
        return factory
    return deco


def create_engine_script(engine_type: str, engine_name: str, extra: dict) -> EngineScript:
    try:
        factory = ENGINE_TYPES[engine_type]
    except KeyError:
        raise UnsupportedFeature(
            [f"EngineType={engine_type}"],
            f"no engine type {engine_type!r} is registered",
        ) from None
    return factory(engine_name, extra)


# --- server side ------------------------------------------------------------------

def serve_engine(script: EngineScript, conn: Connection, codec: Codec) -> None:
    """Serve one engine over one connection until Shutdown or disconnect."""
    initialized = False
    timestep_ns = 0
    engine_time_ns = 0
    run_calls = 0

    def reply(msg: Message) -> None:
        conn.send_frame(encode_message(msg, codec))

    while True:
        try:
            frame = conn.recv_frame(None)
        except ConnectionClosed:
            logger.debug("engine %s: client disconnected", script.engine_name)
            return
        try:
            msg = decode_message(frame, codec)
        except Exception as exc:
            reply(ErrorReply("PROTOCOL_ERROR", str(exc)))
            continue

        if isinstance(msg, Init):
            if initialized:
                reply(ErrorReply("BAD_REQUEST", "engine is already initialized"))
                continue
            timestep_ns = msg.engine_timestep_ns
            try:
                script.initialize()
            except Exception as exc:
                logger.exception("engine %s: initialize failed", script.engine_name)
                reply(ErrorReply("ENGINE_FAULT", f"initialize: {exc}"))
                continue
            script.registry.seal()
            initialized = True
            reply(InitReply(script.engine_name))
        elif isinstance(msg, RunStep):
            if not initialized:
                reply(ErrorReply("BAD_REQUEST", "RunStep before Init"))
                continue
            try:
                while engine_time_ns < msg.until_ns:
                    if script.fault_at_step is not None and run_calls == script.fault_at_step:
                        raise RuntimeError(
                            f"injected fault at run_loop call {run_calls}"
                        )
                    script.run_loop(timestep_ns)
                    run_calls += 1
                    engine_time_ns += timestep_ns
            except Exception as exc:
                logger.exception("engine %s: run_loop failed", script.engine_name)
                reply(ErrorReply("ENGINE_FAULT", f"run_loop: {exc}"))
                continue
            reply(RunStepReply(engine_time_ns))
        elif isinstance(msg, GetDataPacks):
            if not initialized:
                reply(ErrorReply("BAD_REQUEST", "GetDataPacks before Init"))
                continue
            reply(GetDataPacksReply(
                tuple(script.registry.as_pack(ident.name) for ident in msg.ids)
            ))
        elif isinstance(msg, SetDataPacks):
            if not initialized:
                reply(ErrorReply("BAD_REQUEST", "SetDataPacks before Init"))
                continue
            try:
                for pack in msg.packs:
                    script.registry.set(pack.id.name, pack.payload)
            except (UnregisteredName, TypeTagMismatch) as exc:
                reply(ErrorReply("ENGINE_FAULT", str(exc)))
                continue
            reply(SetDataPacksAck())
        elif isinstance(msg, Shutdown):
            try:
                script.shutdown()
            except Exception:
                logger.exception("engine %s: shutdown failed", script.engine_name)
            reply(ShutdownAck())
            conn.close()
            return
        else:
            reply(ErrorReply("BAD_REQUEST", f"unexpected message {type(msg).__name__}"))


def serve_tcp(script: EngineScript, port: int, codec: Codec,
              host: str = "127.0.0.1") -> None:
    """Listen on a TCP port, serve one client connection, then return."""
    import socket as socket_mod

    from .transport import SocketConnection

    listener = socket_mod.socket(socket_mod.AF_INET, socket_mod.SOCK_STREAM)
    listener.setsockopt(socket_mod.SOL_SOCKET, socket_mod.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen(1)
    try:
        client_sock, _ = listener.accept()
        serve_engine(script, SocketConnection(client_sock), codec)
    finally:
        listener.close()


# --- client side --------------------------------------------------------------------

@dataclass
class EngineHandle:
    """Orchestrator-side handle over a launched engine."""

    engine_name: str
    engine_timestep_ns: int
    client: EngineClient
    script: Optional[EngineScript] = None  # in-process engines only
    thread: Optional[threading.Thread] = None
    process: Optional[subprocess.Popen] = None
    engine_time_ns: int = 0

    def run_to(self, until_ns: int) -> int:
        reply = self.client.request(RunStep(until_ns))
        if not isinstance(reply, RunStepReply):
            raise ConnectionClosed(f"unexpected RunStep reply {reply!r}")
        if (reply.engine_time_ns < until_ns
                or reply.engine_time_ns % self.engine_timestep_ns != 0):
            raise RemoteError(
                "PROTOCOL_VIOLATION",
                f"engine {self.engine_name!r} reports time {reply.engine_time_ns} ns "
                f"for a RunStep to {until_ns} ns at timestep "
                f"{self.engine_timestep_ns} ns",
            )
        self.engine_time_ns = reply.engine_time_ns
        return self.engine_time_ns

    def get_datapacks(self, idents: list[DataPackIdentifier]) -> tuple[DataPack, ...]:
        reply = self.client.request(GetDataPacks(tuple(idents)))
        if not isinstance(reply, GetDataPacksReply):
            raise ConnectionClosed(f"unexpected GetDataPacks reply {reply!r}")
        return reply.packs

    def set_datapacks(self, packs: list[DataPack]) -> None:
        reply = self.client.request(SetDataPacks(tuple(packs)))
        if not isinstance(reply, SetDataPacksAck):
            raise ConnectionClosed(f"unexpected SetDataPacks reply {reply!r}")

    def shutdown(self, grace: float = SHUTDOWN_GRACE) -> None:
        """Best-effort orderly stop: Shutdown, then terminate, then kill."""
        try:
            self.client.request(Shutdown(), timeout=grace)
        except Exception:
            logger.debug("engine %s: shutdown request failed", self.engine_name)
        finally:
            self.client.close()
        if self.process is not None:
            try:
                self.process.wait(timeout=grace)
            except subprocess.TimeoutExpired:
                self.process.terminate()
                try:
                    self.process.wait(timeout=grace)
                except subprocess.TimeoutExpired:
                    self.process.kill()
                    self.process.wait()
        if self.thread is not None:
            self.thread.join(timeout=grace)


def launch_engine(cfg: EngineConfig, codec: Codec,
                  byte_counter=None) -> EngineHandle:
    """Start an engine per its config and complete the Init handshake."""
    timestep_ns = seconds_to_ns(
        cfg.engine_timestep, f"engine {cfg.engine_name!r} timestep"
    )
    handshake_timeout = cfg.engine_command_timeout or DEFAULT_HANDSHAKE_TIMEOUT

    if isinstance(cfg.launch, InProcess):
        script = create_engine_script(cfg.engine_type, cfg.engine_name, cfg.extra)
        server_conn, client_conn = queue_pair()
        thread = threading.Thread(
            target=serve_engine,
            args=(script, server_conn, codec),
            name=f"engine-{cfg.engine_name}",
            daemon=True,
        )
        thread.start()
        client = EngineClient(client_conn, codec,
                              timeout=cfg.engine_command_timeout,
                              byte_counter=byte_counter)
        handle = EngineHandle(cfg.engine_name, timestep_ns, client,
                              script=script, thread=thread)
    else:
        launch: Subprocess = cfg.launch
        port = free_port()
        argv = [launch.cmd, *launch.args,
                "--port", str(port), "--engine-name", cfg.engine_name,
                "--codec", codec.wire_name]
        env = dict(os.environ)
        for pair in launch.env:
            key, sep, value = pair.partition("=")
            if sep:
                env[key] = value
        env[PORT_ENV_VAR] = str(port)
        try:
            process = subprocess.Popen(argv, env=env)
        except (FileNotFoundError, PermissionError, OSError) as exc:
            raise SpawnFailed(f"cannot launch {launch.cmd!r}: {exc}") from None

        deadline = time.monotonic() + handshake_timeout
        conn = None
        while conn is None:
            try:
                conn = dial("127.0.0.1", port, timeout=0.5)
            except OSError:
                if process.poll() is not None:
                    raise SpawnFailed(
                        f"engine process {launch.cmd!r} exited with code "
                        f"{process.returncode} before accepting a connection"
                    ) from None
                if time.monotonic() >= deadline:
                    process.kill()
                    raise HandshakeTimeout(
                        f"engine {cfg.engine_name!r} did not listen on port "
                        f"{port} within {handshake_timeout} s"
                    ) from None
                time.sleep(0.02)
        client = EngineClient(conn, codec,
                              timeout=cfg.engine_command_timeout,
                              byte_counter=byte_counter)
        handle = EngineHandle(cfg.engine_name, timestep_ns, client, process=process)

    try:
        reply = handle.client.request(Init(cfg.engine_name, timestep_ns),
                                      timeout=handshake_timeout)
    except RequestTimeout:
        handle.shutdown(grace=0.5)
        raise HandshakeTimeout(
            f"engine {cfg.engine_name!r} did not answer Init within "
            f"{handshake_timeout} s"
        ) from None
    except BaseException:
        handle.shutdown(grace=0.5)
        raise
    if not isinstance(reply, InitReply):
        handle.shutdown(grace=0.5)
        raise ConnectionClosed(f"unexpected Init reply {reply!r}")
    if reply.engine_name != cfg.engine_name:
        handle.shutdown(grace=0.5)
        raise NameMismatch(
            f"launched engine reports name {reply.engine_name!r}, "
            f"config says {cfg.engine_name!r}"
        )
    return handle

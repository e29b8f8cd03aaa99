"""Exception hierarchy shared across the package.

Everything raised on purpose derives from LockstepError so callers can
catch framework failures without swallowing programming errors.
"""

from __future__ import annotations


class LockstepError(Exception):
    """Base class for all framework errors."""


# --- core data model ---------------------------------------------------------

class EmptyDataPackError(LockstepError):
    """Data was read from a datapack that carries no payload."""


class DataPackNotFound(LockstepError, KeyError):
    """Cache lookup for an identifier that was never stored."""


class DocValueError(LockstepError, ValueError):
    """A document payload contains a key or value outside the supported set."""


# --- configuration -----------------------------------------------------------

class ConfigError(LockstepError):
    """Base class for configuration parsing and validation failures."""


class MalformedDocument(ConfigError):
    pass


class MissingField(ConfigError):
    def __init__(self, field: str, where: str = ""):
        self.field = field
        suffix = f" in {where}" if where else ""
        super().__init__(f"required field {field!r} is missing{suffix}")


class UnknownKey(ConfigError):
    pass


class DuplicateEngineName(ConfigError):
    pass


class DuplicateFunctionName(ConfigError):
    pass


class UnsupportedFeature(ConfigError):
    """A recognized key or value names a feature this runtime does not provide."""

    def __init__(self, keys, message: str = ""):
        self.keys = list(keys) if isinstance(keys, (list, tuple, set)) else [keys]
        super().__init__(message or f"unsupported feature(s): {', '.join(self.keys)}")


class UnknownEngineRef(ConfigError):
    def __init__(self, function: str, engine_name: str):
        self.function = function
        self.engine_name = engine_name
        super().__init__(
            f"function {function!r} references unknown engine {engine_name!r}"
        )


class UnknownFunctionId(ConfigError):
    pass


class InvalidTimestep(ConfigError):
    """A timestep is non-positive or not representable in whole nanoseconds."""


# --- wire protocol -----------------------------------------------------------

class WireError(LockstepError):
    """Base class for frame and message codec failures."""


class BadMagic(WireError):
    pass


class BadVersion(WireError):
    pass


class CodecMismatch(WireError):
    pass


class Truncated(WireError):
    pass


class MalformedPayload(WireError):
    pass


class UnencodablePayload(WireError):
    pass


# --- transport ---------------------------------------------------------------

class TransportError(LockstepError):
    pass


class RequestTimeout(TransportError):
    pass


class ConnectionClosed(TransportError):
    pass


class RemoteError(TransportError):
    """The peer answered with an error reply instead of the expected message."""

    def __init__(self, code: str, message: str):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}")


# --- engine runtime ----------------------------------------------------------

class UnregisteredName(LockstepError):
    pass


class RegisterAfterInit(LockstepError):
    pass


class TypeTagMismatch(LockstepError):
    """A datapack's payload variant differs from the one fixed at registration."""


class LaunchError(LockstepError):
    pass


class SpawnFailed(LaunchError):
    pass


class HandshakeTimeout(LaunchError):
    pass


class NameMismatch(LaunchError):
    pass


# --- function pipeline -------------------------------------------------------

class BodyFault(LockstepError):
    def __init__(self, function: str, cause: BaseException):
        self.function = function
        self.cause = cause
        super().__init__(f"function {function!r} raised {cause!r}")


class OutputToUnknownEngine(LockstepError):
    def __init__(self, function: str, engine_name: str):
        self.function = function
        self.engine_name = engine_name
        super().__init__(
            f"function {function!r} produced a datapack for unknown engine "
            f"{engine_name!r}"
        )


# --- geometry ----------------------------------------------------------------

class ZeroQuaternion(LockstepError, ValueError):
    pass


class DegenerateTarget(LockstepError, ValueError):
    pass


# --- perception --------------------------------------------------------------

class LengthMismatch(LockstepError, ValueError):
    pass


class UnsupportedDepth(LockstepError, ValueError):
    pass

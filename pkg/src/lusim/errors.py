"""Exception types shared across the simulator."""


class LusimError(Exception):
    """Base class for all simulator errors."""


# -- geometry ---------------------------------------------------------------

class DegenerateTriangle(LusimError):
    """Triangle with area below the minimum (collinear vertices)."""


class NonClosedSolid(LusimError):
    """Solid whose surface group fails the watertight check."""


# -- containers and datagrams -------------------------------------------------

class CodecError(LusimError):
    """Base class for container/datagram decode failures."""


class BadMagic(CodecError):
    """File or datagram does not start with the expected magic bytes."""


class VersionUnsupported(CodecError):
    """Recognized container with an unsupported version number."""


class SceneMismatch(LusimError):
    """Operation applied against a scene other than the one it was built for."""


class Truncated(CodecError):
    """Buffer or file ends before the declared content."""


class BadVersion(CodecError):
    """Datagram header carries an unsupported protocol version."""


class BodyLenMismatch(CodecError):
    """Declared body length disagrees with the actual datagram size."""


class UnknownType(CodecError):
    """Datagram header names a message type outside the vocabulary."""


class BadBody(CodecError):
    """Message body does not parse under its type's layout."""


class RemoteError(LusimError):
    """The engine answered a request with a protocol Error message."""

    def __init__(self, of_seq: int, code: int, text: str):
        self.of_seq = of_seq
        self.code = code
        self.text = text
        super().__init__(f"engine error {code} for seq {of_seq}: {text}")


# -- configuration ----------------------------------------------------------

class ConfigError(LusimError):
    """A configuration document is invalid at a specific key."""

    def __init__(self, file: str, path: str, message: str):
        self.file = file
        self.path = path
        self.message = message
        super().__init__(f"{file}: {path}: {message}")


class PlacementExhausted(LusimError):
    """Random entity placement failed too many times in a row."""


# -- estimation / system level ----------------------------------------------

class DegenerateFit(LusimError):
    """Parameter fit is underdetermined (all sample angles identical)."""


class TimeRegression(LusimError):
    """An event or step was requested at a time before the current one."""


class MissingChannel(LusimError):
    """A required (antenna, user) channel realization is not available."""


class Unchargeable(LusimError):
    """A power-transfer target device harvests zero power under every plan."""

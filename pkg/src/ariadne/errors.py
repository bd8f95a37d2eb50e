"""Exception hierarchy shared by every Ariadne module."""


class AriadneError(Exception):
    """Base class for all protocol errors."""


class PathTooLongError(AriadneError, ValueError):
    pass


class PayloadTooLongError(AriadneError, ValueError):
    pass


class MalformedPacketError(AriadneError, ValueError):
    """A byte string that cannot be parsed as a packet or padded payload."""


class InvalidGroupElementError(AriadneError, ValueError):
    """Group element is badly encoded or of low order."""


class ReplayError(AriadneError):
    """A temporary key entry was already consumed."""


class TableFullError(AriadneError):
    pass


class UnknownNodeError(AriadneError, KeyError):
    pass

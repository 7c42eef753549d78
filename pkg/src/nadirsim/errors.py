"""Exception hierarchy. Each fatal class carries the CLI exit code it maps to."""


class NadirSimError(Exception):
    exit_code = 1


class DomainError(NadirSimError, ValueError):
    """An input lies outside the mathematical domain of an operation."""

    exit_code = 2


class OutOfWorldError(DomainError):
    """A projected point falls outside the 256x256 zoom-0 world tile."""


class ParseError(NadirSimError, ValueError):
    exit_code = 2


class ConfigError(NadirSimError, ValueError):
    exit_code = 2


class ProviderError(NadirSimError):
    exit_code = 5


class AuthError(ProviderError):
    """HTTP 403 from the map service: bad key or exhausted quota. Never retried."""

    exit_code = 3


class TransportError(ProviderError):
    def __init__(self, message, status=None, attempts=0):
        super().__init__(message)
        self.status = status
        self.attempts = attempts


class ProtocolError(ProviderError):
    """The service answered, but not with an image."""


class DatasetError(NadirSimError, OSError):
    exit_code = 4

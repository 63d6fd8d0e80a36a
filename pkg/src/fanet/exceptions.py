"""Exceptions raised across fanet.

Every error carries a human-readable message plus optional keyword context, and a
class-level exit code so the command line can map failures to distinct statuses
without inspecting messages.
"""

from typing import Any, ClassVar


class FanError(Exception):
    """Base exception for fanet failures.

    Attributes:
        message: Human-readable description of the failure.
        context: Keyword context supplied by the raiser (offending values, paths, names).
        exit_code: Process exit status the command line reports for this error.
    """

    exit_code: ClassVar[int] = 1

    def __init__(self, message: str, **context: Any) -> None:
        self.message = message
        self.context = context
        super().__init__(message)

    def __str__(self) -> str:
        return self.message


class InputValidationError(FanError, ValueError):
    """Raised when an input violates a shape, range or size precondition."""

    exit_code = 3


class ConfigValidationError(FanError, ValueError):
    """Raised when a configuration file or override fails validation."""

    exit_code = 3


class IdentityLookupError(FanError, LookupError):
    """Raised when an identity is not part of the identity bank."""

    exit_code = 3

    def __init__(self, identity_id: int, n_identities: int) -> None:
        super().__init__(
            f"Unknown identity {identity_id}: the bank holds identities [0, {n_identities})",
            identity_id=identity_id,
            n_identities=n_identities,
        )


class PrerequisiteError(FanError):
    """Raised when a stage or command runs without the models or artifacts it needs."""

    exit_code = 4


class CheckpointError(FanError):
    """Raised when a checkpoint cannot be read or does not match the running config."""

    exit_code = 4


class DivergenceError(FanError):
    """Raised when training produces a non-finite loss.

    Attributes:
        snapshot: Directory holding the last-good checkpoint and the diagnostic record.
    """

    exit_code = 5

    def __init__(self, message: str, *, snapshot: Any = None, **context: Any) -> None:
        self.snapshot = snapshot
        super().__init__(message, snapshot=snapshot, **context)


class ProtocolError(FanError):
    """Raised when an evaluation protocol's preconditions do not hold."""

    exit_code = 6

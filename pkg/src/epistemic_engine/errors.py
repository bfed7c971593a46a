"""Domain exceptions for the epistemic engine.

Every error that callers are expected to handle is a distinct class so the
control service can map exceptions to stable wire codes. The `code` attribute
is the lower_snake_case token used in audit reason codes and HTTP error
bodies.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine-domain errors."""

    code = "engine_error"


class UnknownSector(EngineError):
    code = "unknown_sector"


class LayerOutOfRange(EngineError):
    code = "layer_out_of_range"


class DuplicateSector(EngineError):
    code = "duplicate_sector"


class InvalidSectorName(EngineError):
    code = "invalid_sector_name"


class UnknownFragment(EngineError):
    code = "unknown_fragment"


class NotActive(EngineError):
    code = "not_active"


class NaiveDisabled(EngineError):
    code = "naive_disabled"


class MissingTtl(EngineError):
    code = "missing_ttl"


class MissingTarget(EngineError):
    code = "missing_target"


class WrongKind(EngineError):
    code = "wrong_kind"


class Unauthorized(EngineError):
    code = "unauthorized"


class UnknownPending(EngineError):
    code = "unknown_pending"


class AlreadyResolved(EngineError):
    code = "already_resolved"


class UnknownStrategy(EngineError):
    code = "unknown_strategy"


class DuplicateRule(EngineError):
    code = "duplicate_rule"


class QueueFull(EngineError):
    code = "queue_full"


class ScenarioParseError(EngineError):
    """Raised for malformed scenario scripts; carries the offending line."""

    code = "scenario_parse_error"

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)

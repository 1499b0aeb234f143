"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all engine-raised errors."""


class TransportError(EngineError):
    """A provider call failed at the transport level; retriable."""


class ContractViolation(EngineError):
    """A provider or caller broke an interface contract (e.g. dim mismatch)."""


class SourceUnavailable(EngineError):
    """A retrieval source stayed down after exhausting its retry budget."""


class PoolEmpty(EngineError):
    """No retrieval source produced any candidate passages."""


class GenerationFailed(EngineError):
    """The generator returned an unusable (empty) completion."""


class PaperNotFound(EngineError):
    """Lookup of an unknown paper id."""


class SessionNotFound(EngineError):
    """Lookup of an unknown session id."""


class JudgeParseError(EngineError):
    """A judge completion could not be parsed into a score or label."""


class DatasetError(EngineError):
    """An evaluation dataset is missing, empty, or malformed."""

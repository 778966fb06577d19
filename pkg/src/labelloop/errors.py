"""Exception hierarchy shared across the package."""

from __future__ import annotations


class LabelLoopError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(LabelLoopError):
    """Invalid run configuration.

    Carries a list of field errors so callers (CLI, HTTP API, UI) can point
    at the offending keys. Each entry is a dict with ``field`` and
    ``message``.
    """

    def __init__(self, errors: list[dict[str, str]] | str):
        if isinstance(errors, str):
            errors = [{"field": "", "message": errors}]
        self.field_errors = errors
        parts = "; ".join(
            f"{e['field']}: {e['message']}" if e.get("field") else e["message"]
            for e in errors
        )
        super().__init__(parts or "invalid configuration")


class SchemaError(LabelLoopError):
    """Dataset schema problem, e.g. a missing input column."""


class DataError(LabelLoopError):
    """Malformed dataset content (bad row, duplicate ids, ...)."""


class StateError(LabelLoopError):
    """An operation would violate pool-state invariants."""


class ContextError(LabelLoopError):
    """A strategy was invoked without the inputs it declared."""


class BackendError(LabelLoopError):
    """A model backend call failed.

    ``retriable`` hints whether the gateway retry policy may try again.
    """

    def __init__(self, message: str, *, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


class CapabilityError(BackendError):
    """The backend cannot satisfy a required capability (e.g. logprobs)."""

    def __init__(self, message: str):
        super().__init__(message, retriable=False)


class TrainingError(LabelLoopError):
    """A fine-tune adapter failed."""


class SimulationError(LabelLoopError):
    """A simulated oracle lacked the ground truth it needed."""


class AuthorizationError(LabelLoopError):
    """An annotator touched a task that is not theirs."""


class AnnotationError(LabelLoopError):
    """Invalid annotation submission (empty text without a skip flag, ...)."""


class QueueError(LabelLoopError):
    """Annotation queue misuse, e.g. enqueueing a duplicate open task."""


class CheckpointError(LabelLoopError):
    """Checkpoint file is corrupt or inconsistent."""


class NoCheckpointError(CheckpointError):
    """No checkpoint exists in the run directory."""


class EvaluationError(LabelLoopError):
    """Evaluation could not run (empty eval set, backend failure, ...)."""

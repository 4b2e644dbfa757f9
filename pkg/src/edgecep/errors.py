"""Exception types shared across the package.

Every error raised by the library derives from EdgecepError so callers
can catch the whole family at protocol boundaries. The wire server maps
each subclass onto an ERR code (see wire.py).
"""


class EdgecepError(Exception):
    """Base class for all library errors."""


class ParseError(EdgecepError):
    """Malformed event or rule text. Carries the byte offset of the
    failure and, when known, the set of tokens that would have been
    accepted there."""

    def __init__(self, message, offset=None, expected=None):
        self.offset = offset
        self.expected = frozenset(expected) if expected else frozenset()
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class TimeOrderError(EdgecepError):
    """Event start timestamp exceeds its end timestamp."""


class EmptyInputError(EdgecepError):
    """An operation that requires at least one element got none."""


class UnboundVariableError(EdgecepError):
    """A head or constraint variable is not bound by any body pattern."""

    def __init__(self, name, detail=""):
        self.name = name
        msg = f"unbound variable {name!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class ArityError(EdgecepError):
    """Aggregation variable not bound by the lambda source pattern."""


class WindowError(EdgecepError):
    """Window specifier is invalid (non-positive, or unusable with the
    rule's operator)."""


class DuplicateRuleIdError(EdgecepError):
    """add_rule with an id that is already registered."""


class UnknownRuleIdError(EdgecepError):
    """remove_rule (or UNRULE) with an id that is not registered."""


class MissingWindowError(EdgecepError):
    """A rule whose body joins multiple events was added without an
    explicit window and the engine has no default range configured."""


class TimeRegressionError(EdgecepError):
    """advance_time asked to move the watermark backwards."""


class DimensionMismatchError(EdgecepError):
    """Model input/label vector length does not match the layer dims."""


class NotAutoencoderError(EdgecepError):
    """anomaly_score on a model whose output dim differs from its input."""


class FrozenOnlyModelError(EdgecepError):
    """train_step on a model whose layers are all frozen."""


class ModelFormatError(EdgecepError):
    """Model file is structurally malformed. Carries the field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class InvariantViolationError(EdgecepError):
    """Model file parsed but violates a model invariant."""


class ConfigError(EdgecepError):
    """Scenario configuration is invalid."""


class StreamTooLargeError(EdgecepError):
    """Brute-force oracle called with more events than it enumerates."""

"""edgecep: complex event processing with runtime rule injection, an
online-learning model runtime, and a deterministic two-node scenario
harness."""

from .engine import Engine, EngineConfig
from .events import Event, format_event, hull, parse_event
from .rules import RuleAst, format_rule, free_variables, parse_rule

__version__ = "0.1.0"

__all__ = [
    "Engine", "EngineConfig", "Event", "RuleAst", "format_event",
    "format_rule", "free_variables", "hull", "parse_event", "parse_rule",
    "__version__",
]

"""Exception hierarchy.

Everything a caller can fix by editing a scenario or argument derives from
:class:`ConfigError`; the CLI maps those to exit code 3 and runtime
failures (divergence, degenerate geometry) to exit code 4.
"""


class InvlabError(Exception):
    """Base class for all library errors."""


class ConfigError(InvlabError, ValueError):
    """Invalid configuration or violated precondition."""


class DomainError(ConfigError):
    """Argument outside the mathematical domain of an operation."""


class DimensionError(ConfigError):
    """Vector or matrix shapes do not agree."""


class BracketError(ConfigError):
    """A root-finding bracket does not contain a sign change."""


class OrderingError(InvlabError):
    """A certificate was requested before its prerequisites."""


class DegenerateNormalError(InvlabError):
    """The level-function gradient vanishes where a normal is needed."""


class EmptyRegionError(InvlabError):
    """Boundary sampling found no point satisfying the region predicate."""


class InvalidFieldError(InvlabError):
    """A velocity channel returned a non-finite value."""

    def __init__(self, channel, message=None):
        self.channel = channel
        super().__init__(message or f"non-finite value in {channel} channel")


class PolicyError(InvlabError):
    """A policy produced an unusable control."""


class DivergenceError(InvlabError):
    """Integration produced a non-finite state.

    ``trajectory`` holds the samples up to the last finite state.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ScenarioError(ConfigError):
    """Scenario document failed validation.

    ``issues`` is a list of ``(kind, path, message)`` triples, one per
    problem found; validation does not stop at the first one.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        lines = [f"{kind} error at {path or '<root>'}: {msg}" for kind, path, msg in self.issues]
        super().__init__("\n".join(lines) if lines else "invalid scenario")

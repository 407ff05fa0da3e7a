"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters, specs or configs."""


class DimensionError(ValueError):
    """Vector or shard dimensions do not agree."""


class ParseError(ValueError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class DivergenceError(RuntimeError):
    """A non-finite value appeared in an iterate; carries the round index."""

    def __init__(self, message, round_index, partial_trace=None):
        self.round_index = round_index
        self.partial_trace = partial_trace
        super().__init__(f"round {round_index}: {message}")


class InsufficientDataError(ValueError):
    pass


class AggregationError(ValueError):
    pass


class UsageError(ValueError):
    pass

"""Exception types. The CLI maps these onto exit codes (see ``cli.EXIT_CODES``)."""


class ShapeError(ValueError):
    """Operand dimensions do not agree."""


class ConfigError(ValueError):
    """Invalid configuration value or key."""


class DataError(ValueError):
    """Input data is malformed or inconsistent with the model."""


class TreeParseError(DataError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class EmbeddingLoadError(DataError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NumericError(ArithmeticError):
    """NaN or divergence during optimisation."""

"""Exception types shared across the package."""


class CertitrainError(Exception):
    """Base class for every error this package raises deliberately."""


class ShapeError(CertitrainError):
    """Dimensions of an input, parameter, or property do not line up."""


class TapeError(CertitrainError):
    """A tape was used in a way its recorded state does not support."""


class FileFormatError(CertitrainError):
    """A file on disk does not match the expected format."""

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class ConfigError(CertitrainError):
    """Invalid training or CLI configuration."""


class DivergenceError(CertitrainError):
    """Training produced a non-finite loss; the weights have diverged."""


class RefinementError(CertitrainError):
    """A split violated an invariant it is supposed to preserve."""

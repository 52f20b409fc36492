class MirrorSimError(Exception):
    """Base error; `exit_code` is what the CLI returns for it."""

    exit_code = 3


class ParameterError(MirrorSimError, ValueError):
    exit_code = 2


class ConfigError(MirrorSimError):
    exit_code = 2


class NumericalError(MirrorSimError):
    exit_code = 3


class TruncationError(NumericalError):
    """Coherent-state probability lost beyond the Fock cutoff exceeds tolerance."""

    def __init__(self, message: str, leaked: float):
        super().__init__(message)
        self.leaked = leaked


class ConvergenceError(NumericalError):
    pass


class ValidationFailure(MirrorSimError):
    exit_code = 1

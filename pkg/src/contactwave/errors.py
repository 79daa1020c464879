class ContactWaveError(Exception):
    """Base class for package errors."""


class InvalidArgument(ContactWaveError, ValueError):
    pass


class InvalidState(ContactWaveError):
    pass


class SolverFailure(ContactWaveError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StepRejected(ContactWaveError):
    pass


class MassLeak(ContactWaveError):
    pass


class IllConditioned(ContactWaveError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class ConfigError(ContactWaveError, ValueError):
    pass

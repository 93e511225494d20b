"""Exception types shared across the package."""


class LaserLeakError(Exception):
    """Base class for domain errors (mapped to CLI exit code 1)."""


class StepSizeUnderflow(LaserLeakError):
    pass


class NoConvergence(LaserLeakError):
    pass


class WindowOverlap(LaserLeakError):
    pass


class NoPulseDetected(LaserLeakError):
    pass


class InsufficientSamples(LaserLeakError):
    pass


class DegenerateObservables(LaserLeakError):
    pass


class ZeroRates(LaserLeakError):
    pass


class InfeasibleTolerances(LaserLeakError):
    pass


class ParseError(LaserLeakError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class ValidationError(LaserLeakError):
    def __init__(self, field, msg):
        self.field = field
        super().__init__(f"{field}: {msg}")

"""Rate-equation laser simulation and carrier-memory leakage analysis for BB84 sources."""
from .drive import DriveWaveform, Pulse, pulse_train
from .errors import LaserLeakError
from .laser import OperatingPoint, Stepper, Trajectory, gain, integrate, li_curve, rate_rhs, steady_state
from .params import DEFAULT_PARAMS, LaserParams, threshold

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PARAMS", "DriveWaveform", "LaserLeakError", "LaserParams", "OperatingPoint", "Pulse",
    "Stepper", "Trajectory", "gain", "integrate", "li_curve", "pulse_train", "rate_rhs",
    "steady_state", "threshold",
]

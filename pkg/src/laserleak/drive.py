"""Drive current waveforms: DC bias plus trapezoidal current pulses."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

DEFAULT_RISE_FALL = 150e-12


@dataclass(frozen=True)
class Pulse:
    start: float
    amplitude: float
    fwhm: float
    rise_fall: float = DEFAULT_RISE_FALL

    @property
    def end(self) -> float:
        return self.start + self.fwhm + self.rise_fall

    @property
    def half_rise(self) -> float:
        """Time at which the rising edge crosses 50 % of the amplitude."""
        return self.start + 0.5 * self.rise_fall


@dataclass(frozen=True)
class DriveWaveform:
    """I(t) = I_dc + sum of trapezoids.

    Each trapezoid ramps linearly over ``rise_fall`` and its width at the
    50 % level equals ``fwhm``, so it occupies ``[start, start+fwhm+rise_fall]``.
    """

    I_dc: float
    pulses: tuple = ()
    t_end: float = 0.0
    _arrays: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pulses = tuple(p if isinstance(p, Pulse) else Pulse(*p) for p in self.pulses)
        object.__setattr__(self, "pulses", pulses)
        if not np.isfinite(self.I_dc) or self.I_dc < 0:
            raise ValidationError("I_dc", "must be >= 0")
        if not self.t_end > 0:
            raise ValidationError("t_end", "must be > 0")
        prev = -np.inf
        for k, p in enumerate(pulses):
            if p.start <= prev:
                raise ValidationError("pulses", f"start times must increase strictly (pulse {k})")
            if p.amplitude < 0:
                raise ValidationError("pulses", f"amplitude must be >= 0 (pulse {k})")
            if not p.fwhm > 0:
                raise ValidationError("pulses", f"fwhm must be > 0 (pulse {k})")
            if not 0 <= p.rise_fall <= p.fwhm:
                raise ValidationError("pulses", f"rise_fall must lie in [0, fwhm] (pulse {k})")
            if p.start < 0 or p.end > self.t_end * (1 + 1e-12):
                raise ValidationError("pulses", f"pulse {k} does not fit inside [0, t_end]")
            prev = p.start
        arr = np.array([(p.start, p.amplitude, p.fwhm, p.rise_fall) for p in pulses],
                       dtype=float).reshape(-1, 4)
        object.__setattr__(self, "_arrays", tuple(np.ascontiguousarray(arr[:, i]) for i in range(4)))

    @property
    def arrays(self):
        """``(starts, amplitudes, fwhms, rise_falls)`` as contiguous float arrays."""
        return self._arrays

    def current(self, t):
        """Evaluate I(t) (vectorized)."""
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        order = np.argsort(flat, kind="stable")
        ts = flat[order]
        vals = np.full(ts.shape, float(self.I_dc))
        for p in self.pulses:
            lo, hi = np.searchsorted(ts, (p.start, p.end))
            x = ts[lo:hi] - p.start
            if p.rise_fall > 0:
                up = np.clip(x / p.rise_fall, 0.0, 1.0)
                down = np.clip((p.fwhm + p.rise_fall - x) / p.rise_fall, 0.0, 1.0)
                vals[lo:hi] += p.amplitude * np.minimum(up, down)
            else:
                vals[lo:hi] += p.amplitude * ((x > 0) & (x < p.fwhm))
        out = np.empty_like(vals)
        out[order] = vals
        return out.reshape(t.shape)

    def breakpoints(self) -> np.ndarray:
        """Sorted corner times of all trapezoids inside (0, t_end)."""
        if not self.pulses:
            return np.empty(0)
        s, _, w, r = self._arrays
        pts = np.concatenate([s, s + r, s + w, s + w + r])
        pts = np.unique(pts)
        return pts[(pts > 0) & (pts < self.t_end)]


def pulse_train(I_dc, starts, amplitude, fwhm, t_end, rise_fall=DEFAULT_RISE_FALL) -> DriveWaveform:
    return DriveWaveform(I_dc, tuple(Pulse(float(s), amplitude, fwhm, rise_fall) for s in starts), t_end)

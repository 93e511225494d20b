"""Laser parameter set and derived threshold quantities."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

from scipy import constants

from .errors import ValidationError

Q_E = constants.e
H_PLANCK = constants.h
C_LIGHT = constants.c

# fields bounded above by 1
_UNIT_BOUNDED = ("eta_i", "Gamma", "kappa")
# submodel coefficients that may be switched off (analytic limits, beta_sp = 0 checks)
_MAY_BE_ZERO = ("eps", "A", "B", "C", "beta_sp")


@dataclass(frozen=True)
class LaserParams:
    """Physical parameters of a single-mode laser diode.

    Defaults are the calibrated "VCSEL-787" set. SI units throughout:
    densities in m^-3, volume in m^3, times in s.
    """

    eta_i: float = 0.8
    V: float = 2e-18
    Gamma: float = 0.05
    v_g: float = 7.5e7
    tau_p: float = 2e-12
    g0: float = 1.6e5
    N_tr: float = 1.8e24
    eps: float = 1.5e-23
    A: float = 1e8
    B: float = 1e-16
    C: float = 3.5e-41
    beta_sp: float = 1e-4
    wavelength: float = 787e-9
    kappa: float = 0.3
    q: float = Q_E

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(f.name, f"must be a finite number, got {v!r}")
            if v < 0 or (v == 0 and f.name not in _MAY_BE_ZERO):
                raise ValidationError(f.name, f"must be > 0, got {v!r}")
        for name in _UNIT_BOUNDED:
            if getattr(self, name) > 1:
                raise ValidationError(name, f"must be <= 1, got {getattr(self, name)!r}")
        if self.q != Q_E:
            raise ValidationError("q", "elementary charge is a fixed constant")

    def replace(self, **changes) -> "LaserParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def n_floor(self) -> float:
        return 1e-3 * self.N_tr

    @property
    def photon_energy(self) -> float:
        return H_PLANCK * C_LIGHT / self.wavelength

    @property
    def power_factor(self) -> float:
        """Watts of emitted power per unit photon density (m^-3)."""
        return self.kappa * self.photon_energy * (self.V / self.Gamma) / self.tau_p

    def recombination(self, N):
        return N * (self.A + N * (self.B + N * self.C))

    @property
    def n_th(self) -> float:
        return self.N_tr * math.exp(1.0 / (self.Gamma * self.v_g * self.g0 * self.tau_p))

    @property
    def i_th(self) -> float:
        return self.q * self.V * self.recombination(self.n_th) / self.eta_i


def threshold(params: LaserParams) -> tuple[float, float]:
    """Return ``(N_th, I_th)``: zero-photon gain equals cavity loss."""
    return params.n_th, params.i_th


DEFAULT_PARAMS = LaserParams()

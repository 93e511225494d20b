"""Count budget, QBER, and DC-bias selection trading leakage against background."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InfeasibleTolerances, ZeroRates
from .laser import steady_state
from .params import LaserParams
from .pulses import SWEEP_INTERVALS, double_pulse_sweep
from .report import write_csv


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector bank. ``dark_rate`` is per detector."""

    efficiency: float = 0.6
    dark_rate: float = 45.0
    n_detectors: int = 4

    def __post_init__(self):
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")
        if self.dark_rate < 0 or self.n_detectors < 1:
            raise ValueError("dark_rate must be >= 0 and n_detectors >= 1")

    @property
    def total_dark_rate(self) -> float:
        return self.dark_rate * self.n_detectors


@dataclass(frozen=True)
class CountBudget:
    signal_rate: float
    spont_rate: float
    dark_rate: float
    qber: float


@dataclass(frozen=True)
class BiasRecommendation:
    dc_frac: float
    max_delay_shift: float
    max_energy_dev: float
    qber: float
    feasible: bool
    advice: str = ""
    budget: CountBudget | None = None


def transmission(loss_dB: float) -> float:
    return 10.0 ** (-loss_dB / 10.0)


def spont_background(params: LaserParams, I_dc: float, n_lasers: int, attenuation_dB: float,
                     det: DetectorModel) -> float:
    """Detected count rate from DC-biased lasers emitting spontaneously (Hz)."""
    if I_dc < 0:
        raise ValueError("I_dc must be >= 0")
    photons = steady_state(params, I_dc).P_ss / params.photon_energy
    return n_lasers * photons * transmission(attenuation_dB) * det.efficiency


def signal_rate(clock: float, mu: float, loss_dB: float, det: DetectorModel) -> float:
    return clock * mu * transmission(loss_dB) * det.efficiency


def qber_estimate(signal_rate: float, spont_rate: float, dark_rate: float, e_intrinsic: float = 0.01) -> float:
    """Unpolarized noise counts are wrong half the time."""
    if min(signal_rate, spont_rate, dark_rate) < 0:
        raise ValueError("rates must be >= 0")
    if not 0 <= e_intrinsic <= 0.5:
        raise ValueError("e_intrinsic must lie in [0, 0.5]")
    total = signal_rate + spont_rate + dark_rate
    if total == 0:
        raise ZeroRates("signal, background and dark rates are all zero")
    return (e_intrinsic * signal_rate + 0.5 * (spont_rate + dark_rate)) / total


def count_budget(params: LaserParams, I_dc: float, pulse_energy: float, clock: float, mu: float,
                 loss_dB: float, det: DetectorModel, n_lasers: int = 4, e_intrinsic: float = 0.01) -> CountBudget:
    """Rates seen by Bob when Alice attenuates ``pulse_energy`` down to ``mu`` photons.

    The same attenuator also dims the spontaneous background of every biased laser.
    """
    alice_dB = 10.0 * np.log10(pulse_energy / (mu * params.photon_energy))
    sig = signal_rate(clock, mu, loss_dB, det)
    spont = spont_background(params, I_dc, n_lasers, alice_dB + loss_dB, det)
    dark = det.total_dark_rate
    return CountBudget(sig, spont, dark, qber_estimate(sig, spont, dark, e_intrinsic))


DEFAULT_DC_GRID = tuple(round(0.05 * k, 2) for k in range(20))  # 0 .. 0.95


@dataclass(frozen=True)
class GridPoint:
    dc_frac: float
    intervals: tuple
    delay_shift: tuple
    norm_energy: tuple
    pulse_energy: float


@lru_cache(maxsize=512)
def grid_point(params: LaserParams, dc_frac: float, ac_frac: float = 4.0, fwhm: float = 500e-12,
               intervals: tuple = SWEEP_INTERVALS) -> GridPoint:
    """Double-pulse sweep at one bias level (memoized; inputs are immutable)."""
    (rep,) = double_pulse_sweep(params, [dc_frac], ac_frac * params.i_th, fwhm, intervals)
    return GridPoint(dc_frac, tuple(rep.intervals), tuple(rep.delay_shift), tuple(rep.norm_energy),
                     rep.first.energy)


def leakage_margins(gp: GridPoint, t_min: float):
    """Worst |delay shift| and |norm_energy - 1| over intervals >= t_min."""
    sel = [k for k, iv in enumerate(gp.intervals) if iv >= t_min * (1 - 1e-9)]
    if not sel:
        return 0.0, 0.0
    return (max(abs(gp.delay_shift[k]) for k in sel), max(abs(gp.norm_energy[k] - 1.0) for k in sel))


def recommend_bias(params: LaserParams, clock: float, delay_tol: float, energy_tol: float,
                   qber_budget: float, link_dB: float, det: DetectorModel, mu: float, *,
                   dc_grid=DEFAULT_DC_GRID, ac_frac=4.0, fwhm=500e-12, intervals=SWEEP_INTERVALS,
                   n_lasers=4, e_intrinsic=0.01, full_grid=False, table=None) -> BiasRecommendation:
    """Lowest DC bias that hides the gap-dependent disparity, then a QBER check.

    1. The shortest same-laser spacing is one clock period.
    2. Scan the bias grid upward for the first level whose delay shift and
       energy deviation stay within tolerance for every interval at least one
       period long.
    3. Budget the counts at that bias and compare the QBER with ``qber_budget``.

    ``table``, if a list, receives one row per evaluated grid point.
    """
    if delay_tol <= 0 or energy_tol <= 0 or not clock > 0:
        raise ValueError("tolerances and clock must be positive")
    t_min = 1.0 / clock
    intervals = tuple(sorted(float(x) for x in intervals))
    chosen = None
    for dc in sorted(dc_grid):
        gp = grid_point(params, float(dc), float(ac_frac), float(fwhm), intervals)
        d_max, e_max = leakage_margins(gp, t_min)
        ok = d_max <= delay_tol and e_max <= energy_tol
        if table is not None:
            b = count_budget(params, dc * params.i_th, gp.pulse_energy, clock, mu, link_dB, det,
                             n_lasers, e_intrinsic)
            table.append((dc, d_max, e_max, ok, b.signal_rate, b.spont_rate, b.dark_rate, b.qber))
        if ok and chosen is None:
            chosen = (gp, d_max, e_max)
            if not full_grid:
                break
    if chosen is None:
        raise InfeasibleTolerances(
            f"no bias up to {max(dc_grid):g} I_th keeps the delay shift within {delay_tol:g} s "
            f"and the energy within {energy_tol:g} at {clock:g} Hz")
    gp, d_max, e_max = chosen
    b = count_budget(params, gp.dc_frac * params.i_th, gp.pulse_energy, clock, mu, link_dB, det,
                     n_lasers, e_intrinsic)
    feasible = b.qber <= qber_budget
    if feasible:
        advice = f"bias at {gp.dc_frac:g} I_th: QBER {b.qber:.4f} within budget {qber_budget:g}"
    else:
        advice = (f"bias at {gp.dc_frac:g} I_th needed against leakage gives QBER {b.qber:.4f} "
                  f"> budget {qber_budget:g}; lower the clock rate so a smaller bias suffices")
    return BiasRecommendation(gp.dc_frac, d_max, e_max, b.qber, feasible, advice, b)


GRID_HEADER = ["dc_frac", "max_delay_shift_ps", "max_energy_dev", "leakage_ok", "signal_Hz",
               "spont_Hz", "dark_Hz", "qber"]


def grid_to_csv(table, path_or_buf):
    rows = ((dc, d * 1e12, e, ok, s, sp, dk, q) for dc, d, e, ok, s, sp, dk, q in table)
    return write_csv(path_or_buf, GRID_HEADER, rows)

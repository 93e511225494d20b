"""Per-pulse observables and the double-pulse interval/bias sweep."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .drive import DEFAULT_RISE_FALL, DriveWaveform, Pulse
from .errors import LaserLeakError, NoPulseDetected, WindowOverlap
from .laser import Stepper, Trajectory, steady_state
from .params import LaserParams
from .report import svg_line_plot, write_csv

DEFAULT_WINDOW = 1.5e-9
NORM_INTERVAL = 10e-9
SWEEP_INTERVALS = tuple(x * 1e-9 for x in (2, 3, 4, 5, 6, 8, 10, 12, 15, 20, 25, 30, 35, 40))
SWEEP_DC_FRACS = (0.0, 0.6, 0.9)


@dataclass(frozen=True)
class PulseMetrics:
    injection_time: float
    turn_on_delay: float
    peak_power: float
    energy: float
    fwhm: float


def _crossings(t, y, half):
    above = np.nonzero(y >= half)[0]
    i, j = above[0], above[-1]
    if i == 0:
        t_up = t[0]
    else:
        t_up = t[i - 1] + (half - y[i - 1]) / (y[i] - y[i - 1]) * (t[i] - t[i - 1])
    if j == len(y) - 1:
        t_down = t[-1]
    else:
        t_down = t[j] + (y[j] - half) / (y[j] - y[j + 1]) * (t[j + 1] - t[j])
    return t_up, t_down


def pulse_metrics(t, P, pulse: Pulse, baseline: float = 0.0) -> PulseMetrics:
    """Metrics of one optical pulse sampled as ``(t, P)`` inside its window."""
    t = np.asarray(t, dtype=float)
    P = np.asarray(P, dtype=float)
    peak = float(P.max()) if P.size else 0.0
    if P.size < 2 or peak <= 2.0 * baseline or peak <= baseline:
        raise NoPulseDetected(f"no optical pulse after injection at t = {pulse.start:.6e} s")
    y = P - baseline
    t_up, t_down = _crossings(t, y, 0.5 * (peak - baseline))
    energy = float(np.trapezoid(y, t))
    return PulseMetrics(pulse.start, t_up - pulse.half_rise, peak, max(energy, 0.0), t_down - t_up)


def segment_pulses(traj: Trajectory, drive: DriveWaveform, window: float = DEFAULT_WINDOW, *,
                   params: LaserParams | None = None, baseline: float | None = None) -> list[PulseMetrics]:
    """Split a trajectory into per-pulse windows ``[start, start + window]``.

    The baseline is the steady spontaneous power at the drive's DC bias; pass
    ``params`` to compute it, or ``baseline`` directly (defaults to 0).
    """
    if baseline is None:
        baseline = steady_state(params, drive.I_dc).P_ss if params is not None else 0.0
    pulses = drive.pulses
    for k, p in enumerate(pulses):
        if window < p.fwhm:
            raise ValueError(f"window {window:g} s is shorter than pulse {k} fwhm")
        if k + 1 < len(pulses) and p.start + window > pulses[k + 1].start:
            raise WindowOverlap(f"window of pulse {k} overlaps pulse {k + 1}")
    out = []
    eps = 1e-6 * (traj.t[1] - traj.t[0]) if len(traj.t) > 1 else 0.0
    for p in pulses:
        lo = np.searchsorted(traj.t, p.start - eps, side="left")
        hi = np.searchsorted(traj.t, p.start + window + eps, side="right")
        out.append(pulse_metrics(traj.t[lo:hi], traj.P[lo:hi], p, baseline))
    return out


# ------------------------------------------------------------ double-pulse sweep

@dataclass(frozen=True)
class DoublePulseReport:
    dc_level: float
    intervals: list
    delay_shift: list
    norm_energy: list
    first: PulseMetrics | None = None
    second: list = field(default_factory=list)


def double_pulse(params: LaserParams, I_dc, ac_amp, fwhm, interval, *, window=DEFAULT_WINDOW,
                 rise_fall=DEFAULT_RISE_FALL, output_dt=1e-12, rtol=None, stiff_idle=True):
    """Simulate one block holding two pulses; returns ``(first, second)`` metrics.

    The block starts from the steady state at ``I_dc``: the idle remainder of a
    long repetition block only serves to restore that state.
    """
    op = steady_state(params, I_dc)
    pulses = (Pulse(0.0, ac_amp, fwhm, rise_fall), Pulse(interval, ac_amp, fwhm, rise_fall))
    if window > interval:
        raise WindowOverlap(f"window {window:g} s longer than the interval {interval:g} s")
    drive = DriveWaveform(I_dc, pulses, interval + window)
    kw = {} if rtol is None else {"rtol": rtol, "atol_rel": rtol * 100}
    st = Stepper(params, drive, (op.N_ss, op.Np_ss), stiff_idle=stiff_idle, **kw)
    n = int(round(window / output_dt)) + 1
    grid = output_dt * np.arange(n)
    res = []
    for p in pulses:
        st.advance(p.start)
        y = st.advance(p.start + window, p.start + grid)
        res.append(pulse_metrics(p.start + grid, params.power_factor * y[:, 1], p, op.P_ss))
    return res[0], res[1]


def _sweep_one(params, frac, ac_amp, fwhm, intervals, window, rise_fall, output_dt, rtol):
    I_dc = frac * params.i_th
    firsts, seconds = [], []
    for iv in intervals:
        try:
            a, b = double_pulse(params, I_dc, ac_amp, fwhm, iv, window=window, rise_fall=rise_fall,
                                output_dt=output_dt, rtol=rtol)
        except LaserLeakError as exc:
            raise type(exc)(f"dc = {frac:g} I_th, interval = {iv:g} s: {exc}") from exc
        firsts.append(a)
        seconds.append(b)
    k_ref = int(np.argmax(intervals))
    k_norm = int(np.argmin(np.abs(np.asarray(intervals) - NORM_INTERVAL)))
    d_ref = seconds[k_ref].turn_on_delay
    e_norm = seconds[k_norm].energy
    return DoublePulseReport(
        dc_level=frac,
        intervals=list(intervals),
        delay_shift=[s.turn_on_delay - d_ref for s in seconds],
        norm_energy=[s.energy / e_norm for s in seconds],
        first=firsts[k_ref],
        second=seconds,
    )


def double_pulse_sweep(params: LaserParams, dc_fracs=SWEEP_DC_FRACS, ac_amp=None, fwhm=500e-12,
                       intervals=SWEEP_INTERVALS, block=1e-6, *, window=DEFAULT_WINDOW,
                       rise_fall=DEFAULT_RISE_FALL, output_dt=1e-12, rtol=None,
                       threads=1) -> list[DoublePulseReport]:
    """Second-pulse delay shift and normalized energy versus pulse interval.

    ``ac_amp`` defaults to 4 I_th. Delay shifts are relative to the largest
    interval; energies are normalized to the 10 ns interval.
    """
    if ac_amp is None:
        ac_amp = 4.0 * params.i_th
    intervals = [float(x) for x in intervals]
    if not any(math.isclose(x, NORM_INTERVAL, rel_tol=1e-9) for x in intervals):
        raise ValueError("intervals must include the 10 ns normalization point")
    if max(intervals) + window > block:
        raise ValueError("block must exceed every interval plus the pulse window")
    args = (ac_amp, fwhm, intervals, window, rise_fall, output_dt, rtol)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(lambda f: _sweep_one(params, f, *args), dc_fracs))
    return [_sweep_one(params, f, *args) for f in dc_fracs]


def settling_interval(intervals, deviation, tol):
    """Smallest interval beyond which ``|deviation| <= tol`` holds on the sweep.

    Linear interpolation between the last violating point and its successor;
    returns ``intervals[0]`` if nothing violates and ``inf`` if the last
    point still does.
    """
    iv = np.asarray(intervals, dtype=float)
    dev = np.abs(np.asarray(deviation, dtype=float))
    order = np.argsort(iv)
    iv, dev = iv[order], dev[order]
    bad = np.nonzero(dev > tol)[0]
    if bad.size == 0:
        return float(iv[0])
    k = bad[-1]
    if k == len(iv) - 1:
        return math.inf
    return float(iv[k] + (dev[k] - tol) / (dev[k] - dev[k + 1]) * (iv[k + 1] - iv[k]))


def asymptotic_energy_deviation(report: DoublePulseReport):
    """Energy relative to the largest-interval pulse, minus one."""
    k = int(np.argmax(report.intervals))
    ref = report.norm_energy[k]
    return [e / ref - 1.0 for e in report.norm_energy]


def reports_to_csv(reports, path_or_buf):
    rows = []
    for r in reports:
        for iv, ds, ne in zip(r.intervals, r.delay_shift, r.norm_energy):
            rows.append((r.dc_level, iv * 1e9, ds * 1e12, ne))
    return write_csv(path_or_buf, ["dc_frac", "interval_ns", "delay_shift_ps", "norm_energy"], rows)


def reports_to_svg(reports) -> dict[str, str]:
    """One SVG per dc level (delay shift and normalized energy), plus an overlay."""
    out = {}
    for r in reports:
        x = [v * 1e9 for v in r.intervals]
        out[f"double_pulse_dc{r.dc_level:g}.svg"] = svg_line_plot(
            [("delay shift (ps)", x, [d * 1e12 for d in r.delay_shift])],
            title=f"Second-pulse delay shift, DC = {r.dc_level:g} Ith",
            xlabel="interval (ns)", ylabel="delay shift (ps)")
    out["norm_energy.svg"] = svg_line_plot(
        [(f"DC = {r.dc_level:g} Ith", [v * 1e9 for v in r.intervals], r.norm_energy) for r in reports],
        title="Normalized second-pulse energy", xlabel="interval (ns)", ylabel="energy / energy(10 ns)")
    return out


# --------------------------------------------------------------- detector model

def bandwidth_filter(traj: Trajectory, f3dB: float) -> Trajectory:
    """Gaussian low-pass on the power trace; ``|H(f3dB)| = 1/sqrt(2)``, ``H(0) = 1``."""
    if not f3dB > 0:
        raise ValueError("f3dB must be > 0")
    t = traj.t
    P = traj.P
    if len(t) < 2:
        return traj
    dt = (t[-1] - t[0]) / (len(t) - 1)
    sigma = math.sqrt(math.log(2.0)) / (2.0 * math.pi * f3dB)
    pad = int(min(math.ceil(8.0 * sigma / dt), 4 * len(P))) + 1
    x = np.pad(P, pad, mode="edge")
    n = len(x)
    f = np.fft.rfftfreq(n, dt)
    H = np.exp(-0.5 * math.log(2.0) * (f / f3dB) ** 2)
    y = np.fft.irfft(np.fft.rfft(x) * H, n)[pad:pad + len(P)]
    return traj.with_power(y)

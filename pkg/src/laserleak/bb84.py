"""Four-laser BB84 transmitter driven by a uniformly random laser choice per slot."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .drive import DEFAULT_RISE_FALL, DriveWaveform, Pulse
from .errors import LaserLeakError
from .laser import Stepper, steady_state
from .params import LaserParams
from .pulses import DEFAULT_WINDOW, pulse_metrics
from .report import read_csv, write_csv

GENERATOR = "numpy-PCG64-v1"
# gap reported for a laser's first firing: it starts from the DC steady state
FIRST_FIRING = 2**31 - 1
STREAM_BLOCK = 4096  # pulses per laser per streaming block


@dataclass(frozen=True)
class SlotSchedule:
    clock: float
    n_slots: int
    laser_of_slot: np.ndarray
    seed: int
    laser_count: int = 4
    generator: str = GENERATOR

    @property
    def period(self) -> float:
        return 1.0 / self.clock

    def gaps(self) -> np.ndarray:
        """Slots since the same laser last fired (``FIRST_FIRING`` if never)."""
        last = np.full(self.laser_count, -1, dtype=np.int64)
        out = np.empty(self.n_slots, dtype=np.int64)
        for k, las in enumerate(self.laser_of_slot.tolist()):
            out[k] = FIRST_FIRING if last[las] < 0 else k - last[las]
            last[las] = k
        return out


def random_schedule(seed: int, clock: float, n_slots: int, laser_count: int = 4) -> SlotSchedule:
    """i.i.d. uniform laser index per slot, reproducible from ``seed``."""
    if n_slots < 1 or laser_count < 1:
        raise ValueError("n_slots and laser_count must be >= 1")
    if not clock > 0:
        raise ValueError("clock must be > 0")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    rng = np.random.Generator(np.random.PCG64(seed))
    lasers = rng.integers(0, laser_count, size=n_slots, dtype=np.int64)
    return SlotSchedule(float(clock), int(n_slots), lasers, seed, int(laser_count))


@dataclass(frozen=True)
class SlotObservables:
    slot: int
    laser: int
    gap: int
    delay_shift: float
    energy: float
    mean_photons: float


@dataclass(frozen=True)
class _Drive:
    I_dc: float
    ac_amp: float
    fwhm: float
    rise_fall: float
    window: float
    output_dt: float


def _reference_pulse(params, d: _Drive):
    """Metrics of an isolated pulse fired from the DC steady state."""
    op = steady_state(params, d.I_dc)
    p = Pulse(0.0, d.ac_amp, d.fwhm, d.rise_fall)
    st = Stepper(params, DriveWaveform(d.I_dc, (p,), d.window), (op.N_ss, op.Np_ss))
    grid = d.output_dt * np.arange(int(round(d.window / d.output_dt)) + 1)
    y = st.advance(d.window, grid)
    return pulse_metrics(grid, params.power_factor * y[:, 1], p, op.P_ss)


def simulate_laser(params: LaserParams, starts, d: _Drive, block=STREAM_BLOCK, stiff_idle=True):
    """Stream one laser through pulses at ``starts``; returns (delays, energies).

    Integration runs block-wise with the (N, Np) state carried across blocks,
    so memory stays bounded by ``block`` pulses.
    """
    op = steady_state(params, d.I_dc)
    state = (op.N_ss, op.Np_ss)
    n = len(starts)
    delays = np.empty(n)
    energies = np.empty(n)
    grid = d.output_dt * np.arange(int(round(d.window / d.output_dt)) + 1)
    t_prev = 0.0
    for b0 in range(0, n, block):
        s = np.asarray(starts[b0:b0 + block], dtype=float)
        origin = s[0]
        local = s - origin
        t_end = local[-1] + d.window
        drive = DriveWaveform(d.I_dc, tuple(Pulse(x, d.ac_amp, d.fwhm, d.rise_fall) for x in local), t_end)
        # idle stretch before the block at constant bias
        if origin > t_prev:
            idle = Stepper(params, DriveWaveform(d.I_dc, (), origin - t_prev), state, stiff_idle=stiff_idle)
            idle.advance(origin - t_prev)
            state = idle.state
        st = Stepper(params, drive, state, stiff_idle=stiff_idle)
        for k, (x, p) in enumerate(zip(local, drive.pulses)):
            st.advance(x)
            y = st.advance(x + d.window, x + grid)
            m = pulse_metrics(x + grid, params.power_factor * y[:, 1], p, op.P_ss)
            delays[b0 + k] = m.turn_on_delay
            energies[b0 + k] = m.energy
        state = st.state
        t_prev = origin + t_end
    return delays, energies


def simulate_transmitter(params: LaserParams, sched: SlotSchedule, I_dc: float, ac_amp: float,
                         fwhm: float, attenuation_dB: float, *, window=DEFAULT_WINDOW,
                         rise_fall=DEFAULT_RISE_FALL, output_dt=1e-12, block=STREAM_BLOCK,
                         threads=1) -> list[SlotObservables]:
    """Per-slot delay shift, energy and attenuated mean photon number.

    Lasers are independent devices sharing the DC bias; each fires only in
    its own slots and starts from the steady state at ``I_dc``.
    """
    if sched.period < window:
        raise ValueError("slot period must be at least the pulse window")
    d = _Drive(float(I_dc), float(ac_amp), float(fwhm), float(rise_fall), float(window), float(output_dt))
    ref = _reference_pulse(params, d)
    lasers = sched.laser_of_slot
    slot_idx = [np.nonzero(lasers == k)[0] for k in range(sched.laser_count)]

    def run(k):
        try:
            return simulate_laser(params, slot_idx[k] * sched.period, d, block)
        except LaserLeakError as exc:
            raise type(exc)(f"laser {k}: {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, range(sched.laser_count)))
    else:
        results = [run(k) for k in range(sched.laser_count)]

    delay = np.empty(sched.n_slots)
    energy = np.empty(sched.n_slots)
    for k, (dl, en) in enumerate(results):
        delay[slot_idx[k]] = dl
        energy[slot_idx[k]] = en
    shift = delay - ref.turn_on_delay
    photons = energy * 10.0 ** (-attenuation_dB / 10.0) / params.photon_energy
    gaps = sched.gaps()
    return [SlotObservables(i, int(las), int(g), float(s), float(e), float(m))
            for i, (las, g, s, e, m) in enumerate(zip(lasers.tolist(), gaps.tolist(), shift, energy, photons))]


def attenuation_for_mu(params: LaserParams, mean_energy: float, mu: float) -> float:
    """Attenuation (dB) mapping ``mean_energy`` to ``mu`` photons per pulse."""
    return 10.0 * np.log10(mean_energy / (mu * params.photon_energy))


OBS_HEADER = ["slot", "laser", "gap", "delay_shift_ps", "energy_fJ", "mean_photons"]


def observables_to_csv(obs, path_or_buf):
    rows = ((o.slot, o.laser, o.gap, o.delay_shift * 1e12, o.energy * 1e15, o.mean_photons) for o in obs)
    return write_csv(path_or_buf, OBS_HEADER, rows)


def observables_from_csv(path) -> list[SlotObservables]:
    header, rows = read_csv(path)
    if header != OBS_HEADER:
        raise ValueError(f"unexpected observables header {header}")
    return [SlotObservables(int(r[0]), int(r[1]), int(r[2]), float(r[3]) * 1e-12, float(r[4]) * 1e-15,
                            float(r[5])) for r in rows]

"""Rate-equation laser model: gain, right-hand side, integration, steady states."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .drive import DriveWaveform
from .errors import NoConvergence, StepSizeUnderflow
from .params import LaserParams, threshold

RTOL = 1e-8
ATOL_REL = 1e-6  # carrier absolute tolerance, in units of N_tr
# Photon absolute tolerance, in units of N_tr (~1e-4 photons in the mode).
# Below threshold Np sits far under 1e-6 N_tr, where a shared tolerance
# would leave the spontaneous level, and so the turn-on seed, unresolved.
ATOL_PHOTON_REL = 1e-12
RAMP_STEP = 1e-12
MIN_STEP = 1e-18


def pack(params: LaserParams, gain_on: bool = True) -> np.ndarray:
    p = np.empty(_kernel.N_PARAMS)
    p[_kernel.ETA] = params.eta_i
    p[_kernel.QV] = params.q * params.V
    p[_kernel.GAMMA] = params.Gamma
    p[_kernel.VG] = params.v_g
    p[_kernel.TAU_P] = params.tau_p
    p[_kernel.G0] = params.g0
    p[_kernel.N_TR] = params.N_tr
    p[_kernel.EPS] = params.eps
    p[_kernel.A] = params.A
    p[_kernel.B] = params.B
    p[_kernel.C] = params.C
    p[_kernel.BETA] = params.beta_sp
    p[_kernel.N_FLOOR] = params.n_floor
    p[_kernel.GAIN_ON] = 1.0 if gain_on else 0.0
    return p


def gain(params: LaserParams, N, Np):
    """Logarithmic material gain with compression, in m^-1."""
    N = np.maximum(np.asarray(N, dtype=float), params.n_floor)
    out = params.g0 * np.log(N / params.N_tr) / (1.0 + params.eps * np.asarray(Np, dtype=float))
    return out if out.ndim else float(out)


def rate_rhs(params: LaserParams, t, N, Np, I_of_t, gain_on: bool = True):
    """Time derivatives ``(dN/dt, dNp/dt)`` at ``t``.

    ``I_of_t`` is a callable (e.g. ``DriveWaveform.current``) or a constant.
    """
    cur = I_of_t(t) if callable(I_of_t) else I_of_t
    N = np.asarray(N, dtype=float)
    Np = np.asarray(Np, dtype=float)
    g = gain(params, N, Np) if gain_on else 0.0
    r_sp = params.B * N**2
    r_nr = params.A * N + params.C * N**3
    dN = params.eta_i * cur / (params.q * params.V) - (r_sp + r_nr) - params.v_g * g * Np
    dNp = (params.Gamma * params.v_g * g - 1.0 / params.tau_p) * Np + params.Gamma * params.beta_sp * r_sp
    if np.ndim(dN) == 0:
        return float(dN), float(dNp)
    return dN, dNp


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    I: np.ndarray
    N: np.ndarray
    Np: np.ndarray
    P: np.ndarray

    def __len__(self):
        return len(self.t)

    def with_power(self, P) -> "Trajectory":
        return Trajectory(self.t, self.I, self.N, self.Np, np.asarray(P, dtype=float))

    def to_csv(self, path_or_buf):
        from .report import write_csv

        rows = zip(self.t * 1e9, self.I * 1e3, self.N, self.Np, self.P * 1e3)
        write_csv(path_or_buf, ["t_ns", "current_mA", "N_m3", "Np_m3", "power_mW"], rows)


@dataclass(frozen=True)
class OperatingPoint:
    N_ss: float
    Np_ss: float
    P_ss: float


class Stepper:
    """Integrates one laser over arbitrary time spans, carrying its state.

    Used directly for streaming (block-wise) simulations; :func:`integrate`
    is the one-shot wrapper.

    With ``stiff_idle``, spans that see a constant current and request no
    output samples go through an implicit Radau IIA stepper instead. Far
    below threshold the photon equation decays at ~1e12 /s while the
    carriers move on a ns scale, so the explicit pair is stability-bound
    there; drive transitions and sampled windows stay on the explicit path.
    """

    def __init__(self, params: LaserParams, drive: DriveWaveform, init=(0.0, 0.0), t0=0.0,
                 rtol=RTOL, atol_rel=ATOL_REL, gain_on=True, stiff_idle=False,
                 atol_photon_rel=ATOL_PHOTON_REL):
        if init[0] < 0 or init[1] < 0:
            raise ValueError("initial state must be non-negative")
        self.params = params
        self.drive = drive
        self._p = pack(params, gain_on)
        self._arrays = drive.arrays
        self._bps = drive.breakpoints()
        self.rtol = rtol
        self.atol = atol_rel * params.N_tr
        self.atol_photon = min(atol_photon_rel, atol_rel) * params.N_tr
        self.t = float(t0)
        self.state = (float(init[0]), float(init[1]))
        self._h = 0.0
        self._h_idle = 0.0
        self.stiff_idle = stiff_idle
        self.steps = 0
        self.rejected = 0

    def advance(self, t1, out_t=None):
        """Integrate to ``t1``; return the state sampled at ``out_t`` (shape (n, 2))."""
        out_t = np.empty(0) if out_t is None else np.ascontiguousarray(out_t, dtype=float)
        out_y = np.empty((out_t.shape[0], 2))
        starts, amps, fwhms, rfs = self._arrays
        # restrict breakpoints and pulses to the span for speed on long trains
        lo = np.searchsorted(self._bps, self.t, side="right")
        hi = np.searchsorted(self._bps, t1, side="left")
        first = np.searchsorted(starts + fwhms + rfs, self.t, side="right")
        last = np.searchsorted(starts, t1, side="left")
        if self.stiff_idle and out_t.shape[0] == 0 and first >= last and t1 > self.t:
            status, n, s, h, nacc, nrej = _kernel.integrate_idle(
                self._p, float(self.drive.I_dc), self.t, float(t1), self.state[0], self.state[1],
                self.rtol, self.atol, self.atol_photon, MIN_STEP, self._h_idle)
            return self._finish(status, t1, n, s, self._h, h, nacc, nrej, out_y)
        status, n, s, h, nacc, nrej = _kernel.integrate_span(
            self._p, float(self.drive.I_dc), starts[first:last], amps[first:last],
            fwhms[first:last], rfs[first:last], self._bps[lo:hi], self.t, float(t1),
            self.state[0], self.state[1], out_t, out_y, self.rtol, self.atol, self.atol_photon,
            RAMP_STEP, MIN_STEP, self._h)
        return self._finish(status, t1, n, s, h, self._h_idle, nacc, nrej, out_y)

    def _finish(self, status, t1, n, s, h, h_idle, nacc, nrej, out_y):
        if status == _kernel.UNDERFLOW:
            raise StepSizeUnderflow(f"step size fell below {MIN_STEP:g} s near t = {self.t:.6e} s")
        self.t = float(t1)
        self.state = (n, s)
        self._h = h
        self._h_idle = h_idle
        self.steps += nacc
        self.rejected += nrej
        return out_y


def integrate(params: LaserParams, drive: DriveWaveform, init=(0.0, 0.0), output_dt=1e-12, *,
              rtol=RTOL, atol_rel=ATOL_REL, atol_photon_rel=ATOL_PHOTON_REL, gain_on=True) -> Trajectory:
    """Solve the rate equations for ``drive`` and sample every ``output_dt``."""
    if not output_dt > 0:
        raise ValueError("output_dt must be > 0")
    n = int(math.floor(drive.t_end / output_dt * (1 + 1e-12))) + 1
    t = output_dt * np.arange(n)
    st = Stepper(params, drive, init, rtol=rtol, atol_rel=atol_rel, gain_on=gain_on,
                 atol_photon_rel=atol_photon_rel)
    y = st.advance(drive.t_end, t)
    return Trajectory(t, drive.current(t), y[:, 0], y[:, 1], params.power_factor * y[:, 1])


# ---------------------------------------------------------------- steady state

def _residual(params, I, N, Np):
    src = params.eta_i * I / (params.q * params.V)
    g = gain(params, N, Np)
    rec = params.recombination(N)
    stim = params.v_g * g * Np
    spont = params.Gamma * params.beta_sp * params.B * N * N
    loss = Np / params.tau_p
    f1 = src - rec - stim
    f2 = params.Gamma * params.v_g * g * Np - loss + spont
    scale1 = src + rec + abs(stim)
    scale2 = loss + spont + abs(params.Gamma * stim)
    return f1, f2, scale1, scale2


def _jacobian(params, N, Np):
    nn = max(N, params.n_floor)
    den = 1.0 + params.eps * Np
    g = params.g0 * math.log(nn / params.N_tr) / den
    dg_dN = params.g0 / (nn * den) if N > params.n_floor else 0.0
    dg_dNp = -params.eps * g / den
    drec = params.A + 2 * params.B * N + 3 * params.C * N * N
    vg, G = params.v_g, params.Gamma
    return np.array([
        [-drec - vg * dg_dN * Np, -vg * (g + dg_dNp * Np)],
        [G * vg * dg_dN * Np + 2 * G * params.beta_sp * params.B * N,
         G * vg * (g + dg_dNp * Np) - 1.0 / params.tau_p],
    ])


def _newton(params, I, N, Np, tol=1e-12, max_iter=200):
    def norm(N, Np):
        f1, f2, s1, s2 = _residual(params, I, N, Np)
        return max(abs(f1) / s1 if s1 else abs(f1), abs(f2) / s2 if s2 else abs(f2)), f1, f2

    r, f1, f2 = norm(N, Np)
    for _ in range(max_iter):
        if r < tol:
            return N, Np, r
        J = _jacobian(params, N, Np)
        try:
            dN, dNp = np.linalg.solve(J, [-f1, -f2])
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        # fraction-to-boundary keeps both densities non-negative
        if N + dN < 0:
            lam = min(lam, 0.9 * N / -dN) if N > 0 else 0.0
        if Np + dNp < 0:
            lam = min(lam, 0.9 * Np / -dNp) if Np > 0 else lam
        if lam == 0.0:
            return None
        while lam > 1e-10:
            cN, cNp = N + lam * dN, max(Np + lam * dNp, 0.0)
            rc, g1, g2 = norm(cN, cNp)
            if rc < r or rc < tol:
                break
            lam *= 0.5
        else:
            return None
        N, Np, r, f1, f2 = cN, cNp, rc, g1, g2
    return (N, Np, r) if r < tol else None


def _is_stable(params, N, Np):
    if Np == 0 and params.beta_sp == 0:
        # trivial branch: stable only while the unsaturated net gain is negative
        return params.Gamma * params.v_g * gain(params, N, 0.0) - 1.0 / params.tau_p <= 0
    ev = np.linalg.eigvals(_jacobian(params, N, Np))
    return bool(np.all(ev.real < 0))


def _below_threshold_guess(params, I):
    target = params.eta_i * I / (params.q * params.V)
    lo, hi = 0.0, params.N_tr
    while params.recombination(hi) < target:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if params.recombination(mid) < target:
            lo = mid
        else:
            hi = mid
    N = 0.5 * (lo + hi)
    loss = 1.0 / params.tau_p - params.Gamma * params.v_g * gain(params, N, 0.0)
    spont = params.Gamma * params.beta_sp * params.B * N * N
    Np = spont / loss if loss > 0 else spont * params.tau_p
    return N, Np


def steady_state(params: LaserParams, I_dc: float) -> OperatingPoint:
    """Stable fixed point of the rate equations under constant current."""
    if I_dc < 0:
        raise ValueError("I_dc must be >= 0")
    if I_dc == 0:
        return OperatingPoint(0.0, 0.0, 0.0)
    n_th = params.n_th
    g_th = 1.0 / (params.Gamma * params.v_g * params.tau_p)
    above = max(params.eta_i * I_dc / (params.q * params.V) - params.recombination(n_th), 0.0)
    starts = [_below_threshold_guess(params, I_dc), (n_th, max(above / (params.v_g * g_th), 1.0))]
    found = []
    for N0, Np0 in starts:
        sol = _newton(params, I_dc, N0, Np0)
        if sol is not None and _is_stable(params, sol[0], sol[1]):
            found.append(sol)
    if not found:
        drive = DriveWaveform(I_dc, (), 1e-6)
        st = Stepper(params, drive, stiff_idle=True)
        st.advance(1e-6)
        sol = _newton(params, I_dc, *st.state)
        if sol is None:
            raise NoConvergence(f"no steady state found at I_dc = {I_dc:g} A")
        found.append(sol)
    N, Np, _ = max(found, key=lambda s: s[1])
    return OperatingPoint(N, Np, params.power_factor * Np)


def li_curve(params: LaserParams, I_grid) -> list[tuple[float, float]]:
    """Steady-state output power over a current grid."""
    out = []
    prev = -np.inf
    for k, I in enumerate(I_grid):
        if I < 0 or I < prev:
            raise ValueError("I_grid must be non-negative and increasing")
        prev = I
        try:
            out.append((float(I), steady_state(params, float(I)).P_ss))
        except NoConvergence as exc:
            raise NoConvergence(f"grid index {k}: {exc}") from exc
    return out


__all__ = [
    "Trajectory", "OperatingPoint", "Stepper", "gain", "rate_rhs", "integrate",
    "steady_state", "threshold", "li_curve",
]

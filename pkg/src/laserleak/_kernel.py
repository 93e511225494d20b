"""Compiled Dormand-Prince 5(4) stepper for the two-variable rate equations.

Everything here works on flat float arrays so numba can compile it; the
public wrappers live in :mod:`laserleak.laser`.
"""
import numpy as np
from numba import njit

# layout of the packed parameter vector
ETA, QV, GAMMA, VG, TAU_P, G0, N_TR, EPS, A, B, C, BETA, N_FLOOR, GAIN_ON = range(14)
N_PARAMS = 14

OK = 0
UNDERFLOW = 1

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# fifth minus fourth order weights
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

# free quartic interpolant (Shampine 1986); rows are stages, columns powers of theta
DENSE_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@njit(cache=True, nogil=True)
def gain(p, n, s):
    if p[GAIN_ON] == 0.0:
        return 0.0
    nn = n if n > p[N_FLOOR] else p[N_FLOOR]
    return p[G0] * np.log(nn / p[N_TR]) / (1.0 + p[EPS] * s)


@njit(cache=True, nogil=True)
def rhs(p, n, s, cur):
    g = gain(p, n, s)
    rec = n * (p[A] + n * (p[B] + n * p[C]))
    dn = p[ETA] * cur / p[QV] - rec - p[VG] * g * s
    ds = (p[GAMMA] * p[VG] * g - 1.0 / p[TAU_P]) * s + p[GAMMA] * p[BETA] * p[B] * n * n
    return dn, ds


@njit(cache=True, nogil=True)
def current_at(t, i_dc, starts, amps, fwhms, rfs, k0):
    """Drive current at ``t``; pulses before index ``k0`` are known to have ended."""
    cur = i_dc
    k = k0
    npulse = starts.shape[0]
    while k < npulse and starts[k] < t:
        x = t - starts[k]
        w = fwhms[k]
        r = rfs[k]
        if x < w + r:
            if r > 0.0:
                up = x / r
                down = (w + r - x) / r
                f = up if up < down else down
                if f > 1.0:
                    f = 1.0
                cur += amps[k] * f
            elif x < w:
                cur += amps[k]
        k += 1
    return cur


@njit(cache=True, nogil=True)
def slope_at(t, starts, amps, fwhms, rfs, k0):
    d = 0.0
    k = k0
    npulse = starts.shape[0]
    while k < npulse and starts[k] < t:
        x = t - starts[k]
        r = rfs[k]
        if r > 0.0:
            if x < r:
                d += amps[k] / r
            elif fwhms[k] < x < fwhms[k] + r:
                d -= amps[k] / r
        k += 1
    return d


@njit(cache=True, nogil=True)
def integrate_span(p, i_dc, starts, amps, fwhms, rfs, bps, t0, t1, n0, s0,
                   out_t, out_y, rtol, atol_n, atol_s, h_ramp, h_min, h_init):
    """Advance ``(n0, s0)`` from ``t0`` to ``t1``, filling ``out_y`` at ``out_t``.

    Returns ``(status, n1, s1, h_last, n_accepted, n_rejected)``.
    """
    npulse = starts.shape[0]
    nb = bps.shape[0]
    nout = out_t.shape[0]
    t = t0
    n = n0
    s = s0
    j = 0
    while j < nout and out_t[j] <= t0:
        out_y[j, 0] = n
        out_y[j, 1] = s
        j += 1
    k0 = 0
    b = 0
    tiny = 1e-24
    while b < nb and bps[b] <= t + tiny:
        b += 1
    while k0 < npulse and starts[k0] + fwhms[k0] + rfs[k0] <= t:
        k0 += 1

    cur = current_at(t, i_dc, starts, amps, fwhms, rfs, k0)
    k1n, k1s = rhs(p, n, s, cur)
    h = h_init if h_init > 0.0 else 1e-12
    n_acc = 0
    n_rej = 0
    status = OK
    while t < t1:
        # step boundaries: span end and next drive corner
        limit = t1
        if b < nb and bps[b] < limit:
            limit = bps[b]
        hmax = limit - t
        hh = h if h < hmax else hmax
        if slope_at(t + 0.5 * hh, starts, amps, fwhms, rfs, k0) != 0.0 and hh > h_ramp:
            hh = h_ramp
        lands = hh >= hmax

        c = current_at(t + C2 * hh, i_dc, starts, amps, fwhms, rfs, k0)
        k2n, k2s = rhs(p, n + hh * A21 * k1n, s + hh * A21 * k1s, c)
        c = current_at(t + C3 * hh, i_dc, starts, amps, fwhms, rfs, k0)
        k3n, k3s = rhs(p, n + hh * (A31 * k1n + A32 * k2n),
                       s + hh * (A31 * k1s + A32 * k2s), c)
        c = current_at(t + C4 * hh, i_dc, starts, amps, fwhms, rfs, k0)
        k4n, k4s = rhs(p, n + hh * (A41 * k1n + A42 * k2n + A43 * k3n),
                       s + hh * (A41 * k1s + A42 * k2s + A43 * k3s), c)
        c = current_at(t + C5 * hh, i_dc, starts, amps, fwhms, rfs, k0)
        k5n, k5s = rhs(p, n + hh * (A51 * k1n + A52 * k2n + A53 * k3n + A54 * k4n),
                       s + hh * (A51 * k1s + A52 * k2s + A53 * k3s + A54 * k4s), c)
        t_new = limit if lands else t + hh
        c = current_at(t_new, i_dc, starts, amps, fwhms, rfs, k0)
        k6n, k6s = rhs(p, n + hh * (A61 * k1n + A62 * k2n + A63 * k3n + A64 * k4n + A65 * k5n),
                       s + hh * (A61 * k1s + A62 * k2s + A63 * k3s + A64 * k4s + A65 * k5s), c)
        nn = n + hh * (B1 * k1n + B3 * k3n + B4 * k4n + B5 * k5n + B6 * k6n)
        ns = s + hh * (B1 * k1s + B3 * k3s + B4 * k4s + B5 * k5s + B6 * k6s)
        k7n, k7s = rhs(p, nn if nn > 0.0 else 0.0, ns if ns > 0.0 else 0.0, c)

        en = hh * (E1 * k1n + E3 * k3n + E4 * k4n + E5 * k5n + E6 * k6n + E7 * k7n)
        es = hh * (E1 * k1s + E3 * k3s + E4 * k4s + E5 * k5s + E6 * k6s + E7 * k7s)
        sn = atol_n + rtol * max(abs(n), abs(nn))
        ss = atol_s + rtol * max(abs(s), abs(ns))
        err = np.sqrt(0.5 * ((en / sn) ** 2 + (es / ss) ** 2))

        # negative excursions beyond the absolute tolerance are rejected
        bad_sign = nn < -atol_n or ns < -atol_s
        if err > 1.0 or bad_sign:
            n_rej += 1
            if bad_sign and err <= 1.0:
                fac = 0.5
            else:
                fac = SAFETY * err ** -0.2
                if fac < MIN_FACTOR:
                    fac = MIN_FACTOR
            h = hh * fac
            if h < h_min:
                status = UNDERFLOW
                break
            continue

        if nn < 0.0:
            nn = 0.0
            k7n, k7s = rhs(p, nn, ns if ns > 0.0 else 0.0, c)
        if ns < 0.0:
            ns = 0.0
            k7n, k7s = rhs(p, nn, ns, c)

        while j < nout and out_t[j] <= t_new:
            th = (out_t[j] - t) / hh
            q0 = th
            q1 = th * th
            q2 = q1 * th
            q3 = q2 * th
            yn = n
            ys = s
            for r in range(7):
                w = DENSE_P[r, 0] * q0 + DENSE_P[r, 1] * q1 + DENSE_P[r, 2] * q2 + DENSE_P[r, 3] * q3
                if r == 0:
                    yn += hh * w * k1n
                    ys += hh * w * k1s
                elif r == 2:
                    yn += hh * w * k3n
                    ys += hh * w * k3s
                elif r == 3:
                    yn += hh * w * k4n
                    ys += hh * w * k4s
                elif r == 4:
                    yn += hh * w * k5n
                    ys += hh * w * k5s
                elif r == 5:
                    yn += hh * w * k6n
                    ys += hh * w * k6s
                elif r == 6:
                    yn += hh * w * k7n
                    ys += hh * w * k7s
            out_y[j, 0] = yn if yn > 0.0 else 0.0
            out_y[j, 1] = ys if ys > 0.0 else 0.0
            j += 1

        t = t_new
        n = nn
        s = ns
        k1n = k7n
        k1s = k7s
        n_acc += 1
        if lands:
            while b < nb and bps[b] <= t + tiny:
                b += 1
            while k0 < npulse and starts[k0] + fwhms[k0] + rfs[k0] <= t:
                k0 += 1
            # the derivative jumps at a corner, so restart the FSAL stage
            cur = current_at(t, i_dc, starts, amps, fwhms, rfs, k0)
            k1n, k1s = rhs(p, n, s, cur)
        if err == 0.0:
            fac = MAX_FACTOR
        else:
            fac = SAFETY * err ** -0.2
            if fac > MAX_FACTOR:
                fac = MAX_FACTOR
            if fac < MIN_FACTOR:
                fac = MIN_FACTOR
        # never grow from a step that was truncated by a boundary
        h = hh * fac if not lands or hh >= h else h

    while j < nout:
        out_y[j, 0] = n
        out_y[j, 1] = s
        j += 1
    return status, n, s, h, n_acc, n_rej


# ------------------------------------------------------------ stiff idle stepper
# Radau IIA, three stages, order 5. Used only for constant-drive stretches with
# no output samples, where the photon equation is stiff far below threshold.
_S6 = np.sqrt(6.0)
RADAU_C = np.array([(4.0 - _S6) / 10.0, (4.0 + _S6) / 10.0, 1.0])
RADAU_A = np.array([
    [(88.0 - 7.0 * _S6) / 360.0, (296.0 - 169.0 * _S6) / 1800.0, (-2.0 + 3.0 * _S6) / 225.0],
    [(296.0 + 169.0 * _S6) / 1800.0, (88.0 + 7.0 * _S6) / 360.0, (-2.0 - 3.0 * _S6) / 225.0],
    [(16.0 - _S6) / 36.0, (16.0 + _S6) / 36.0, 1.0 / 9.0],
])
NEWTON_MAX = 10
NEWTON_TOL = 1e-3


@njit(cache=True, nogil=True)
def jacobian(p, n, s):
    nn = n if n > p[N_FLOOR] else p[N_FLOOR]
    den = 1.0 + p[EPS] * s
    if p[GAIN_ON] != 0.0:
        g = p[G0] * np.log(nn / p[N_TR]) / den
        dg_dn = p[G0] / (nn * den) if n > p[N_FLOOR] else 0.0
    else:
        g = 0.0
        dg_dn = 0.0
    dg_ds = -p[EPS] * g / den
    drec = p[A] + n * (2.0 * p[B] + 3.0 * p[C] * n)
    gv = p[GAMMA] * p[VG]
    return (-drec - p[VG] * dg_dn * s, -p[VG] * (g + dg_ds * s),
            gv * dg_dn * s + 2.0 * p[GAMMA] * p[BETA] * p[B] * n, gv * (g + dg_ds * s) - 1.0 / p[TAU_P])


@njit(cache=True, nogil=True)
def radau_step(p, cur, n, s, h, sn, ss):
    """One implicit step; returns ``(converged, n1, s1)``."""
    j00, j01, j10, j11 = jacobian(p, n, s)
    m = np.eye(6)
    for i in range(3):
        for k in range(3):
            ha = h * RADAU_A[i, k]
            m[2 * i, 2 * k] -= ha * j00
            m[2 * i, 2 * k + 1] -= ha * j01
            m[2 * i + 1, 2 * k] -= ha * j10
            m[2 * i + 1, 2 * k + 1] -= ha * j11
    z = np.zeros(6)
    f = np.empty(6)
    res = np.empty(6)
    for _ in range(NEWTON_MAX):
        for k in range(3):
            zn = n + z[2 * k]
            zs = s + z[2 * k + 1]
            f[2 * k], f[2 * k + 1] = rhs(p, zn if zn > 0.0 else 0.0, zs if zs > 0.0 else 0.0, cur)
        for i in range(6):
            acc = 0.0
            for k in range(3):
                acc += RADAU_A[i // 2, k] * f[2 * k + (i % 2)]
            res[i] = h * acc - z[i]
        dz = np.linalg.solve(m, res)
        z += dz
        d = 0.0
        for k in range(3):
            d += (dz[2 * k] / sn) ** 2 + (dz[2 * k + 1] / ss) ** 2
        if np.sqrt(d / 6.0) < NEWTON_TOL:
            return True, n + z[4], s + z[5]
    return False, n, s


@njit(cache=True, nogil=True)
def integrate_idle(p, cur, t0, t1, n0, s0, rtol, atol_n, atol_s, h_min, h_init):
    """Advance under constant current with Radau IIA and step-doubling control.

    Returns ``(status, n1, s1, h_last, n_accepted, n_rejected)``.
    """
    t = t0
    n = n0
    s = s0
    h = h_init if h_init > 0.0 else 1e-12
    n_acc = 0
    n_rej = 0
    while t < t1:
        hmax = t1 - t
        hh = h if h < hmax else hmax
        lands = hh >= hmax
        sn = atol_n + rtol * abs(n)
        ss = atol_s + rtol * abs(s)
        ok1, fn, fs = radau_step(p, cur, n, s, hh, sn, ss)
        ok2 = False
        if ok1:
            ok2, mn, ms = radau_step(p, cur, n, s, 0.5 * hh, sn, ss)
            if ok2:
                ok2, hn, hs = radau_step(p, cur, mn if mn > 0.0 else 0.0, ms if ms > 0.0 else 0.0,
                                         0.5 * hh, sn, ss)
        if not ok2:
            n_rej += 1
            h = 0.25 * hh
            if h < h_min:
                return UNDERFLOW, n, s, h, n_acc, n_rej
            continue
        sn = atol_n + rtol * max(abs(n), abs(hn))
        ss = atol_s + rtol * max(abs(s), abs(hs))
        # two half steps against one full step: difference is 31/32 of the full-step error
        err = np.sqrt(0.5 * (((hn - fn) / sn) ** 2 + ((hs - fs) / ss) ** 2)) / 31.0
        bad_sign = hn < -atol_n or hs < -atol_s
        if err > 1.0 or bad_sign:
            n_rej += 1
            fac = 0.5 if err <= 1.0 else max(MIN_FACTOR, SAFETY * err ** (-1.0 / 6.0))
            h = hh * fac
            if h < h_min:
                return UNDERFLOW, n, s, h, n_acc, n_rej
            continue
        t = t1 if lands else t + hh
        n = hn if hn > 0.0 else 0.0
        s = hs if hs > 0.0 else 0.0
        n_acc += 1
        fac = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** (-1.0 / 6.0)))
        h = hh * fac if not lands or hh >= h else h
    return OK, n, s, h, n_acc, n_rej

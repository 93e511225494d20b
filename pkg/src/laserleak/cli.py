"""Command-line entry point: ``laserleak <subcommand> [flags]``.

Exit codes: 0 success, 1 domain error, 2 usage error. Subcommand flags
override the matching config keys; ``--show-config`` prints the effective
configuration, which lists every default.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import bb84, leakage, pulses, qkdperf
from .config import RunConfig, default_config_path, parse_config, serialize_config, validate
from .drive import DriveWaveform, Pulse
from .errors import LaserLeakError, ValidationError
from .laser import integrate, li_curve, steady_state
from .report import atomic_write, svg_line_plot, write_csv

SUBCOMMANDS = ("li-curve", "steady", "simulate", "double-pulse", "train", "leakage", "qber", "recommend-bias")


class UsageError(Exception):
    pass


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _float_list(text):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# flag -> (section, config key, type)
_OVERRIDES = {
    "--dc-frac": ("drive", "dc_frac", float),
    "--ac-frac": ("drive", "ac_frac", float),
    "--fwhm-ps": ("drive", "fwhm_ps", float),
    "--dc-fracs": ("experiment", "dc_fracs", _float_list),
    "--intervals-ns": ("experiment", "intervals_ns", _float_list),
    "--clock-mhz": ("experiment", "clock_mhz", float),
    "--slots": ("experiment", "slots", _positive_int),
    "--laser-count": ("experiment", "laser_count", _positive_int),
    "--attenuation-db": ("experiment", "attenuation_db", float),
    "--delay-bin-ps": ("experiment", "delay_bin_ps", float),
    "--energy-bin-pct": ("experiment", "energy_bin_pct", float),
    "--gap-cap": ("experiment", "gap_cap", int),
    "--permutations": ("experiment", "permutations", int),
    "--delay-tol-ps": ("experiment", "delay_tol_ps", float),
    "--energy-tol-pct": ("experiment", "energy_tol_pct", float),
    "--qber-budget": ("experiment", "qber_budget", float),
    "--loss-db": ("experiment", "loss_db", float),
    "--mu": ("experiment", "mu", float),
    "--e-intrinsic": ("experiment", "e_intrinsic", float),
    "--sim-ns": ("experiment", "sim_ns", float),
    "--pulse-starts-ns": ("experiment", "pulse_starts_ns", _float_list),
    "--f3db-ghz": ("experiment", "f3db_ghz", float),
    "--li-max-frac": ("experiment", "li_max_frac", float),
    "--li-points": ("experiment", "li_points", _positive_int),
}

_FLAGS = {
    "li-curve": ("--li-max-frac", "--li-points"),
    "steady": ("--dc-frac",),
    "simulate": ("--dc-frac", "--ac-frac", "--fwhm-ps", "--sim-ns", "--pulse-starts-ns", "--f3db-ghz"),
    "double-pulse": ("--dc-fracs", "--intervals-ns", "--ac-frac", "--fwhm-ps"),
    "train": ("--clock-mhz", "--slots", "--dc-frac", "--ac-frac", "--fwhm-ps", "--attenuation-db",
              "--laser-count"),
    "leakage": ("--delay-bin-ps", "--energy-bin-pct", "--gap-cap", "--permutations", "--delay-tol-ps",
                "--energy-tol-pct"),
    "qber": ("--dc-frac", "--clock-mhz", "--loss-db", "--mu", "--e-intrinsic"),
    "recommend-bias": ("--clock-mhz", "--delay-tol-ps", "--energy-tol-pct", "--qber-budget", "--loss-db",
                       "--mu", "--e-intrinsic", "--ac-frac", "--fwhm-ps"),
}

_HELP = {
    "li-curve": "steady-state L-I curve from 0 to li_max_frac * I_th",
    "steady": "steady state at one DC bias",
    "simulate": "single trajectory for a short pulse sequence",
    "double-pulse": "second-pulse delay shift and energy versus interval",
    "train": "random four-laser BB84 train, per-slot observables",
    "leakage": "gap-class leakage from an observables CSV",
    "qber": "count budget and QBER at one DC bias, or from raw rates",
    "recommend-bias": "lowest DC bias meeting the leakage tolerances, then a QBER check",
}


def _common(suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d(None), metavar="PATH",
                   help="run configuration file (default: the packaged vcsel787.cfg)")
    p.add_argument("--seed", type=_u64, default=d(None), help="u64 seed (default: run.seed of the config)")
    p.add_argument("--out", default=d(None), metavar="DIR", help="output directory (default: run.output_dir)")
    p.add_argument("--threads", type=_positive_int, default=d(1),
                   help="worker threads; affects speed only, never output bytes (default: 1)")
    p.add_argument("--show-config", action="store_true", default=d(False),
                   help="print the effective configuration and exit")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="laserleak", parents=[_common(False)],
                                     description="Laser-diode carrier-memory side channels in BB84 sources.")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[_common(True)], help=_HELP[name], description=_HELP[name])
        for flag in _FLAGS[name]:
            section, key, kind = _OVERRIDES[flag]
            sp.add_argument(flag, type=kind, default=None, dest=key,
                            help=f"overrides {section}.{key}")
        if name == "leakage":
            sp.add_argument("--in", dest="input", required=True, metavar="CSV",
                            help="observables CSV written by 'train'")
        if name == "qber":
            for flag in ("--signal-hz", "--spont-hz", "--dark-hz"):
                sp.add_argument(flag, type=float, default=None,
                                help="raw detected rate; give all three to skip the laser model")
    return parser


def effective_config(args) -> RunConfig:
    cfg = parse_config(args.config or default_config_path())
    drive, exp = {}, {}
    for flag in _FLAGS.get(args.command, ()):
        section, key, _ = _OVERRIDES[flag]
        v = getattr(args, key, None)
        if v is not None:
            (drive if section == "drive" else exp)[key] = v
    cfg = replace(cfg, drive=replace(cfg.drive, **drive), experiment=replace(cfg.experiment, **exp))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    try:
        validate(cfg)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _path(cfg, name):
    return os.path.join(cfg.output_dir, name)


def _detector(e):
    return qkdperf.DetectorModel(e.det_efficiency, e.dark_rate_hz, e.n_detectors)


# ------------------------------------------------------------------ commands

def cmd_li_curve(cfg, args):
    p, e = cfg.laser, cfg.experiment
    grid = np.linspace(0.0, e.li_max_frac * p.i_th, e.li_points)
    curve = li_curve(p, grid)
    write_csv(_path(cfg, "li_curve.csv"), ["I_mA", "P_mW"], ((i * 1e3, w * 1e3) for i, w in curve))
    atomic_write(_path(cfg, "li_curve.svg"), svg_line_plot(
        [("P", [i * 1e3 for i, _ in curve], [w * 1e3 for _, w in curve])],
        title="L-I curve", xlabel="current (mA)", ylabel="power (mW)"))
    print(f"I_th = {p.i_th * 1e3:.6g} mA, N_th = {p.n_th:.6g} m^-3")


def cmd_steady(cfg, args):
    p = cfg.laser
    I = cfg.drive.dc_frac * p.i_th
    op = steady_state(p, I)
    write_csv(_path(cfg, "steady.csv"), ["dc_frac", "I_mA", "N_m3", "Np_m3", "P_mW"],
              [(cfg.drive.dc_frac, I * 1e3, op.N_ss, op.Np_ss, op.P_ss * 1e3)])
    print(f"I = {I * 1e3:.6g} mA: N = {op.N_ss:.6g} m^-3, Np = {op.Np_ss:.6g} m^-3, P = {op.P_ss * 1e3:.6g} mW")


def cmd_simulate(cfg, args):
    p, d, e = cfg.laser, cfg.drive, cfg.experiment
    I_dc = d.dc_frac * p.i_th
    plist = tuple(Pulse(s * 1e-9, d.ac_frac * p.i_th, d.fwhm_ps * 1e-12, d.rise_fall_ps * 1e-12)
                  for s in e.pulse_starts_ns)
    drive = DriveWaveform(I_dc, plist, e.sim_ns * 1e-9)
    op = steady_state(p, I_dc)
    traj = integrate(p, drive, (op.N_ss, op.Np_ss), d.output_dt_ps * 1e-12)
    if e.f3db_ghz > 0:
        traj = pulses.bandwidth_filter(traj, e.f3db_ghz * 1e9)
    traj.to_csv(_path(cfg, "trajectory.csv"))
    t_ns = traj.t * 1e9
    atomic_write(_path(cfg, "trajectory.svg"), svg_line_plot(
        [("power (mW)", t_ns, traj.P * 1e3)], title="Optical output", xlabel="time (ns)", ylabel="power (mW)"))
    window = min([d.window_ps * 1e-12] + [b.start - a.start for a, b in zip(plist, plist[1:])])
    metrics = pulses.segment_pulses(traj, drive, window, baseline=op.P_ss) if plist else []
    write_csv(_path(cfg, "pulses.csv"),
              ["pulse", "injection_ns", "turn_on_delay_ps", "peak_mW", "energy_fJ", "fwhm_ps"],
              ((k, m.injection_time * 1e9, m.turn_on_delay * 1e12, m.peak_power * 1e3, m.energy * 1e15,
                m.fwhm * 1e12) for k, m in enumerate(metrics)))
    for k, m in enumerate(metrics):
        print(f"pulse {k}: delay {m.turn_on_delay * 1e12:.3f} ps, energy {m.energy * 1e15:.4f} fJ")


def cmd_double_pulse(cfg, args):
    p, d, e = cfg.laser, cfg.drive, cfg.experiment
    reports = pulses.double_pulse_sweep(
        p, e.dc_fracs, d.ac_frac * p.i_th, d.fwhm_ps * 1e-12, [x * 1e-9 for x in e.intervals_ns],
        e.block_ns * 1e-9, window=d.window_ps * 1e-12, rise_fall=d.rise_fall_ps * 1e-12,
        output_dt=d.output_dt_ps * 1e-12, threads=args.threads)
    pulses.reports_to_csv(reports, _path(cfg, "double_pulse.csv"))
    for name, svg in pulses.reports_to_svg(reports).items():
        atomic_write(_path(cfg, name), svg)
    for r in reports:
        x = pulses.settling_interval(r.intervals, pulses.asymptotic_energy_deviation(r), 0.025)
        print(f"dc = {r.dc_level:g} I_th: shift at {r.intervals[0] * 1e9:g} ns = {r.delay_shift[0] * 1e12:.2f} ps, "
              f"energy within 2.5 % of the asymptote beyond {x * 1e9:.3g} ns")


def cmd_train(cfg, args):
    p, d, e = cfg.laser, cfg.drive, cfg.experiment
    sched = bb84.random_schedule(cfg.seed, e.clock_mhz * 1e6, e.slots, e.laser_count)
    obs = bb84.simulate_transmitter(
        p, sched, d.dc_frac * p.i_th, d.ac_frac * p.i_th, d.fwhm_ps * 1e-12, e.attenuation_db,
        window=d.window_ps * 1e-12, rise_fall=d.rise_fall_ps * 1e-12, output_dt=d.output_dt_ps * 1e-12,
        threads=args.threads)
    bb84.observables_to_csv(obs, _path(cfg, "observables.csv"))
    mu = np.mean([o.mean_photons for o in obs])
    print(f"{len(obs)} slots, generator {sched.generator} seed {cfg.seed}, mean photons {mu:.6g}")


def cmd_leakage(cfg, args):
    e = cfg.experiment
    obs = bb84.observables_from_csv(args.input)
    rep = leakage.estimate_leakage(obs, e.delay_bin_ps * 1e-12, e.energy_bin_pct / 100, e.gap_cap,
                                   permutations=e.permutations, seed=cfg.seed,
                                   delay_tol=e.delay_tol_ps * 1e-12, energy_tol=e.energy_tol_pct / 100)
    write_csv(_path(cfg, "leakage.csv"), leakage.REPORT_HEADER, [leakage.report_row(rep)])
    atomic_write(_path(cfg, "leakage.txt"), rep.text())
    sys.stdout.write(rep.text())


def cmd_qber(cfg, args):
    p, d, e = cfg.laser, cfg.drive, cfg.experiment
    raw = (args.signal_hz, args.spont_hz, args.dark_hz)
    if any(v is not None for v in raw):
        if any(v is None for v in raw):
            raise UsageError("--signal-hz, --spont-hz and --dark-hz go together")
        q = qkdperf.qber_estimate(*raw, e.e_intrinsic)
        rows = [("", *raw, q)]
    else:
        I_dc = d.dc_frac * p.i_th
        gp = qkdperf.grid_point(p, float(d.dc_frac), float(d.ac_frac), d.fwhm_ps * 1e-12)
        b = qkdperf.count_budget(p, I_dc, gp.pulse_energy, e.clock_mhz * 1e6, e.mu, e.loss_db, _detector(e),
                                 e.laser_count, e.e_intrinsic)
        rows = [(d.dc_frac, b.signal_rate, b.spont_rate, b.dark_rate, b.qber)]
    write_csv(_path(cfg, "qber.csv"), ["dc_frac", "signal_Hz", "spont_Hz", "dark_Hz", "qber"], rows)
    _, s, sp, dk, q = rows[0]
    print(f"signal {s:.6g} Hz, spontaneous {sp:.6g} Hz, dark {dk:.6g} Hz: QBER {q:.6f}")


def cmd_recommend_bias(cfg, args):
    p, d, e = cfg.laser, cfg.drive, cfg.experiment
    table = []
    try:
        rec = qkdperf.recommend_bias(
            p, e.clock_mhz * 1e6, e.delay_tol_ps * 1e-12, e.energy_tol_pct / 100, e.qber_budget, e.loss_db,
            _detector(e), e.mu, ac_frac=d.ac_frac, fwhm=d.fwhm_ps * 1e-12,
            intervals=[x * 1e-9 for x in e.intervals_ns], n_lasers=e.laser_count, e_intrinsic=e.e_intrinsic,
            full_grid=True, table=table)
    finally:
        if table:
            qkdperf.grid_to_csv(table, _path(cfg, "bias_grid.csv"))
    verdict = "feasible" if rec.feasible else "infeasible"
    print(f"{verdict}: {rec.advice}")


_COMMANDS = {
    "li-curve": cmd_li_curve, "steady": cmd_steady, "simulate": cmd_simulate,
    "double-pulse": cmd_double_pulse, "train": cmd_train, "leakage": cmd_leakage,
    "qber": cmd_qber, "recommend-bias": cmd_recommend_bias,
}


def run_subcommand(name, cfg: RunConfig, args) -> int:
    """Run one subcommand with a resolved configuration; returns the exit code."""
    if name not in _COMMANDS:
        print(f"laserleak: unknown subcommand {name!r}", file=sys.stderr)
        return 2
    try:
        _COMMANDS[name](cfg, args)
    except UsageError as exc:
        print(f"laserleak {name}: {exc}", file=sys.stderr)
        return 2
    except (LaserLeakError, ValueError, OSError) as exc:
        print(f"laserleak {name}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = effective_config(args)
    except UsageError as exc:
        print(f"laserleak: {exc}", file=sys.stderr)
        return 2
    except (LaserLeakError, OSError) as exc:
        print(f"laserleak: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.show_config:
        sys.stdout.write(serialize_config(cfg))
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("laserleak: a subcommand is required", file=sys.stderr)
        return 2
    return run_subcommand(args.command, cfg, args)


if __name__ == "__main__":
    sys.exit(main())

"""Delay shift and normalized energy of the second pulse versus interval, at three DC levels.

Writes CSV and SVG figures plus the settling interval of each curve.

    python scripts/double_pulse_sweep.py --out results/sweep
"""
import argparse
from pathlib import Path

from laserleak.params import DEFAULT_PARAMS
from laserleak.pulses import (
    asymptotic_energy_deviation, double_pulse_sweep, reports_to_csv, reports_to_svg, settling_interval,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/sweep"))
    ap.add_argument("--dc", type=float, nargs="+", default=[0.0, 0.6, 0.9])
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    reports = double_pulse_sweep(DEFAULT_PARAMS, args.dc)
    reports_to_csv(reports, args.out / "double_pulse.csv")
    for name, svg in reports_to_svg(reports).items():
        (args.out / name).write_text(svg)
    print(f"{'dc':>5} {'shift@2ns ps':>13} {'E@2ns':>8} {'settle ns':>10}")
    for r in reports:
        ns = [x * 1e9 for x in r.intervals]
        x = settling_interval(ns, asymptotic_energy_deviation(r), 0.025)
        print(f"{r.dc_level:5.2f} {r.delay_shift[0] * 1e12:13.2f} {r.norm_energy[0]:8.4f} {x:10.1f}")


if __name__ == "__main__":
    main()

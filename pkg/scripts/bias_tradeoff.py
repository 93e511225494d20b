"""Recommended DC bias and the resulting QBER across clock rates.

    python scripts/bias_tradeoff.py --clocks 50 100 200 400
"""
import argparse

from laserleak.errors import InfeasibleTolerances
from laserleak.params import DEFAULT_PARAMS as P
from laserleak.qkdperf import DetectorModel, recommend_bias


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--clocks", type=float, nargs="+", default=[50.0, 100.0, 200.0, 400.0])
    ap.add_argument("--delay-tol-ps", type=float, default=1.0)
    ap.add_argument("--energy-tol", type=float, default=1e-3)
    ap.add_argument("--budget", type=float, default=0.03)
    args = ap.parse_args()

    det = DetectorModel()
    for mhz in args.clocks:
        try:
            rec = recommend_bias(P, mhz * 1e6, args.delay_tol_ps * 1e-12, args.energy_tol, args.budget,
                                 18.5, det, 0.6)
        except InfeasibleTolerances as exc:
            print(f"{mhz:6.0f} MHz  no bias on the grid: {exc}")
            continue
        print(f"{mhz:6.0f} MHz  dc {rec.dc_frac:4.2f} I_th  QBER {rec.qber:.4f}  "
              f"{'ok' if rec.feasible else 'over budget'}")


if __name__ == "__main__":
    main()

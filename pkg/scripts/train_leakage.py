"""Random four-laser train at several DC levels, then the gap-class leakage of each.

    python scripts/train_leakage.py --slots 100000 --dc 0 0.3 0.6 0.9
"""
import argparse
import time

from laserleak.bb84 import random_schedule, simulate_transmitter
from laserleak.leakage import estimate_leakage
from laserleak.params import DEFAULT_PARAMS as P


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--slots", type=int, default=20_000)
    ap.add_argument("--clock-mhz", type=float, default=200.0)
    ap.add_argument("--dc", type=float, nargs="+", default=[0.0, 0.3, 0.6, 0.9])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--permutations", type=int, default=50)
    args = ap.parse_args()

    sched = random_schedule(args.seed, args.clock_mhz * 1e6, args.slots)
    print(f"{'dc':>5} {'MI bits':>9} {'z':>8} {'MAP acc':>8} {'tagged':>7} {'sec':>6}")
    for dc in args.dc:
        t0 = time.perf_counter()
        obs = simulate_transmitter(P, sched, dc * P.i_th, 4 * P.i_th, 500e-12, 0.0)
        rep = estimate_leakage(obs, permutations=args.permutations, seed=args.seed)
        print(f"{dc:5.2f} {rep.mi_bits:9.4f} {rep.z_score:8.1f} {rep.classifier_accuracy:8.4f} "
              f"{rep.tagged_fraction:7.4f} {time.perf_counter() - t0:6.1f}")


if __name__ == "__main__":
    main()

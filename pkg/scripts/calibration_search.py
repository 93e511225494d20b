"""Random search over laser parameters for the energy settling interval at dc 0 and 0.6.

Each draw perturbs the defaults log-uniformly; draws with a threshold outside
0.2-20 mA are skipped. Prints one line per draw: settling interval at dc 0 and
dc 0.6 (ns), the worst dc 0.9 deviation, and the first-pulse energy at dc 0.
A star marks draws inside both bands whose dc 0.9 deviation stays below 0.5 %.

    python scripts/calibration_search.py --draws 200 --seed 1
"""
import argparse
import math

import numpy as np

from laserleak.errors import LaserLeakError
from laserleak.params import LaserParams
from laserleak.pulses import asymptotic_energy_deviation, double_pulse_sweep, settling_interval

BOX = {
    "A": (2e7, 2e9), "B": (3e-18, 5e-16), "C": (1e-43, 3e-40), "tau_p": (0.7e-12, 8e-12),
    "g0": (5e4, 5e5), "eps": (1e-24, 5e-23), "beta_sp": (1e-5, 1e-3), "N_tr": (0.8e24, 3e24),
}
INTERVALS = tuple(x * 1e-9 for x in (2, 3, 4, 5, 6, 8, 10, 12, 15, 20, 25, 30, 40, 60))


def settle(r):
    return settling_interval([x * 1e9 for x in r.intervals], asymptotic_energy_deviation(r), 0.025)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--draws", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    hits = 0
    for _ in range(args.draws):
        kw = {k: float(math.exp(rng.uniform(math.log(a), math.log(b)))) for k, (a, b) in BOX.items()}
        try:
            p = LaserParams(**kw)
            if not 0.2e-3 < p.i_th < 20e-3:
                continue
            r0, r6, r9 = double_pulse_sweep(p, (0.0, 0.6, 0.9), intervals=INTERVALS, block=100e-9)
        except LaserLeakError:
            continue
        x0, x6 = settle(r0), settle(r6)
        m9 = max(abs(e - 1) for e in r9.norm_energy)
        ok = 10 <= x0 <= 40 and 5 <= x6 <= 20 and m9 < 5e-3
        hits += ok
        print(f"{'*' if ok else ' '} X0 {x0:6.1f}  X6 {x6:6.1f}  dev9 {m9:.2e}  E1 {r0.first.energy:.2e} J  "
              + " ".join(f"{k}={v:.3g}" for k, v in kw.items()), flush=True)
    print(f"{hits} draws inside both calibration bands with dc 0.9 quiet")


if __name__ == "__main__":
    main()

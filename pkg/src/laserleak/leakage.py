"""How much the per-pulse time position and energy reveal about the gap class.

Mutual information is the plug-in estimate over a 2-D histogram of
(binned delay shift, binned relative energy) against the gap class, with the
Miller-Madow bias correction. A MAP classifier over the same histogram gives
an operational accuracy, and a permutation test supplies the null spread.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamples

MIN_SAMPLES = 10_000
LN2 = math.log(2.0)


@dataclass(frozen=True)
class LeakageReport:
    mi_bits: float
    classifier_accuracy: float
    baseline_accuracy: float
    gap_entropy_bits: float
    tagged_fraction: float
    n_samples: int
    mi_raw_bits: float = 0.0
    perm_mean_bits: float = math.nan
    perm_std_bits: float = math.nan
    n_permutations: int = 0
    degenerate: bool = False

    @property
    def z_score(self) -> float:
        if not self.n_permutations or not self.perm_std_bits > 0:
            return math.inf if self.mi_raw_bits > self.perm_mean_bits else 0.0
        return (self.mi_raw_bits - self.perm_mean_bits) / self.perm_std_bits

    def significant(self, sigmas=3.0) -> bool:
        return self.n_permutations > 0 and self.z_score > sigmas

    def text(self) -> str:
        lines = [
            f"samples               {self.n_samples}",
            f"mutual information    {self.mi_bits:.6f} bits (raw {self.mi_raw_bits:.6f})",
            f"gap-class entropy     {self.gap_entropy_bits:.6f} bits",
            f"MAP accuracy          {self.classifier_accuracy:.4f} (blind guess {self.baseline_accuracy:.4f})",
            f"tagged fraction       {self.tagged_fraction:.4f}",
        ]
        if self.n_permutations:
            lines.append(f"permutation null      {self.perm_mean_bits:.6f} +/- {self.perm_std_bits:.6f} bits "
                         f"({self.n_permutations} shuffles, z = {self.z_score:.1f})")
        if self.degenerate:
            lines.append("observables fall in a single bin: no leakage measurable")
        return "\n".join(lines) + "\n"


REPORT_HEADER = ["n_samples", "mi_bits", "mi_raw_bits", "gap_entropy_bits", "classifier_accuracy",
                 "baseline_accuracy", "tagged_fraction", "perm_mean_bits", "perm_std_bits",
                 "n_permutations", "z_score"]


def report_row(r: LeakageReport):
    z = r.z_score
    return (r.n_samples, r.mi_bits, r.mi_raw_bits, r.gap_entropy_bits, r.classifier_accuracy,
            r.baseline_accuracy, r.tagged_fraction, r.perm_mean_bits, r.perm_std_bits,
            r.n_permutations, z if math.isfinite(z) else 0.0)


def _arrays(obs):
    gap = np.fromiter((o.gap for o in obs), dtype=np.int64, count=len(obs))
    delay = np.fromiter((o.delay_shift for o in obs), dtype=float, count=len(obs))
    energy = np.fromiter((o.energy for o in obs), dtype=float, count=len(obs))
    return gap, delay, energy


def gap_classes(gap, gap_cap):
    """Classes 0..gap_cap-1 for gaps 1..gap_cap-1 and >= gap_cap."""
    return np.minimum(np.asarray(gap), gap_cap) - 1


def observable_bins(delay, energy, delay_bin, energy_bin):
    """Integer label per sample; bins are centred on zero shift and on the median energy."""
    med = np.median(energy)
    rel = energy / med - 1.0 if med > 0 else np.zeros_like(energy)
    db = np.rint(np.asarray(delay) / delay_bin).astype(np.int64)
    eb = np.rint(rel / energy_bin).astype(np.int64)
    _, labels = np.unique(np.stack([db, eb], axis=1), axis=0, return_inverse=True)
    return labels.ravel()


def entropy_bits(counts) -> float:
    c = np.asarray(counts, dtype=float)
    c = c[c > 0]
    p = c / c.sum()
    return float(-(p * np.log2(p)).sum())


def mutual_information(x, y, correct=True) -> float:
    """Plug-in MI (bits) between two integer label arrays, Miller-Madow corrected."""
    x = np.asarray(x)
    y = np.asarray(y)
    n = len(x)
    nx, ny = int(x.max()) + 1, int(y.max()) + 1
    joint = np.bincount(x * ny + y, minlength=nx * ny)
    cx = np.bincount(x, minlength=nx)
    cy = np.bincount(y, minlength=ny)
    mi = entropy_bits(cx) + entropy_bits(cy) - entropy_bits(joint)
    if correct:
        mx, my, mxy = (cx > 0).sum(), (cy > 0).sum(), (joint > 0).sum()
        mi += ((mx - 1) + (my - 1) - (mxy - 1)) / (2.0 * n * LN2)
    return float(mi)


def _map_accuracy(obs_lab, cls, n_cls, rng):
    n = len(cls)
    order = rng.permutation(n)
    halves = (order[: n // 2], order[n // 2:])
    n_obs = int(obs_lab.max()) + 1
    correct = 0
    for train, test in (halves, halves[::-1]):
        table = np.zeros((n_obs, n_cls), dtype=np.int64)
        np.add.at(table, (obs_lab[train], cls[train]), 1)
        prior_mode = int(np.argmax(np.bincount(cls[train], minlength=n_cls)))
        guess = np.argmax(table, axis=1)
        unseen = table.sum(axis=1) == 0
        guess[unseen] = prior_mode
        correct += int((guess[obs_lab[test]] == cls[test]).sum())
    return correct / n


def estimate_leakage(obs, delay_bin=10e-12, energy_bin=0.01, gap_cap=8, *, permutations=0, seed=0,
                     delay_tol=10e-12, energy_tol=0.025, min_samples=MIN_SAMPLES) -> LeakageReport:
    """Leakage of the gap class through binned (delay shift, relative energy)."""
    if delay_bin <= 0 or energy_bin <= 0 or gap_cap < 2:
        raise ValueError("bins must be positive and gap_cap >= 2")
    n = len(obs)
    if n < min_samples:
        raise InsufficientSamples(f"{n} samples, need at least {min_samples}")
    gap, delay, energy = _arrays(obs)
    cls = gap_classes(gap, gap_cap)
    cls_counts = np.bincount(cls, minlength=gap_cap)
    h_gap = entropy_bits(cls_counts)
    baseline = float(cls_counts.max() / n)
    tagged = tagged_fraction(obs, delay_tol, energy_tol)
    lab = observable_bins(delay, energy, delay_bin, energy_bin)
    if lab.max() == 0:
        # single observable bin: independence by construction
        return LeakageReport(0.0, baseline, baseline, h_gap, tagged, n, 0.0, 0.0, 0.0, permutations, True)

    ss = np.random.SeedSequence(seed)
    clf_seed, perm_seed = ss.spawn(2)
    mi_raw = mutual_information(lab, cls)
    acc = _map_accuracy(lab, cls, gap_cap, np.random.Generator(np.random.PCG64(clf_seed)))
    perm_mean = perm_std = math.nan
    if permutations:
        null = permutation_null(lab, cls, permutations, perm_seed)
        perm_mean, perm_std = float(null.mean()), float(null.std(ddof=1)) if permutations > 1 else 0.0
    mi = min(max(mi_raw, 0.0), h_gap)
    return LeakageReport(mi, acc, baseline, h_gap, tagged, n, mi_raw, perm_mean, perm_std, permutations)


def permutation_null(lab, cls, permutations, seed) -> np.ndarray:
    """MI of ``lab`` against shuffled ``cls``; one derived seed per shuffle."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    out = np.empty(permutations)
    for k, child in enumerate(seed.spawn(permutations)):
        rng = np.random.Generator(np.random.PCG64(child))
        out[k] = mutual_information(lab, rng.permutation(cls))
    return out


def tagged_fraction(obs, delay_tol, energy_tol) -> float:
    """Fraction of pulses distinguishable from the large-gap asymptote.

    The asymptotic energy is the median over first firings (which start from
    the DC steady state), or over the longest-gap percentile when the sample
    holds no first firing.
    """
    if delay_tol <= 0 or energy_tol <= 0:
        raise ValueError("tolerances must be positive")
    gap, delay, energy = _arrays(obs)
    if len(gap) == 0:
        return 0.0
    from .bb84 import FIRST_FIRING

    first = gap == FIRST_FIRING
    if first.any():
        e_ref = np.median(energy[first])
    else:
        e_ref = np.median(energy[gap >= np.percentile(gap, 99)])
    dev_e = np.abs(energy / e_ref - 1.0) if e_ref > 0 else np.zeros_like(energy)
    tagged = (np.abs(delay) > delay_tol) | (dev_e > energy_tol)
    return float(tagged.mean())


def geometric_gap_entropy(p: float, terms: int | None = None) -> float:
    """Entropy (bits) of P(g) = p (1-p)^(g-1); closed form or truncated sum."""
    if terms is None:
        if p == 1.0:
            return 0.0
        h = -p * math.log2(p) - (1 - p) * math.log2(1 - p)
        return h / p
    g = np.arange(1, terms + 1)
    pg = p * (1 - p) ** (g - 1)
    pg = pg[pg > 0]
    return float(-(pg * np.log2(pg)).sum())

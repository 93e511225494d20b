import io

import numpy as np
import pytest
from scipy import stats

from laserleak.bb84 import (
    FIRST_FIRING, SlotSchedule, attenuation_for_mu, observables_from_csv, observables_to_csv,
    random_schedule, simulate_transmitter,
)
from laserleak.params import DEFAULT_PARAMS

P = DEFAULT_PARAMS
AC = 4 * P.i_th


def test_single_laser_schedule():
    s = random_schedule(7, 200e6, 50, laser_count=1)
    assert not s.laser_of_slot.any()
    g = s.gaps()
    assert g[0] == FIRST_FIRING and (g[1:] == 1).all()


def test_schedule_is_reproducible():
    a = random_schedule(123, 200e6, 1000)
    b = random_schedule(123, 200e6, 1000)
    c = random_schedule(124, 200e6, 1000)
    assert np.array_equal(a.laser_of_slot, b.laser_of_slot)
    assert not np.array_equal(a.laser_of_slot, c.laser_of_slot)


def test_laser_frequencies_are_binomial():
    n = 1_000_000
    s = random_schedule(2024, 200e6, n)
    counts = np.bincount(s.laser_of_slot, minlength=4)
    sigma = np.sqrt(n * 0.25 * 0.75)
    assert np.all(np.abs(counts - 0.25 * n) < 4 * sigma)


def test_gaps_follow_the_geometric_law():
    s = random_schedule(99, 200e6, 200_000)
    g = s.gaps()
    g = g[g != FIRST_FIRING]
    k = 15
    observed = np.array([(g == i).sum() for i in range(1, k)] + [(g >= k).sum()])
    p = np.array([0.25 * 0.75 ** (i - 1) for i in range(1, k)] + [0.75 ** (k - 1)])
    _, pval = stats.chisquare(observed, p * len(g))
    assert pval > 0.01


def test_bad_schedule_inputs():
    with pytest.raises(ValueError):
        random_schedule(-1, 200e6, 10)
    with pytest.raises(ValueError):
        random_schedule(0, 200e6, 0)
    with pytest.raises(ValueError):
        simulate_transmitter(P, random_schedule(0, 1e9, 10), 0.0, AC, 500e-12, 0.0)


@pytest.fixture(scope="module")
def train200():
    sched = random_schedule(5, 200e6, 4000)
    return sched, simulate_transmitter(P, sched, 0.0, AC, 500e-12, 0.0)


def test_gap_one_differs_from_long_gaps(train200):
    _, obs = train200
    g1 = [o for o in obs if o.gap == 1]
    g4 = [o for o in obs if 4 <= o.gap < FIRST_FIRING]
    assert np.mean([o.delay_shift for o in g1]) < np.mean([o.delay_shift for o in g4]) - 20e-12
    assert np.mean([o.energy for o in g1]) > 1.05 * np.mean([o.energy for o in g4])


def test_observable_invariants(train200):
    sched, obs = train200
    assert [o.slot for o in obs] == list(range(sched.n_slots))
    assert all(o.gap >= 1 and o.mean_photons >= 0 and o.energy > 0 for o in obs)
    first = [o for o in obs if o.gap == FIRST_FIRING]
    assert len(first) == 4
    # a first firing starts from the steady state, like the isolated reference
    assert all(abs(o.delay_shift) < 1e-13 for o in first)


def test_slow_clock_removes_memory():
    sched = random_schedule(3, 5e6, 120)  # 200 ns slots = 20 carrier lifetimes
    obs = simulate_transmitter(P, sched, 0.0, AC, 500e-12, 0.0)
    e = np.array([o.energy for o in obs])
    assert np.max(np.abs([o.delay_shift for o in obs])) < 0.1e-12
    assert np.ptp(e) / e.mean() < 5e-3


def test_attenuation_hits_target_mean_photon_number(train200):
    sched, obs = train200
    mean_e = np.mean([o.energy for o in obs])
    att = attenuation_for_mu(P, mean_e, 0.6)
    obs2 = simulate_transmitter(P, sched, 0.0, AC, 500e-12, att)
    assert np.mean([o.mean_photons for o in obs2]) == pytest.approx(0.6, rel=1e-2)


def test_laser_labels_are_interchangeable():
    sched = random_schedule(11, 200e6, 600)
    perm = np.array([2, 0, 3, 1])
    swapped = SlotSchedule(sched.clock, sched.n_slots, perm[sched.laser_of_slot], sched.seed)
    a = simulate_transmitter(P, sched, 0.0, AC, 500e-12, 0.0)
    b = simulate_transmitter(P, swapped, 0.0, AC, 500e-12, 0.0)
    for x, y in zip(a, b):
        assert y.laser == perm[x.laser]
        assert (x.gap, x.delay_shift, x.energy) == (y.gap, y.delay_shift, y.energy)


def test_laser_sees_only_its_own_gaps():
    sched = random_schedule(12, 200e6, 600)
    lasers = sched.laser_of_slot.copy()
    # reshuffle lasers 1..3 among their slots, keep laser 0 untouched
    others = lasers != 0
    rng = np.random.default_rng(0)
    lasers[others] = rng.integers(1, 4, others.sum())
    alt = SlotSchedule(sched.clock, sched.n_slots, lasers, sched.seed)
    a = simulate_transmitter(P, sched, 0.0, AC, 500e-12, 0.0)
    b = simulate_transmitter(P, alt, 0.0, AC, 500e-12, 0.0)
    for x, y in zip(a, b):
        if x.laser == 0:
            assert (x.delay_shift, x.energy) == (y.delay_shift, y.energy)


def test_threads_do_not_change_output():
    sched = random_schedule(13, 200e6, 800)
    a = simulate_transmitter(P, sched, 0.3 * P.i_th, AC, 500e-12, 10.0, threads=1)
    b = simulate_transmitter(P, sched, 0.3 * P.i_th, AC, 500e-12, 10.0, threads=4)
    assert a == b


def test_streaming_blocks_match_one_block():
    sched = random_schedule(14, 200e6, 400)
    a = simulate_transmitter(P, sched, 0.0, AC, 500e-12, 0.0, block=4096)
    b = simulate_transmitter(P, sched, 0.0, AC, 500e-12, 0.0, block=7)
    for x, y in zip(a, b):
        assert y.delay_shift == pytest.approx(x.delay_shift, abs=1e-15)
        assert y.energy == pytest.approx(x.energy, rel=1e-7)


def test_observables_csv_round_trip(tmp_path, train200):
    _, obs = train200
    path = tmp_path / "obs.csv"
    observables_to_csv(obs[:50], path)
    back = observables_from_csv(path)
    assert [o.gap for o in back] == [o.gap for o in obs[:50]]
    for x, y in zip(obs[:50], back):
        assert y.energy == pytest.approx(x.energy, rel=1e-8)
        assert y.delay_shift == pytest.approx(x.delay_shift, rel=1e-8, abs=1e-24)
    buf = io.StringIO()
    observables_to_csv(obs[:2], buf)
    assert buf.getvalue().startswith("slot,laser,gap,delay_shift_ps,energy_fJ,mean_photons\n")

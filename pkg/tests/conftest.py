import math

import numpy as np
import pytest

from satsched.astro import Epoch, StateVector
from satsched.access import Collect
from satsched.constants import GM_EARTH, R_EARTH_EQ

EPOCH0 = Epoch.from_isoformat("2026-03-21T00:00:00")
SMA_550 = R_EARTH_EQ + 550e3
V_CIRC_550 = math.sqrt(GM_EARTH / SMA_550)
PERIOD_550 = 2.0 * math.pi * math.sqrt(SMA_550 ** 3 / GM_EARTH)


@pytest.fixture
def epoch0():
    return EPOCH0


@pytest.fixture
def circular_equatorial_550():
    return StateVector(EPOCH0, np.array([SMA_550, 0.0, 0.0]),
                       np.array([0.0, V_CIRC_550, 0.0]))


@pytest.fixture
def circular_polar_550():
    return StateVector(EPOCH0, np.array([SMA_550, 0.0, 0.0]),
                       np.array([0.0, 0.0, V_CIRC_550]))


def make_collect(cid, image_id, t_start, duration=10.0, p_start=None, p_end=None):
    """Synthetic collect for planner tests; pointing defaults to +x."""
    if p_start is None:
        p_start = np.array([1.0, 0.0, 0.0])
    if p_end is None:
        p_end = p_start
    return Collect(cid, image_id, Epoch(float(t_start)), Epoch(float(t_start) + duration),
                   np.asarray(p_start, dtype=float), np.asarray(p_end, dtype=float))


def random_collect_instance(rng, n_images, n_collects, span=600.0, duration=10.0,
                            pointing_spread=0.3, reward_span=(1, 5)):
    """Random synthetic planner instance: time-sorted collects plus rewards."""
    starts = np.sort(rng.uniform(0.0, span, size=n_collects))
    collects = []
    for i, s in enumerate(starts):
        image = int(rng.integers(0, n_images))
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        v = u + pointing_spread * rng.normal(size=3)
        v /= np.linalg.norm(v)
        collects.append(make_collect(i, image, s, duration, u, v))
    rewards = {img: float(rng.integers(*reward_span)) for img in range(n_images)}
    return collects, rewards


# ---------------------------------------------------------------------------
# Brute-force oracles shared by the planner and acceptance suites.


def brute_longest_path_weight(collects, rewards, cs):
    """Exhaustive DFS over chains: max cumulative node reward."""
    from satsched.access import slew_feasible

    n = len(collects)
    best = 0.0

    def dfs(last_idx, value):
        nonlocal best
        best = max(best, value)
        start = 0 if last_idx is None else last_idx + 1
        for j in range(start, n):
            c = collects[j]
            if last_idx is not None:
                p = collects[last_idx]
                if c.image_id == p.image_id:
                    continue
                if not slew_feasible(p, c, cs.max_slew_rate):
                    continue
            dfs(j, value + rewards[c.image_id])

    dfs(None, 0.0)
    return best


def brute_milp_optimum(collects, rewards, cs):
    """Enumerate all 2^n selections subject to packing and exclusions."""
    import itertools

    from satsched.access import slew_feasible

    n = len(collects)
    conflict = [0] * n
    for a, b in itertools.combinations(range(n), 2):
        if collects[a].image_id == collects[b].image_id:
            continue
        if not (slew_feasible(collects[a], collects[b], cs.max_slew_rate)
                or slew_feasible(collects[b], collects[a], cs.max_slew_rate)):
            conflict[a] |= 1 << b
            conflict[b] |= 1 << a
    image_mask = {}
    for i, c in enumerate(collects):
        image_mask.setdefault(c.image_id, 0)
        image_mask[c.image_id] |= 1 << i

    best = 0.0
    for mask in range(1 << n):
        ok = all(bin(mask & m).count("1") <= 1 for m in image_mask.values())
        rest = mask
        while rest and ok:
            bit = rest & -rest
            rest ^= bit
            if conflict[bit.bit_length() - 1] & mask:
                ok = False
        if ok:
            value = sum(rewards[collects[i].image_id] for i in range(n) if mask >> i & 1)
            best = max(best, value)
    return best


def brute_best_sequence(collects, rewards, cs):
    """Max unique-image reward over feasible time-ordered sequences."""
    from satsched.access import slew_feasible

    n = len(collects)
    best = 0.0

    def dfs(last, value, images):
        nonlocal best
        best = max(best, value)
        for j in range(n):
            c = collects[j]
            if c.image_id in images:
                continue
            if last is not None:
                if c.t_start.seconds <= last.t_start.seconds:
                    continue
                if not slew_feasible(last, c, cs.max_slew_rate):
                    continue
            dfs(c, value + rewards[c.image_id], images | {c.image_id})

    dfs(None, 0.0, set())
    return best

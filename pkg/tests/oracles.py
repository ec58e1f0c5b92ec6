"""Brute-force reference computations, deliberately independent of the package."""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import product


def min_cut_capacity(node_count, edges, source, sink):
    """Minimum s-t cut by enumerating every subset of the inner nodes."""
    inner = [n for n in range(node_count) if n not in (source, sink)]
    best = math.inf
    for bits in product((0, 1), repeat=len(inner)):
        side = {source} | {n for n, b in zip(inner, bits) if b}
        cap = sum(c for u, v, c in edges if u in side and v not in side)
        best = min(best, cap)
    return best


def max_matching(prefs, capacity):
    """Largest number of students placeable, exploring every choice per student.

    ``prefs``: list of room-id lists; ``capacity``: dict room-id -> seats.
    """
    rooms = sorted(capacity)
    index = {r: i for i, r in enumerate(rooms)}

    @lru_cache(maxsize=None)
    def best(i, left):
        if i == len(prefs):
            return 0
        out = best(i + 1, left)
        for r in prefs[i]:
            j = index[r]
            if left[j] > 0:
                nxt = left[:j] + (left[j] - 1,) + left[j + 1:]
                out = max(out, 1 + best(i + 1, nxt))
        return out

    return best(0, tuple(capacity[r] for r in rooms))


def all_assignments(prefs, capacity):
    """Yield every capacity-respecting assignment as a tuple (room or None per student)."""
    for combo in product(*[[None, *p] for p in prefs]):
        used = {}
        for r in combo:
            if r is not None:
                used[r] = used.get(r, 0) + 1
        if all(used[r] <= capacity[r] for r in used):
            yield combo


def priority(type_weight, affected, impact_sat, age_hours, age_sat_hours):
    impact = affected / impact_sat if affected < impact_sat else 1.0
    age = age_hours / age_sat_hours if age_hours < age_sat_hours else 1.0
    return 0.4 * type_weight + 0.3 * impact + 0.3 * age


def harmonic_c(n):
    """Average unsuccessful BST search length, written out from the definition."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    h = math.log(n - 1) + 0.5772156649
    return 2 * h - 2 * (n - 1) / n

"""Independent brute-force reference implementations used by the tests."""

import itertools
import math

import numpy as np


def discordant_pairs(a, b):
    """Kendall distance by direct pair counting over sequences of items."""
    pa = {x: i for i, x in enumerate(a)}
    pb = {x: i for i, x in enumerate(b)}
    return sum(1 for x, y in itertools.combinations(pa, 2)
               if (pa[x] - pa[y]) * (pb[x] - pb[y]) < 0)


def completions(prefix, c):
    rest = [i for i in range(c) if i not in prefix]
    return [tuple(prefix) + tail for tail in itertools.permutations(rest)]


def hausdorff_naive(a, b, c):
    ca, cb = completions(a, c), completions(b, c)
    d = np.array([[discordant_pairs(x, y) for y in cb] for x in ca])
    return int(max(d.min(axis=1).max(), d.min(axis=0).max()))


def pl_prob_naive(v, prefix):
    """Stagewise product of v_i / sum of remaining weights."""
    v = list(v)
    remaining = set(range(len(v)))
    p = 1.0
    for item in prefix:
        p *= v[item] / sum(v[i] for i in remaining)
        remaining.remove(item)
    return p


def insertion_counts(prefix, mode):
    """V_j: items not yet placed that the mode puts ahead of the j-th listed item."""
    pos = {x: i for i, x in enumerate(mode)}
    placed = set()
    out = []
    for item in prefix:
        out.append(sum(1 for y in mode if y not in placed and pos[y] < pos[item]))
        placed.add(item)
    return out


def mallows_phi_naive(lam, c, k):
    mode = tuple(range(c))
    return sum(math.exp(-lam * sum(insertion_counts(p, mode)))
               for p in itertools.permutations(range(c), k))


def kemeny_objective_naive(lists, mode):
    return sum(sum(insertion_counts(t, mode)) for t in lists)

"""Rankings, top-K lists and Kendall-type distances.

Items are 0-indexed.  Positions are 1-indexed, so ``ranking.position(i)``
is in ``1..C`` and ``ranking.order[0]`` is the item ranked first.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

#: Largest number of lists (or completions) an exhaustive routine may visit.
ENUMERATION_CAP = 10**6
#: Largest universe the completion-based oracles accept.
ORACLE_MAX_C = 8


class DimensionError(ValueError):
    """Objects defined over different universes (or list lengths) were mixed."""


class CapacityError(RuntimeError):
    """An exhaustive computation would exceed its configured size cap."""


@dataclass(frozen=True)
class TopKList:
    """The first ``k`` items of a ranking over ``universe_size`` items."""

    prefix: tuple[int, ...]
    universe_size: int

    def __post_init__(self):
        prefix = tuple(int(i) for i in self.prefix)
        object.__setattr__(self, "prefix", prefix)
        c = int(self.universe_size)
        object.__setattr__(self, "universe_size", c)
        if not 1 <= len(prefix) <= c:
            raise ValueError(f"need 1 <= K <= C, got K={len(prefix)}, C={c}")
        if len(set(prefix)) != len(prefix):
            raise ValueError(f"repeated item in top-K list {prefix}")
        if min(prefix) < 0 or max(prefix) >= c:
            raise ValueError(f"item index out of range 0..{c - 1}: {prefix}")

    @property
    def k(self) -> int:
        return len(self.prefix)

    def __len__(self) -> int:
        return len(self.prefix)

    def positions(self) -> dict[int, int]:
        """Map listed item -> 1-based position."""
        return {item: pos + 1 for pos, item in enumerate(self.prefix)}

    def unlisted(self) -> list[int]:
        listed = set(self.prefix)
        return [i for i in range(self.universe_size) if i not in listed]

    def completions(self) -> Iterator["Ranking"]:
        """All full rankings whose first K items are this list."""
        rest = self.unlisted()
        if math.factorial(len(rest)) > ENUMERATION_CAP:
            raise CapacityError(f"{math.factorial(len(rest))} completions exceed cap")
        for tail in itertools.permutations(rest):
            yield Ranking(self.prefix + tail)

    def truncate(self, k: int) -> "TopKList":
        if k > self.k:
            raise DimensionError(f"cannot extend a top-{self.k} list to top-{k}")
        return TopKList(self.prefix[:k], self.universe_size)

    def to_ranking(self) -> "Ranking":
        """Complete the list by appending unlisted items in index order."""
        return Ranking(self.prefix + tuple(self.unlisted()))


@dataclass(frozen=True)
class Ranking:
    """A full ranking: ``order[p]`` is the item at (0-based) position ``p``."""

    order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        object.__setattr__(self, "order", order)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"not a permutation of 0..{len(order) - 1}: {order}")

    @classmethod
    def identity(cls, c: int) -> "Ranking":
        return cls(tuple(range(c)))

    @property
    def size(self) -> int:
        return len(self.order)

    def __len__(self) -> int:
        return len(self.order)

    def position(self, item: int) -> int:
        """1-based position of ``item``."""
        return self.order.index(item) + 1

    def item_at(self, position: int) -> int:
        """Item at the 1-based ``position`` (the inverse of :meth:`position`)."""
        return self.order[position - 1]

    def positions(self) -> np.ndarray:
        """Array ``p`` with ``p[i]`` the 1-based position of item ``i``."""
        pos = np.empty(self.size, dtype=np.int64)
        pos[list(self.order)] = np.arange(1, self.size + 1)
        return pos

    def top(self, k: int) -> TopKList:
        return TopKList(self.order[:k], self.size)


def as_topk(obj: Ranking | TopKList) -> TopKList:
    if isinstance(obj, TopKList):
        return obj
    return obj.top(obj.size)


def _check_same(a_c: int, b_c: int, a_k: int | None = None, b_k: int | None = None):
    if a_c != b_c:
        raise DimensionError(f"universe sizes differ: {a_c} vs {b_c}")
    if a_k != b_k:
        raise DimensionError(f"list lengths differ: {a_k} vs {b_k}")


def kendall_distance(a: Ranking, b: Ranking) -> int:
    """Number of item pairs ordered one way by ``a`` and the other by ``b``."""
    _check_same(a.size, b.size)
    pa, pb = a.positions(), b.positions()
    da = np.sign(pa[:, None] - pa[None, :])
    db = np.sign(pb[:, None] - pb[None, :])
    return int(np.count_nonzero(da * db < 0) // 2)


@functools.lru_cache(maxsize=None)
def _full_distance_matrix(c: int) -> np.ndarray:
    """Kendall distances between all ``c!`` rankings in lexicographic order."""
    if c > ORACLE_MAX_C:
        raise CapacityError(f"oracle limited to C <= {ORACLE_MAX_C}")
    perms = np.array(list(itertools.permutations(range(c))), dtype=np.int64).reshape(-1, c)
    pos = np.argsort(perms, axis=1)
    i, j = np.triu_indices(c, 1)
    signs = np.sign(pos[:, i] - pos[:, j]).astype(np.int64)
    d = (len(i) - signs @ signs.T) // 2
    d.setflags(write=False)
    return d


def hausdorff_topk_table(c: int, k: int) -> np.ndarray:
    """Oracle distances between all top-K lists, indexed as :func:`enumerate_topk`.

    Lexicographically ordered permutations sharing a K-prefix form contiguous
    blocks of ``(c-k)!`` completions, so the max-min reductions run blockwise.
    """
    if not 1 <= k <= c:
        raise ValueError(f"need 1 <= K <= C, got K={k}, C={c}")
    d = _full_distance_matrix(c)
    m = math.factorial(c - k)
    n = d.shape[0] // m
    blocks = d.reshape(n, m, n, m)
    a_to_b = blocks.min(axis=3).max(axis=1)
    b_to_a = blocks.min(axis=1).max(axis=2)
    return np.maximum(a_to_b, b_to_a)


def _lex_index(t: TopKList) -> int:
    """Index of ``t`` in the lexicographic order of :func:`enumerate_topk`."""
    remaining = list(range(t.universe_size))
    idx = 0
    for p, item in enumerate(t.prefix):
        r = remaining.index(item)
        idx += r * math.perm(t.universe_size - p - 1, t.k - p - 1)
        remaining.pop(r)
    return idx


def hausdorff_topk_oracle(a: TopKList, b: TopKList) -> int:
    """Hausdorff distance between the completion sets of two top-K lists.

    Brute force over all completions; the reference for
    :func:`kendall_topk_distance` on small universes.
    """
    _check_same(a.universe_size, b.universe_size, a.k, b.k)
    c, k = a.universe_size, a.k
    d = _full_distance_matrix(c)
    m = math.factorial(c - k)
    ia, ib = _lex_index(a) * m, _lex_index(b) * m
    sub = d[ia:ia + m, ib:ib + m]
    return int(max(sub.min(axis=1).max(), sub.min(axis=0).max()))


def kendall_topk_distance(a: TopKList, b: TopKList) -> int:
    """Closed-form Hausdorff Kendall distance between two top-K lists.

    With ``shared`` the items listed by both, ``only_a`` the items listed
    only by ``a`` and ``only_b`` those listed only by ``b``::

        d = discordant(shared) + m (C + K - (m - 1)/2)
            - sum_{i in only_a} pos_a(i) - sum_{i in only_b} pos_b(i)

    where ``m = |only_a| = |only_b|``.
    """
    _check_same(a.universe_size, b.universe_size, a.k, b.k)
    c, k = a.universe_size, a.k
    pos_a, pos_b = a.positions(), b.positions()
    shared = [i for i in a.prefix if i in pos_b]
    only_a = [i for i in a.prefix if i not in pos_b]
    only_b = [i for i in b.prefix if i not in pos_a]
    discordant = 0
    for x, y in itertools.combinations(shared, 2):
        if (pos_a[x] - pos_a[y]) * (pos_b[x] - pos_b[y]) < 0:
            discordant += 1
    m = len(only_a)
    twice = 2 * discordant + m * (2 * (c + k) - (m - 1))
    twice -= 2 * (sum(pos_a[i] for i in only_a) + sum(pos_b[i] for i in only_b))
    return twice // 2


def validate_scores(scores: Sequence[float]) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("score vector must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(s)):
        raise ValueError("score vector has non-finite entries")
    return s


def ranking_from_scores(scores: Sequence[float]) -> Ranking:
    """Sort items by descending score, ties by ascending index."""
    s = validate_scores(scores)
    # lexsort uses the last key as primary
    order = np.lexsort((np.arange(s.size), -s))
    return Ranking(tuple(order))


def borda_mean_ranking(rankings: Sequence[Ranking | TopKList]) -> Ranking:
    """Order items by ascending mean position over ``rankings``.

    Items missing from a top-K list are assigned the mean of the
    unoccupied positions ``K+1..C``.
    """
    if len(rankings) == 0:
        raise ValueError("borda_mean_ranking needs at least one ranking")
    lists = [as_topk(r) for r in rankings]
    c = lists[0].universe_size
    total = np.zeros(c)
    for t in lists:
        if t.universe_size != c:
            raise DimensionError("rankings over different universes")
        pos = np.full(c, (t.k + 1 + c) / 2.0)
        pos[list(t.prefix)] = np.arange(1, t.k + 1)
        total += pos
    mean = total / len(lists)
    return Ranking(tuple(np.lexsort((np.arange(c), mean))))


def count_topk(c: int, k: int) -> int:
    return math.perm(c, k)


def enumerate_topk(c: int, k: int, cap: int = ENUMERATION_CAP) -> Iterator[TopKList]:
    """Yield every top-K list over ``c`` items in lexicographic order."""
    if not 1 <= k <= c:
        raise ValueError(f"need 1 <= K <= C, got K={k}, C={c}")
    n = count_topk(c, k)
    if n > cap:
        raise CapacityError(f"{n} top-{k} lists over {c} items exceed cap {cap}")
    for prefix in itertools.permutations(range(c), k):
        yield TopKList(prefix, c)


def enumerate_rankings(c: int, cap: int = ENUMERATION_CAP) -> Iterator[Ranking]:
    for t in enumerate_topk(c, c, cap):
        yield Ranking(t.prefix)

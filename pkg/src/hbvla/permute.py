"""Column reordering that minimizes within-pair high-pass energy.

The high-pass energy of a one-level Haar transform equals one quarter of
the summed squared distances between the two columns of each stride-2
window, so a good ordering is one that (1) pairs similar columns and
(2) chains the pairs so consecutive pairs stay close.  The greedy
procedure here does exactly that; an exhaustive minimum perfect matching
is provided as a validation oracle for small instances.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, SizeLimitError

_ORACLE_MAX = 12


@dataclass(frozen=True)
class ColumnOrdering:
    """Permutation over columns; ``order[i]`` is the source column placed
    at position i.  ``self_paired`` marks the odd-m leftover column, which
    is always placed last so real pairs stay aligned to Haar windows."""

    order: np.ndarray
    m: int
    self_paired: int | None = None

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.int64)
        object.__setattr__(self, "order", order)
        if not np.array_equal(np.sort(order), np.arange(self.m)):
            raise ValueError(f"order is not a bijection on 0..{self.m - 1}")


@dataclass(frozen=True)
class DistanceTable:
    """Symmetric squared-distance matrix between columns, with optional
    top-K nearest-neighbor lists (ascending by distance)."""

    m: int
    d: np.ndarray
    neighbor_lists: np.ndarray | None = None


def identity_ordering(m: int) -> ColumnOrdering:
    self_paired = m - 1 if m % 2 else None
    return ColumnOrdering(np.arange(m, dtype=np.int64), m, self_paired)


def pairwise_distances(w: np.ndarray, k: int | None = None) -> DistanceTable:
    """Squared Euclidean distances between all column pairs.

    Uses the Gram-matrix expansion; the diagonal is clamped to exact zero
    and tiny negative round-off is clipped.
    """
    w = np.asarray(w, dtype=np.float64)
    m = w.shape[1]
    if m < 2:
        raise DegenerateInputError("need at least 2 columns")
    if k is not None and k >= m:
        raise ConfigurationError(f"K={k} must be < number of columns {m}")
    sq = np.sum(w * w, axis=0)
    d = sq[:, None] + sq[None, :] - 2.0 * (w.T @ w)
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    d = 0.5 * (d + d.T)
    neighbors = None
    if k is not None:
        # Stable ascending sort on (distance, index); drop self.
        full = np.argsort(d, axis=1, kind="stable")
        neighbors = np.empty((m, k), dtype=np.int64)
        for i in range(m):
            row = full[i][full[i] != i]
            neighbors[i] = row[:k]
    return DistanceTable(m, d, neighbors)


def greedy_pair_and_chain(dist: DistanceTable,
                          seed_norms: np.ndarray) -> ColumnOrdering:
    """Two-phase greedy ordering.

    Pairing: repeatedly take the unused column with the largest seed norm
    and match it to its nearest unused candidate (restricted to the top-K
    neighbor list when present, falling back to all unused columns when
    the restriction is empty).  Odd m leaves one self-paired column.

    Chaining: start from the first pair formed, then repeatedly append the
    remaining pair with an endpoint closest to the current tail, entering
    through that endpoint.  Ties keep the earlier pair and the original
    orientation.  The self-paired column, if any, goes last.
    """
    m = dist.m
    norms = np.asarray(seed_norms, dtype=np.float64)
    if norms.shape != (m,):
        raise ConfigurationError(f"seed_norms must have length {m}")
    d = dist.d
    priority = np.lexsort((np.arange(m), -norms))

    unused = np.ones(m, dtype=bool)
    pairs: list[tuple[int, int]] = []
    self_paired: int | None = None
    for i in priority:
        if not unused[i]:
            continue
        unused[i] = False
        if not unused.any():
            self_paired = int(i)
            break
        if dist.neighbor_lists is not None:
            cand = dist.neighbor_lists[i]
            cand = cand[unused[cand]]
            if cand.size == 0:
                cand = np.flatnonzero(unused)
        else:
            cand = np.flatnonzero(unused)
        j = int(cand[np.argmin(d[i, cand])])
        unused[j] = False
        pairs.append((int(i), j))

    if not pairs:  # m == 1 is rejected upstream; m == 2 always pairs
        return ColumnOrdering(np.array([self_paired], dtype=np.int64), m,
                              self_paired)

    order = [pairs[0][0], pairs[0][1]]
    tail = pairs[0][1]
    remaining = pairs[1:]
    while remaining:
        best_idx = 0
        best_key = np.inf
        for idx, (x, y) in enumerate(remaining):
            key = min(d[tail, x], d[tail, y])
            if key < best_key:
                best_key = key
                best_idx = idx
        u, v = remaining.pop(best_idx)
        if d[tail, u] > d[tail, v]:
            u, v = v, u
        order.extend((u, v))
        tail = v
    if self_paired is not None:
        order.append(self_paired)
    return ColumnOrdering(np.array(order, dtype=np.int64), m, self_paired)


def pairing_cost(dist: DistanceTable, ordering: ColumnOrdering) -> float:
    """Sum of within-window distances for an ordering (self-pair excluded)."""
    order = ordering.order
    total = 0.0
    for k in range(ordering.m // 2):
        total += dist.d[order[2 * k], order[2 * k + 1]]
    return float(total)


def optimal_pairing_oracle(dist: DistanceTable):
    """Exhaustive minimum-cost perfect matching over column pairs.

    Enumerates all (m-1)!! matchings, so m is capped at 12.  Odd m is
    padded with a virtual node at zero distance from everything.  Ties are
    broken toward the lexicographically smallest pairing.
    """
    m = dist.m
    if m > _ORACLE_MAX:
        raise SizeLimitError(f"oracle limited to m <= {_ORACLE_MAX}, got {m}")
    n = m + (m % 2)

    def cost(i: int, j: int) -> float:
        if i >= m or j >= m:
            return 0.0
        return float(dist.d[i, j])

    best_cost = np.inf
    best_pairs: list[tuple[int, int]] | None = None

    def recurse(unused: list[int], acc: list[tuple[int, int]], total: float):
        nonlocal best_cost, best_pairs
        if not unused:
            if total < best_cost:
                best_cost = total
                best_pairs = list(acc)
            return
        i = unused[0]
        rest = unused[1:]
        for pos, j in enumerate(rest):
            acc.append((i, j))
            recurse(rest[:pos] + rest[pos + 1 :], acc, total + cost(i, j))
            acc.pop()

    recurse(list(range(n)), [], 0.0)
    pairing = {(i, j) for i, j in best_pairs if i < m and j < m}
    return pairing, float(best_cost)


def apply_ordering(w: np.ndarray, ordering: ColumnOrdering) -> np.ndarray:
    """Gather columns: result[:, i] = w[:, order[i]]."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape[1] != ordering.m:
        raise ConfigurationError(
            f"ordering is over {ordering.m} columns, matrix has {w.shape[1]}"
        )
    return w[:, ordering.order]


def invert_ordering(ordering: ColumnOrdering) -> ColumnOrdering:
    inv = np.empty(ordering.m, dtype=np.int64)
    inv[ordering.order] = np.arange(ordering.m)
    return ColumnOrdering(inv, ordering.m)

"""Server-side aggregation: accumulate reports into a binary tree of sums
and turn prefix covers of that tree into debiased marginal estimates."""

import numpy as np

from .client import is_power_of_two, level_count
from .core import scale_factor
from .errors import InvalidParameterError, MalformedReportError


class SumTree:
    """Balanced binary tree of report sums over a horizon of d leaves.

    Level h (1 = leaves) has d / 2^(h-1) nodes; node (h, j) covers
    timesteps [(j-1) * 2^(h-1) + 1, j * 2^(h-1)]. Storage is one flat
    int64 array of 2d - 1 zeros-initialized cells, so nodes no report ever
    touches stay zero and lookups are O(1).
    """

    def __init__(self, d):
        if not is_power_of_two(d):
            raise InvalidParameterError(f"horizon must be a power of two, got {d}")
        self.d = int(d)
        self.levels = level_count(self.d)
        sizes = [self.d >> (h - 1) for h in range(1, self.levels + 1)]
        self._offsets = np.concatenate(([0], np.cumsum(sizes[:-1]))).astype(np.int64)
        self.values = np.zeros(2 * self.d - 1, dtype=np.int64)

    def _index(self, h, j):
        if not 1 <= h <= self.levels:
            raise MalformedReportError(f"level {h} outside [1, {self.levels}]")
        width = self.d >> (h - 1)
        if not 1 <= j <= width:
            raise MalformedReportError(f"node index {j} outside [1, {width}] at level {h}")
        return int(self._offsets[h - 1]) + int(j) - 1

    def node(self, h, j):
        return int(self.values[self._index(h, j)])

    def add_report(self, h, t, u):
        if not (1 <= t <= self.d):
            raise MalformedReportError(f"timestep {t} outside [1, {self.d}]")
        if t % (1 << (h - 1)) != 0:
            raise MalformedReportError(
                f"timestep {t} not divisible by the level-{h} period"
            )
        if u not in (-1, 1):
            raise MalformedReportError(f"report value must be -1 or +1, got {u}")
        self.values[self._index(h, int(t) >> (int(h) - 1))] += int(u)

    def merge(self, other):
        """Nodewise sum with another tree over the same horizon (in place)."""
        if not isinstance(other, SumTree) or other.d != self.d:
            raise InvalidParameterError("can only merge trees over the same horizon")
        self.values += other.values
        return self

    def level(self, h):
        """Read-only view of all node values at one level."""
        lo = self._index(h, 1)
        return self.values[lo: lo + (self.d >> (h - 1))]


def accumulate(reports, d):
    """Fold an iterable of Report objects into a SumTree; order-independent."""
    tree = SumTree(d)
    for r in reports:
        tree.add_report(int(r.level), int(r.t), int(r.u))
    return tree


def accumulate_arrays(h, t, u, d):
    """Vectorized accumulate for reports held as parallel arrays."""
    h = np.asarray(h, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    u = np.asarray(u, dtype=np.int64)
    tree = SumTree(d)
    if len(h) == 0:
        return tree
    if np.any((h < 1) | (h > tree.levels)):
        raise MalformedReportError("report level outside the tree")
    if np.any((t < 1) | (t > tree.d)):
        raise MalformedReportError("report timestep outside the horizon")
    if np.any(t % (1 << (h - 1)) != 0):
        raise MalformedReportError("report timestep not divisible by its level period")
    if np.any((u != 1) & (u != -1)):
        raise MalformedReportError("report values must be -1 or +1")
    idx = tree._offsets[h - 1] + (t >> (h - 1)) - 1
    np.add.at(tree.values, idx, u)
    return tree


def dyadic_cover(t, d):
    """Canonical set of tree nodes whose leaf ranges partition [1, t].

    Follows the binary representation of t msb-first: each set bit 2^b
    contributes the level-(b+1) node starting right after the span covered
    so far. The result has popcount(t) nodes, at most log2(d).
    """
    if not is_power_of_two(d):
        raise InvalidParameterError(f"horizon must be a power of two, got {d}")
    if not (1 <= t <= d):
        raise InvalidParameterError(f"timestep {t} outside [1, {d}]")
    t = int(t)
    nodes = []
    covered = 0
    for b in range(t.bit_length() - 1, -1, -1):
        width = 1 << b
        if t & width:
            nodes.append((b + 1, covered // width + 1))
            covered += width
    return tuple(nodes)


def dyadic_cover_merge(t, d, rng=None):
    """Literal pairwise-merge construction of the prefix cover.

    Starts from the first t leaves and repeatedly replaces a sibling pair by
    its parent until no pair remains. Kept as an independent oracle for the
    closed-form `dyadic_cover`; pass an rng to randomize which mergeable
    pair is picked at each step and check order-independence. Each node
    merges at most once, so the worklist makes a run O(t).
    """
    if not is_power_of_two(d):
        raise InvalidParameterError(f"horizon must be a power of two, got {d}")
    if not (1 <= t <= d):
        raise InvalidParameterError(f"timestep {t} outside [1, {d}]")
    cover = {(1, j) for j in range(1, int(t) + 1)}
    worklist = list(cover)
    while worklist:
        pick = len(worklist) - 1 if rng is None else int(rng.integers(0, len(worklist)))
        h, j = worklist.pop(pick)
        if (h, j) not in cover:
            continue
        sibling = j - 1 if j % 2 == 0 else j + 1
        if (h, sibling) not in cover:
            continue
        cover.remove((h, j))
        cover.remove((h, sibling))
        parent = (h + 1, max(j, sibling) // 2)
        cover.add(parent)
        worklist.append(parent)
    return cover


def cover_leaf_range(h, j):
    """Inclusive timestep interval [lo, hi] covered by node (h, j)."""
    width = 1 << (int(h) - 1)
    return ((int(j) - 1) * width + 1, int(j) * width)


def estimate_marginals(tree, epsilon, k, d):
    """Debiased running-count estimates for every timestep.

    Each estimate sums the tree nodes of the prefix cover and rescales by
    scale_factor(eps) * k * (log2 d + 1): the randomized-response debiasing
    times the inverse probabilities of the client-side change and level
    sampling. The level weight is the number of levels actually sampled
    (log2 d + 1), which is what makes the estimator unbiased; at d = 1 it
    is 1, so the degenerate horizon needs no special case.
    """
    if not isinstance(tree, SumTree):
        raise InvalidParameterError("expected a SumTree")
    if tree.d != d:
        raise InvalidParameterError(f"tree horizon {tree.d} does not match d={d}")
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise InvalidParameterError(f"change budget must be a positive integer, got {k}")
    weight = scale_factor(epsilon) * int(k) * level_count(d)
    estimates = np.empty(d, dtype=np.float64)
    for t in range(1, d + 1):
        total = 0
        for h, j in dyadic_cover(t, d):
            total += tree.values[tree._index(h, j)]
        estimates[t - 1] = weight * total
    return estimates

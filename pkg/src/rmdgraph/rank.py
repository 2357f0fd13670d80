"""Nearest-neighbour statistic G and density ranks.

The rank of a point is the fraction of points whose G statistic is at least
as large as its own.  Since G is a nearest-neighbour distance average, a
large rank means a small G and therefore high local density.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .dataset import DataSet
from .errors import DataError

# Extra neighbours fetched beyond k so that distance ties at the k-th
# position can be detected without a brute-force pass.
_TIE_MARGIN = 8


def _points(x) -> np.ndarray:
    if isinstance(x, DataSet):
        return x.points
    a = np.asarray(x, dtype=float)
    return a[:, None] if a.ndim == 1 else a


@dataclass(frozen=True)
class NeighborIndex:
    """Sorted Euclidean neighbour lists.

    ``distances[i, j]`` is the distance from query ``i`` to its ``(j+1)``-th
    nearest reference point and ``indices[i, j]`` that point's index.  Ties in
    distance are ordered by reference index.
    """

    distances: np.ndarray
    indices: np.ndarray
    self_excluded: bool

    @property
    def max_k(self) -> int:
        return self.distances.shape[1]


def _brute_rows(q: np.ndarray, r: np.ndarray, rows: np.ndarray, k: int, exclude_self: bool):
    d_out = np.empty((len(rows), k))
    i_out = np.empty((len(rows), k), dtype=np.int64)
    ref_idx = np.arange(len(r))
    for out, i in enumerate(rows):
        dist = np.sqrt(((r - q[i]) ** 2).sum(axis=1))
        idx = ref_idx
        if exclude_self:
            keep = ref_idx != i
            dist, idx = dist[keep], idx[keep]
        order = np.lexsort((idx, dist))[:k]
        d_out[out] = dist[order]
        i_out[out] = idx[order]
    return d_out, i_out


def knn_distances(queries, references, max_k: int, exclude_self: bool | None = None) -> NeighborIndex:
    """Exact ``max_k`` nearest neighbours of every query among the references.

    When ``exclude_self`` is None it defaults to True iff ``queries`` and
    ``references`` are the same object; query ``i`` is then never its own
    neighbour (duplicates of it still are, at distance zero).
    """
    if exclude_self is None:
        exclude_self = queries is references
    q = _points(queries)
    r = _points(references)
    m = len(r)
    avail = m - 1 if exclude_self else m
    if max_k < 1 or max_k > avail:
        raise DataError(f"max_k={max_k} out of range: {avail} reference points available")
    if exclude_self and len(q) != m:
        raise DataError("self exclusion requires queries and references to coincide")

    fetch = min(m, max_k + int(exclude_self) + _TIE_MARGIN)
    tree = cKDTree(r)
    dist, idx = tree.query(q, k=fetch)
    dist = np.asarray(dist, dtype=float).reshape(len(q), fetch)
    idx = np.asarray(idx, dtype=np.int64).reshape(len(q), fetch)
    order = np.lexsort((idx, dist), axis=-1)
    dist = np.take_along_axis(dist, order, axis=1)
    idx = np.take_along_axis(idx, order, axis=1)

    if exclude_self:
        own = idx == np.arange(len(q))[:, None]
        found = own.any(axis=1)
        # drop self where retrieved, otherwise the last column
        drop = np.where(found, own.argmax(axis=1), fetch - 1)
        keep = np.ones_like(own)
        keep[np.arange(len(q)), drop] = False
        dist = dist[keep].reshape(len(q), fetch - 1)
        idx = idx[keep].reshape(len(q), fetch - 1)
        suspect = ~found
    else:
        suspect = np.zeros(len(q), dtype=bool)

    if fetch < m:
        # a tie straddling the fetched boundary could hide a lower-index neighbour
        suspect |= dist[:, max_k - 1] >= dist[:, -1]
    dist, idx = dist[:, :max_k].copy(), idx[:, :max_k].copy()
    rows = np.flatnonzero(suspect)
    if len(rows):
        dist[rows], idx[rows] = _brute_rows(q, r, rows, max_k, exclude_self)
    return NeighborIndex(dist, idx, bool(exclude_self))


def g_window(l: int, weighted: bool) -> tuple[int, int]:
    """1-based inclusive range of neighbour orders averaged by G."""
    if weighted:
        return l - (l - 1) // 2, l + l // 2
    return l + 1, 2 * l


def g_statistic(dists, l: int, weighted: bool = False, d: int = 1) -> np.ndarray | float:
    """Average of the (l+1)-th..2l-th nearest-neighbour distances.

    ``dists`` is one sorted distance row or a matrix of rows.  With
    ``weighted=True`` the window is centred on the l-th neighbour and each
    distance is scaled by ``(l / i) ** (1 / d)``.
    """
    if l < 1:
        raise DataError("l must be at least 1")
    a = np.asarray(dists, dtype=float)
    row = a.ndim == 1
    a = np.atleast_2d(a)
    if a.shape[1] < 2 * l:
        raise DataError(f"G needs at least 2l={2 * l} neighbour distances, got {a.shape[1]}")
    lo, hi = g_window(l, weighted)
    window = a[:, lo - 1:hi]
    if weighted:
        orders = np.arange(lo, hi + 1, dtype=float)
        window = window * (l / orders) ** (1.0 / d)
    g = window.sum(axis=1) / l
    return float(g[0]) if row else g


@dataclass(frozen=True)
class RankEstimate:
    """Per-point ranks averaged over ``B`` random half-split rounds.

    ``round_ranks`` and ``g_values`` are n x B; entry ``[i, b]`` is point i's
    rank and G statistic in round b.
    """

    ranks: np.ndarray
    g_values: np.ndarray
    round_ranks: np.ndarray
    l: int
    B: int
    weighted: bool
    seed: int

    @property
    def mean_g(self) -> np.ndarray:
        return self.g_values.mean(axis=1)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "rank", "mean_g"])
            for i, (r, g) in enumerate(zip(self.ranks, self.mean_g)):
                w.writerow([i, repr(float(r)), repr(float(g))])


def rank_within(g_ranked: np.ndarray, g_pool: np.ndarray) -> np.ndarray:
    """Fraction of ``g_pool`` entries >= each value of ``g_ranked``."""
    pool = np.sort(g_pool)
    below = np.searchsorted(pool, g_ranked, side="left")
    return (len(pool) - below) / len(pool)


def _splits(n: int, B: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(B):
        perm = rng.permutation(n)
        yield perm[: n // 2], perm[n // 2:]


def compute_ranks(data, l: int = 30, B: int = 5, seed: int = 0, weighted: bool = False) -> RankEstimate:
    """U-statistic rank estimate.

    Each round splits the sample into two random halves.  A point's G is
    computed against the opposite half, and its round rank is the fraction of
    its own half whose G is at least as large.  Final ranks average the B
    rounds.
    """
    pts = _points(data)
    n, d = pts.shape
    if n < 4 * l:
        raise DataError(f"rank computation needs n >= 4l = {4 * l}, got n={n}")
    if B < 1:
        raise DataError("B must be at least 1")
    lo, hi = g_window(l, weighted)
    g = np.empty((n, B))
    rr = np.empty((n, B))
    for b, (h0, h1) in enumerate(_splits(n, B, seed)):
        for ranked, ref in ((h0, h1), (h1, h0)):
            nb = knn_distances(pts[ranked], pts[ref], hi, exclude_self=False)
            gv = g_statistic(nb.distances, l, weighted, d)
            g[ranked, b] = gv
            rr[ranked, b] = rank_within(gv, gv)
    return RankEstimate(rr.mean(axis=1), g, rr, l, B, weighted, seed)


def rank_queries(data, queries, l: int = 30, B: int = 5, seed: int = 0, weighted: bool = False) -> np.ndarray:
    """Ranks of out-of-sample query points against ``data``.

    Uses the same half splits as :func:`compute_ranks` with the same seed: in
    each round and orientation the query's G against one half is compared with
    the G values of the other half's points against that same half.
    """
    pts = _points(data)
    qs = _points(queries)
    n, d = pts.shape
    if n < 4 * l:
        raise DataError(f"rank computation needs n >= 4l = {4 * l}, got n={n}")
    lo, hi = g_window(l, weighted)
    acc = np.zeros(len(qs))
    for h0, h1 in _splits(n, B, seed):
        for ranked, ref in ((h0, h1), (h1, h0)):
            g_pool = g_statistic(knn_distances(pts[ranked], pts[ref], hi, exclude_self=False).distances, l, weighted, d)
            g_q = g_statistic(knn_distances(qs, pts[ref], hi, exclude_self=False).distances, l, weighted, d)
            acc += rank_within(g_q, g_pool)
    return acc / (2 * B)

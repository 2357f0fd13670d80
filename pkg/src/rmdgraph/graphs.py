"""Neighbourhood graphs: k-NN, epsilon, fully connected RBF and RMD.

Every builder returns an undirected :class:`SparseGraph`.  Neighbour graphs
select a directed neighbour list per node and keep an edge when either
endpoint selected the other (union symmetrization).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .dataset import DataSet
from .errors import GraphError
from .rank import NeighborIndex, RankEstimate, _points, knn_distances

WEIGHTINGS = ("binary", "rbf", "adaptive-rbf")


@dataclass(frozen=True)
class SparseGraph:
    """Undirected weighted graph stored as an edge list with ``u < v``."""

    n: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    weighting: str = "binary"
    build_params: dict = field(default_factory=dict)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.int64).ravel()
        v = np.asarray(self.v, dtype=np.int64).ravel()
        w = np.asarray(self.w, dtype=float).ravel()
        if not (len(u) == len(v) == len(w)):
            raise GraphError("edge arrays must have equal length")
        if len(u):
            if np.any(u >= v):
                raise GraphError("edges must satisfy u < v (no self-loops)")
            if u.min() < 0 or v.max() >= self.n:
                raise GraphError("edge endpoint out of range")
            if np.any(~(w > 0)) or not np.all(np.isfinite(w)):
                raise GraphError("edge weights must be finite and positive")
            key = u * self.n + v
            if len(np.unique(key)) != len(key):
                raise GraphError("duplicate edges")
        if self.weighting not in WEIGHTINGS:
            raise GraphError(f"unknown weighting {self.weighting!r}")
        if self.weighting == "binary" and np.any(w != 1.0):
            raise GraphError("binary graphs must have unit weights")
        for name, a in (("u", u), ("v", v), ("w", w)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "build_params", dict(self.build_params))

    @property
    def n_edges(self) -> int:
        return len(self.u)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        a = sp.coo_matrix(
            (np.concatenate([self.w, self.w]), (np.concatenate([self.u, self.v]), np.concatenate([self.v, self.u]))),
            shape=(self.n, self.n),
        )
        return a.tocsr()

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.u.tolist(), self.v.tolist()))

    def scaled(self, c: float) -> "SparseGraph":
        weighting = "rbf" if self.weighting == "binary" and c != 1.0 else self.weighting
        return SparseGraph(self.n, self.u, self.v, self.w * c, weighting, self.build_params)

    def permuted(self, perm: np.ndarray) -> "SparseGraph":
        """Relabel node ``i`` as ``perm[i]``."""
        perm = np.asarray(perm)
        a, b = perm[self.u], perm[self.v]
        return _from_pairs(self.n, np.minimum(a, b), np.maximum(a, b), self.w, self.weighting, self.build_params)

    def save(self, path: str | Path) -> None:
        """Write ``path`` as a (u, v, w) CSV and ``path.json`` as the header."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["u", "v", "w"])
            for a, b, c in zip(self.u.tolist(), self.v.tolist(), self.w.tolist()):
                wr.writerow([a, b, repr(c)])
        header = {"n": self.n, "weighting": self.weighting, "build_params": self.build_params}
        _header_path(path).write_text(json.dumps(header, sort_keys=True, indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SparseGraph":
        path = Path(path)
        header = json.loads(_header_path(path).read_text())
        u, v, w = [], [], []
        with path.open(newline="") as fh:
            rd = csv.reader(fh)
            next(rd)
            for a, b, c in rd:
                u.append(int(a))
                v.append(int(b))
                w.append(float(c))
        return cls(header["n"], np.array(u, dtype=np.int64), np.array(v, dtype=np.int64), np.array(w),
                   header["weighting"], header["build_params"])


def _header_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def _from_pairs(n, a, b, w, weighting, params) -> SparseGraph:
    order = np.lexsort((b, a))
    return SparseGraph(n, a[order], b[order], np.asarray(w)[order], weighting, params)


@dataclass(frozen=True)
class GraphFamilyParams:
    """Grid over which RMD graphs are built during model selection.

    ``sigma_exponents`` are the j in ``sigma = 2**j * mean_knn_distance(k)``;
    they are ignored for binary weighting.
    """

    lambdas: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8, 1.0)
    ks: tuple[int, ...] = tuple(range(10, 101, 10))
    sigma_exponents: tuple[int, ...] = tuple(range(-3, 4))
    weighting: str = "rbf"

    def __post_init__(self):
        if not self.lambdas or not self.ks:
            raise GraphError("graph family grid is empty")
        if any(not (0 < lam <= 1) for lam in self.lambdas):
            raise GraphError("lambda values must lie in (0, 1]")
        if any(int(k) != k or k < 1 for k in self.ks):
            raise GraphError("k values must be positive integers")
        if self.weighting not in WEIGHTINGS:
            raise GraphError(f"unknown weighting {self.weighting!r}")
        if self.weighting == "rbf" and not self.sigma_exponents:
            raise GraphError("rbf weighting needs at least one sigma exponent")

    def points(self) -> list[tuple[float, int, int | None]]:
        """(lambda, k, sigma exponent) triples in a fixed order."""
        exps = list(self.sigma_exponents) if self.weighting == "rbf" else [None]
        return [(float(lam), int(k), j) for lam in self.lambdas for k in self.ks for j in exps]


# ---------------------------------------------------------------------------
# Degrees
# ---------------------------------------------------------------------------

def degree_schedule(rank, k: int, lam: float):
    """Rank-modulated degree ``k * (lam + 2 (1 - lam) rank)`` rounded half up.

    Accepts a scalar or an array of ranks.  Clamping to ``[1, n - 1]`` is the
    caller's job.
    """
    r = np.asarray(rank, dtype=float)
    deg = np.floor(k * (lam + 2.0 * (1.0 - lam) * r) + 0.5).astype(np.int64)
    return int(deg) if deg.ndim == 0 else deg


def rmd_degrees(ranks, k: int, lam: float, n: int) -> np.ndarray:
    r = ranks.ranks if isinstance(ranks, RankEstimate) else np.asarray(ranks, dtype=float)
    return np.clip(degree_schedule(r, k, lam), 1, n - 1)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def mean_knn_distance(data, k: int, neighbors: NeighborIndex | None = None) -> float:
    """Average over all points of the distance to the k-th nearest neighbour."""
    pts = _points(data)
    if neighbors is None or neighbors.max_k < k:
        neighbors = knn_distances(pts, pts, k, exclude_self=True)
    return float(neighbors.distances[:, k - 1].mean())


def _neighbors_for(pts: np.ndarray, k_max: int, neighbors: NeighborIndex | None) -> NeighborIndex:
    if neighbors is not None and neighbors.max_k >= k_max and neighbors.self_excluded:
        return neighbors
    return knn_distances(pts, pts, k_max, exclude_self=True)


def _weights(dist, a, b, weighting, sigma, local_scale):
    if weighting == "binary":
        return np.ones(len(dist))
    if weighting == "rbf":
        if sigma is None or sigma <= 0:
            raise GraphError("rbf weighting needs a positive sigma")
        return np.exp(-dist ** 2 / (2.0 * sigma ** 2))
    if local_scale is None:
        raise GraphError("adaptive-rbf weighting needs per-node scales")
    denom = 2.0 * local_scale[a] * local_scale[b]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.exp(-dist ** 2 / denom)
    # coincident points with zero local scale
    return np.where(denom > 0, w, 1.0)


def _finish(n, a, b, dist, weighting, sigma, local_scale, params) -> SparseGraph:
    w = _weights(dist, a, b, weighting, sigma, local_scale)
    keep = w > 0  # drop RBF weights that underflow to zero
    return _from_pairs(n, a[keep], b[keep], w[keep], weighting, params)


def _union_graph(pts, nb: NeighborIndex, degs: np.ndarray, weighting, sigma, scale_k, params) -> SparseGraph:
    n = len(pts)
    cols = np.arange(nb.max_k)
    sel = cols[None, :] < degs[:, None]
    src = np.repeat(np.arange(n), degs)
    dst = nb.indices[sel]
    dist = nb.distances[sel]
    a, b = np.minimum(src, dst), np.maximum(src, dst)
    key = a * n + b
    _, first = np.unique(key, return_index=True)
    a, b, dist = a[first], b[first], dist[first]
    local = nb.distances[:, scale_k - 1] if weighting == "adaptive-rbf" else None
    return _finish(n, a, b, dist, weighting, sigma, local, params)


def build_knn(data, k: int, weighting: str = "binary", sigma: float | None = None,
              neighbors: NeighborIndex | None = None) -> SparseGraph:
    """Union-symmetrized k-NN graph."""
    pts = _points(data)
    n = len(pts)
    if not 1 <= k <= n - 1:
        raise GraphError(f"k={k} out of range for n={n}")
    nb = _neighbors_for(pts, k, neighbors)
    params = {"kind": "knn", "k": int(k), "weighting": weighting, "sigma": sigma}
    return _union_graph(pts, nb, np.full(n, k), weighting, sigma, k, params)


def build_rmd(data, ranks, k: int, lam: float, weighting: str = "binary", sigma: float | None = None,
              neighbors: NeighborIndex | None = None) -> SparseGraph:
    """Rank-modulated-degree graph.

    Node ``x`` selects its ``deg(x)`` nearest neighbours where ``deg`` follows
    :func:`degree_schedule`; edges are the union of the selections.  For
    adaptive-RBF weights each node's scale is its k-th neighbour distance.
    """
    pts = _points(data)
    n = len(pts)
    if not 0 < lam <= 1:
        raise GraphError(f"lambda must lie in (0, 1], got {lam}")
    if k < 1:
        raise GraphError("k must be positive")
    degs = rmd_degrees(ranks, k, lam, n)
    if len(degs) != n:
        raise GraphError("rank vector length does not match the data")
    if n < 2:
        raise GraphError("need at least two points")
    k_max = int(max(degs.max(), min(k, n - 1)))
    nb = _neighbors_for(pts, k_max, neighbors)
    params = {"kind": "rmd", "k": int(k), "lambda": float(lam), "weighting": weighting, "sigma": sigma}
    return _union_graph(pts, nb, degs, weighting, sigma, min(k, n - 1), params)


def build_epsilon(data, eps: float, weighting: str = "binary", sigma: float | None = None) -> SparseGraph:
    """Connect every pair at distance at most ``eps``."""
    if not eps > 0:
        raise GraphError("epsilon must be positive")
    pts = _points(data)
    pairs = cKDTree(pts).query_pairs(eps, output_type="ndarray")
    pairs = pairs.reshape(-1, 2).astype(np.int64)
    a, b = pairs.min(axis=1), pairs.max(axis=1)
    dist = np.sqrt(((pts[a] - pts[b]) ** 2).sum(axis=1))
    params = {"kind": "epsilon", "epsilon": float(eps), "weighting": weighting, "sigma": sigma}
    return _finish(len(pts), a, b, dist, weighting, sigma, None, params)


def _all_pairs(n):
    a, b = np.triu_indices(n, k=1)
    return a.astype(np.int64), b.astype(np.int64)


def build_full_rbf(data, sigma: float) -> SparseGraph:
    """Complete graph with ``w = exp(-d^2 / 2 sigma^2)``."""
    if not sigma > 0:
        raise GraphError("sigma must be positive")
    pts = _points(data)
    a, b = _all_pairs(len(pts))
    params = {"kind": "full_rbf", "sigma": float(sigma), "weighting": "rbf"}
    return _finish(len(pts), a, b, pdist(pts), "rbf", sigma, None, params)


def build_full_arbf(data, k: int, neighbors: NeighborIndex | None = None) -> SparseGraph:
    """Complete graph with ``w = exp(-d^2 / (2 s_u s_v))``, ``s_u`` the k-NN distance of u."""
    pts = _points(data)
    n = len(pts)
    if not 1 <= k <= n - 1:
        raise GraphError(f"k={k} out of range for n={n}")
    nb = _neighbors_for(pts, k, neighbors)
    a, b = _all_pairs(n)
    params = {"kind": "full_arbf", "k": int(k), "weighting": "adaptive-rbf"}
    return _finish(n, a, b, pdist(pts), "adaptive-rbf", None, nb.distances[:, k - 1], params)


def build_baseline(data, kind: str, *, eps: float | None = None, sigma: float | None = None,
                   k: int | None = None, weighting: str = "binary") -> SparseGraph:
    """Dispatch to the epsilon, full-RBF or full-aRBF builder by name."""
    if kind == "epsilon":
        if eps is None:
            raise GraphError("epsilon graph needs eps")
        return build_epsilon(data, eps, weighting, sigma)
    if kind == "full_rbf":
        if sigma is None:
            raise GraphError("full_rbf graph needs sigma")
        return build_full_rbf(data, sigma)
    if kind == "full_arbf":
        if k is None:
            raise GraphError("full_arbf graph needs k")
        return build_full_arbf(data, k)
    raise GraphError(f"unknown baseline kind {kind!r}")


def union_of_cliques(sizes: Iterable[int]) -> SparseGraph:
    """Disjoint unit-weight cliques; handy for spectral sanity checks."""
    us, vs, start = [], [], 0
    for s in sizes:
        a, b = np.triu_indices(s, k=1)
        us.append(a + start)
        vs.append(b + start)
        start += s
    u = np.concatenate(us) if us else np.empty(0, dtype=np.int64)
    v = np.concatenate(vs) if vs else np.empty(0, dtype=np.int64)
    return SparseGraph(start, u, v, np.ones(len(u)), "binary", {"kind": "cliques"})

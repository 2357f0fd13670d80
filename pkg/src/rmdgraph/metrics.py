"""Cut objectives, cut-ratio diagnostics and clustering error."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, GraphError
from .graphs import SparseGraph
from .spectral import Partition

MAX_MATCH_K = 8


def _assignment(partition) -> np.ndarray:
    return partition.assignment if isinstance(partition, Partition) else np.asarray(partition, dtype=np.int64)


def cluster_cuts(graph: SparseGraph, partition) -> np.ndarray:
    """``Cut(C_i, complement)`` for every cluster id ``0..K-1``."""
    a = _assignment(partition)
    if len(a) != graph.n:
        raise GraphError(f"partition has {len(a)} nodes, graph has {graph.n}")
    K = partition.K if isinstance(partition, Partition) else int(a.max()) + 1
    cu, cv = a[graph.u], a[graph.v]
    cross = cu != cv
    out = np.bincount(cu[cross], weights=graph.w[cross], minlength=K)
    out += np.bincount(cv[cross], weights=graph.w[cross], minlength=K)
    return out


def cut_value(graph: SparseGraph, partition) -> float:
    """Total weight of edges joining the two blocks of a 2-partition."""
    a = _assignment(partition)
    sizes = np.bincount(a, minlength=2)
    if len(sizes) != 2 or sizes.min() == 0:
        raise GraphError("cut_value needs a 2-partition with both blocks non-empty")
    return float(cluster_cuts(graph, a)[0])


def objective_value(graph: SparseGraph, partition, objective: str = "rcut") -> float:
    """K-way RCut or NCut with the whole-graph size in the numerator.

    ``RCut = sum_i Cut(C_i, ~C_i) * n / |C_i|`` and
    ``NCut = sum_i Cut(C_i, ~C_i) * vol(V) / vol(C_i)``; for K = 2 these are
    ``Cut * (n/|C| + n/|~C|)`` and its volume analogue.
    """
    a = _assignment(partition)
    K = partition.K if isinstance(partition, Partition) else int(a.max()) + 1
    cuts = cluster_cuts(graph, a)
    if objective == "rcut":
        sizes = np.bincount(a, minlength=K).astype(float)
        if sizes.min() == 0:
            raise GraphError("empty cluster")
        return float(np.sum(cuts * graph.n / sizes))
    if objective == "ncut":
        vols = np.bincount(a, weights=graph.degrees, minlength=K)
        if vols.min() <= 0:
            raise GraphError("cluster with zero volume: NCut undefined")
        return float(np.sum(cuts * vols.sum() / vols))
    raise GraphError(f"unknown objective {objective!r}")


def block_sizes(graph: SparseGraph, partition, size_mode: str) -> np.ndarray:
    a = _assignment(partition)
    if size_mode == "cardinality":
        return np.bincount(a, minlength=2).astype(float)
    if size_mode == "volume":
        return np.bincount(a, weights=graph.degrees, minlength=2)
    raise GraphError(f"unknown size mode {size_mode!r}")


@dataclass(frozen=True)
class CutDiagnostics:
    q: float
    y: float
    size_mode: str


def cut_diagnostics(graph: SparseGraph, candidate, balanced, size_mode: str = "cardinality") -> CutDiagnostics:
    """Cut ratio ``q`` against a balanced cut and unbalancedness ``y`` of the candidate."""
    bal = block_sizes(graph, balanced, size_mode)
    if abs(bal[0] - bal[1]) > (1.0 if size_mode == "cardinality" else 1e-9 * bal.sum()):
        raise GraphError(f"reference cut is not balanced: sizes {bal.tolist()}")
    cb = cut_value(graph, balanced)
    if cb == 0:
        raise GraphError("balanced cut has zero value; cut ratio undefined")
    cand = block_sizes(graph, candidate, size_mode)
    return CutDiagnostics(cut_value(graph, candidate) / cb, float(cand.min() / cand.sum()), size_mode)


def sc_fails_predicate(q: float, y: float) -> bool:
    """True iff a balanced cut beats the valley cut in RCut/NCut: ``q > 4y(1-y)``."""
    return bool(q > 4.0 * y * (1.0 - y))


def clustering_error(predicted, truth) -> float:
    """Smallest misclassification rate over matchings of clusters to classes.

    Every class is matched to a distinct cluster (or vice versa when there are
    fewer clusters than classes); points outside the matched pairs count as
    errors.  Brute force over permutations, so at most 8 clusters/classes.
    """
    p = _assignment(predicted)
    truth = np.asarray(truth)
    if len(p) != len(truth):
        raise DataError("predicted and true labelings differ in length")
    _, t = np.unique(truth, return_inverse=True)
    Kp = predicted.K if isinstance(predicted, Partition) else int(p.max()) + 1
    Kt = int(t.max()) + 1
    if max(Kp, Kt) > MAX_MATCH_K:
        raise DataError(f"brute-force matching supports at most {MAX_MATCH_K} clusters")
    conf = np.zeros((Kt, Kp), dtype=np.int64)
    np.add.at(conf, (t, p), 1)
    best = 0
    if Kt <= Kp:
        for cols in itertools.permutations(range(Kp), Kt):
            best = max(best, int(conf[np.arange(Kt), cols].sum()))
    else:
        for rows in itertools.permutations(range(Kt), Kp):
            best = max(best, int(conf[rows, np.arange(Kp)].sum()))
    return 1.0 - best / len(p)


# ---------------------------------------------------------------------------
# Axis-aligned hyperplane sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutSweep:
    positions: np.ndarray
    cut: np.ndarray
    rcut: np.ndarray
    ncut: np.ndarray
    left_count: np.ndarray


def cut_position_sweep(points: np.ndarray, graph: SparseGraph, positions, axis: int = 0) -> CutSweep:
    """Cut, RCut and NCut of the hyperplanes ``x[axis] = t`` for each ``t``.

    A node is on the left when its coordinate is ``<= t``.  Positions leaving
    one side empty get ``inf`` RCut/NCut.
    """
    x = np.asarray(points, dtype=float)
    x = x[:, axis] if x.ndim == 2 else x
    t = np.asarray(positions, dtype=float)
    xu, xv = x[graph.u], x[graph.v]
    lo, hi = np.minimum(xu, xv), np.maximum(xu, xv)
    # edge crosses t iff lo <= t < hi
    order_lo, order_hi = np.argsort(lo), np.argsort(hi)
    cum_lo = np.concatenate([[0.0], np.cumsum(graph.w[order_lo])])
    cum_hi = np.concatenate([[0.0], np.cumsum(graph.w[order_hi])])
    cut = cum_lo[np.searchsorted(lo[order_lo], t, side="right")] - cum_hi[np.searchsorted(hi[order_hi], t, side="right")]
    cut = np.maximum(cut, 0.0)

    order = np.argsort(x)
    xs = x[order]
    left = np.searchsorted(xs, t, side="right")
    n = len(x)
    deg = graph.degrees[order]
    cum_deg = np.concatenate([[0.0], np.cumsum(deg)])
    vol_left = cum_deg[left]
    vol = cum_deg[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        rcut = np.where((left > 0) & (left < n), cut * (n / left + n / (n - left)), np.inf)
        vr = vol - vol_left
        ncut = np.where((vol_left > 0) & (vr > 0), cut * (vol / vol_left + vol / vr), np.inf)
    return CutSweep(t, cut, rcut, ncut, left)


def write_cut_sweeps(path: str | Path, sweeps: dict[str, CutSweep]) -> None:
    """CSV with one row per (graph, position): graph, position, cut, rcut, ncut."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["graph", "position", "cut", "rcut", "ncut"])
        for name, s in sweeps.items():
            for row in zip(s.positions, s.cut, s.rcut, s.ncut):
                w.writerow([name] + [repr(float(v)) for v in row])


def partition_cut_position(points: np.ndarray, partition, axis: int = 0) -> float:
    """Best single threshold along ``axis`` separating a 2-partition.

    Returns the midpoint between consecutive sorted coordinates at which the
    threshold classifier disagrees with the partition on the fewest points.
    """
    a = _assignment(partition)
    x = np.asarray(points, dtype=float)
    x = x[:, axis] if x.ndim == 2 else x
    order = np.argsort(x, kind="stable")
    xs, lab = x[order], (a[order] == a[order][0]).astype(int)
    # errors when everything <= split is "first" cluster, rest the other
    left_other = np.concatenate([[0], np.cumsum(1 - lab)])
    right_first = np.concatenate([np.cumsum(lab[::-1])[::-1], [0]])
    err = left_other + right_first
    err_flip = len(x) - err
    e = np.minimum(err, err_flip)[1:-1]
    if len(e) == 0:
        return float(xs[0])
    j = int(np.argmin(e)) + 1
    return float(0.5 * (xs[j - 1] + xs[j]))

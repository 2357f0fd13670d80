"""Min-cut model selection over a family of RMD graphs.

Every candidate partition is scored by its cut on one fixed reference k0-NN
graph; among candidates whose smallest cluster holds at least ``delta * n``
points the lowest score wins.  Sweeping ``delta`` exposes small clusters as
flat stretches of the winning cut.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import GraphError, RMDError
from .graphs import GraphFamilyParams, SparseGraph, build_knn, build_rmd, mean_knn_distance, rmd_degrees
from .metrics import cluster_cuts
from .rank import RankEstimate, _points, knn_distances
from .spectral import Partition, spectral_cluster

LEARNERS = {"sc-rcut": "rcut", "sc-ncut": "ncut"}
DEFAULT_K0 = 30
DEFAULT_DELTA = 0.05


@dataclass(frozen=True)
class CandidatePartition:
    partition: Partition | None
    params: dict
    cut0: float
    min_cluster_fraction: float
    feasible: bool
    diagnostic: str = ""

    def to_json_dict(self) -> dict:
        return {
            "params": self.params,
            "cut0": self.cut0 if np.isfinite(self.cut0) else None,
            "min_cluster_fraction": self.min_cluster_fraction,
            "feasible": self.feasible,
            "digest": None if self.partition is None else self.partition.digest(),
            "diagnostic": self.diagnostic,
        }


@dataclass(frozen=True)
class ModelSelectionReport:
    candidates: list[CandidatePartition]
    reference: dict
    delta: float
    winner: int | None

    @property
    def winning(self) -> CandidatePartition | None:
        return None if self.winner is None else self.candidates[self.winner]

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "reference": self.reference,
            "winner": self.winner,
            "winning_params": None if self.winner is None else self.candidates[self.winner].params,
            "winning_cut0": None if self.winner is None else self.candidates[self.winner].cut0,
            "candidates": [c.to_json_dict() for c in self.candidates],
        }


@dataclass(frozen=True)
class CurvePoint:
    delta: float
    cut0: float | None
    params: dict | None
    digest: str | None
    winner: int | None


@dataclass(frozen=True)
class DeltaSweepCurve:
    points: list[CurvePoint] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {"points": [asdict(p) for p in self.points]}

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta", "cut0", "digest"])
            for p in self.points:
                w.writerow([repr(p.delta), "" if p.cut0 is None else repr(p.cut0), p.digest or ""])


def reference_graph(data, k0: int = DEFAULT_K0, weighting: str = "rbf") -> SparseGraph:
    """k0-NN graph used to score every candidate; RBF sigma is the mean k0-NN distance."""
    pts = _points(data)
    nb = knn_distances(pts, pts, k0, exclude_self=True)
    sigma = mean_knn_distance(pts, k0, nb) if weighting == "rbf" else None
    g = build_knn(pts, k0, weighting, sigma, neighbors=nb)
    return SparseGraph(g.n, g.u, g.v, g.w, g.weighting, {**g.build_params, "role": "reference"})


def cut0_evaluate(partition: Partition, reference: SparseGraph) -> float:
    """Sum over clusters of ``Cut(C_i, complement)`` on the reference graph."""
    if partition.n != reference.n:
        raise GraphError(f"partition has {partition.n} nodes, reference graph has {reference.n}")
    return float(cluster_cuts(reference, partition).sum())


def _candidate_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def sweep(data, ranks: RankEstimate, grid: GraphFamilyParams, K: int, learner: str = "sc-ncut",
          seed: int = 0, delta: float = DEFAULT_DELTA, reference: SparseGraph | None = None,
          k0: int = DEFAULT_K0, workers: int = 1) -> list[CandidatePartition]:
    """Build one RMD graph per grid point, cluster it, and score it on the reference graph.

    Errors from individual builds or clusterings are recorded on the
    candidate (infeasible, with a diagnostic) rather than raised.
    """
    if learner not in LEARNERS:
        raise GraphError(f"unknown learner {learner!r}")
    pts = _points(data)
    n = len(pts)
    triples = grid.points()
    if not triples:
        raise GraphError("empty grid")
    if reference is None:
        reference = reference_graph(pts, k0, "rbf" if grid.weighting != "binary" else "binary")
    k_need = max(int(rmd_degrees(ranks, k, lam, n).max()) for lam, k, _ in triples)
    k_need = max(k_need, min(max(grid.ks), n - 1))
    nb = knn_distances(pts, pts, min(k_need, n - 1), exclude_self=True)
    dk = {k: mean_knn_distance(pts, min(k, n - 1), nb) for k in set(grid.ks)}

    def run(item):
        i, (lam, k, j) = item
        params = {"lambda": lam, "k": k, "sigma_exp": j, "sigma": None if j is None else dk[k] * 2.0 ** j}
        try:
            g = build_rmd(pts, ranks, k, lam, grid.weighting, params["sigma"], neighbors=nb)
            part = spectral_cluster(g, K, LEARNERS[learner], _candidate_seed(seed, i))
            part = Partition(part.assignment, K, {**part.provenance, "params": params})
            frac = part.min_cluster_fraction()
            return CandidatePartition(part, params, cut0_evaluate(part, reference), frac, frac >= delta)
        except RMDError as exc:
            return CandidatePartition(None, params, float("inf"), 0.0, False, f"{type(exc).__name__}: {exc}")

    items = list(enumerate(triples))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(run, items))
    return [run(it) for it in items]


def _param_key(params: dict) -> tuple:
    return tuple((k, -np.inf if v is None else v) for k, v in sorted(params.items()))


def select(candidates: Sequence[CandidatePartition], reference: SparseGraph | dict, delta: float = DEFAULT_DELTA,
           K: int | None = None) -> ModelSelectionReport:
    """Feasible candidate with the smallest cut0.

    Ties go to the larger smallest-cluster fraction, then to the
    lexicographically smaller parameter record.  No feasible candidate gives
    ``winner=None``.
    """
    if K is not None and not 0 < delta < 1.0 / K:
        raise GraphError(f"delta must lie in (0, 1/K) = (0, {1.0 / K}), got {delta}")
    if not 0 < delta < 1:
        raise GraphError(f"delta must lie in (0, 1), got {delta}")
    cands = [replace(c, feasible=c.partition is not None and c.min_cluster_fraction >= delta) for c in candidates]
    best, best_key = None, None
    for i, c in enumerate(cands):
        if not c.feasible:
            continue
        key = (c.cut0, -c.min_cluster_fraction, _param_key(c.params))
        if best_key is None or key < best_key:
            best, best_key = i, key
    ref = reference.build_params if isinstance(reference, SparseGraph) else dict(reference)
    return ModelSelectionReport(cands, ref, float(delta), best)


def delta_sweep(candidates: Sequence[CandidatePartition], reference: SparseGraph | dict,
                delta_grid: Sequence[float]) -> DeltaSweepCurve:
    """Winner and winning cut0 for each threshold in a descending ``delta_grid``."""
    if len(delta_grid) == 0:
        raise GraphError("empty delta grid")
    if any(a < b for a, b in zip(delta_grid, delta_grid[1:])):
        raise GraphError("delta grid must be sorted in descending order")
    pts = []
    for delta in delta_grid:
        rep = select(candidates, reference, delta)
        c = rep.winning
        pts.append(CurvePoint(float(delta), None if c is None else c.cut0, None if c is None else c.params,
                              None if c is None else c.partition.digest(), rep.winner))
    return DeltaSweepCurve(pts)


@dataclass(frozen=True)
class FlatSpot:
    delta_high: float
    delta_low: float
    digest: str
    cut0: float
    winner: int


def flat_spots(curve: DeltaSweepCurve, rel_tol: float = 0.01) -> list[FlatSpot]:
    """Maximal runs (two or more grid points) with an unchanged winning partition.

    Consecutive points join a run when both have a winner, the winners are the
    same partition up to cluster renaming, and the winning cut0 changes by a
    relative amount below ``rel_tol``.
    """
    pts = curve.points
    spots: list[FlatSpot] = []
    start = 0
    for i in range(1, len(pts) + 1):
        same = False
        if i < len(pts):
            a, b = pts[i - 1], pts[i]
            if a.digest is not None and a.digest == b.digest:
                scale = max(abs(a.cut0), abs(b.cut0))
                same = scale == 0 or abs(a.cut0 - b.cut0) / scale < rel_tol
        if not same:
            if i - start >= 2:
                p = pts[start]
                spots.append(FlatSpot(p.delta, pts[i - 1].delta, p.digest, p.cut0, p.winner))
            start = i
    return spots


def report_json(report: ModelSelectionReport) -> str:
    return json.dumps(report.to_json_dict(), sort_keys=True, indent=1) + "\n"

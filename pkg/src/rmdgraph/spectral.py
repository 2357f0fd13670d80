"""Graph Laplacians and K-way spectral clustering (RCut / NCut relaxations)."""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from .errors import GraphError, NumericalError
from .graphs import SparseGraph

OBJECTIVES = ("rcut", "ncut")
DENSE_MAX_N = 500
EIG_TOL = 1e-8
EIG_MAXITER = 5000


@dataclass(frozen=True)
class Partition:
    """Cluster id in ``0..K-1`` for every node, plus where it came from."""

    assignment: np.ndarray
    K: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64).ravel()
        if self.K < 2:
            raise GraphError("a partition needs K >= 2")
        if len(a) and (a.min() < 0 or a.max() >= self.K):
            raise GraphError("cluster id out of range")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def n(self) -> int:
        return len(self.assignment)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.K)

    def min_cluster_fraction(self) -> float:
        return float(self.sizes().min() / self.n)

    def canonical(self) -> np.ndarray:
        """Assignment relabelled by order of first appearance."""
        _, first, inv = np.unique(self.assignment, return_index=True, return_inverse=True)
        order = np.argsort(np.argsort(first))
        return order[inv]

    def digest(self) -> str:
        """Hash that identifies the partition up to renaming of clusters."""
        return hashlib.sha1(self.canonical().astype(np.int64).tobytes()).hexdigest()[:16]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "cluster"])
            for i, c in enumerate(self.assignment.tolist()):
                w.writerow([i, c])
        header = {"K": self.K, "provenance": self.provenance}
        path.with_name(path.name + ".json").write_text(json.dumps(header, sort_keys=True, indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Partition":
        path = Path(path)
        header = json.loads(path.with_name(path.name + ".json").read_text())
        with path.open(newline="") as fh:
            rd = csv.reader(fh)
            next(rd)
            a = [int(c) for _, c in rd]
        return cls(np.array(a), header["K"], header["provenance"])


def laplacian(graph: SparseGraph, kind: str = "unnormalized") -> sp.csr_matrix:
    """``D - W`` or ``I - D^-1/2 W D^-1/2``.

    The normalized form is undefined at isolated nodes; those raise
    :class:`GraphError` naming the first one.
    """
    W = graph.adjacency
    deg = graph.degrees
    if kind in ("unnormalized", "rcut"):
        return (sp.diags(deg) - W).tocsr()
    if kind in ("normalized", "symmetric", "ncut"):
        iso = np.flatnonzero(deg <= 0)
        if len(iso):
            raise GraphError(f"node {iso[0]} is isolated; normalized Laplacian undefined ({len(iso)} isolated)")
        s = sp.diags(1.0 / np.sqrt(deg))
        return (sp.identity(graph.n, format="csr") - s @ W @ s).tocsr()
    raise GraphError(f"unknown Laplacian kind {kind!r}")


def smallest_eigenpairs(L: sp.spmatrix, K: int) -> tuple[np.ndarray, np.ndarray]:
    """K smallest eigenpairs of a symmetric PSD matrix, ascending."""
    n = L.shape[0]
    if n <= DENSE_MAX_N or K >= n - 1:
        vals, vecs = scipy.linalg.eigh(L.toarray(), subset_by_index=[0, K - 1])
        return vals, vecs
    # shift-invert just below zero keeps L - sigma*I positive definite
    scale = max(float(abs(L.diagonal()).max()), 1.0)
    sigma = -1e-3 * scale
    try:
        vals, vecs = spla.eigsh(L.tocsc(), k=K, sigma=sigma, which="LM", tol=EIG_TOL, maxiter=EIG_MAXITER)
    except spla.ArpackNoConvergence as exc:
        raise NumericalError(f"eigensolver did not converge for K={K}, n={n}") from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def kmeans(X: np.ndarray, K: int, seed: int) -> np.ndarray:
    """K-means with k-means++ seeding, 10 restarts, lowest inertia kept."""
    with warnings.catch_warnings():
        # fewer distinct rows than K: sklearn warns and still returns labels
        warnings.simplefilter("ignore", ConvergenceWarning)
        km = KMeans(n_clusters=K, init="k-means++", n_init=10, max_iter=300, tol=1e-6, random_state=seed)
        return km.fit_predict(X)


def components_partition(labels: np.ndarray, K: int) -> np.ndarray:
    """Merge connected components into K clusters.

    The zero eigenspace of the unnormalized Laplacian is spanned by the
    scaled indicators ``1_C / sqrt(|C|)``, so in that embedding a component
    sits at distance ``1/sqrt(|C|)`` from the origin and K-means separates
    the smallest components first.  Following that, the K-1 smallest
    components (ties by lowest node index) keep their own cluster and every
    remaining component goes to the last cluster.
    """
    sizes = np.bincount(labels)
    first = np.full(len(sizes), len(labels))
    np.minimum.at(first, labels, np.arange(len(labels)))
    order = np.lexsort((first, sizes))
    cluster_of = np.full(len(sizes), K - 1)
    cluster_of[order[: K - 1]] = np.arange(K - 1)
    return cluster_of[labels]


def spectral_embedding(graph: SparseGraph, K: int, objective: str) -> np.ndarray:
    if objective == "rcut":
        _, U = smallest_eigenpairs(laplacian(graph, "unnormalized"), K)
        return U
    if objective == "ncut":
        _, U = smallest_eigenpairs(laplacian(graph, "normalized"), K)
        norms = np.linalg.norm(U, axis=1, keepdims=True)
        return U / np.where(norms > 0, norms, 1.0)
    raise GraphError(f"unknown objective {objective!r}")


def spectral_cluster(graph: SparseGraph, K: int, objective: str = "ncut", seed: int = 0) -> Partition:
    """Relaxed RCut (unnormalized) or NCut (symmetric-normalized) clustering.

    Rows of the K smallest eigenvectors are clustered by K-means.  If the graph
    already has at least K connected components, those components are returned
    directly (see :func:`components_partition`).
    """
    if K < 2:
        raise GraphError("K must be at least 2")
    if K > graph.n:
        raise GraphError(f"K={K} exceeds the number of nodes {graph.n}")
    if objective not in OBJECTIVES:
        raise GraphError(f"unknown objective {objective!r}")
    prov = {"graph": graph.build_params, "objective": objective, "seed": int(seed), "K": int(K)}
    n_comp, comp = csgraph.connected_components(graph.adjacency, directed=False)
    if n_comp >= K:
        prov["method"] = "components"
        return Partition(components_partition(comp, K), K, prov)
    U = spectral_embedding(graph, K, objective)
    prov["method"] = "spectral"
    return Partition(kmeans(U, K, seed), K, prov)

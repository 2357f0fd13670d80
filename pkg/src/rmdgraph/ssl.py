"""Gaussian random field (harmonic function) label propagation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .errors import DataError, GraphError, NumericalError
from .graphs import SparseGraph
from .spectral import Partition, laplacian

DIRECT_MAX_N = 2000
CG_RTOL = 1e-10


@dataclass(frozen=True)
class SoftLabels:
    scores: np.ndarray
    labeled_mask: np.ndarray
    classes: tuple

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node"] + [f"score_{c}" for c in self.classes] + ["argmax"])
            for i, row in enumerate(self.scores):
                w.writerow([i] + [repr(float(s)) for s in row] + [self.classes[int(np.argmax(row))]])


def one_hot(labels, mask, classes=None) -> tuple[np.ndarray, tuple]:
    """One-hot rows for masked points, zeros elsewhere."""
    labels = np.asarray(labels)
    mask = np.asarray(mask, dtype=bool)
    if classes is None:
        classes = tuple(np.unique(labels).tolist())
    index = {c: j for j, c in enumerate(classes)}
    Y = np.zeros((len(labels), len(classes)))
    for i in np.flatnonzero(mask):
        Y[i, index[labels[i].item() if hasattr(labels[i], "item") else labels[i]]] = 1.0
    return Y, tuple(classes)


def grf_solve(graph: SparseGraph, labels: np.ndarray, mask: np.ndarray, classes=None) -> SoftLabels:
    """Harmonic extension of the labelled rows of ``labels`` over ``graph``.

    Solves ``L_uu F_u = -L_ul F_l`` with the unnormalized Laplacian, so every
    unlabelled score is the weighted mean of its neighbours' scores.
    """
    Y = np.asarray(labels, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if Y.shape[0] != graph.n or mask.shape != (graph.n,):
        raise DataError("label matrix and mask must have one row per node")
    if not mask.any():
        raise DataError("at least one node must be labelled")
    if classes is None:
        classes = tuple(range(Y.shape[1]))
    F = Y.copy()
    unl = np.flatnonzero(~mask)
    if len(unl) == 0:
        return SoftLabels(F, mask, tuple(classes))

    _, comp = csgraph.connected_components(graph.adjacency, directed=False)
    has_label = np.zeros(comp.max() + 1, dtype=bool)
    has_label[comp[mask]] = True
    orphan = np.flatnonzero(~has_label[comp])
    if len(orphan):
        members = orphan[:20].tolist()
        more = "" if len(orphan) <= 20 else f" ... ({len(orphan)} nodes)"
        raise GraphError(f"unlabelled nodes not connected to any labelled node: {members}{more}")

    L = laplacian(graph, "unnormalized")
    lab = np.flatnonzero(mask)
    Luu = L[unl][:, unl].tocsc()
    rhs = -(L[unl][:, lab] @ Y[lab])
    if graph.n <= DIRECT_MAX_N:
        Fu = spla.splu(Luu).solve(np.asarray(rhs))
    else:
        Fu = np.empty((len(unl), Y.shape[1]))
        for j in range(Y.shape[1]):
            x, info = spla.cg(Luu, np.asarray(rhs[:, j]).ravel(), rtol=CG_RTOL, atol=0.0, maxiter=10 * len(unl))
            if info != 0:
                raise NumericalError(f"conjugate gradient did not converge for class column {j}")
            Fu[:, j] = x
    F[unl] = Fu
    return SoftLabels(F, mask, tuple(classes))


def predict(soft: SoftLabels) -> Partition:
    """Arg-max class per node; ties go to the lower class index."""
    K = max(soft.scores.shape[1], 2)
    return Partition(np.argmax(soft.scores, axis=1), K, {"method": "grf", "classes": list(soft.classes)})


def sample_labeled_mask(labels, n_labeled: int = 20, seed: int = 0, max_tries: int = 1000) -> np.ndarray:
    """Uniformly random labelled subset that contains every class at least once."""
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if n_labeled < len(classes):
        raise DataError(f"{n_labeled} labelled points cannot cover {len(classes)} classes")
    if n_labeled > len(labels):
        raise DataError("more labelled points requested than available")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        idx = rng.choice(len(labels), size=n_labeled, replace=False)
        if len(np.unique(labels[idx])) == len(classes):
            mask = np.zeros(len(labels), dtype=bool)
            mask[idx] = True
            return mask
    raise DataError(f"could not cover all classes in {max_tries} draws")

"""Data containers, synthetic generators and unbalanced subsampling.

Generators are pure functions of their arguments and an integer seed; the
returned :class:`DataSet` records how it was produced in ``seed_provenance``
so that a run can be reconstructed from its JSON serialization.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DataError


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _jsonable(v: Any) -> Any:
    if isinstance(v, np.generic):
        return v.item()
    return v


@dataclass(frozen=True)
class DataSet:
    """Points in R^d with optional class labels and a partial-label mask.

    Arrays are copied and frozen on construction, so a DataSet can be shared
    between threads without defensive copies.
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    labeled_mask: np.ndarray | None = None
    seed_provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DataError(f"points must be a non-empty n x d matrix, got shape {pts.shape}")
        bad = np.argwhere(~np.isfinite(pts))
        if len(bad):
            r, c = bad[0]
            raise DataError(f"non-finite coordinate at row {r}, column {c}")
        object.__setattr__(self, "points", _readonly(pts))
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (pts.shape[0],):
                raise DataError(f"labels must have shape ({pts.shape[0]},), got {labels.shape}")
            object.__setattr__(self, "labels", _readonly(labels))
        if self.labeled_mask is not None:
            mask = np.asarray(self.labeled_mask, dtype=bool)
            if mask.shape != (pts.shape[0],):
                raise DataError("labeled_mask length does not match number of points")
            if mask.any() and self.labels is None:
                raise DataError("labeled_mask marks points as labeled but no labels are present")
            object.__setattr__(self, "labeled_mask", _readonly(mask))
        object.__setattr__(self, "seed_provenance", dict(self.seed_provenance))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def subset(self, idx: Sequence[int] | np.ndarray, **provenance) -> "DataSet":
        idx = np.asarray(idx, dtype=int)
        prov = dict(self.seed_provenance)
        prov.update(provenance)
        return DataSet(
            self.points[idx],
            None if self.labels is None else self.labels[idx],
            None if self.labeled_mask is None else self.labeled_mask[idx],
            prov,
        )

    def with_mask(self, mask: np.ndarray) -> "DataSet":
        return DataSet(self.points, self.labels, mask, self.seed_provenance)

    def to_json_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "labels": None if self.labels is None else [_jsonable(v) for v in self.labels.tolist()],
            "labeled_mask": None if self.labeled_mask is None else self.labeled_mask.tolist(),
            "seed_provenance": self.seed_provenance,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "DataSet":
        labels = obj.get("labels")
        mask = obj.get("labeled_mask")
        return cls(
            np.asarray(obj["points"], dtype=float),
            None if labels is None else np.asarray(labels),
            None if mask is None else np.asarray(mask, dtype=bool),
            obj.get("seed_provenance", {}),
        )


def save_json(data: DataSet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(data.to_json_dict(), sort_keys=True) + "\n")


def load_json(path: str | Path) -> DataSet:
    try:
        obj = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {path}") from exc
    return DataSet.from_json_dict(obj)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path: str | Path, label_column: str | None = None) -> DataSet:
    """Read a comma-separated file of points.

    A header row is detected when the first row contains a non-numeric feature
    cell; it is required when ``label_column`` is given.  Every feature cell
    must parse as a finite real, otherwise :class:`DataError` names the
    offending line and column.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")

    header = None
    first = [c.strip() for c in rows[0]]
    if label_column is not None:
        if label_column not in first:
            raise DataError(f"{path}: label column {label_column!r} not found in header {first}")
        header = first
    elif not all(_is_float(c) for c in first):
        header = first
    body = rows[1:] if header is not None else rows
    if not body:
        raise DataError(f"{path}: no data rows")
    line0 = 2 if header is not None else 1

    width = len(first)
    label_idx = header.index(label_column) if label_column is not None else None
    feat_cols = [j for j in range(width) if j != label_idx]
    names = header if header is not None else [str(j) for j in range(width)]

    points = np.empty((len(body), len(feat_cols)))
    labels = [] if label_idx is not None else None
    for i, row in enumerate(body):
        if len(row) != width:
            raise DataError(f"{path}: line {line0 + i} has {len(row)} cells, expected {width}")
        for jj, j in enumerate(feat_cols):
            cell = row[j].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: line {line0 + i}, column {names[j]!r}: cannot parse {cell!r} as a number"
                ) from None
            if not math.isfinite(v):
                raise DataError(f"{path}: line {line0 + i}, column {names[j]!r}: non-finite value {cell!r}")
            points[i, jj] = v
        if labels is not None:
            labels.append(row[label_idx].strip())

    return DataSet(
        points,
        None if labels is None else np.asarray(labels),
        seed_provenance={"generator": "csv", "path": str(path), "label_column": label_column},
    )


def save_csv(data: DataSet, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = [f"x{j}" for j in range(data.d)]
        if data.labels is not None:
            head.append("label")
        w.writerow(head)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.points[i]]
            if data.labels is not None:
                row.append(str(_jsonable(data.labels[i])))
            w.writerow(row)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureSpec:
    """Gaussian mixture: component weights, means (K x d) and covariances (K x d x d)."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        if mu.shape[0] != len(w) and mu.shape[1] == len(w) and mu.shape[0] == 1:
            mu = mu.T
        k, d = mu.shape
        covs = []
        for c in self.covs:
            c = np.asarray(c, dtype=float)
            if c.ndim == 0:
                c = np.eye(d) * float(c)
            elif c.ndim == 1:
                c = np.diag(c)
            covs.append(c)
        cov = np.asarray(covs)
        if len(w) != k or cov.shape != (k, d, d):
            raise DataError("mixture weights, means and covariances disagree on shape")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DataError(f"mixture weights must be positive and sum to 1, got {w.tolist()}")
        for c in cov:
            if not np.allclose(c, c.T) or np.linalg.eigvalsh(c).min() < -1e-12:
                raise DataError("mixture covariances must be symmetric positive semidefinite")
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "means", _readonly(mu))
        object.__setattr__(self, "covs", _readonly(cov))

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @classmethod
    def from_ratios(cls, ratios, means, covs) -> "MixtureSpec":
        r = np.asarray(ratios, dtype=float)
        return cls(r / r.sum(), means, covs)

    def to_json_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "means": self.means.tolist(), "covs": self.covs.tolist()}

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "MixtureSpec":
        return cls(obj["weights"], obj["means"], obj["covs"])


def fig2_mixture() -> MixtureSpec:
    """Unbalanced proximal pair: 0.85 N([4.5, 0], diag(2, 1)) + 0.15 N([0, 0], I)."""
    return MixtureSpec([0.85, 0.15], [[4.5, 0.0], [0.0, 0.0]], [[2.0, 1.0], [1.0, 1.0]])


def fig5_mixture() -> MixtureSpec:
    """One large and two small components along the first axis, ratios 2:8:1."""
    return MixtureSpec.from_ratios(
        [2, 8, 1],
        [[-0.7, 0.0], [4.5, 0.0], [9.7, 0.0]],
        [[1.0, 1.0], [2.0, 1.0], [0.7, 0.7]],
    )


def _psd_sqrt(c: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(c)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def gen_gaussian_mixture(spec: MixtureSpec, n: int, seed: int) -> DataSet:
    """Draw ``n`` i.i.d. points; the component index is stored as the label."""
    if n < 1:
        raise DataError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    comp = rng.choice(len(spec.weights), size=n, p=spec.weights)
    z = rng.standard_normal((n, spec.dim))
    roots = np.array([_psd_sqrt(c) for c in spec.covs])
    pts = spec.means[comp] + np.einsum("nij,nj->ni", roots[comp], z)
    return DataSet(
        pts,
        comp.astype(int),
        seed_provenance={"generator": "gaussian_mixture", "seed": int(seed), "n": int(n),
                         "spec": spec.to_json_dict()},
    )


def _allocate(n: int, proportions: Sequence[float]) -> np.ndarray:
    """Split ``n`` into integer counts by largest remainder."""
    p = np.asarray(proportions, dtype=float)
    raw = n * p
    counts = np.floor(raw).astype(int)
    short = n - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


MOON_BLOB_CENTER = (4.5, 0.25)
MOON_BLOB_VAR = 0.25


def gen_two_moons_gaussian(
    n: int,
    proportions: tuple[float, float, float] = (0.45, 0.45, 0.10),
    noise: float = 0.1,
    seed: int = 0,
) -> DataSet:
    """Two interleaved unit half circles plus a small Gaussian blob to their right.

    The upper moon is ``(cos t, sin t)``, the lower moon ``(1 - cos t, 0.5 - sin t)``
    for ``t ~ U(0, pi)``; both get isotropic Gaussian noise of scale ``noise``.
    The blob is centred 2.5 to the right of the moons' rightmost extent with
    covariance ``0.25 I``.  Counts per part are allocated exactly from
    ``proportions``; labels are 0, 1 (moons) and 2 (blob).
    """
    if n < 1:
        raise DataError(f"n must be positive, got {n}")
    p = np.asarray(proportions, dtype=float)
    if p.shape != (3,) or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
        raise DataError(f"proportions must be three positive numbers summing to 1, got {proportions}")
    if noise < 0:
        raise DataError("noise must be non-negative")
    rng = np.random.default_rng(seed)
    c0, c1, c2 = _allocate(n, p)
    t0 = rng.uniform(0.0, math.pi, c0)
    t1 = rng.uniform(0.0, math.pi, c1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    moons = np.vstack([upper, lower])
    if noise > 0:
        moons = moons + noise * rng.standard_normal(moons.shape)
    blob = np.asarray(MOON_BLOB_CENTER) + math.sqrt(MOON_BLOB_VAR) * rng.standard_normal((c2, 2))
    pts = np.vstack([moons, blob])
    labels = np.repeat([0, 1, 2], [c0, c1, c2])
    perm = rng.permutation(n)
    return DataSet(
        pts[perm],
        labels[perm],
        seed_provenance={"generator": "two_moons_gaussian", "seed": int(seed), "n": int(n),
                         "proportions": p.tolist(), "noise": float(noise)},
    )


def subsample_unbalanced(data: DataSet, class_counts: Mapping[Any, int], seed: int) -> DataSet:
    """Sample the requested number of points per class without replacement.

    Class keys are matched against labels by their string form, so ``{8: 150}``
    selects label ``"8"`` read from a CSV file as well as integer label ``8``.
    """
    if data.labels is None:
        raise DataError("subsampling by class requires labels")
    rng = np.random.default_rng(seed)
    keys = np.array([str(_jsonable(v)) for v in data.labels.tolist()])
    chosen = []
    for cls, count in class_counts.items():
        pool = np.flatnonzero(keys == str(cls))
        if len(pool) == 0:
            raise DataError(f"class {cls!r} not present in data")
        if count > len(pool):
            raise DataError(f"class {cls!r}: requested {count} points but only {len(pool)} available")
        if count < 0:
            raise DataError(f"class {cls!r}: negative count {count}")
        chosen.append(rng.choice(pool, size=int(count), replace=False))
    idx = np.concatenate(chosen) if chosen else np.empty(0, dtype=int)
    if len(idx) == 0:
        raise DataError("subsample would be empty")
    idx = idx[rng.permutation(len(idx))]
    return data.subset(idx, subsample={"class_counts": {str(k): int(v) for k, v in class_counts.items()},
                                       "seed": int(seed)})

"""Large-sample limits of ranks and RMD cuts, with Monte-Carlo checks.

Two limit statements are checked here:

* the rank of ``y`` converges to ``p(y)``, the probability mass of the
  sublevel set ``{x : f(x) <= f(y)}``;
* on an unweighted RMD graph in which node ``x`` links to its
  ``k * rho(x)`` nearest neighbours, ``rho = lam + 2 (1 - lam) p``, the
  suitably scaled cut of a fixed hyperplane ``S`` converges to
  ``C_d * B * integral_S f^(1 - 1/d) rho^(1 + 1/d)``.

The RMD graphs built here keep the directed neighbour lists and use the exact
limiting ``p`` instead of estimated ranks, so the cut limit is checked
independently of rank estimation.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.special import gamma as gamma_fn
from scipy.special import ndtr

from .dataset import MixtureSpec, gen_gaussian_mixture
from .errors import DataError
from .rank import knn_distances, rank_queries

TAIL_SIGMAS = 8.0
P_GRID_CELLS = 400_000
MC_DRAWS = 1_000_000


@dataclass(frozen=True, eq=False)
class AnalyticDensity:
    """Gaussian mixture density with exact pdf, axis CDFs and sampling."""

    spec: MixtureSpec
    mc_seed: int = 20240611

    @property
    def dim(self) -> int:
        return self.spec.dim

    @cached_property
    def _chol(self):
        inv = np.linalg.inv(self.spec.covs)
        det = np.linalg.det(self.spec.covs)
        norm = self.spec.weights / np.sqrt((2 * math.pi) ** self.dim * det)
        return inv, norm

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        inv, norm = self._chol
        diff = x[..., None, :] - self.spec.means  # (..., K, d)
        q = np.einsum("...ki,kij,...kj->...k", diff, inv, diff)
        return (norm * np.exp(-0.5 * q)).sum(axis=-1)

    def sample(self, n: int, seed: int) -> np.ndarray:
        return gen_gaussian_mixture(self.spec, n, seed).points

    def axis_cdf(self, t, axis: int = 0):
        sd = np.sqrt(self.spec.covs[:, axis, axis])
        t = np.asarray(t, dtype=float)
        return (self.spec.weights * ndtr((t[..., None] - self.spec.means[:, axis]) / sd)).sum(axis=-1)

    def bounds(self, axis: int = 0) -> tuple[float, float]:
        sd = np.sqrt(self.spec.covs[:, axis, axis])
        mu = self.spec.means[:, axis]
        return float((mu - TAIL_SIGMAS * sd).min()), float((mu + TAIL_SIGMAS * sd).max())

    def marginal(self, axis: int = 0) -> "AnalyticDensity":
        s = self.spec
        return AnalyticDensity(MixtureSpec(s.weights, s.means[:, [axis]], s.covs[:, [axis]][:, :, [axis]]), self.mc_seed)

    def valley(self, a, b) -> np.ndarray:
        """Point of lowest density on the segment from ``a`` to ``b``."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        res = optimize.minimize_scalar(lambda s: float(self.pdf(a + s * (b - a))), bounds=(0.0, 1.0),
                                       method="bounded", options={"xatol": 1e-10})
        return a + res.x * (b - a)

    # Sublevel-set mass tables -------------------------------------------------

    @cached_property
    def _level_table_1d(self):
        lo, hi = self.bounds(0)
        edges = np.linspace(lo, hi, P_GRID_CELLS + 1)
        mass = np.diff(self.axis_cdf(edges))
        level = self.pdf(0.5 * (edges[:-1] + edges[1:]))
        # the two unbounded tails carry the density at the box edge as an upper bound
        tail_level = float(max(self.pdf(lo), self.pdf(hi)))
        tail_mass = float(self.axis_cdf(lo) + 1.0 - self.axis_cdf(hi))
        level = np.append(level, tail_level)
        mass = np.append(mass, tail_mass)
        return _cumulative_by_level(level, mass)

    @cached_property
    def _level_table_mc(self):
        x = self.sample(MC_DRAWS, self.mc_seed)
        return _cumulative_by_level(self.pdf(x), np.full(MC_DRAWS, 1.0 / MC_DRAWS))


def _cumulative_by_level(level, mass):
    order = np.argsort(level, kind="stable")
    return level[order], np.concatenate([[0.0], np.cumsum(mass[order])])


def analytic_p(density: AnalyticDensity, y) -> np.ndarray | float:
    """Mass of ``{x : f(x) <= f(y)}`` for one point or an array of points.

    In one dimension the mass is tabulated over ``P_GRID_CELLS`` cells with
    exact per-cell Gaussian CDF masses on a box of +-8 component standard
    deviations (truncation error below 1e-14); in higher dimension it is the
    empirical fraction among ``MC_DRAWS`` fixed-seed draws (standard error
    below 5e-4).
    """
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0 or (density.dim > 1 and y.ndim == 1)
    fy = np.atleast_1d(density.pdf(y))
    levels, cum = density._level_table_1d if density.dim == 1 else density._level_table_mc
    p = np.clip(cum[np.searchsorted(levels, fy, side="right")], 0.0, 1.0)
    return float(p[0]) if scalar else p


def rho(p, lam: float):
    """Degree modulation factor ``lam + 2 (1 - lam) p``."""
    return lam + 2.0 * (1.0 - lam) * np.asarray(p, dtype=float) if np.ndim(p) else lam + 2.0 * (1.0 - lam) * p


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d; 1 for d = 0 (counting measure of a point)."""
    return math.pi ** (d / 2.0) / gamma_fn(d / 2.0 + 1.0)


@dataclass(frozen=True)
class LimitConstants:
    d: int
    eta_d: float
    eta_d_minus_1: float
    C_d: float

    @classmethod
    def for_dim(cls, d: int) -> "LimitConstants":
        if d < 1:
            raise DataError("dimension must be at least 1")
        eta, eta1 = unit_ball_volume(d), unit_ball_volume(d - 1)
        return cls(d, eta, eta1, 2.0 * eta1 / ((d + 1) * eta ** (1.0 + 1.0 / d)))


@dataclass(frozen=True)
class CutLimit:
    """Right-hand side of the cut limit and its ingredients."""

    C_d: float
    balance: float
    integral: float
    mass_minus: float
    mass_plus: float

    @property
    def value(self) -> float:
        return self.C_d * self.balance * self.integral


def side_masses(density: AnalyticDensity, axis: int, offset: float, lam: float = 1.0) -> tuple[float, float, float, float]:
    """``(mu-, mu+, nu-, nu+)``: probability and rho-weighted mass on each side of ``x[axis] = offset``."""
    mu_minus = float(density.axis_cdf(offset, axis))
    if lam == 1.0:
        return mu_minus, 1.0 - mu_minus, mu_minus, 1.0 - mu_minus
    if density.dim == 1:
        lo, hi = density.bounds(0)
        edges = np.linspace(lo, hi, P_GRID_CELLS + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        weight = np.diff(density.axis_cdf(edges)) * rho(analytic_p(density, mids), lam)
        left = mids <= offset
    else:
        x = density.sample(MC_DRAWS, density.mc_seed + 1)
        weight = rho(analytic_p(density, x), lam) / MC_DRAWS
        left = x[:, axis] <= offset
    return mu_minus, 1.0 - mu_minus, float(weight[left].sum()), float(weight[~left].sum())


def limit_cut_integral(density: AnalyticDensity, offset: float, lam: float, axis: int = 0,
                       balance: str = "mass") -> CutLimit:
    """``C_d * B * integral over S of f^(1-1/d) rho^(1+1/d)`` for the plane ``x[axis] = offset``.

    ``balance="mass"`` uses ``B = 1/mu(C+) + 1/mu(C-)``, the limit of the
    cardinality balancing term.  ``balance="volume"`` replaces the masses by
    ``integral_C f rho``, the limit of ``vol(V+-) / (n k)`` on a graph whose
    out-degrees are ``k rho``; the two agree when ``lam = 1``.
    """
    d = density.dim
    C_d = LimitConstants.for_dim(d).C_d
    mm, mp, vm, vp = side_masses(density, axis, offset, lam)
    if min(mm, mp) < 1e-12:
        warnings.warn(f"hyperplane x[{axis}]={offset} misses the support; limit is 0")
        return CutLimit(C_d, 0.0, 0.0, mm, mp)
    if balance == "mass":
        B = 1.0 / mm + 1.0 / mp
    elif balance == "volume":
        B = 1.0 / vm + 1.0 / vp
    else:
        raise DataError(f"unknown balance {balance!r}")

    if d == 1:
        integral = float(rho(analytic_p(density, offset), lam) ** 2)
    else:
        others = [j for j in range(d) if j != axis]
        if d > 2:
            raise DataError("plane integrals are implemented for d <= 2")
        lo, hi = density.bounds(others[0])
        s = np.linspace(lo, hi, 4001)
        pts = np.empty((len(s), 2))
        pts[:, axis] = offset
        pts[:, others[0]] = s
        f = density.pdf(pts)
        r = rho(analytic_p(density, pts), lam)
        integral = float(np.trapezoid(f ** (1 - 1 / d) * r ** (1 + 1 / d), s))
    return CutLimit(C_d, B, integral, mm, mp)


# ---------------------------------------------------------------------------
# Monte-Carlo verification
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    sizes: list[int]
    statistics: list[float]
    target: float
    errors: list[float]
    monotone_flag: bool
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return asdict(self)

    def save(self, json_path: str | Path, csv_path: str | Path | None = None) -> None:
        Path(json_path).write_text(json.dumps(self.to_json_dict(), sort_keys=True, indent=1) + "\n")
        if csv_path is not None:
            with Path(csv_path).open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["size", "statistic", "target", "error"])
                for n, s, e in zip(self.sizes, self.statistics, self.errors):
                    w.writerow([n, repr(float(s)), repr(float(self.target)), repr(float(e))])


def nonincreasing_with_slack(errors: Sequence[float], allowed_inversions: int = 1) -> bool:
    ups = sum(1 for a, b in zip(errors, errors[1:]) if b > a)
    return ups <= allowed_inversions


def _child_seeds(seed: int, count: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def sqrt_rule(n: int) -> int:
    return int(math.ceil(math.sqrt(n)))


def default_k_rule(d: int) -> Callable[[int], int]:
    """``ceil(n^0.7)`` in one dimension, ``ceil(log(n)^2)`` otherwise."""
    if d == 1:
        return lambda n: int(math.ceil(n ** 0.7))
    return lambda n: int(math.ceil(math.log(n) ** 2))


def _check_sizes(sizes):
    if not sizes:
        raise DataError("need at least one sample size")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DataError("sample sizes must be strictly increasing")


def verify_rank_convergence(density: AnalyticDensity, sizes: Sequence[int],
                            l_rule: Callable[[int], int] = sqrt_rule, B: int = 5, seed: int = 0,
                            n_probes: int = 50, replicates: int = 1, probes=None) -> ConvergenceReport:
    """Mean ``|R(y) - p(y)|`` over a fixed probe set, per sample size.

    Probes are drawn once from the density (or passed in) and ranked out of
    sample against each fresh data set; the statistic is averaged over
    ``replicates`` independent data sets per size.
    """
    sizes = [int(n) for n in sizes]
    _check_sizes(sizes)
    seeds = _child_seeds(seed, 1 + len(sizes) * replicates)
    if probes is None:
        probes = density.sample(n_probes, seeds[0])
    probes = np.asarray(probes, dtype=float)
    p_true = np.atleast_1d(analytic_p(density, probes))
    stats, per_rep = [], []
    for i, n in enumerate(sizes):
        l = l_rule(n)
        errs = []
        for r in range(replicates):
            s = seeds[1 + i * replicates + r]
            data = density.sample(n, s)
            R = rank_queries(data, probes, l, B, s)
            errs.append(float(np.mean(np.abs(R - p_true))))
        per_rep.append(errs)
        stats.append(float(np.mean(errs)))
    return ConvergenceReport(
        sizes, stats, 0.0, list(stats), nonincreasing_with_slack(stats),
        {"theorem": "rank", "l": [l_rule(n) for n in sizes], "B": B, "replicates": replicates,
         "per_replicate": per_rep, "n_probes": len(probes), "seed": seed},
    )


@dataclass(frozen=True)
class DirectedCut:
    cut: float
    n_minus: int
    n_plus: int
    vol_minus: float
    vol_plus: float


def directed_rmd_cut(points: np.ndarray, p: np.ndarray, k: int, lam: float, axis: int, offset: float) -> DirectedCut:
    """Cut of the plane on the directed graph linking x to its ``round(k rho(x))`` nearest neighbours."""
    n = len(points)
    deg = np.clip(np.floor(k * rho(p, lam) + 0.5).astype(np.int64), 1, n - 1)
    nb = knn_distances(points, points, int(deg.max()), exclude_self=True)
    minus = points[:, axis] <= offset
    sel = np.arange(nb.max_k)[None, :] < deg[:, None]
    crossing = (minus[nb.indices] != minus[:, None]) & sel
    return DirectedCut(float(crossing.sum()), int(minus.sum()), int((~minus).sum()),
                       float(deg[minus].sum()), float(deg[~minus].sum()))


def scaled_cut_statistic(c: DirectedCut, n: int, k: int, d: int, objective: str) -> float:
    """Scaled RCut ``(1/k)(n/k)^(1/d) Cut (1/|V+| + 1/|V-|)`` or NCut ``(n/k)^(1/d) Cut (1/vol+ + 1/vol-)``."""
    if min(c.n_minus, c.n_plus) == 0:
        return float("inf")
    if objective == "rcut":
        return (n / k) ** (1.0 / d) / k * c.cut * (1.0 / c.n_minus + 1.0 / c.n_plus)
    if objective == "ncut":
        return (n / k) ** (1.0 / d) * c.cut * (1.0 / c.vol_minus + 1.0 / c.vol_plus)
    raise DataError(f"unknown objective {objective!r}")


def verify_cut_limit(density: AnalyticDensity, offset: float, lam: float, sizes: Sequence[int],
                     k_rule: Callable[[int], int] | None = None, seed: int = 0, axis: int = 0,
                     replicates: int = 1, objective: str = "rcut", balance: str | None = None) -> ConvergenceReport:
    """Relative error of the scaled empirical cut against its limit, per sample size.

    RCut is compared with the ``balance="mass"`` limit and NCut, by default,
    with the ``balance="volume"`` limit.
    """
    sizes = [int(n) for n in sizes]
    _check_sizes(sizes)
    d = density.dim
    k_rule = k_rule or default_k_rule(d)
    if balance is None:
        balance = "mass" if objective == "rcut" else "volume"
    target = limit_cut_integral(density, offset, lam, axis, balance).value
    seeds = _child_seeds(seed, len(sizes) * replicates)
    stats, per_rep, ks = [], [], []
    for i, n in enumerate(sizes):
        k = k_rule(n)
        ks.append(k)
        vals = []
        for r in range(replicates):
            pts = density.sample(n, seeds[i * replicates + r])
            c = directed_rmd_cut(pts, np.atleast_1d(analytic_p(density, pts)), k, lam, axis, offset)
            vals.append(scaled_cut_statistic(c, n, k, d, objective))
        per_rep.append(vals)
        stats.append(float(np.mean(vals)))
    errors = [abs(s - target) / target if target > 0 else float("inf") for s in stats]
    return ConvergenceReport(
        sizes, stats, float(target), errors, nonincreasing_with_slack(errors),
        {"theorem": "cut", "objective": objective, "balance": balance, "lambda": lam, "offset": offset,
         "axis": axis, "k": ks, "replicates": replicates, "per_replicate": per_rep, "seed": seed},
    )

"""Pilot for the cut-limit tests: brute-force directed RMD cuts.

The density is the first-axis marginal of the unbalanced .85/.15 pair.

Run from the repository root with ``python tests/pilots/pilot_limits.py``.
Writes ``tests/fixtures/pilot_limits.json``.  The graph is built from a dense
distance matrix and the cut is counted edge by edge, with no shared code path
beyond the density and the limiting p.
"""

import json
import math
from pathlib import Path

import numpy as np

from rmdgraph.dataset import fig2_mixture
from rmdgraph.limits import AnalyticDensity, analytic_p, limit_cut_integral

N = 2000
SEEDS = list(range(10))
LAMBDAS = [0.4, 1.0]


def brute_cut(x, p, k, lam, offset):
    n = len(x)
    deg = np.clip(np.floor(k * (lam + 2 * (1 - lam) * p) + 0.5).astype(int), 1, n - 1)
    D = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(D, np.inf)
    cut = 0
    for i in range(n):
        nbrs = np.argsort(D[i], kind="stable")[: deg[i]]
        cut += int(np.sum((x[nbrs] <= offset) != (x[i] <= offset)))
    left = int(np.sum(x <= offset))
    return cut, left, n - left


def main():
    dens = AnalyticDensity(fig2_mixture()).marginal(0)
    offset = float(dens.valley(0.0, 4.5)[0])
    k = int(math.ceil(N ** 0.6))
    out = {"n": N, "k": k, "offset": offset, "seeds": SEEDS, "runs": {}}
    for lam in LAMBDAS:
        target = limit_cut_integral(dens, offset, lam).value
        rows = []
        for s in SEEDS:
            x = dens.sample(N, s)[:, 0]
            p = np.atleast_1d(analytic_p(dens, x[:, None]))
            cut, nm, npl = brute_cut(x, p, k, lam, offset)
            stat = (N / k) / k * cut * (1 / nm + 1 / npl)
            rows.append({"seed": s, "cut": cut, "n_minus": nm, "n_plus": npl, "statistic": stat})
        mean = float(np.mean([r["statistic"] for r in rows]))
        out["runs"][repr(lam)] = {"target": target, "mean_statistic": mean,
                                  "relative_error": abs(mean - target) / target, "rows": rows}
        print(f"lambda={lam}: target={target:.4f} mean={mean:.4f} rel.err={abs(mean - target) / target:.3f}")
    path = Path(__file__).resolve().parents[1] / "fixtures" / "pilot_limits.json"
    path.write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()

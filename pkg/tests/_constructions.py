"""Hand-built graphs with a prescribed cut ratio q and unbalancedness y."""

import itertools

import numpy as np

from rmdgraph.graphs import SparseGraph

N = 40


def _clique(nodes):
    return list(itertools.combinations(nodes, 2))


def _bipartite(a, b, count):
    pairs = list(itertools.product(a, b))
    if count > len(pairs):
        raise ValueError("not enough node pairs")
    return pairs[:count]


def two_cut_graph(y: float, q: float):
    """Graph on 40 nodes with a valley cut (min share y) and a balanced 20/20 cut.

    Returns ``(graph, candidate, balanced)`` with ``Cut(candidate) = 10 q`` and
    ``Cut(balanced) = 10``.  For ``y < 0.5`` the blocks are A (40y nodes), M
    and B (20 nodes) in a chain: A-M carries the candidate cut and M-B the
    balanced one.  For ``y = 0.5`` four blocks of 10 give two different
    balanced splits.
    """
    a_edges = int(round(10 * q))
    b_edges = 10
    m = int(round(y * N))
    idx = np.arange(N)
    if m < N // 2:
        A, M, B = idx[:m], idx[m:N // 2], idx[N // 2:]
        edges = _clique(A) + _clique(M) + _clique(B)
        edges += _bipartite(A, M, a_edges) + _bipartite(M, B, b_edges)
        cand = np.r_[np.zeros(m), np.ones(N - m)].astype(int)
        bal = np.r_[np.zeros(N // 2), np.ones(N // 2)].astype(int)
    else:
        P, Q, R, S = idx[:10], idx[10:20], idx[20:30], idx[30:]
        edges = _clique(P) + _clique(Q) + _clique(R) + _clique(S)
        edges += _bipartite(P, R, a_edges) + _bipartite(P, Q, b_edges)
        cand = np.isin(idx, np.r_[R, S]).astype(int)
        bal = np.isin(idx, np.r_[Q, S]).astype(int)
    e = np.array(sorted(set(tuple(sorted(p)) for p in edges)))
    g = SparseGraph(N, e[:, 0], e[:, 1], np.ones(len(e)), "binary", {"kind": "constructed", "y": y, "q": q})
    return g, cand, bal


Y_GRID = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]
Q_GRID = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from rmdgraph.dataset import gen_two_moons_gaussian
from rmdgraph.errors import GraphError
from rmdgraph.graphs import SparseGraph, build_epsilon, build_knn, mean_knn_distance, union_of_cliques
from rmdgraph.spectral import (
    Partition,
    components_partition,
    laplacian,
    smallest_eigenpairs,
    spectral_cluster,
)


def edge(n, pairs, w=None):
    u = np.array([p[0] for p in pairs])
    v = np.array([p[1] for p in pairs])
    w = np.ones(len(pairs)) if w is None else np.asarray(w, dtype=float)
    return SparseGraph(n, u, v, w, "binary" if np.all(w == 1) else "rbf")


def test_laplacian_two_nodes():
    g = edge(2, [(0, 1)])
    np.testing.assert_array_equal(laplacian(g, "unnormalized").toarray(), [[1, -1], [-1, 1]])
    np.testing.assert_allclose(laplacian(g, "normalized").toarray(), [[1, -1], [-1, 1]])


def test_triangle_spectrum():
    vals = np.linalg.eigvalsh(laplacian(edge(3, [(0, 1), (0, 2), (1, 2)])).toarray())
    np.testing.assert_allclose(vals, [0, 3, 3], atol=1e-12)


def test_isolated_node_normalized():
    g = edge(3, [(0, 1)])
    with pytest.raises(GraphError, match="node 2"):
        laplacian(g, "normalized")
    np.testing.assert_allclose(laplacian(g).toarray().sum(axis=1), 0)


@given(st.lists(st.integers(1, 6), min_size=1, max_size=5))
def test_zero_multiplicity_equals_components(sizes):
    g = union_of_cliques(sizes)
    L = laplacian(g).toarray()
    vals = np.linalg.eigvalsh(L)
    assert vals.min() >= -1e-8
    assert int(np.sum(np.abs(vals) < 1e-8)) == len(sizes)
    np.testing.assert_allclose(L, L.T)


@given(st.integers(0, 1000))
def test_random_laplacians_psd(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((30, 2))
    g = build_knn(x, 4, "rbf", sigma=1.0)
    for kind in ("unnormalized", "normalized"):
        assert np.linalg.eigvalsh(laplacian(g, kind).toarray()).min() >= -1e-8


def test_iterative_eigensolver_matches_dense():
    x = np.random.default_rng(0).standard_normal((700, 2))
    L = laplacian(build_knn(x, 8))
    vals, vecs = smallest_eigenpairs(L, 4)
    ref = scipy.linalg.eigh(L.toarray(), eigvals_only=True, subset_by_index=[0, 3])
    np.testing.assert_allclose(vals, ref, atol=1e-7)
    np.testing.assert_allclose(np.linalg.norm(L @ vecs - vecs * vals, axis=0), 0, atol=1e-6)


def test_two_cliques_give_components():
    g = union_of_cliques([4, 6])
    for obj in ("rcut", "ncut"):
        p = spectral_cluster(g, 2, obj, 0)
        assert len(set(p.assignment[:4])) == 1 and len(set(p.assignment[4:])) == 1
        assert p.assignment[0] != p.assignment[5]


def test_components_rule_isolates_smallest():
    labels = np.array([0, 0, 0, 1, 2, 2, 3])
    a = components_partition(labels, 3)
    # singletons 1 (node 3) and 3 (node 6) are the two smallest; ties by first node
    assert a[3] == 0 and a[6] == 1
    assert set(a[[0, 1, 2, 4, 5]]) == {2}


def test_spectral_recovers_connected_blocks():
    rng = np.random.default_rng(1)
    x = np.vstack([rng.normal(0, 0.3, (60, 2)), rng.normal(3, 0.3, (60, 2))])
    g = build_knn(x, 65)  # more neighbours than a block holds, so the graph is connected
    for obj in ("rcut", "ncut"):
        p = spectral_cluster(g, 2, obj, 0)
        assert p.provenance["method"] == "spectral"
        assert len(set(p.assignment[:60])) == 1 and p.assignment[0] != p.assignment[60]


def test_determinism_and_permutation_equivariance():
    x = gen_two_moons_gaussian(300, noise=0.05, seed=3).points
    g = build_knn(x, 10)
    a, b = spectral_cluster(g, 3, "ncut", 5), spectral_cluster(g, 3, "ncut", 5)
    np.testing.assert_array_equal(a.assignment, b.assignment)
    perm = np.random.default_rng(0).permutation(300)
    c = spectral_cluster(g.permuted(perm), 3, "ncut", 5)
    # node i of the original graph is node perm[i] of the permuted one
    back = Partition(c.assignment[perm], 3)
    assert back.digest() == Partition(a.assignment, 3).digest()


def test_epsilon_graph_outlier_singleton():
    ds = gen_two_moons_gaussian(1000, seed=0)
    g = build_epsilon(ds, mean_knn_distance(ds, 30))
    assert spectral_cluster(g, 3, "rcut", 0).sizes().min() < 5


def test_errors():
    g = union_of_cliques([3, 3])
    with pytest.raises(GraphError):
        spectral_cluster(g, 1)
    with pytest.raises(GraphError):
        spectral_cluster(g, 7)
    with pytest.raises(GraphError):
        spectral_cluster(g, 2, "mincut")
    with pytest.raises(GraphError):
        Partition(np.array([0, 2]), 2)


def test_partition_io(tmp_path):
    p = Partition(np.array([1, 1, 0, 2]), 3, {"seed": 1})
    p.save(tmp_path / "p.csv")
    q = Partition.load(tmp_path / "p.csv")
    np.testing.assert_array_equal(q.assignment, p.assignment)
    assert q.provenance == {"seed": 1}
    assert Partition(np.array([2, 2, 1, 0]), 3).digest() == p.digest()
    np.testing.assert_array_equal(p.canonical(), [0, 0, 1, 2])

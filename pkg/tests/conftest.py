import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def path_graph(n, w=1.0):
    from rmdgraph.graphs import SparseGraph
    u = np.arange(n - 1)
    return SparseGraph(n, u, u + 1, np.full(n - 1, float(w)), "binary" if w == 1.0 else "rbf", {"kind": "path"})

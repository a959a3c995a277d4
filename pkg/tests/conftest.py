import numpy as np
import pytest

from graphheat.families import FamilySpec, generate_family
from graphheat.graph import WeightedGraph, build_graph


def two_vertex(w=1.0, mu=1.0):
    return build_graph({"vertices": ["a", "b"], "edges": [["a", "b", w]], "measure": mu})


def cycle(n):
    return generate_family(FamilySpec("cycle", size=n))


def path(n):
    return generate_family(FamilySpec("path", size=n))


def box(dim, R):
    return generate_family(FamilySpec("box_Zd", dim=dim, truncation_radius=R))


def square_grid(k):
    """k x k grid as a finite graph (no truncation boundary)."""
    idx = np.arange(k * k).reshape(k, k)
    rows = np.concatenate((idx[:, :-1].ravel(), idx[:-1, :].ravel()))
    cols = np.concatenate((idx[:, 1:].ravel(), idx[1:, :].ravel()))
    return WeightedGraph(k * k, rows, cols, np.ones(rows.size), 1.0)


def weighted_random(n, seed, extra_edges=None):
    """Connected graph: random spanning tree plus chords, random weights and measure."""
    rng = np.random.default_rng(seed)
    parent = [int(rng.integers(0, i)) for i in range(1, n)]
    rows = list(range(1, n))
    cols = parent
    for _ in range(extra_edges if extra_edges is not None else n):
        i, j = rng.integers(0, n, 2)
        if i != j and not any({i, j} == {a, b} for a, b in zip(rows, cols)):
            rows.append(int(i))
            cols.append(int(j))
    w = rng.uniform(0.2, 3.0, len(rows))
    mu = rng.uniform(0.5, 2.0, n)
    return WeightedGraph(n, rows, cols, w, mu)


@pytest.fixture
def finite_graphs():
    """The finite test graphs used across the suite."""
    return {
        "two_vertex": two_vertex(),
        "cycle5": cycle(5),
        "path7": path(7),
        "grid9": square_grid(9),
        "weighted12": weighted_random(12, 3),
    }

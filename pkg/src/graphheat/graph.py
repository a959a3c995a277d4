"""Weighted graphs with a vertex measure.

A :class:`WeightedGraph` holds symmetric nonnegative edge weights ``w`` and a
strictly positive vertex measure ``mu``. Everything else in the package (the
mu-Laplacian, the heat semigroup, the bounds) is built on top of it.

Vertices are dense integer indices ``0..n-1``; optional labels (lattice
coordinates, tree paths, strings) are carried along for I/O only.
"""

from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

__all__ = [
    "GraphError",
    "WeightedGraph",
    "VertexFunction",
    "Ball",
    "build_graph",
    "graph_distance",
    "ball",
    "laplacian_apply",
    "gamma_form",
    "mu_inner_product",
    "load_graph",
    "dump_graph",
    "graph_to_dict",
]


class GraphError(ValueError):
    """Invalid graph description."""


class WeightedGraph:
    """Immutable connected weighted graph with a positive vertex measure.

    Parameters
    ----------
    n : int
        Number of vertices.
    rows, cols, weights : array_like
        Undirected edge list; each unordered pair may appear once or in both
        orientations (with equal weight).
    mu : array_like or float
        Vertex measure, strictly positive.
    labels : sequence, optional
        Display labels, one per vertex.
    boundary : iterable of int, optional
        Vertices whose neighbourhood is incomplete because the graph is a
        finite truncation of an infinite family.
    mu_min : float, optional
        Global lower bound on ``mu`` over the (possibly infinite) family;
        defaults to the minimum over stored vertices.
    """

    _DIST_CACHE_SIZE = 32

    def __init__(self, n, rows, cols, weights, mu, labels=None, boundary=(), mu_min=None):
        n = int(n)
        if n < 1:
            raise GraphError("graph must have at least one vertex")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if not (rows.shape == cols.shape == weights.shape):
            raise GraphError("edge arrays must have equal length")
        if rows.size:
            bad = (rows < 0) | (rows >= n) | (cols < 0) | (cols >= n)
            if bad.any():
                k = int(np.flatnonzero(bad)[0])
                raise GraphError(f"edge {k} ({rows[k]}, {cols[k]}) references a vertex outside 0..{n - 1}")
            loops = rows == cols
            if loops.any():
                k = int(np.flatnonzero(loops)[0])
                raise GraphError(f"edge {k} is a self-loop at vertex {rows[k]}")
            neg = ~np.isfinite(weights) | (weights < 0)
            if neg.any():
                k = int(np.flatnonzero(neg)[0])
                raise GraphError(f"edge {k} ({rows[k]}, {cols[k]}) has invalid weight {weights[k]!r}")

        # canonical orientation; duplicates must agree
        lo = np.minimum(rows, cols)
        hi = np.maximum(rows, cols)
        order = np.lexsort((hi, lo))
        lo, hi, weights = lo[order], hi[order], weights[order]
        if lo.size > 1:
            same = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
            clash = same & (weights[1:] != weights[:-1])
            if clash.any():
                k = int(np.flatnonzero(clash)[0])
                raise GraphError(
                    f"non-symmetric weight on edge ({lo[k]}, {hi[k]}): "
                    f"{weights[k]!r} vs {weights[k + 1]!r}"
                )
            keep = np.concatenate(([True], ~same))
            lo, hi, weights = lo[keep], hi[keep], weights[keep]
        # zero weights are invisible to the Laplacian and must not shorten distances
        nz = weights > 0
        lo, hi, weights = lo[nz], hi[nz], weights[nz]

        mu_arr = np.broadcast_to(np.asarray(mu, dtype=float), (n,)).copy()
        badmu = ~np.isfinite(mu_arr) | (mu_arr <= 0)
        if badmu.any():
            k = int(np.flatnonzero(badmu)[0])
            raise GraphError(f"measure at vertex {k} must be positive, got {mu_arr[k]!r}")

        W = sparse.coo_matrix(
            (np.concatenate((weights, weights)), (np.concatenate((lo, hi)), np.concatenate((hi, lo)))),
            shape=(n, n),
        ).tocsr()
        W.sort_indices()
        ncomp, comp = csgraph.connected_components(W, directed=False)
        if ncomp > 1:
            k = int(np.flatnonzero(comp != comp[0])[0])
            raise GraphError(f"graph is disconnected: vertex {k} is not reachable from vertex 0")

        if labels is not None:
            labels = tuple(labels)
            if len(labels) != n:
                raise GraphError(f"expected {n} labels, got {len(labels)}")
            if len(set(labels)) != n:
                raise GraphError("vertex labels must be unique")

        boundary_mask = np.zeros(n, dtype=bool)
        b = np.asarray(sorted(set(int(v) for v in boundary)), dtype=np.int64)
        if b.size and (b.min() < 0 or b.max() >= n):
            raise GraphError("boundary vertex out of range")
        boundary_mask[b] = True

        self._n = n
        self._W = W
        self._mu = mu_arr
        self._mu.flags.writeable = False
        coo = W.tocoo()
        self._rows = coo.row.astype(np.int64)
        self._cols = coo.col.astype(np.int64)
        self._wts = coo.data
        self._m = np.asarray(W.sum(axis=1)).ravel()
        self._m.flags.writeable = False
        self._ratio = self._m / self._mu
        self._D_mu = float(self._ratio.max())
        self._labels = labels
        self._label_index = None
        self._boundary = boundary_mask
        self._boundary.flags.writeable = False
        stored_min = float(mu_arr.min())
        if mu_min is None:
            mu_min = stored_min
        elif not (0 < mu_min <= stored_min):
            raise GraphError(f"declared mu_min={mu_min!r} must lie in (0, {stored_min}]")
        self._mu0 = float(mu_min)
        self._dist_cache = OrderedDict()

    # -- basic data -----------------------------------------------------
    @property
    def n(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    @property
    def W(self) -> sparse.csr_matrix:
        """Symmetric weight matrix (treat as read-only)."""
        return self._W

    @property
    def mu(self) -> np.ndarray:
        return self._mu

    @property
    def degree(self) -> np.ndarray:
        """Weighted degree ``m(x) = sum_y w(x, y)``."""
        return self._m

    @property
    def D_mu(self) -> float:
        """``max_x m(x) / mu(x)``."""
        return self._D_mu

    @property
    def mu0(self) -> float:
        """Lower bound on the measure."""
        return self._mu0

    @property
    def labels(self):
        return self._labels

    @property
    def boundary(self) -> np.ndarray:
        """Boolean mask of truncation-boundary vertices."""
        return self._boundary

    @property
    def has_boundary(self) -> bool:
        return bool(self._boundary.any())

    @property
    def edge_arrays(self):
        """``(rows, cols, weights)`` listing each edge in both orientations."""
        return self._rows, self._cols, self._wts

    @property
    def num_edges(self) -> int:
        return self._wts.size // 2

    def edges(self):
        """Undirected edges ``(i, j, w)`` with ``i < j`` in index order."""
        sel = self._rows < self._cols
        return list(zip(self._rows[sel].tolist(), self._cols[sel].tolist(), self._wts[sel].tolist()))

    def neighbors(self, x: int):
        """Neighbour indices and edge weights of ``x``."""
        x = self.check_vertex(x)
        lo, hi = self._W.indptr[x], self._W.indptr[x + 1]
        return self._W.indices[lo:hi], self._W.data[lo:hi]

    def check_vertex(self, x) -> int:
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, (int, np.integer)):
            raise KeyError(f"vertex index must be an integer, got {x!r}")
        if not 0 <= int(x) < self._n:
            raise KeyError(f"vertex {x} not in graph with {self._n} vertices")
        return int(x)

    def index_of(self, label) -> int:
        """Index of the vertex carrying ``label``."""
        if self._labels is None:
            return self.check_vertex(label)
        if self._label_index is None:
            self._label_index = {lab: i for i, lab in enumerate(self._labels)}
        if isinstance(label, list):
            label = tuple(label)
        try:
            return self._label_index[label]
        except KeyError:
            raise KeyError(f"no vertex labelled {label!r}") from None

    def label_of(self, x: int):
        x = self.check_vertex(x)
        return x if self._labels is None else self._labels[x]

    # -- metric -----------------------------------------------------------
    def distances_from(self, x: int) -> np.ndarray:
        """Graph distance from ``x`` to every vertex (breadth-first search)."""
        x = self.check_vertex(x)
        cache = self._dist_cache
        if x in cache:
            cache.move_to_end(x)
            return cache[x]
        d = csgraph.shortest_path(self._W, method="D", unweighted=True, indices=x)
        d = d.astype(np.int64)
        d.flags.writeable = False
        cache[x] = d
        if len(cache) > self._DIST_CACHE_SIZE:
            cache.popitem(last=False)
        return d

    def volumes(self, x: int) -> np.ndarray:
        """``V(x, r)`` for ``r = 0 .. eccentricity(x)``."""
        d = self.distances_from(x)
        return np.cumsum(np.bincount(d, weights=self._mu))

    def faithful_radius(self, x: int) -> float:
        """Largest ``r`` for which ``B(x, r)`` agrees with the untruncated family.

        Equals the distance from ``x`` to the nearest boundary vertex, or
        ``inf`` for a graph without truncation boundary.
        """
        if not self.has_boundary:
            return np.inf
        return float(self.distances_from(x)[self._boundary].min())

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self._n}, edges={self.num_edges}, D_mu={self._D_mu:g}, mu0={self._mu0:g})"


@dataclass(frozen=True)
class VertexFunction:
    """Real function on a finite support, zero elsewhere."""

    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=np.int64)
        v = np.asarray(self.values, dtype=float)
        if s.shape != v.shape:
            raise ValueError("support and values must have the same shape")
        if s.size > 1 and np.any(np.diff(s) <= 0):
            order = np.argsort(s, kind="stable")
            s, v = s[order], v[order]
            if np.any(np.diff(s) == 0):
                raise ValueError("support has repeated vertices")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_dense(cls, values) -> "VertexFunction":
        values = np.asarray(values, dtype=float)
        return cls(np.arange(values.size), values)

    def __call__(self, y: int) -> float:
        k = np.searchsorted(self.support, y)
        if k < self.support.size and self.support[k] == y:
            return float(self.values[k])
        return 0.0

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.support] = self.values
        return out


def _dense(g: WeightedGraph, f) -> np.ndarray:
    if isinstance(f, VertexFunction):
        if f.support.size and f.support[-1] >= g.n:
            raise KeyError("function support is not contained in the graph")
        return f.dense(g.n)
    f = np.asarray(f, dtype=float)
    if f.shape != (g.n,):
        raise ValueError(f"expected a vector of length {g.n}, got shape {f.shape}")
    return f


@dataclass(frozen=True)
class Ball:
    center: int
    radius: int
    members: np.ndarray
    volume: float


def build_graph(spec) -> WeightedGraph:
    """Validate a graph description and build the graph.

    ``spec`` is a mapping with keys ``vertices`` (a count or a list of
    labels), ``edges`` (``[i, j, weight]`` triples, or ``[i, j]`` for unit
    weight) and ``measure`` (a constant, a list, or ``"degree"``). Optional
    ``boundary`` and ``mu_min`` describe a truncated family.
    """
    try:
        verts = spec["vertices"]
    except (KeyError, TypeError):
        raise GraphError("graph description needs a 'vertices' field") from None
    if isinstance(verts, bool):
        raise GraphError("'vertices' must be a count or a list of labels")
    if isinstance(verts, int):
        n, labels = verts, None
    elif isinstance(verts, (list, tuple)):
        n = len(verts)
        labels = [tuple(v) if isinstance(v, list) else v for v in verts]
    else:
        raise GraphError("'vertices' must be a count or a list of labels")

    rows, cols, wts = [], [], []
    for k, e in enumerate(spec.get("edges", [])):
        if not isinstance(e, (list, tuple)) or len(e) not in (2, 3):
            raise GraphError(f"edges[{k}] must be [i, j] or [i, j, weight]")
        i, j = e[0], e[1]
        if labels is not None and not isinstance(i, int):
            i = _lookup(labels, i, f"edges[{k}]")
        if labels is not None and not isinstance(j, int):
            j = _lookup(labels, j, f"edges[{k}]")
        if not isinstance(i, int) or not isinstance(j, int) or isinstance(i, bool) or isinstance(j, bool):
            raise GraphError(f"edges[{k}] endpoints must be vertex indices")
        rows.append(i)
        cols.append(j)
        wts.append(float(e[2]) if len(e) == 3 else 1.0)

    measure = spec.get("measure", 1.0)
    if isinstance(measure, str):
        if measure != "degree":
            raise GraphError(f"unknown measure rule {measure!r}")
        probe = WeightedGraph(n, rows, cols, wts, 1.0)
        measure = probe.degree
    elif isinstance(measure, (list, tuple)) and len(measure) != n:
        raise GraphError(f"measure has {len(measure)} entries for {n} vertices")
    return WeightedGraph(
        n, rows, cols, wts, measure,
        labels=labels,
        boundary=spec.get("boundary", ()),
        mu_min=spec.get("mu_min"),
    )


def _lookup(labels, lab, where):
    lab = tuple(lab) if isinstance(lab, list) else lab
    try:
        return labels.index(lab)
    except ValueError:
        raise GraphError(f"{where}: unknown vertex label {lab!r}") from None


def graph_to_dict(g: WeightedGraph) -> dict:
    """Serializable description; ``build_graph(graph_to_dict(g))`` reproduces ``g``."""
    if g.labels is None:
        verts = g.n
    else:
        verts = [list(lab) if isinstance(lab, tuple) else lab for lab in g.labels]
    out = {
        "vertices": verts,
        "edges": [[i, j, w] for i, j, w in g.edges()],
        "measure": g.mu.tolist(),
    }
    if g.has_boundary:
        out["boundary"] = np.flatnonzero(g.boundary).tolist()
    if g.mu0 != float(g.mu.min()):
        out["mu_min"] = g.mu0
    return out


def dump_graph(g: WeightedGraph, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(graph_to_dict(g), indent=1) + "\n")
    return path


def load_graph(path) -> WeightedGraph:
    try:
        spec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: not valid JSON ({exc})") from None
    return build_graph(spec)


def graph_distance(g: WeightedGraph, x: int, y: int) -> int:
    """Number of edges on a shortest path from ``x`` to ``y``."""
    y = g.check_vertex(y)
    return int(g.distances_from(x)[y])


def ball(g: WeightedGraph, x: int, r: int) -> Ball:
    """Closed ball ``B(x, r)`` with its measure."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    x = g.check_vertex(x)
    members = np.flatnonzero(g.distances_from(x) <= r)
    return Ball(x, int(r), members, float(g.mu[members].sum()))


def laplacian_apply(g: WeightedGraph, f) -> np.ndarray:
    """``(Lap f)(x) = mu(x)^-1 sum_y w(x,y) (f(y) - f(x))``."""
    f = _dense(g, f)
    r, c, w = g.edge_arrays
    acc = np.bincount(r, weights=w * (f[c] - f[r]), minlength=g.n)
    return acc / g.mu


def gamma_form(g: WeightedGraph, f, h) -> np.ndarray:
    """Gradient form ``(2 mu(x))^-1 sum_y w(x,y) (f(y)-f(x)) (h(y)-h(x))``."""
    f = _dense(g, f)
    h = _dense(g, h)
    r, c, w = g.edge_arrays
    acc = np.bincount(r, weights=w * (f[c] - f[r]) * (h[c] - h[r]), minlength=g.n)
    return acc / (2.0 * g.mu)


def mu_inner_product(g: WeightedGraph, f, h) -> float:
    f = _dense(g, f)
    h = _dense(g, h)
    return float(np.sum(g.mu * f * h))

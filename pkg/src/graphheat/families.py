"""Deterministic graph families and their finite truncations.

``box_Zd`` and ``regular_tree`` are infinite; a truncation keeps the ball of
the given radius around the origin/root and marks the outermost shell as
boundary. ``path`` and ``cycle`` are genuinely finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import GraphError, WeightedGraph, load_graph

__all__ = ["FamilySpec", "generate_family", "FAMILIES"]

FAMILIES = ("path", "cycle", "box_Zd", "regular_tree", "custom_file")

_EXPR_NS = {k: getattr(math, k) for k in ("exp", "log", "sqrt", "sin", "cos", "pi", "e", "floor", "ceil")}
_EXPR_NS["abs"] = abs
_EXPR_NS["min"] = min
_EXPR_NS["max"] = max


def _compile(expr: str, where: str):
    try:
        code = compile(expr, f"<{where}>", "eval")
    except SyntaxError as exc:
        raise GraphError(f"{where}: cannot parse expression {expr!r}: {exc.msg}") from None
    return code


def _evaluate(code, where: str, **names) -> float:
    try:
        return float(eval(code, {"__builtins__": {}}, {**_EXPR_NS, **names}))
    except Exception as exc:  # noqa: BLE001 - report any user-expression failure uniformly
        raise GraphError(f"{where}: expression failed for {names}: {exc}") from None


@dataclass
class FamilySpec:
    """Description of a graph family instance.

    ``weight`` is a number or an expression in ``i, j`` (vertex indices) and
    ``x, y`` (vertex labels, tuples for lattices). ``measure`` is a number,
    ``"degree"``, or an expression in ``i``, ``x`` and ``deg``.
    """

    family: str
    truncation_radius: int = 0
    dim: int = 1
    degree: int = 3
    size: int | None = None
    weight: float | str = 1.0
    measure: float | str = 1.0
    mu_min: float | None = None
    path: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GraphError(f"family: unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if self.family in ("box_Zd", "regular_tree") and self.truncation_radius < 1:
            raise GraphError("family.truncation_radius: must be >= 1")
        if self.family == "box_Zd" and self.dim < 1:
            raise GraphError("family.dim: must be >= 1")
        if self.family == "regular_tree" and self.degree < 2:
            raise GraphError("family.degree: must be >= 2")
        if self.family == "custom_file" and not self.path:
            raise GraphError("family.path: required for custom_file")


def _box(dim: int, R: int):
    """Lattice points of the l1 ball of radius R, ordered by (norm, coords)."""
    side = 2 * R + 1
    grid = np.indices((side,) * dim).reshape(dim, -1).T - R
    norm = np.abs(grid).sum(axis=1)
    keep = norm <= R
    pts, norm = grid[keep], norm[keep]
    order = np.lexsort(tuple(pts[:, k] for k in reversed(range(dim))) + (norm,))
    pts, norm = pts[order], norm[order]
    lookup = np.full((side,) * dim, -1, dtype=np.int64)
    lookup[tuple((pts + R).T)] = np.arange(len(pts))
    rows, cols = [], []
    for k in range(dim):
        nb = pts.copy()
        nb[:, k] += 1
        ok = nb[:, k] <= R
        idx = np.full(len(pts), -1, dtype=np.int64)
        idx[ok] = lookup[tuple((nb[ok] + R).T)]
        ok &= idx >= 0
        rows.append(np.flatnonzero(ok))
        cols.append(idx[ok])
    return pts, np.concatenate(rows), np.concatenate(cols), norm == R, 2 * dim


def _tree(k: int, R: int):
    """Ball of radius R around the root of the k-regular tree, BFS order."""
    labels = [()]
    parent = [-1]
    depth = [0]
    frontier = [0]
    for d in range(1, R + 1):
        nxt = []
        for v in frontier:
            nchild = k if d == 1 else k - 1
            for c in range(nchild):
                labels.append(labels[v] + (c,))
                parent.append(v)
                depth.append(d)
                nxt.append(len(labels) - 1)
        frontier = nxt
    parent = np.array(parent)
    child = np.arange(1, len(labels))
    return labels, parent[1:], child, np.array(depth) == R, k


def generate_family(spec: FamilySpec) -> WeightedGraph:
    """Build the (truncated) instance described by ``spec``."""
    if spec.family == "custom_file":
        return load_graph(spec.path)

    full_degree = None
    boundary = np.zeros(0, dtype=bool)
    if spec.family == "path":
        n = spec.size if spec.size is not None else 2 * spec.truncation_radius + 1
        if n < 1:
            raise GraphError("family.size: must be >= 1")
        rows, cols = np.arange(n - 1), np.arange(1, n)
        labels = None
    elif spec.family == "cycle":
        n = spec.size if spec.size is not None else 2 * spec.truncation_radius + 1
        if n < 3:
            raise GraphError("family.size: a cycle needs at least 3 vertices")
        rows, cols = np.arange(n), (np.arange(n) + 1) % n
        labels = None
    elif spec.family == "box_Zd":
        pts, rows, cols, boundary, full_degree = _box(spec.dim, spec.truncation_radius)
        n = len(pts)
        labels = [tuple(int(c) for c in p) for p in pts]
    else:
        labels, rows, cols, boundary, full_degree = _tree(spec.degree, spec.truncation_radius)
        n = len(labels)

    if isinstance(spec.weight, str):
        code = _compile(spec.weight, "family.weight")
        lab = labels if labels is not None else range(n)
        wts = np.array([
            _evaluate(code, "family.weight", i=int(i), j=int(j), x=lab[i], y=lab[j])
            for i, j in zip(rows, cols)
        ])
    else:
        wts = np.full(len(rows), float(spec.weight))

    deg = np.bincount(rows, weights=wts, minlength=n) + np.bincount(cols, weights=wts, minlength=n)
    if full_degree is not None and not isinstance(spec.weight, str):
        # truncation boundary keeps the degree it has in the infinite family
        deg_full = np.full(n, full_degree * float(spec.weight))
    else:
        deg_full = deg

    mu_min = spec.mu_min
    if isinstance(spec.measure, str) and spec.measure == "degree":
        mu = deg_full
        if mu_min is None and full_degree is not None and not isinstance(spec.weight, str):
            mu_min = float(mu.min())
    elif isinstance(spec.measure, str):
        code = _compile(spec.measure, "family.measure")
        lab = labels if labels is not None else range(n)
        mu = np.array([_evaluate(code, "family.measure", i=i, x=lab[i], deg=deg_full[i]) for i in range(n)])
    else:
        mu = float(spec.measure)
    if full_degree is not None and isinstance(spec.measure, str) and spec.measure != "degree" and mu_min is None:
        raise GraphError("family.mu_min: required for an expression measure on an infinite family")

    return WeightedGraph(
        n, rows, cols, wts, mu,
        labels=labels,
        boundary=np.flatnonzero(boundary),
        mu_min=mu_min,
    )

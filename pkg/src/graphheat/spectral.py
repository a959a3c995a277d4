"""Bottom of the spectrum of ``-Lap`` in ``l2(mu)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import VertexFunction, WeightedGraph
from .semigroup import DirichletDomain

__all__ = [
    "SpectralBottom",
    "SpectralNonConvergence",
    "lambda_bottom",
    "rayleigh_quotient",
    "DomainMonotonicityReport",
    "domain_monotonicity_check",
]


class SpectralNonConvergence(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass
class SpectralBottom:
    lam: float
    witness: VertexFunction
    residual: float
    iterations: int
    domain_tag: str

    def row(self) -> tuple:
        return (self.domain_tag, self.lam, self.residual, self.iterations)


def _as_domain(g_or_dom) -> DirichletDomain:
    if isinstance(g_or_dom, DirichletDomain):
        return g_or_dom
    if isinstance(g_or_dom, WeightedGraph):
        return DirichletDomain.full(g_or_dom)
    raise TypeError("expected a WeightedGraph or DirichletDomain")


def rayleigh_quotient(g_or_dom, f) -> float:
    """``<-Lap f, f> / <f, f>`` in the mu inner product, killing included."""
    dom = _as_domain(g_or_dom)
    f = np.asarray(f, dtype=float)
    w = np.sqrt(dom.mu) * f
    S = dom.symmetric_operator()
    return float(w @ (S @ w) / (w @ w))


def lambda_bottom(g_or_dom, tol: float = 1e-10, max_iter: int = 500_000, start=None) -> SpectralBottom:
    """Smallest eigenvalue of ``-Lap`` on a finite graph or Dirichlet domain.

    Power iteration on ``A = I - S / (2 lam)`` where ``S`` is ``-Lap``
    symmetrized by ``sqrt(mu)`` and ``lam = max m / mu``; ``A`` is the lazy
    version of the uniformized semigroup step, has spectrum in ``[0, 1]``
    and its top eigenvector is the ground state. Stops once the residual
    ``||(-Lap - lam) f||_mu`` of the normalized iterate drops below ``tol``.
    """
    dom = _as_domain(g_or_dom)
    S = dom.symmetric_operator()
    sqmu = np.sqrt(dom.mu)
    if dom.lam == 0.0:
        # single isolated vertex
        w = np.ones(dom.size)
        return SpectralBottom(0.0, VertexFunction(dom.subset, w / sqmu / np.linalg.norm(w)), 0.0, 0, dom.tag)
    shift = 2.0 * dom.lam
    # positive start overlaps the positive ground state
    w = sqmu.copy() if start is None else sqmu * np.asarray(start, dtype=float)
    w /= np.linalg.norm(w)
    best = (np.inf, None, None)
    for it in range(1, max_iter + 1):
        Sw = S @ w
        rq = float(w @ Sw)
        res = float(np.linalg.norm(Sw - rq * w))
        if res < best[0]:
            best = (res, rq, w)
        if res <= tol:
            return SpectralBottom(
                max(rq, 0.0) if rq > -1e-12 else rq,
                VertexFunction(dom.subset, w / sqmu),
                res,
                it,
                dom.tag,
            )
        w = w - Sw / shift
        w /= np.linalg.norm(w)
    res, rq, w = best
    raise SpectralNonConvergence(
        f"power iteration on {dom.tag} stalled at residual {res:.3e} after {max_iter} steps",
        best=SpectralBottom(rq, VertexFunction(dom.subset, w / sqmu), res, max_iter, dom.tag),
    )


@dataclass
class DomainMonotonicityReport:
    tags: list
    lambdas: list
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations


def domain_monotonicity_check(domains, tol: float = 1e-8, solve_tol: float = 1e-10) -> DomainMonotonicityReport:
    """For nested domains ``U_1 <= U_2 <= ...`` check ``Lambda(U_i) >= Lambda(U_{i+1}) - tol``."""
    domains = [_as_domain(d) for d in domains]
    for a, b in zip(domains, domains[1:]):
        if a.parent is not b.parent or not np.all(np.isin(a.subset, b.subset)):
            raise ValueError(f"domain {a.tag} is not contained in {b.tag}")
    lams = [lambda_bottom(d, solve_tol).lam for d in domains]
    viol = [
        (domains[i].tag, domains[i + 1].tag, lams[i + 1] - lams[i])
        for i in range(len(lams) - 1)
        if lams[i] < lams[i + 1] - tol
    ]
    return DomainMonotonicityReport([d.tag for d in domains], lams, viol)

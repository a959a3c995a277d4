"""Heat kernels on finite vertex sets with killing at the boundary.

The kernel is normalized so that ``p(t, x, .) -> delta_x / mu(x)`` as
``t -> 0``; the solution of ``u_t = Lap u`` is then
``u(t, x) = sum_y mu(y) p(t, x, y) u0(y)``.

Kernels are computed by uniformization::

    exp(t Lap_U) = exp(-lam t) * sum_n (lam t)^n / n! * P^n,   P = I + Lap_U / lam

with ``lam = max_{x in U} m(x) / mu(x)``. ``P`` is entrywise nonnegative and
row-substochastic, so every partial sum is a lower bound and the Poisson tail
certifies the error. A dense eigendecomposition is provided as an
independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.special import gammaln

from .graph import WeightedGraph, _dense, ball, gamma_form, laplacian_apply

__all__ = [
    "DirichletDomain",
    "HeatKernelField",
    "ExhaustionSchedule",
    "ScheduleExhausted",
    "MonotonicityViolation",
    "poisson_truncation",
    "dirichlet_heat_kernel",
    "dirichlet_kernel_matrix",
    "exhaustion_iterates",
    "heat_kernel",
    "DenseKernelOracle",
    "dense_kernel_oracle",
    "heat_evolve",
    "KernelPropertyReport",
    "check_kernel_properties",
    "DiagonalMonotonicityReport",
    "check_diagonal_monotonicity",
]

DEFAULT_EPS = 1e-12
DEFAULT_TOLERANCE = 1e-10
MONOTONE_SLACK = 1e-12


class ScheduleExhausted(RuntimeError):
    """Exhaustion did not converge before the last admissible radius."""

    def __init__(self, message, last=None, previous=None):
        super().__init__(message)
        self.last = last
        self.previous = previous


class MonotonicityViolation(RuntimeError):
    """Successive exhaustion kernels failed ``p_k <= p_{k+1}``."""


class DirichletDomain:
    """Finite vertex subset ``U`` of a parent graph, killed on leaving ``U``.

    The diagonal of the generator keeps the full parent degree ``m(x)``, so
    weight on edges leaving ``U`` acts as a killing rate.
    """

    def __init__(self, parent: WeightedGraph, subset, tag: str | None = None):
        subset = np.unique(np.asarray(subset, dtype=np.int64))
        if subset.size == 0:
            raise ValueError("domain must contain at least one vertex")
        if subset[0] < 0 or subset[-1] >= parent.n:
            raise KeyError("domain vertex outside the parent graph")
        self.parent = parent
        self.subset = subset
        self.subset.flags.writeable = False
        self.is_full = subset.size == parent.n
        self.W = parent.W[subset][:, subset].tocsr()
        self.mu = parent.mu[subset]
        self.degree = parent.degree[subset]
        # weight on edges leaving U
        self.kill = self.degree - np.asarray(self.W.sum(axis=1)).ravel()
        self.kill[self.kill < 0] = 0.0
        self.lam = float((self.degree / self.mu).max())
        if tag is None:
            tag = "exact finite graph" if self.is_full and not parent.has_boundary else f"U[{subset.size}]"
        self.tag = tag

    @classmethod
    def full(cls, g: WeightedGraph) -> "DirichletDomain":
        return cls(g, np.arange(g.n))

    @classmethod
    def ball(cls, g: WeightedGraph, center: int, radius: int) -> "DirichletDomain":
        b = ball(g, center, radius)
        if b.members.size == g.n and not g.has_boundary:
            return cls(g, b.members)
        return cls(g, b.members, tag=f"B({center},{radius})")

    @property
    def size(self) -> int:
        return self.subset.size

    @property
    def has_killing(self) -> bool:
        return bool(np.any(self.kill > 0))

    def local(self, x: int) -> int:
        k = int(np.searchsorted(self.subset, x))
        if k >= self.subset.size or self.subset[k] != x:
            raise KeyError(f"vertex {x} is not in the domain")
        return k

    def generator(self) -> sparse.csr_matrix:
        """Matrix of ``Lap_U`` acting on functions on ``U``."""
        inv = sparse.diags(1.0 / self.mu)
        return (inv @ self.W - sparse.diags(self.degree / self.mu)).tocsr()

    def uniformized(self) -> sparse.csr_matrix:
        if self.lam == 0.0:
            return sparse.identity(self.size, format="csr")
        P = sparse.diags(1.0 - self.degree / (self.mu * self.lam)) + sparse.diags(1.0 / (self.mu * self.lam)) @ self.W
        P = P.tocsr()
        # rounding can leave -1e-17 on the diagonal at the vertex attaining lam
        np.maximum(P.data, 0.0, out=P.data)
        return P

    def symmetric_operator(self) -> sparse.csr_matrix:
        """``M^{1/2} (-Lap_U) M^{-1/2}``, symmetric in the ordinary sense."""
        s = 1.0 / np.sqrt(self.mu)
        L = sparse.diags(self.degree) - self.W
        return (sparse.diags(s) @ L @ sparse.diags(s)).tocsr()


@dataclass
class HeatKernelField:
    """Values ``p(t, x, y)`` for ``y`` in a finite support."""

    t: float
    source: int
    support: np.ndarray
    values: np.ndarray
    mu: np.ndarray
    truncation_error: float
    domain_tag: str
    # killed mass captured by the computed partial sum
    escaped_mass: float = 0.0
    # certified bound on the Poisson tail beyond the last term
    tail_probability: float = 0.0
    terms: int = 0

    def at(self, y: int) -> float:
        k = np.searchsorted(self.support, y)
        if k < self.support.size and self.support[k] == y:
            return float(self.values[k])
        return 0.0

    def mass(self) -> float:
        return float(np.sum(self.mu * self.values))

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.support] = self.values
        return out


@dataclass(frozen=True)
class ExhaustionSchedule:
    center: int
    radii: tuple
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        radii = tuple(int(r) for r in self.radii)
        if not radii:
            raise ValueError("schedule needs at least one radius")
        if any(r < 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("radii must be nonnegative and strictly increasing")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def doubling(cls, center: int, r1: int, r_max: int, tolerance: float = DEFAULT_TOLERANCE):
        radii = [int(r1)]
        while radii[-1] * 2 <= r_max:
            radii.append(radii[-1] * 2)
        if radii[-1] < r_max:
            radii.append(int(r_max))
        return cls(center, tuple(radii), tolerance)


def _log_poisson_tail_bound(rate: float, N: int) -> float:
    """Log of a certified upper bound on ``P(X > N)`` for ``X ~ Poisson(rate)``.

    Uses ``P(X > N) <= pmf(N+1) / (1 - rate / (N+2))``, valid for ``N + 2 > rate``.
    """
    if rate == 0.0:
        return -np.inf
    k = N + 1
    log_pmf = -rate + k * np.log(rate) - gammaln(k + 1)
    return float(log_pmf - np.log1p(-rate / (N + 2)))


def poisson_truncation(rate: float, target: float) -> tuple[int, float]:
    """Smallest ``N >= rate`` whose certified Poisson tail is below ``target``.

    Returns ``(N, tail_bound)``.
    """
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if not target > 0:
        raise ValueError("target must be positive")
    if rate == 0.0:
        return 0, 0.0
    log_target = np.log(target)
    lo = int(np.ceil(rate))
    if _log_poisson_tail_bound(rate, lo) <= log_target:
        return lo, float(np.exp(_log_poisson_tail_bound(rate, lo)))
    step = max(16, int(np.sqrt(rate)))
    hi = lo + step
    while _log_poisson_tail_bound(rate, hi) > log_target:
        lo, hi = hi, hi + 2 * (hi - lo)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _log_poisson_tail_bound(rate, mid) <= log_target:
            hi = mid
        else:
            lo = mid
    return hi, float(np.exp(_log_poisson_tail_bound(rate, hi)))


def _poisson_weights(rate: float, N: int) -> np.ndarray:
    if rate == 0.0:
        w = np.zeros(N + 1)
        w[0] = 1.0
        return w
    n = np.arange(N + 1)
    return np.exp(-rate + n * np.log(rate) - gammaln(n + 1))


def _uniformize(dom: DirichletDomain, v0, t: float, target: float, track_kill: bool = False):
    rate = dom.lam * t
    N, tail = poisson_truncation(rate, target)
    w = _poisson_weights(rate, N)
    P = dom.uniformized()
    v = np.array(v0, dtype=float)
    acc = w[0] * v
    killed = 0.0
    escaped = 0.0
    kill_rate = dom.kill / dom.lam if (track_kill and dom.lam > 0) else None
    for n in range(1, N + 1):
        if kill_rate is not None:
            killed += float(kill_rate @ v)
        v = P @ v
        acc += w[n] * v
        if kill_rate is not None:
            escaped += w[n] * killed
    return acc, N, tail, escaped


def _check_time(t):
    if not (np.isfinite(t) and t > 0):
        raise ValueError(f"time must be positive, got {t!r}")


def dirichlet_heat_kernel(dom: DirichletDomain, t: float, x: int, eps: float = DEFAULT_EPS) -> HeatKernelField:
    """Kernel ``p_U(t, x, .)`` on the domain, max-norm error at most ``eps``."""
    _check_time(t)
    if not eps > 0:
        raise ValueError("eps must be positive")
    k = dom.local(x)
    v0 = np.zeros(dom.size)
    v0[k] = 1.0 / dom.mu[k]
    # ||P^n v0||_inf <= 1/mu(x), so a tail below eps*mu(x) bounds the max-norm error by eps
    target = max(eps * dom.mu[k], 1e-300)
    vals, N, tail, escaped = _uniformize(dom, v0, t, target, track_kill=dom.has_killing)
    return HeatKernelField(
        t=float(t),
        source=int(x),
        support=dom.subset,
        values=vals,
        mu=dom.mu,
        truncation_error=tail / dom.mu[k],
        domain_tag=dom.tag,
        escaped_mass=escaped,
        tail_probability=tail,
        terms=N + 1,
    )


def dirichlet_kernel_matrix(dom: DirichletDomain, t: float, eps: float = DEFAULT_EPS):
    """All-pairs kernel on the domain; returns ``(K, truncation_error)``.

    ``K[i, j] = p_U(t, subset[i], subset[j])``.
    """
    _check_time(t)
    mu_min = float(dom.mu.min())
    V0 = np.diag(1.0 / dom.mu)
    P = dom.uniformized().toarray()
    rate = dom.lam * t
    N, tail = poisson_truncation(rate, eps * mu_min)
    w = _poisson_weights(rate, N)
    acc = w[0] * V0
    V = V0
    for n in range(1, N + 1):
        V = P @ V
        acc += w[n] * V
    return acc, tail / mu_min


def exhaustion_iterates(g: WeightedGraph, sched: ExhaustionSchedule, t: float, x: int, eps: float = DEFAULT_EPS):
    """Yield ``p_k(t, x, .)`` on ``U_k = B(center, R_k)`` for the admissible radii.

    A radius is admissible while the ball avoids the truncation boundary.
    Iteration stops at the first ball covering a boundary-free graph.
    """
    _check_time(t)
    x = g.check_vertex(x)
    dist = g.distances_from(sched.center)
    if dist[x] > sched.radii[0]:
        raise ValueError(f"source {x} is not in the first exhaustion member B({sched.center},{sched.radii[0]})")
    faithful = g.faithful_radius(sched.center)
    for R in sched.radii:
        if g.has_boundary and R >= faithful:
            return
        dom = DirichletDomain.ball(g, sched.center, R)
        yield dom, dirichlet_heat_kernel(dom, t, x, eps)
        if dom.is_full:
            return


def _monotone_gap(prev: HeatKernelField, cur: HeatKernelField):
    """``max(prev - cur)`` on prev's support and ``max |cur - prev|`` overall."""
    pos = np.searchsorted(cur.support, prev.support)
    if np.any(pos >= cur.support.size) or np.any(cur.support[np.minimum(pos, cur.support.size - 1)] != prev.support):
        raise MonotonicityViolation("exhaustion members are not nested")
    aligned = cur.values[pos]
    drop = float(np.max(prev.values - aligned)) if prev.values.size else 0.0
    diff = cur.values.copy()
    diff[pos] -= prev.values
    return drop, float(np.max(np.abs(diff)))


def heat_kernel(g: WeightedGraph, sched: ExhaustionSchedule, t: float, x: int,
                eps: float = DEFAULT_EPS, history: list | None = None) -> HeatKernelField:
    """Limit of the Dirichlet kernels along the exhaustion schedule.

    Stops when successive members differ by less than ``sched.tolerance`` in
    max norm, or when a member covers the whole (finite) graph. ``history``,
    if given, receives every computed field.
    """
    prev = None
    for dom, cur in exhaustion_iterates(g, sched, t, x, eps):
        if history is not None:
            history.append(cur)
        if dom.is_full and not g.has_boundary:
            return cur
        if prev is not None:
            drop, change = _monotone_gap(prev, cur)
            if drop > MONOTONE_SLACK + cur.truncation_error:
                raise MonotonicityViolation(
                    f"p_k exceeds p_(k+1) by {drop:.3e} between {prev.domain_tag} and {cur.domain_tag}"
                )
            if change < sched.tolerance:
                return cur
        prev = cur
    raise ScheduleExhausted(
        f"exhaustion around {sched.center} did not reach tolerance {sched.tolerance:g} "
        f"within radii {sched.radii} (faithful radius {g.faithful_radius(sched.center)})",
        last=prev,
        previous=history[-2] if history and len(history) > 1 else None,
    )


class DenseKernelOracle:
    """Eigendecomposition of ``-Lap`` in the ``mu`` inner product.

    ``p(t, x, y) = sum_j exp(-lam_j t) phi_j(x) phi_j(y)`` with ``phi_j``
    mu-orthonormal.
    """

    MAX_SIZE = 2000

    def __init__(self, g_or_dom, max_size: int = MAX_SIZE):
        dom = g_or_dom if isinstance(g_or_dom, DirichletDomain) else DirichletDomain.full(g_or_dom)
        if dom.size > max_size:
            raise ValueError(f"dense oracle limited to {max_size} vertices, got {dom.size}")
        self.domain = dom
        S = dom.symmetric_operator().toarray()
        self.eigenvalues, vecs = linalg.eigh(S)
        self.phi = vecs / np.sqrt(dom.mu)[:, None]

    def __call__(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError("time must be nonnegative")
        return (self.phi * np.exp(-self.eigenvalues * t)) @ self.phi.T


def dense_kernel_oracle(g_or_dom, t: float) -> np.ndarray:
    return DenseKernelOracle(g_or_dom)(t)


def heat_evolve(g: WeightedGraph, u0, t: float, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Solve ``u_t = Lap u`` from bounded ``u0`` on a finite graph.

    Error in max norm is at most ``eps * max|u0|``.
    """
    _check_time(t)
    u0 = _dense(g, u0)
    dom = DirichletDomain.full(g)
    vals, *_ = _uniformize(dom, u0, t, eps)
    return vals


@dataclass
class KernelPropertyReport:
    t: float
    s: float
    symmetry: float = 0.0
    negativity: float = 0.0
    mass_excess: float = 0.0
    conservation: float = 0.0
    heat_equation_x: float = 0.0
    heat_equation_y: float = 0.0
    semigroup: float = 0.0
    pairs: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _derivative(fun, t: float, h: float):
    """Central difference at ``t`` with one Richardson step; error ``O(h^4)``."""
    coarse = (fun(t + h) - fun(t - h)) / (2 * h)
    fine = (fun(t + h / 2) - fun(t - h / 2)) / h
    return (4 * fine - coarse) / 3


def check_kernel_properties(g: WeightedGraph, t: float, s: float, pairs=None,
                            eps: float = 1e-14, h: float = 1e-4) -> KernelPropertyReport:
    """Evaluate symmetry, positivity, mass, the heat equation and the semigroup law.

    Works on the whole finite graph; ``pairs`` restricts which ``(x, y)``
    entries enter the pairwise maxima (default: all).
    """
    _check_time(t)
    _check_time(s)
    if not 0 < h < t:
        raise ValueError("finite-difference step must lie in (0, t)")
    dom = DirichletDomain.full(g)
    Kt, _ = dirichlet_kernel_matrix(dom, t, eps)
    Ks, _ = dirichlet_kernel_matrix(dom, s, eps)
    Kts, _ = dirichlet_kernel_matrix(dom, t + s, eps)
    if pairs is None:
        xs, ys = np.meshgrid(np.arange(g.n), np.arange(g.n), indexing="ij")
        xs, ys = xs.ravel(), ys.ravel()
    else:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        xs, ys = pairs[:, 0], pairs[:, 1]

    rep = KernelPropertyReport(t=float(t), s=float(s), pairs=int(xs.size))
    rep.symmetry = float(np.max(np.abs(Kt[xs, ys] - Kt[ys, xs])))
    rep.negativity = float(max(0.0, -Kt.min()))
    mass = Kt @ g.mu
    rep.mass_excess = float(max(0.0, (mass - 1.0).max()))
    if not g.has_boundary:
        rep.conservation = float(np.max(np.abs(mass - 1.0)))
    dt = _derivative(lambda u: dirichlet_kernel_matrix(dom, u, eps)[0], t, h)
    lap_x = np.column_stack([laplacian_apply(g, Kt[:, j]) for j in range(g.n)])
    lap_y = lap_x.T
    rep.heat_equation_x = float(np.max(np.abs(dt - lap_x)[xs, ys]))
    rep.heat_equation_y = float(np.max(np.abs(dt - lap_y)[xs, ys]))
    comp = (Kt * g.mu) @ Ks
    rep.semigroup = float(np.max(np.abs(comp - Kts)[xs, ys]))
    return rep


@dataclass
class DiagonalMonotonicityReport:
    vertex: int
    times: np.ndarray
    values: np.ndarray
    max_increase: float
    fd_derivative: np.ndarray = field(default_factory=lambda: np.empty(0))
    energy_derivative: np.ndarray = field(default_factory=lambda: np.empty(0))
    max_derivative_error: float = 0.0

    @property
    def nonincreasing(self) -> bool:
        return self.max_increase <= MONOTONE_SLACK


def check_diagonal_monotonicity(g: WeightedGraph, x: int, times, eps: float = 1e-15,
                                h: float = 1e-4) -> DiagonalMonotonicityReport:
    """Check that ``t -> p(t, x, x)`` is nonincreasing on a time grid.

    Also compares a finite-difference derivative of ``p(t, x, x)`` with
    ``-sum_y mu(y) Gamma(p(t/2, x, .))(y)``.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0) or times[0] <= 0:
        raise ValueError("times must be a positive increasing grid")
    x = g.check_vertex(x)
    dom = DirichletDomain.full(g)
    diag = np.array([dirichlet_heat_kernel(dom, t, x, eps).at(x) for t in times])
    inc = float(np.max(np.diff(diag))) if diag.size > 1 else 0.0
    fd = np.empty(times.size)
    en = np.empty(times.size)
    for i, t in enumerate(times):
        step = min(h, t / 4)
        fd[i] = _derivative(lambda u: dirichlet_heat_kernel(dom, u, x, eps).at(x), t, step)
        half = dirichlet_heat_kernel(dom, t / 2, x, eps).values
        en[i] = -float(np.sum(g.mu * gamma_form(g, half, half)))
    return DiagonalMonotonicityReport(
        vertex=x,
        times=times,
        values=diag,
        max_increase=max(inc, 0.0),
        fd_derivative=fd,
        energy_derivative=en,
        max_derivative_error=float(np.max(np.abs(fd - en))),
    )

"""One pass/fail line per acceptance criterion, at the stated tolerance.

Run ``pytest tests/test_acceptance.py -v`` and look for lines starting
with ``[criterion``.
"""

import math
import time

import numpy as np
import pytest

from conftest import box, cycle, path, square_grid, two_vertex, weighted_random
from graphheat import estimates as est
from graphheat.semigroup import (
    DenseKernelOracle,
    DirichletDomain,
    ExhaustionSchedule,
    check_diagonal_monotonicity,
    check_kernel_properties,
    dirichlet_heat_kernel,
    dirichlet_kernel_matrix,
    heat_kernel,
)
from graphheat.spectral import lambda_bottom


@pytest.fixture
def report(capsys):
    def emit(n, what, measured, tol, ok):
        with capsys.disabled():
            print(f"\n[criterion {n:>2}] {'PASS' if ok else 'FAIL'}  {what}: {measured} (tolerance {tol})")
        assert ok, f"criterion {n}: {what} = {measured}, tolerance {tol}"

    return emit


def test_graphs():
    return {
        "two_vertex": two_vertex(),
        "cycle5": cycle(5),
        "path7": path(7),
        "grid9x9": square_grid(9),
        "weighted12": weighted_random(12, 3),
    }


GRAPHS = test_graphs()
del test_graphs


def test_c01_oracle_equivalence(report):
    t0 = time.perf_counter()
    worst = 0.0
    for name in ("two_vertex", "cycle5", "path7", "grid9x9"):
        g = GRAPHS[name]
        oracle = DenseKernelOracle(g)
        for t in (0.1, 1.0, 10.0):
            K, _ = dirichlet_kernel_matrix(DirichletDomain.full(g), t, 1e-14)
            worst = max(worst, float(np.abs(K - oracle(t)).max()))
    elapsed = time.perf_counter() - t0
    report(1, "max |uniformization - eigendecomposition|", f"{worst:.2e} in {elapsed:.2f}s", "1e-10, seconds",
           worst <= 1e-10 and elapsed < 10)


def test_c02_two_vertex_closed_form(report):
    dom = DirichletDomain.full(GRAPHS["two_vertex"])
    worst = 0.0
    for t in (0.5, 1.0, 2.0):
        f = dirichlet_heat_kernel(dom, t, 0, 1e-15)
        worst = max(worst, abs(f.at(0) - (1 + math.exp(-2 * t)) / 2), abs(f.at(1) - (1 - math.exp(-2 * t)) / 2))
    report(2, "two-vertex closed form error", f"{worst:.2e}", "1e-12", worst <= 1e-12)


def test_c03_kernel_properties(report):
    agg = dict(symmetry=0.0, negativity=0.0, conservation=0.0, semigroup=0.0, heat=0.0)
    for g in GRAPHS.values():
        for t in (0.5, 1.0):
            for s in (0.5, 1.0):
                r = check_kernel_properties(g, t, s)
                agg["symmetry"] = max(agg["symmetry"], r.symmetry)
                agg["negativity"] = max(agg["negativity"], r.negativity)
                agg["conservation"] = max(agg["conservation"], r.conservation)
                agg["semigroup"] = max(agg["semigroup"], r.semigroup)
                agg["heat"] = max(agg["heat"], r.heat_equation_x, r.heat_equation_y)
    ok = (agg["symmetry"] <= 1e-12 and agg["negativity"] == 0.0 and agg["conservation"] <= 1e-10
          and agg["semigroup"] <= 1e-9 and agg["heat"] <= 1e-6)
    shown = ", ".join(f"{k}={v:.1e}" for k, v in agg.items())
    report(3, "kernel properties", shown, "1e-12 / exact 0 / 1e-10 / 1e-9 / 1e-6", ok)


def test_c04_diagonal_monotone(report):
    times = np.geomspace(0.01, 100, 50)
    inc = der = 0.0
    for g in GRAPHS.values():
        for x in range(g.n):
            r = check_diagonal_monotonicity(g, x, times)
            inc = max(inc, r.max_increase)
            der = max(der, r.max_derivative_error)
    report(4, "p(t,x,x) increase / derivative identity error", f"{inc:.1e} / {der:.1e}", "1e-12 / 1e-6",
           inc <= 1e-12 and der <= 1e-6)


def test_c05_exhaustion(report):
    worst_drop = 0.0
    last_gap = {}
    for dim, R in ((1, 300), (2, 100)):
        g = box(dim, R)
        sched = ExhaustionSchedule.doubling(0, 2, R - 1, 1e-10)
        hist = []
        heat_kernel(g, sched, 1.0, 0, 1e-15, history=hist)
        for a, b in zip(hist, hist[1:]):
            pos = np.searchsorted(b.support, a.support)
            worst_drop = max(worst_drop, float(np.max(a.values - b.values[pos])))
        last_gap[dim] = abs(hist[-1].at(0) - hist[-2].at(0))
    gap = max(last_gap.values())
    report(5, "exhaustion drop / last-iterate gap of p_k(1,0,0)", f"{worst_drop:.1e} / {gap:.1e}", "1e-12 / 1e-10",
           worst_drop <= 1e-12 and gap <= 1e-10)


def test_c06_davies(report):
    rng = np.random.default_rng(20261016)
    worst = -np.inf
    count = 0
    for g in GRAPHS.values():
        Lam = lambda_bottom(g).lam
        mats = {t: dirichlet_kernel_matrix(DirichletDomain.full(g), t, 1e-14)[0] for t in (0.25, 1.0, 4.0)}
        half_logmu = 0.5 * np.log(g.mu)
        for _ in range(100):
            psi = rng.uniform(-1, 1, g.n) * rng.uniform(0.05, 3.0)
            h = est.davies_data(g, psi, Lam).h
            for t, K in mats.items():
                with np.errstate(over="ignore"):
                    B = np.exp(-half_logmu[:, None] - half_logmu[None, :] + psi[:, None] - psi[None, :] + h * t)
                worst = max(worst, float(np.max(K - B)))
                count += 1
    report(6, f"max p - Davies bound over {count} (graph, psi, t) triples", f"{worst:.2e}", "<= 1e-10",
           worst <= 1e-10)


def test_c07_scalar_inequalities(report):
    s = np.linspace(0.1, 50, 500)
    rep = est.scalar_inequality_check(s)
    gammas = np.geomspace(1e-3, 1e3, 60)
    gap = min(est.folz_majorant(g) - est.legendre_fhat(g)[0] for g in gammas)
    brute = 0.0
    for g in gammas:
        val, s_star = est.legendre_fhat(g)
        # brute force on a 1e-6 grid covering the minimizer
        hi = max(2.0, 2 * s_star)
        grid = np.arange(1e-6, hi, 1e-6)
        brute = max(brute, abs(val - float(np.min(-grid * g + 0.5 * grid**2 * np.exp(grid)))))
    ok = rep.passed and gap >= 0 and brute <= 1e-6
    report(7, "cosh violations / min majorant margin / brute-force gap",
           f"{rep.violations} / {gap:.2e} / {brute:.1e}", "0 / >= 0 / 1e-6", ok)


def test_c08_distance_upper(report):
    fails = total = 0
    worst = np.inf
    for g in GRAPHS.values():
        Lam = lambda_bottom(g).lam
        for t in (0.25, 1.0, 4.0, 16.0):
            K, _ = dirichlet_kernel_matrix(DirichletDomain.full(g), t, 1e-14)
            for mode, L in (("exact", Lam), ("zero", 0.0)):
                for x in range(g.n):
                    for y in range(g.n):
                        r = est.distance_upper_report(g, L, t, x, y, kernel=K[x, y], lambda_mode=mode)
                        total += 1
                        fails += not r.passed
                        worst = min(worst, r.slack)
    report(8, f"graph-metric upper bound failures over {total} instances (worst slack {worst:.3e})",
           fails, "0", fails == 0)


def _tail_grid(dim, r0, times, R):
    g = box(dim, R)
    sched = ExhaustionSchedule(0, (R - 1,))
    pts = []
    for t in times:
        rs = [r for r in range(r0, R // 2)
              if all(est.annulus_conditions(r, t, r0, dim, g.D_mu).values())
              and est.log_annulus_tail_bound(3.0, dim, 1.0, g.D_mu, 0.0, r, t, r0) > -600]
        tails = est.tail_masses(g, sched, t, 0, rs)
        for r, tm in zip(rs, tails):
            pts.append((tm, est.annulus_tail_bound(3.0, dim, g.mu0, g.D_mu, 0.0, r, t, r0)))
    return pts


def test_c09_annulus_tail(report):
    pts = _tail_grid(1, 1, (0.5, 1.0, 2.0, 4.0, 8.0), 700) + _tail_grid(2, 3, (0.5, 1.0, 2.0, 4.0), 400)
    fails = sum(tm > b for tm, b in pts)
    report(9, f"tail_mass > annulus bound over {len(pts)} admissible (r, t)", fails, "0 with >= 100 points",
           fails == 0 and len(pts) >= 100)


@pytest.mark.slow
@pytest.mark.parametrize("dim, r0", [(1, 1), (2, 3)])
def test_c10_lower_bound_end_to_end(report, dim, r0):
    D = 2.0 * dim
    C = 1.05 * 2 * D * math.e
    prof = est.GrowthProfile(3.0, dim, r0)
    th = est.lower_bound_thresholds(D, 1.0, prof, C)
    R = math.ceil(C * 4 * th.T * math.log(4 * th.T)) + 2
    g = box(dim, R)
    assert g.D_mu == D
    # growth profile: every vertex of a smaller box, and the center out to the largest radius used
    small = box(dim, 30)
    assert est.fit_growth_profile(small, m=dim, r_range=(r0, 30)).c0 <= 3.0
    assert prof.holds_at(g, 0, R) <= 1.0
    sched = ExhaustionSchedule.doubling(0, 8, R - 1, 1e-10)
    fails = 0
    uncertified = 0
    for t in np.linspace(th.T, 4 * th.T, 10):
        rep = est.ondiagonal_lower_check(g, sched, 0, float(t), C, prof, thresholds=th)
        fails += not rep.passed
        r = rep.diagnostics["r"]
        # measured tail (outside-ball mass + killed mass + series remainder) and the annulus bound, in logs
        log_bound = est.log_annulus_tail_bound(3.0, dim, 1.0, D, 0.0, r, float(t), r0)
        uncertified += not (rep.diagnostics["tail_upper"] <= 0.5 and log_bound <= math.log(0.5))
    report(10, f"Z^{dim} lower bound failures / uncertified truncations at 10 t in [T, 4T], T={th.T:.4f}",
           f"{fails} / {uncertified}", "0 / 0", fails == 0 and uncertified == 0)


@pytest.mark.parametrize("dim, r0", [(1, 1), (2, 3)])
def test_c11_decay_expression(report, dim, r0):
    D = 2.0 * dim
    C = 1.05 * 2 * D * math.e
    th = est.lower_bound_thresholds(D, 1.0, est.GrowthProfile(3.0, dim, r0), C)
    F = lambda t: est.log_tail_decay(t, C, th.K, dim, D)  # noqa: E731
    cross = abs(F(th.T) - math.log(0.5))
    before = F(th.T * (1 - 1e-6)) > math.log(0.5)
    ts = np.geomspace(th.T, 64 * th.T, 400)
    vals = np.array([F(t) for t in ts])
    decreasing = bool(np.all(np.diff(vals) < 0))
    ratios = [math.exp(F(2 ** (k + 1) * th.T) - F(2**k * th.T)) for k in range(10)]
    ok = cross <= 1e-9 and before and decreasing and max(ratios) < 1
    report(11, f"Z^{dim} |F(T) - log 1/2| / decreasing after T / max doubling ratio",
           f"{cross:.1e} / {decreasing} / {max(ratios):.3e}", "1e-9 / True / < 1", ok)

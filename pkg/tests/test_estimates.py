import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg, optimize

from conftest import box, cycle, path, square_grid, two_vertex, weighted_random
from graphheat import estimates as est
from graphheat.semigroup import DirichletDomain, ExhaustionSchedule, dirichlet_kernel_matrix
from graphheat.spectral import lambda_bottom


def kernel(dom, t):
    return linalg.expm(t * dom.generator().toarray()) / dom.mu[None, :]


def b_direct(g, psi):
    out = np.zeros(g.n)
    for i, j, w in g.edges():
        a = psi[j] - psi[i]
        out[i] += w * (math.exp(a) + math.exp(-a) - 2)
        out[j] += w * (math.exp(a) + math.exp(-a) - 2)
    return out / (2 * g.mu)


# -- Davies ---------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(0, 10_000), st.floats(0.05, 2.0))
def test_b_values_match_direct_sum(n, seed, scale):
    g = weighted_random(n, seed)
    psi = np.random.default_rng(seed).normal(scale=scale, size=n)
    assert np.allclose(est.b_values(g, psi), b_direct(g, psi), rtol=1e-10, atol=1e-14)
    assert est.b_of_phi(g, psi, 0) == pytest.approx(b_direct(g, psi)[0], rel=1e-10, abs=1e-14)


def test_cosh_gap_small_arguments():
    a = np.array([1e-9, 1e-5, 0.1])
    assert np.allclose(est.cosh_gap(a), a * a + a**4 / 12, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.integers(0, 10_000), st.sampled_from([0.25, 1.0, 4.0]))
def test_davies_bound_dominates_kernel(n, seed, t):
    g = weighted_random(n, seed)
    rng = np.random.default_rng(seed + 1)
    psi = rng.normal(scale=rng.uniform(0.1, 2.0), size=n)
    K = kernel(DirichletDomain.full(g), t)
    for x in range(n):
        for y in range(n):
            assert K[x, y] <= est.davies_upper_bound(g, psi, 0.0, t, x, y) + 1e-10


def test_davies_with_spectral_gap_on_domain():
    g = box(2, 8)
    dom = DirichletDomain.ball(g, 0, 3)
    lam = lambda_bottom(dom, tol=1e-12).lam
    assert lam > 0
    K = kernel(dom, 4.0)
    rng = np.random.default_rng(2)
    for _ in range(20):
        psi = rng.normal(scale=0.5, size=g.n)
        for i, x in enumerate(dom.subset[:10]):
            for j, y in enumerate(dom.subset):
                bound = est.davies_upper_bound(g, psi, lam, 4.0, x, y, support=dom.subset)
                assert K[i, j] <= bound * (1 + 1e-9)


def test_test_function_family_bound():
    g = path(9)
    K = kernel(DirichletDomain.full(g), 2.0)
    for s in (0.1, 0.5, 1.0, 2.0):
        for y in range(9):
            assert math.log(K[0, y]) <= est.psi_family_log_bound(g, 0, y, s, 2.0) + 1e-12
    psi = est.psi_test_function(g, 0, 0.5, 3)
    assert psi.tolist() == [0.0, 0.5, 1.0, 1.5, 1.5, 1.5, 1.5, 1.5, 1.5]


# -- scalar inequalities -------------------------------------------------------------

def test_scalar_inequalities_on_grid():
    rep = est.scalar_inequality_check(np.linspace(1e-4, 50, 500))
    assert rep.passed
    assert rep.max_ratio <= 1.0


def test_scalar_grid_domain_enforced():
    with pytest.raises(ValueError):
        est.scalar_inequality_check([0.0, 1.0])


@pytest.mark.parametrize("gamma", [1e-3, 0.1, 1.0, 10.0, 1e3])
def test_legendre_matches_scipy(gamma):
    val, s_star = est.legendre_fhat(gamma)
    res = optimize.minimize_scalar(lambda s: -s * gamma + 0.5 * s * s * math.exp(s), bounds=(0, 20), method="bounded",
                                   options={"xatol": 1e-12})
    assert val == pytest.approx(res.fun, abs=1e-10)
    assert val <= est.folz_majorant(gamma)


def test_legendre_small_gamma_asymptotics():
    # near zero, f(s) ~ s^2/2 so fhat ~ -gamma^2/2
    val, s = est.legendre_fhat(1e-6)
    assert val == pytest.approx(-0.5e-12, rel=1e-5)
    with pytest.raises(ValueError):
        est.legendre_fhat(0.0)


# -- graph metric upper bound ---------------------------------------------------------

@pytest.mark.parametrize("make", [two_vertex, lambda: cycle(5), lambda: path(7), lambda: square_grid(6)])
def test_distance_upper_bound_all_pairs(make):
    g = make()
    for t in (0.25, 1.0, 4.0, 16.0):
        K, _ = dirichlet_kernel_matrix(DirichletDomain.full(g), t, 1e-14)
        for x in range(g.n):
            for y in range(g.n):
                rep = est.distance_upper_report(g, 0.0, t, x, y, kernel=K[x, y], lambda_mode="zero")
                assert rep.passed, rep


def test_distance_bound_d_zero_term():
    assert est.log_distance_upper_bound(0, 1.0, 2.0, 2.0, 1.0) == pytest.approx(-math.log(2.0))
    # d = 2 D_mu e t makes the distance factor exactly 1
    assert est.log_distance_upper_bound(2 * math.e, 1.0, 1.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_distance_report_needs_kernel_on_truncation():
    with pytest.raises(est.PreconditionError):
        est.distance_upper_report(box(1, 5), 0.0, 1.0, 0, 1)


# -- annulus tail ---------------------------------------------------------------------------

def test_annulus_constant():
    assert est.annulus_constant(2, 3, 1) == pytest.approx(12 / (1 - 2 / math.e))
    assert est.annulus_constant(0.5, 1, 1) == pytest.approx(math.sqrt(2) / (1 - math.sqrt(2 / math.e)))


def test_annulus_conditions_are_enforced():
    with pytest.raises(est.PreconditionError) as exc:
        est.log_annulus_tail_bound(3, 1, 1, 2, 0.0, 2, 10.0)
    assert exc.value.context["failed"]


def test_annulus_series_dominated_by_first_term():
    # the dyadic sum is at most a_0 / (1 - 2/e) under the conditions
    r, t, m, D = 60.0, 2.0, 2, 4
    assert all(est.annulus_conditions(r, t, 1, m, D).values())
    terms = np.exp(est.annulus_log_terms(m, D, 0.0, r, t, 30))
    assert terms.sum() <= terms[0] / (1 - 2 / math.e)


@pytest.mark.parametrize("dim, r0, t", [(1, 1, 1.0), (1, 1, 3.0), (2, 3, 1.0), (2, 3, 2.0)])
def test_tail_mass_below_annulus_bound(dim, r0, t):
    g = box(dim, 120 if dim == 1 else 70)
    sched = ExhaustionSchedule(0, (g.faithful_radius(0) - 1,))
    prof = est.GrowthProfile(3.0, dim, r0)
    checked = 0
    rs = [r for r in range(r0, 60) if all(est.annulus_conditions(r, t, r0, dim, g.D_mu).values())]
    tails = est.tail_masses(g, sched, t, 0, rs)
    for r, tm in zip(rs, tails):
        b = est.annulus_tail_bound(prof.c0, dim, g.mu0, g.D_mu, 0.0, r, t, r0)
        assert tm <= b
        assert tm == pytest.approx(est.tail_mass(g, sched, t, 0, r), rel=1e-12, abs=1e-300)
        checked += 1
    assert checked > 5


def test_tail_mass_matches_dense_on_finite_graph():
    g = cycle(11)
    sched = ExhaustionSchedule(0, (10,))
    K = kernel(DirichletDomain.full(g), 1.5)
    d = g.distances_from(0)
    for r in range(5):
        assert est.tail_mass(g, sched, 1.5, 0, r) == pytest.approx(K[0, d > r].sum(), abs=1e-14)


# -- growth profile and lower bound ----------------------------------------------------------

def test_fit_growth_profile_z2():
    g = box(2, 12)
    prof = est.fit_growth_profile(g, m=2, r_range=(3, 12), centers=[0])
    # V(r) = 2r^2+2r+1 is largest relative to r^2 at r = 3: 25/9
    assert prof.c0 == pytest.approx(25 / 9)
    assert prof.holds_at(g, 0, 12) == pytest.approx(1.0)
    est_m = est.fit_growth_profile(g, r_range=(3, 12), centers=[0]).m
    assert 1.6 < est_m < 2.1


def test_growth_profile_uses_faithful_radii_only():
    g = box(1, 4)
    prof = est.fit_growth_profile(g, m=1, r_range=(1, 50))
    assert prof.c0 == pytest.approx(3.0)


def _decay_oracle(t, C, c0, m, mu0, D):
    """Annulus tail bound evaluated at r = C t log t, written out directly."""
    r = C * t * math.log(t)
    K = 2**m * c0 / (mu0 * (1 - 2 / math.e))
    return math.log(K) + m * math.log(r) - 0.5 * r * math.log(r / (2 * D * math.e * t))


@pytest.mark.parametrize("D, m, r0", [(2.0, 1, 1.0), (4.0, 2, 3.0), (6.0, 3, 3.0)])
def test_thresholds_consistent(D, m, r0):
    C = est.default_C(D)
    prof = est.GrowthProfile(3.0, m, r0)
    th = est.lower_bound_thresholds(D, 1.0, prof, C)
    assert th.T >= max(th.t1, th.t2)
    assert C * th.t1 * math.log(th.t1) == pytest.approx(r0, rel=1e-12)
    r2 = C * th.t2 * math.log(th.t2)
    assert 0.5 * r2 * math.log(2 * r2 / (D * math.e * th.t2)) == pytest.approx(m, rel=1e-10)
    F = lambda t: est.log_tail_decay(t, C, th.K, m, D)  # noqa: E731
    assert F(th.T) == pytest.approx(_decay_oracle(th.T, C, 3.0, m, 1.0, D), abs=1e-9)
    if th.T > max(th.t1, th.t2):
        assert F(th.T) == pytest.approx(math.log(0.5), abs=1e-9)
    ts = np.geomspace(th.T, 1e4 * th.T, 400)
    vals = np.array([F(t) for t in ts])
    assert np.all(vals <= math.log(0.5) + 1e-9)
    assert np.all(np.diff(vals) < 0)


def test_thresholds_frozen_values():
    # frozen from a bisection run; the checks above pin them to their defining equations
    th1 = est.lower_bound_thresholds(2.0, 1.0, est.GrowthProfile(3.0, 1, 1.0), est.default_C(2.0))
    th2 = est.lower_bound_thresholds(4.0, 1.0, est.GrowthProfile(3.0, 2, 3.0), est.default_C(4.0))
    assert th1.C == pytest.approx(11.41678, abs=1e-5)
    assert th1.T == pytest.approx(3.5975, abs=1e-4)
    assert th2.T == pytest.approx(3.4999, abs=1e-4)


def test_thresholds_reject_small_C():
    with pytest.raises(est.PreconditionError, match="must exceed"):
        est.lower_bound_thresholds(2.0, 1.0, est.GrowthProfile(3.0, 1, 1.0), 2 * 2.0 * math.e)


def test_lower_check_on_z1():
    g = box(1, 500)
    C = est.default_C(g.D_mu)
    prof = est.GrowthProfile(3.0, 1, 1.0)
    th = est.lower_bound_thresholds(g.D_mu, g.mu0, prof, C)
    sched = ExhaustionSchedule.doubling(0, 8, 499, 1e-10)
    rep = est.ondiagonal_lower_check(g, sched, 0, 2 * th.T, C, prof, thresholds=th)
    assert rep.passed and rep.kind == "lower"
    d = rep.diagnostics
    assert d["tail_below_half"] and d["cs_step_holds"] and d["monotone_step_holds"]
    assert d["ball_mass"] >= 0.5
    with pytest.raises(est.PreconditionError, match="below the certified range"):
        est.ondiagonal_lower_check(g, sched, 0, 0.9 * th.T, C, prof, thresholds=th)


def test_lower_check_refuses_short_truncation():
    g = box(1, 50)
    C = est.default_C(2.0)
    prof = est.GrowthProfile(3.0, 1, 1.0)
    with pytest.raises(est.PreconditionError, match="truncation"):
        est.ondiagonal_lower_check(g, ExhaustionSchedule.doubling(0, 8, 49), 0, 4.0, C, prof)


def test_bound_report_slack_and_kind():
    up = est.BoundReport("x", (1,), 0.5, 1.0)
    low = est.BoundReport("x", (1,), 0.5, 0.25, kind="lower")
    assert up.passed and low.passed
    assert up.slack == pytest.approx(0.5) and low.slack == pytest.approx(0.25)
    assert not est.BoundReport("x", (1,), 1.1, 1.0).passed

import numpy as np
import pytest

from flowcent.errors import BoundViolationError, DivergenceError, NonConvergenceError, PreconditionError
from flowcent.section import (CONTRACTION, RATE_SLACK, audit_chart, ball_sample, build_chart,
                              build_chart_batch, g_derivative, integral_I, orbit_window,
                              project_to_section, solve_section_time, solve_tau_batch)


@pytest.fixture(scope="module")
def cat_chart(cat, cat_constants):
    return build_chart(cat, cat.make_point([0.3, 0.6, 0.95]), cat_constants)


@pytest.fixture(scope="module")
def circle_chart(circle, circle_constants):
    return build_chart(circle, circle.make_point([0.4]), circle_constants)


def test_integral_circle(circle):
    x = circle.make_point([0.4])
    assert integral_I(circle, x, x, 0.25) == pytest.approx(0.03125, abs=1e-15)


def test_integral_positive(cat, cat_constants):
    for x in cat.sample(10, 2):
        p = cat.point(x)
        assert integral_I(cat, p, p, cat_constants.T0) > 0


def test_integral_needs_even_n(circle):
    x = circle.make_point([0.4])
    with pytest.raises(PreconditionError):
        integral_I(circle, x, x, 0.25, n=15)


@pytest.mark.parametrize("which", ["cat", "irrational", "circle"])
def test_integral_refinement_at_centers(request, which):
    sys = request.getfixturevalue(which)
    T0 = 0.25 if which == "circle" else 0.4
    for row in sys.sample(4, 5):
        x = sys.point(row)
        assert abs(integral_I(sys, x, x, T0, 256) - integral_I(sys, x, x, T0, 512)) < 1e-10


def test_integral_dense_oracle_in_ball(cat, cat_constants):
    # kinks where the orbit crosses the seam limit Simpson off-center
    x = cat.sample(1, 5)[0]
    for p in ball_sample(cat, x, cat_constants.delta, 8, 1):
        a = integral_I(cat, cat.point(p), cat.point(x), 0.4, 256)
        b = integral_I(cat, cat.point(p), cat.point(x), 0.4, 2048)
        assert abs(a - b) < 1e-6


def test_chart_invariants(cat, cat_chart, cat_constants):
    assert cat_chart.g_slope > cat_constants.eta / 2
    assert cat_chart.I_center == integral_I(cat, cat_chart.center, cat_chart.center, cat_constants.T0)


def test_g_derivative_circle(circle, circle_chart):
    assert g_derivative(circle, 0.0, circle_chart.center, circle_chart) == pytest.approx(0.25, abs=1e-15)


def test_g_derivative_violation(circle, circle_chart):
    far = circle.make_point([0.0])
    with pytest.raises(BoundViolationError):
        g_derivative(circle, 0.0, far, circle_chart)


@pytest.mark.parametrize("which", ["cat", "irrational"])
def test_g_derivative_finite_difference(request, which):
    sys = request.getfixturevalue(which)
    c = request.getfixturevalue(f"{which}_constants")
    x = sys.sample(4, 5)[0]
    p = ball_sample(sys, x, c.delta, 1, 1)[0]
    chart = build_chart_batch(sys, x, c)
    t = c.mu1 / 2
    g = g_derivative(sys, t, sys.point(p), chart)

    def G(tt):
        q = sys.point(sys.flow(tt, p[None])[0])
        return integral_I(sys, q, chart.center, c.T0)

    errs = [abs((G(t + h) - G(t)) / h - g) for h in (1e-3, 1e-4)]
    assert errs[0] < 1e-5 and errs[1] < 1e-6
    assert errs[1] < errs[0] / 5


def test_solve_at_center(cat_chart):
    tau, iters, rates = solve_section_time(cat_chart, cat_chart.center)
    assert (tau, iters, rates) == (0.0, 0, [])


@pytest.mark.parametrize("frac", [-0.5, -0.2, 0.3, 0.5])
def test_solve_on_orbit(cat, cat_chart, cat_constants, frac):
    s = frac * cat_constants.mu
    p = cat.point(cat.flow(s, cat_chart.center_row)[0])
    tau, _, _ = solve_section_time(cat_chart, p)
    assert tau == pytest.approx(-s, abs=1e-8)
    assert cat.dist(project_to_section(cat_chart, p).array, cat_chart.center_row)[0] < 1e-8


def test_projection_of_center(cat_chart):
    q = project_to_section(cat_chart, cat_chart.center)
    assert q == cat_chart.center


def test_projection_constant_on_arcs(cat, cat_chart, cat_constants):
    for p in ball_sample(cat, cat_chart.center_row, 0.9 * cat_constants.delta, 10, 4):
        P = cat.point(p)
        w = orbit_window(cat_chart, P)
        base = project_to_section(cat_chart, P).array
        for t in np.linspace(w.l1, w.l2, 7)[1:-1]:
            q = cat.point(cat.flow(t, p[None])[0])
            assert cat.dist(project_to_section(cat_chart, q).array, base)[0] < 1e-8


def test_level_set_membership(cat, cat_chart):
    for p in ball_sample(cat, cat_chart.center_row, cat_chart.constants.delta, 20, 6):
        q = project_to_section(cat_chart, cat.point(p))
        assert abs(integral_I(cat, q, cat_chart.center, cat_chart.constants.T0) - cat_chart.I_center) < 1e-9


def test_uniqueness_of_tau(cat, cat_chart, cat_constants):
    P = ball_sample(cat, cat_chart.center_row, cat_constants.delta, 200, 8)
    mu = cat_constants.mu
    taus = [solve_tau_batch(cat_chart, P, tau0)[0] for tau0 in (-mu / 2, 0.0, mu / 2)]
    assert np.max(np.abs(taus[0] - taus[1])) < 1e-9
    assert np.max(np.abs(taus[2] - taus[1])) < 1e-9


def test_tau_lipschitz_recorded(cat, cat_chart, cat_constants):
    P = ball_sample(cat, cat_chart.center_row, cat_constants.delta, 100, 9)
    tau = solve_tau_batch(cat_chart, P)[0]
    d = cat.dist(P[:-1], P[1:])
    L = np.max(np.abs(np.diff(tau)) / d)
    assert np.isfinite(L)


def test_divergence_far_from_center(circle, circle_chart):
    with pytest.raises(DivergenceError):
        solve_section_time(circle_chart, circle.make_point([0.7]))


def test_iteration_cap(cat, cat_chart, cat_constants):
    p = cat.point(ball_sample(cat, cat_chart.center_row, cat_constants.delta, 1, 2)[0])
    with pytest.raises(NonConvergenceError):
        solve_section_time(cat_chart, p, max_iter=1)


def test_orbit_window_circle(circle, circle_chart, circle_constants):
    w = orbit_window(circle_chart, circle_chart.center)
    assert w.l1 == pytest.approx(-circle_constants.delta, abs=1e-9)
    assert w.l2 == pytest.approx(circle_constants.delta, abs=1e-9)


def test_orbit_window_boundary(cat, cat_chart, cat_constants):
    x, delta = cat_chart.center_row, cat_constants.delta
    for p in ball_sample(cat, x, 0.95 * delta, 10, 3):
        w = orbit_window(cat_chart, cat.point(p))
        assert -cat_constants.mu <= w.l1 < 0 < w.l2 <= cat_constants.mu
        for l in (w.l1, w.l2):
            assert abs(cat.dist(cat.flow(l, p[None]), x)[0] - delta) <= 1e-8
        inner = cat.flow(np.linspace(w.l1, w.l2, 21)[1:-1], np.repeat(p[None], 19, 0))
        assert np.all(cat.dist(inner, x) < delta)


def test_orbit_window_outside_ball(cat, cat_chart):
    with pytest.raises(PreconditionError):
        orbit_window(cat_chart, cat.make_point([0.0, 0.0, 0.5]))


def test_audit_chart_statistics(cat_chart):
    stats = audit_chart(cat_chart, points=64, seed=1)
    assert stats["max_rate"] <= CONTRACTION + RATE_SLACK
    assert stats["g_violations"] == 0
    assert stats["level_residual_max"] < 1e-9
    assert sum(stats["rate_histogram"]["counts"]) == len(stats["rates"])

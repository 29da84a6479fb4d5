import numpy as np
import pytest

from flowcent.centralizer import (ReparamField, check_commutation, check_orbit_coincidence, choose_a,
                                  recover_A_flow, recover_z, sampled_lipschitz, verify_cocycle,
                                  verify_quasitrivial)
from flowcent.constants import calibrate
from flowcent.engine import LeafShearFlow, Reparameterized, TorusTranslationFlow
from flowcent.errors import DomainMismatchError, NoMatchError, PreconditionError


@pytest.fixture(scope="module")
def circle_full():
    sys = TorusTranslationFlow([1.0])
    return sys, calibrate(sys)


def test_commutation_self(cat):
    # phi_s(phi_t x) and phi_t(phi_s x) differ only by the order of two float additions
    assert check_commutation(cat, cat) <= 1e-12


def test_commutation_reparameterized(cat):
    assert check_commutation(cat, Reparameterized(cat, 2.0)) <= 1e-9


def test_commutation_broken_is_reported(cat, cat_constants):
    r = check_commutation(cat, LeafShearFlow(cat))
    assert r > 100 * cat_constants.delta


def test_commutation_domain_mismatch(cat, irrational):
    with pytest.raises(DomainMismatchError):
        check_commutation(cat, irrational)


def test_z_at_zero(cat, cat_constants):
    s = recover_z(cat, Reparameterized(cat, 1.37), cat_constants, 0.0, cat.make_point([0.2, 0.3, 0.5]))
    assert abs(s.z) <= 1e-12 and s.residual <= 1e-12


def test_z_circle_double_speed(circle_full):
    sys, c = circle_full
    s = recover_z(sys, Reparameterized(sys, 2.0), c, 0.01, sys.make_point([0.3]))
    assert s.z == pytest.approx(0.02, abs=1e-12)


def test_z_cat_137(cat, cat_constants):
    s = recover_z(cat, Reparameterized(cat, 1.37), cat_constants, 0.005, cat.make_point([0.2, 0.3, 0.5]))
    assert s.z == pytest.approx(0.00685, abs=1e-9)
    assert abs(s.z) <= cat_constants.mu and s.residual < 1e-8


def test_z_broken_control_raises(cat, cat_constants):
    with pytest.raises(NoMatchError) as ei:
        recover_z(cat, LeafShearFlow(cat), cat_constants, 1e-3, cat.make_point([0.2, 0.3, 0.5]))
    assert ei.value.residual > 1e-8


def test_z_is_odd(cat, cat_constants):
    psi = Reparameterized(cat, 1.37)
    for row in cat.sample(10, 4):
        x = cat.point(row)
        zp = recover_z(cat, psi, cat_constants, 0.004, x).z
        zm = recover_z(cat, psi, cat_constants, -0.004, x).z
        assert abs(zp + zm) <= 1e-8


def test_choose_a_keeps_points_in_ball(cat, cat_constants):
    psi = Reparameterized(cat, 2.0)
    X = cat.sample(100, 1)
    a = choose_a(cat, psi, cat_constants, X)
    for s in np.linspace(-a, a, 9):
        assert cat.dist(psi.flow(s, X), X).max() < cat_constants.delta


def test_choose_a_fails_for_wild_psi(cat, cat_constants):
    psi = Reparameterized(cat, 100.0)
    with pytest.raises(PreconditionError):
        choose_a(cat, psi, cat_constants, cat.sample(4, 1), max_halvings=2)


def test_cocycle_self(cat, cat_constants):
    r = verify_cocycle(cat, cat, cat_constants, samples=100)
    assert max(r) <= 1e-9


def test_cocycle_circle_double(circle_full):
    sys, c = circle_full
    r = verify_cocycle(sys, Reparameterized(sys, 2.0), c, samples=100)
    assert max(r) <= 1e-9


def test_cocycle_cat_137(cat, cat_constants):
    r = verify_cocycle(cat, Reparameterized(cat, 1.37), cat_constants, samples=200, seed=5)
    assert max(r) <= 1e-7


def test_cocycle_propagates_no_match(cat, cat_constants):
    with pytest.raises(NoMatchError):
        verify_cocycle(cat, LeafShearFlow(cat), cat_constants, samples=20)


@pytest.mark.parametrize("speed", [1.0, 2.0])
def test_recover_A_constant(cat, cat_constants, speed):
    f = recover_A_flow(cat, Reparameterized(cat, speed), cat_constants, cat.sample(50, 2))
    assert np.max(np.abs(f.values() - speed)) <= 1e-8
    assert f.invariance_residual_max <= 1e-6
    assert np.isnan(f.quasitrivial_residual_max)


def test_recover_A_accepts_chart_points(cat, cat_constants):
    pts = [cat.make_point([0.1, 0.2, 0.3]), cat.make_point([0.7, 0.1, 0.9])]
    f = recover_A_flow(cat, Reparameterized(cat, 2.0), cat_constants, pts)
    assert [x for x, _ in f.samples] == pts


def test_recover_A_piecewise(union, union_constants):
    X = union.sample(40, 3)
    f = recover_A_flow(union, Reparameterized(union, [1.0, 3.0]), union_constants, X)
    expect = np.where(X[:, 0] == 0, 1.0, 3.0)
    assert set(X[:, 0]) == {0.0, 1.0}
    assert np.max(np.abs(f.values() - expect)) <= 1e-6


def test_scaling_consistency(cat, cat_constants):
    psi = Reparameterized(cat, 1.37)
    X = cat.sample(30, 6)
    a = choose_a(cat, psi, cat_constants, X)
    A1 = recover_A_flow(cat, psi, cat_constants, X, a=a, invariance_times=0).values()
    A2 = recover_A_flow(cat, psi, cat_constants, X, a=a / 2, invariance_times=0).values()
    assert np.max(np.abs(A1 - A2)) <= 1e-8


def test_quasitrivial_c2(cat, cat_constants):
    psi = Reparameterized(cat, 2.0)
    f = recover_A_flow(cat, psi, cat_constants, cat.sample(20, 2))
    assert verify_quasitrivial(cat, psi, f, 20.0, induction_points=2) <= 1e-8


def test_quasitrivial_piecewise(union, union_constants):
    psi = Reparameterized(union, [1.0, 3.0])
    f = recover_A_flow(union, psi, union_constants, union.sample(20, 2))
    assert verify_quasitrivial(union, psi, f, 20.0, induction_points=0) <= 1e-7


def test_quasitrivial_negative_control(cat, cat_constants):
    X = cat.sample(10, 2)
    fake = ReparamField(a=1e-3, samples=[(cat.point(x), 1.0) for x in X], invariance_residual_max=0.0)
    r = verify_quasitrivial(cat, LeafShearFlow(cat), fake, 20.0, induction_points=0)
    assert r > cat_constants.delta


def test_translation_reparameterization_without_separation(irrational, irrational_constants):
    psi = Reparameterized(irrational, 0.5)
    f = recover_A_flow(irrational, psi, irrational_constants, irrational.sample(20, 1))
    assert np.max(np.abs(f.values() - 0.5)) <= 1e-8


def test_orbit_coincidence(t3):
    assert check_orbit_coincidence(t3, [1.0, 0.0], [2.0, 0.0]) <= 1e-9
    assert check_orbit_coincidence(t3, [0.3, 0.7], [0.3, 0.7]) <= 1e-12


def test_orbit_coincidence_transverse(t3):
    with pytest.raises(NoMatchError):
        check_orbit_coincidence(t3, [1.0, 0.0], [0.0, 1.0])


def test_orbit_coincidence_needs_rank_two(irrational):
    with pytest.raises(PreconditionError):
        check_orbit_coincidence(irrational, [1.0], [2.0])


def test_sampled_lipschitz_constant_and_piecewise(cat, cat_constants, union, union_constants):
    field = recover_A_flow(cat, Reparameterized(cat, 2.0), cat_constants, cat.sample(40, 3))
    assert sampled_lipschitz(cat, field) < 1e-6
    X = union.sample(40, 3)
    field = recover_A_flow(union, Reparameterized(union, [1.0, 3.0]), union_constants, X)
    # pairs across components are at infinite distance and are skipped
    assert sampled_lipschitz(union, field) < 1e-6

import math

import numpy as np
import pytest

from flowcent.engine import (ChartPoint, LeafShearFlow, Reparameterized, SuspensionFlow,
                             TorusODEFlow, TorusTranslationAction, TorusTranslationFlow,
                             build_system, distance, evaluate_action, evaluate_flow, vector_field)
from flowcent.errors import DomainMismatchError, InvalidArgumentError

from conftest import CAT, SQRT2M1


def test_circle_rotation(circle):
    y = evaluate_flow(circle, 0.25, circle.make_point([0.0]))
    assert y.coords == (0.25,)


def test_time_zero_is_identity(cat, irrational):
    for sys, c in ((cat, [0.3, 0.7, 0.2]), (irrational, [0.1, 0.9])):
        x = sys.make_point(c)
        assert evaluate_flow(sys, 0.0, x) == x


def test_cat_suspension_crosses_seam(cat):
    y = evaluate_flow(cat, 1.0, cat.make_point([0.5, 0.5, 0.0]))
    assert y.coords == (0.5, 0.0, 0.0)


def test_action_examples(t3):
    x = t3.make_point([0.1, 0.2, 0.3])
    assert evaluate_action(t3, [0.0, 0.0], x) == x
    assert evaluate_action(t3, [1.0, 0.0], t3.make_point([0, 0, 0])).coords == (0.0, 0.0, 0.0)
    y = evaluate_action(t3, [0.5, 0.5], x).array
    assert np.allclose(y, [0.6, (0.2 + 0.5 * SQRT2M1) % 1, 0.8], atol=1e-15)


def test_action_wrong_length(t3):
    with pytest.raises(InvalidArgumentError):
        evaluate_action(t3, [1.0], t3.make_point([0, 0, 0]))


def test_non_finite_time(cat):
    with pytest.raises(InvalidArgumentError):
        evaluate_flow(cat, math.nan, cat.make_point([0.1, 0.1, 0.1]))


def test_domain_mismatch(cat, irrational):
    with pytest.raises(DomainMismatchError):
        evaluate_flow(cat, 1.0, irrational.make_point([0.1, 0.2]))
    with pytest.raises(DomainMismatchError):
        distance(cat, cat.make_point([0.1, 0.1, 0.1]), irrational.make_point([0.1, 0.2]))


def test_circle_distance_wraps(circle):
    assert distance(circle, circle.make_point([0.1]), circle.make_point([0.9])) == pytest.approx(0.2, abs=1e-15)


def test_seam_gluing_distance(cat):
    b = np.array([0.3, 0.55])
    Mb = (np.array(CAT) @ b) % 1
    d = distance(cat, cat.make_point([*b, 0.99]), cat.make_point([*Mb, 0.01]))
    assert d == pytest.approx(0.02, abs=1e-12)


def test_self_distance_zero(cat, t3):
    for sys in (cat, t3):
        X = sys.sample(50, 3)
        assert np.all(sys.dist(X, X) == 0)


def test_union_cross_component_is_inf(union):
    a = union.make_point([0.1, 0.1, 0.1], component=0)
    b = union.make_point([0.1, 0.1, 0.1], component=1)
    assert math.isinf(distance(union, a, b))
    assert a.system_id.endswith("#0") and b.system_id.endswith("#1")


def test_vector_fields(t3, cat):
    x = t3.make_point([0.4, 0.2, 0.9])
    assert vector_field(t3, 1, x).components == (1.0, 0.0, 0.0)
    assert vector_field(cat, 1, cat.make_point([0.2, 0.3, 0.5])).components == (0.0, 0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        vector_field(t3, 3, x)


def test_field_difference_quotient_rate(t3):
    # the action is affine, so the quotient is exact up to rounding
    x = np.array([[0.4, 0.2, 0.9]])
    for i in range(2):
        X = t3.field(x, i)[0]
        for h in (1e-2, 1e-3, 1e-4):
            e = np.zeros(2)
            e[i] = h
            q = t3.space.lift_diff(x, t3.act(e[None], x))[0] / h
            assert np.linalg.norm(q - X) < 1e-10


def test_ode_field_matches_rhs():
    sys = TorusODEFlow([1.0, 0.7], amplitude=0.1, step=1e-3)
    X = sys.sample(20, 1)
    rel = np.linalg.norm(sys.field(X) - sys.rhs(X), axis=1) / np.linalg.norm(sys.rhs(X), axis=1)
    assert rel.max() <= 1e-8


def test_ode_group_law():
    sys = TorusODEFlow([1.0, 0.7], amplitude=0.1, step=1e-3)
    rng = np.random.default_rng(0)
    X = sys.sample(50, 2)
    t, s = rng.uniform(-1, 1, (2, 50))
    err = sys.dist(sys.flow(t + s, X), sys.flow(t, sys.flow(s, X)))
    assert err.max() <= 1e-8


def test_fixed_point_free_sampling(cat, irrational, t3):
    for sys in (cat, irrational, t3):
        X = sys.sample(1000, 11)
        for i in range(sys.rank):
            assert np.linalg.norm(sys.field(X, i), axis=1).min() > 0


def test_invalid_constructions():
    with pytest.raises(InvalidArgumentError):
        SuspensionFlow([[2, 0], [0, 1]])
    with pytest.raises(InvalidArgumentError):
        TorusTranslationAction([[1, 2], [2, 4], [0, 0]])
    with pytest.raises(InvalidArgumentError):
        TorusODEFlow([0.0, 0.0], amplitude=0.0)
    with pytest.raises(InvalidArgumentError):
        build_system({"kind": "nope"})


def test_build_system_roundtrip(cat):
    phi = build_system({"kind": "suspension_flow", "matrix": CAT})
    psi = build_system({"kind": "reparameterized", "speed": 2.0}, base=phi)
    assert isinstance(psi, Reparameterized) and psi.system_id == phi.system_id == cat.system_id
    shear = build_system({"kind": "leaf_shear"}, base=phi)
    assert isinstance(shear, LeafShearFlow)


def test_chart_point_is_normalized(cat):
    x = cat.make_point([1.25, -0.5, 2.5])
    assert cat.space.contains(x.array)
    assert isinstance(x, ChartPoint)

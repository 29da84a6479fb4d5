"""Property-based checks of group laws, metric axioms and solver invariants."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flowcent import scenarios as sc
from flowcent.action import build_flowbox, flowbox_map, invert_flowbox, recover_z_action
from flowcent.centralizer import recover_z
from flowcent.engine import LinearReparamAction, Reparameterized, SuspensionFlow

from conftest import CAT

unit = st.floats(0, 1, exclude_max=True, allow_nan=False)
times = st.floats(-5, 5, allow_nan=False)
small = st.floats(-0.02, 0.02, allow_nan=False)


@given(st.tuples(unit, unit, unit), times, times)
def test_suspension_group_law(cat, x, t, s):
    X = np.array([x])
    assert cat.dist(cat.flow(t + s, X), cat.flow(t, cat.flow(s, X)))[0] <= 1e-9


@given(st.tuples(unit, unit), times, times)
def test_translation_group_law(irrational, x, t, s):
    X = np.array([x])
    assert irrational.dist(irrational.flow(t + s, X), irrational.flow(t, irrational.flow(s, X)))[0] <= 1e-9


def test_group_law_bulk(cat, irrational):
    rng = np.random.default_rng(0)
    for sys in (cat, irrational):
        X = sys.sample(1000, 1)
        # mixed-sign deck steps amplify rounding by the expanding eigenvalue
        t, s = rng.uniform(-5, 5, (2, 1000))
        assert sys.dist(sys.flow(t + s, X), sys.flow(t, sys.flow(s, X))).max() <= 1e-9


@given(st.tuples(unit, unit, unit), st.tuples(times, times), st.tuples(times, times))
def test_action_additivity(t3, x, u, v):
    X = np.array([x])
    u, v = np.array([u]), np.array([v])
    assert t3.dist(t3.act(u + v, X), t3.act(u, t3.act(v, X)))[0] <= 1e-9


@given(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5)))
def test_normalization_idempotent(cat, x):
    once = cat.space.normalize(np.array([x]))
    assert cat.space.contains(once)
    assert np.array_equal(cat.space.normalize(once), once)


@given(st.tuples(unit, unit, unit), st.tuples(unit, unit, unit))
def test_metric_symmetric(cat, x, y):
    X, Y = np.array([x]), np.array([y])
    assert cat.dist(X, Y)[0] == cat.dist(Y, X)[0]


@given(st.tuples(unit, unit, unit), st.lists(small, min_size=6, max_size=6))
def test_torus_triangle(t3, x, d):
    X = np.array([x])
    Y = t3.space.displace(X, np.array([d[:3]]) * 5)
    Z = t3.space.displace(X, np.array([d[3:]]) * 5)
    dist = t3.dist
    assert dist(X, Z)[0] <= dist(X, Y)[0] + dist(Y, Z)[0] + 1e-12


@given(st.tuples(unit, unit, st.floats(0.15, 0.85)), st.lists(small, min_size=6, max_size=6))
def test_suspension_triangle_away_from_seam(cat, x, d):
    X = np.array([x])
    Y = cat.space.displace(X, np.array([d[:3]]) * 5)
    Z = cat.space.displace(X, np.array([d[3:]]) * 5)
    dist = cat.dist
    assert dist(X, Z)[0] <= dist(X, Y)[0] + dist(Y, Z)[0] + 1e-12


@pytest.mark.xfail(strict=True, reason="one-deck-step metric is not a metric across the seam")
def test_suspension_triangle_across_seam(cat):
    X = np.array([[0.6388117923291234, 0.09677092611203503, 0.9981328935532799]])
    Y = np.array([[0.3869836861658602, 0.7573490637022333, 0.003629359421369438]])
    Z = np.array([[0.5927237721547908, 0.17860331645122435, 0.9876886653614738]])
    assert max(cat.dist(X, Y)[0], cat.dist(Y, Z)[0], cat.dist(X, Z)[0]) < cat.metric_window
    assert cat.dist(X, Z)[0] <= cat.dist(X, Y)[0] + cat.dist(Y, Z)[0] + 1e-12


@given(st.tuples(unit, unit, unit), st.floats(1e-4, 0.005))
def test_z_odd(cat, cat_constants, x, s):
    psi = Reparameterized(cat, 1.37)
    p = cat.make_point(list(x))
    assert abs(recover_z(cat, psi, cat_constants, s, p).z + recover_z(cat, psi, cat_constants, -s, p).z) <= 1e-8


@given(st.tuples(unit, unit, unit), st.floats(-0.004, 0.004), st.floats(-0.004, 0.004))
def test_z_additive(cat, cat_constants, x, t, s):
    psi = Reparameterized(cat, 2.0)
    p = cat.make_point(list(x))
    zt = recover_z(cat, psi, cat_constants, t, p).z
    zts = recover_z(cat, psi, cat_constants, t + s, p).z
    zs = recover_z(cat, psi, cat_constants, s, cat.point(psi.flow(t, p.array)[0])).z
    assert abs(zts - zt - zs) <= 1e-8


@given(st.tuples(unit, unit, unit), st.lists(st.floats(-0.01, 0.01), min_size=3, max_size=3))
def test_flowbox_roundtrip(t3, x, p):
    chart = build_flowbox(t3, t3.make_point(list(x)), r0=0.1)
    p = np.array(p)
    y = t3.point(flowbox_map(chart, p)[0])
    zeta, a = invert_flowbox(chart, y)
    assert np.allclose(zeta.array + chart.X @ a, p, atol=1e-12)


@given(st.tuples(unit, unit, unit), st.lists(st.floats(-0.003, 0.003), min_size=2, max_size=2),
       st.sampled_from([-1.0, -0.5, 0.25, 0.5]))
def test_action_z_linear(t3, x, u, t):
    psi = LinearReparamAction(t3, [[2, 0], [1, 1]])
    chart = build_flowbox(t3, t3.make_point(list(x)), r0=0.1)
    u = np.array(u)
    z = recover_z_action(t3, psi, chart, u).z
    assert np.max(np.abs(recover_z_action(t3, psi, chart, t * u).z - t * z)) <= 1e-8


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_report_floats_roundtrip(v):
    assert json.loads(sc.dumps({"v": v}))["v"] == v


@given(st.integers(2, 40))
def test_other_roofs_glue(n):
    roof = n / 8
    sys = SuspensionFlow(CAT, roof)
    X = sys.sample(5, n)
    assert sys.dist(sys.flow(roof, X), sys.space.normalize(np.column_stack([X[:, :2] @ np.array(CAT).T, X[:, 2]])))\
        .max() <= 1e-12
    assert math.isclose(sys.space.roof, roof)

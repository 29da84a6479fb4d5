"""Flowbox charts and matrix-cocycle recovery for R^d translation actions.

At a point ``x`` of a flat torus the tangent space splits into the orbit
directions ``V_x = span(X_1(x), ..., X_d(x))`` and its orthogonal
complement ``N_x``.  The flowbox chart

    F_x(zeta + a_1 X_1 + ... + a_d X_d) = Phi(a, x + zeta)

is an embedding near the origin.  For ``Psi`` commuting with ``Phi`` the
point ``Psi_u(x)`` inverts to ``(0, z(u, x))`` and the matrix with columns
``z(a e_i, x) / a`` gives ``Psi_v(x) = Phi_{A(x) v}(x)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import null_space, svdvals
from scipy.optimize import minimize

from .engine import FD_STEP, ChartPoint, System, TangentVector, Torus, TorusTranslationAction
from .errors import (BoundViolationError, DegenerateBasisError, DomainMismatchError, OffOrbitError,
                     OutsideChartError, PreconditionError)

M_LOWER = 1.0 / 3.0
NORM_UPPER = 3.0
TOL_NORMAL = 1e-8
TOL_INVERT = 1e-10
NEWTON_MAX = 100
MU_FRACTION = 0.3
INVARIANCE_NORM = 5.0


# ---------------------------------------------------------------------------
# epsilon_0


def _lattice_returns(V: np.ndarray, cap: float) -> list:
    """Nonzero ``v`` with ``V v`` integral and ``|v| <= cap``."""
    n, d = V.shape
    bound = int(math.floor(cap * np.linalg.norm(V, 2) + 1e-9))
    pinv = np.linalg.pinv(V)
    found = []
    for m in itertools.product(range(-bound, bound + 1), repeat=n):
        m = np.array(m, dtype=float)
        if not m.any():
            continue
        v = pinv @ m
        if np.linalg.norm(V @ v - m) < 1e-9 and np.linalg.norm(v) <= cap + 1e-12:
            found.append(v)
    return found


def estimate_epsilon0_action(sys: System, samples: int = 16, norm_cap: float = 2.0,
                             seed: int = 0) -> float:
    """Smallest return norm ``|v|`` with ``Phi_v(x) = x``, capped at 1.

    Translation actions are handled exactly: return vectors are the
    preimages of integer vectors under the direction matrix.  Other actions
    are scanned on a grid of ``v`` at sampled ``x`` and refined locally.
    """
    if isinstance(sys, TorusTranslationAction):
        norms = [np.linalg.norm(v) for v in _lattice_returns(sys.directions, norm_cap)]
        return float(min([1.0] + norms))
    d = sys.rank
    X = sys.sample(samples, seed)
    g = np.linspace(-norm_cap, norm_cap, 41 if d <= 2 else 13)
    h = g[1] - g[0]
    grid = np.array([v for v in itertools.product(g, repeat=d) if 0.5 * h < np.linalg.norm(v) <= norm_cap])
    grid = grid[np.argsort(np.linalg.norm(grid, axis=1), kind="stable")]
    best = 1.0
    for x in X:
        xs = np.repeat(x[None, :], len(grid), 0)
        d0 = sys.dist(sys.act(grid, xs), xs)
        # a return within the grid cell is at most L * h * sqrt(d) away
        lip = np.linalg.norm(np.column_stack([sys.field(x, i)[0] for i in range(d)]), 2)
        f = lambda v: float(sys.dist(sys.act(v[None, :], x[None, :]), x[None, :])[0])
        for j in np.flatnonzero(d0 < lip * h * math.sqrt(d))[:40]:
            if np.linalg.norm(grid[j]) - h * math.sqrt(d) >= best:
                break
            res = minimize(f, grid[j], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14})
            if res.fun < 1e-9 and np.linalg.norm(res.x) > 1e-3:
                best = min(best, float(np.linalg.norm(res.x)))
    return best


# ---------------------------------------------------------------------------
# Flowbox charts


@dataclass(frozen=True)
class FlowboxChart:
    system: System = field(repr=False)
    center: ChartPoint
    r0: float
    orbit_basis: list
    normal_basis: list
    mu: float
    a: float
    delta: float = 0.0

    @property
    def center_row(self) -> np.ndarray:
        return self.system.to_array(self.center)[None, :]

    @property
    def X(self) -> np.ndarray:
        return np.column_stack([v.array for v in self.orbit_basis])

    @property
    def N(self) -> np.ndarray:
        if not self.normal_basis:
            return np.zeros((self.system.dim, 0))
        return np.column_stack([v.array for v in self.normal_basis])


class MatrixField(NamedTuple):
    a: float
    samples: list
    invariance_residual_max: float
    quasitrivial_residual_max: float
    basis_check_residual_max: float


def _split(chart: FlowboxChart, P):
    """Normal and orbit coordinates of tangent vectors ``P`` (rows)."""
    N = chart.N
    zeta = P @ N @ N.T
    a = np.linalg.lstsq(chart.X, (P - zeta).T, rcond=None)[0].T
    return zeta, a


def flowbox_map(chart: FlowboxChart, P):
    """``F_x`` on rows of tangent vectors ``P``."""
    P = np.atleast_2d(P)
    zeta, a = _split(chart, P)
    sys = chart.system
    base = sys.space.displace(np.repeat(chart.center_row, len(P), 0), zeta)
    return sys.act(a, base)


def _jacobian(chart: FlowboxChart, p):
    """Central differences of ``F_x`` at ``p`` along the standard frame."""
    n = chart.system.dim
    E = FD_STEP * np.eye(n)
    fwd = flowbox_map(chart, p[None, :] + E)
    bwd = flowbox_map(chart, p[None, :] - E)
    return (chart.system.space.lift_diff(bwd, fwd) / (2 * FD_STEP)).T


def _check_action_space(sys: System):
    if not isinstance(sys.space, Torus):
        raise PreconditionError("flowbox charts are implemented on flat tori only")


def _orbit_frame(sys: System, row):
    X = np.column_stack([sys.field(row, i)[0] for i in range(sys.rank)])
    s = svdvals(X)
    if s.min() <= 1e-12 * max(1.0, s.max()):
        raise DegenerateBasisError("orbit vectors are linearly dependent")
    return X


def _epsilon0(sys: System) -> float:
    eps = getattr(sys, "_epsilon0_cache", None)
    if eps is None:
        eps = estimate_epsilon0_action(sys)
        sys._epsilon0_cache = eps
    return eps


def _assemble(sys: System, center: ChartPoint, r0: float) -> FlowboxChart:
    row = sys.to_array(center)[None, :]
    X = _orbit_frame(sys, row)
    N = null_space(X.T)
    mu = MU_FRACTION * _epsilon0(sys)
    # |a| <= |X^+| |p| and |p| <= 3 d(y, x) inside the ball
    pinv_norm = 1.0 / svdvals(X).min()
    delta = 0.9 * min(r0 / 3.0, mu / (3.0 * pinv_norm))
    a = delta / (2.0 * np.linalg.norm(X, 2))
    tv = lambda col: TangentVector(center, tuple(float(c) for c in col))
    return FlowboxChart(sys, center, float(r0), [tv(c) for c in X.T], [tv(c) for c in N.T],
                        float(mu), float(a), float(delta))


def build_flowbox(sys: System, x: ChartPoint, r0: float | None = None,
                  audit_samples: int = 16, seed: int = 0) -> FlowboxChart:
    """Flowbox chart at ``x``.

    With ``r0=None`` the radius starts at half the metric window and is
    halved until :func:`flowbox_bounds` passes.  ``delta`` is the radius of
    the ball around ``x`` whose points invert with orbit part in ``O_mu``.
    """
    _check_action_space(sys)
    if r0 is not None:
        if not 0 < r0 < sys.metric_window:
            raise PreconditionError("r0 must lie in (0, metric_window)")
        return _assemble(sys, x, r0)
    r0 = 0.5 * sys.metric_window
    for _ in range(30):
        chart = _assemble(sys, x, r0)
        try:
            flowbox_bounds(chart, audit_samples, seed)
            return chart
        except BoundViolationError:
            r0 /= 2
    raise BoundViolationError("no admissible r0 found", where=x)


def _ball(n: int, dim: int, radius: float, seed: int):
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return radius * rng.uniform(0, 1, n)[:, None] ** (1.0 / dim) * d


def flowbox_bounds(chart: FlowboxChart, samples: int = 64, seed: int = 0):
    """``(m_min, norm_max)`` of ``DF_x`` over the origin and sampled ``p``.

    Raises
    ------
    BoundViolationError
        If ``m_min < 1/3`` or ``norm_max > 3``; ``where`` is the tangent vector.
    """
    P = np.vstack([np.zeros(chart.system.dim), _ball(samples, chart.system.dim, chart.r0, seed)])
    m_min, norm_max = np.inf, 0.0
    for p in P:
        s = svdvals(_jacobian(chart, p))
        m_min, norm_max = min(m_min, s.min()), max(norm_max, s.max())
        if s.min() < M_LOWER or s.max() > NORM_UPPER:
            raise BoundViolationError(
                f"singular values [{s.min():.4g}, {s.max():.4g}] outside [1/3, 3]",
                where=TangentVector(chart.center, tuple(p)))
    return float(m_min), float(norm_max)


def flowbox_injectivity(chart: FlowboxChart, pairs: int = 500, seed: int = 0) -> float:
    """Smallest ``d(F(p), F(q)) / |p - q|`` over seeded pairs in ``T_xM(r0)``."""
    n = chart.system.dim
    P = _ball(pairs, n, chart.r0, seed)
    Q = _ball(pairs, n, chart.r0, seed + 1)
    d = chart.system.dist(flowbox_map(chart, P), flowbox_map(chart, Q))
    return float(np.min(d / np.linalg.norm(P - Q, axis=1)))


def invert_flowbox(chart: FlowboxChart, y: ChartPoint):
    """Solve ``F_x(zeta + sum a_i X_i) = y`` by Newton from the origin.

    Returns
    -------
    zeta : TangentVector
        Normal part, in ``N_x``.
    a : ndarray of shape (d,)
        Orbit coordinates.
    """
    sys = chart.system
    yr = sys.to_array(y)[None, :]
    if not sys.dist(yr, chart.center_row)[0] < chart.delta:
        raise PreconditionError("y must lie within delta of the chart center")
    p = _newton(chart, yr)
    zeta, a = _split(chart, p[None, :])
    return TangentVector(chart.center, tuple(float(c) for c in zeta[0])), a[0]


def _newton(chart: FlowboxChart, yr):
    sys = chart.system
    p = np.zeros(sys.dim)
    for _ in range(NEWTON_MAX):
        r = sys.space.lift_diff(flowbox_map(chart, p), yr)[0]
        if np.linalg.norm(r) <= 1e-14:
            return p
        step = np.linalg.solve(_jacobian(chart, p), r)
        p = p + step
        if np.linalg.norm(step) <= 1e-15 * max(1.0, np.linalg.norm(p)):
            break
    res = float(sys.dist(flowbox_map(chart, p), yr)[0])
    if res > TOL_INVERT:
        raise OutsideChartError(f"Newton inversion stalled with residual {res:.3g}")
    return p


# ---------------------------------------------------------------------------
# Cocycle recovery


@dataclass(frozen=True)
class ActionCocycleSample:
    u: tuple
    x: ChartPoint
    z: np.ndarray
    residual: float
    normal_norm: float


def _same_space(Phi: System, Psi: System):
    if Phi.system_id != Psi.system_id or Phi.rank != Psi.rank:
        raise DomainMismatchError("Phi and Psi must act by R^d on the same manifold")


def recover_z_action(Phi: System, Psi: System, chart: FlowboxChart, u,
                     tol_normal: float = TOL_NORMAL) -> ActionCocycleSample:
    """Orbit coordinates ``z`` with ``Psi_u(x) = Phi_z(x)``.

    Raises
    ------
    OffOrbitError
        If the normal part of ``F_x^{-1}(Psi_u(x))`` exceeds ``tol_normal``.
    """
    _same_space(Phi, Psi)
    u = np.asarray(u, dtype=float).reshape(Phi.rank)
    x = chart.center_row
    y = Psi.act(u[None, :], x)
    zeta, z = invert_flowbox(chart, Phi.point(y[0]))
    nn = float(np.linalg.norm(zeta.array))
    if nn > tol_normal:
        raise OffOrbitError(f"normal component {nn:.3g} exceeds {tol_normal:g}", residual=nn)
    res = float(Phi.dist(Phi.act(z[None, :], x), y)[0])
    return ActionCocycleSample(tuple(u), chart.center, z, res, nn)


def choose_a_action(Phi: System, Psi: System, chart: FlowboxChart, directions: int = 16) -> float:
    """Largest ``chart.a / 2^k`` keeping ``Psi_u(x)`` within ``delta`` for ``|u| <= a``."""
    d = Phi.rank
    rng = np.random.default_rng(0)
    U = np.vstack([np.eye(d), -np.eye(d), rng.standard_normal((directions, d))])
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    x = np.repeat(chart.center_row, len(U), 0)
    a = chart.a
    for _ in range(60):
        if np.max(Phi.dist(Psi.act(a * U, x), x)) < chart.delta:
            return a
        a /= 2
    raise PreconditionError("no admissible a found for Psi")


def recover_A_at(Phi: System, Psi: System, chart: FlowboxChart, a: float) -> np.ndarray:
    cols = [recover_z_action(Phi, Psi, chart, a * e).z / a for e in np.eye(Phi.rank)]
    return np.column_stack(cols)


def basis_representation_A(Phi: System, Psi: System, x: ChartPoint, tol: float = 1e-8) -> np.ndarray:
    """Matrix ``A`` with ``Y_i(x) = sum_j A_ji X_j(x)``, ``Y_i`` the fields of ``Psi``."""
    _same_space(Phi, Psi)
    row = Phi.to_array(x)[None, :]
    X = _orbit_frame(Phi, row)
    Y = np.column_stack([Psi.field(row, i)[0] for i in range(Psi.rank)])
    A, *_ = np.linalg.lstsq(X, Y, rcond=None)
    res = float(np.max(np.abs(X @ A - Y)))
    if res > tol:
        raise OffOrbitError(f"fields of Psi leave the orbit tangent space (residual {res:.3g})", residual=res)
    return A


def verify_cocycle_action(Phi: System, Psi: System, charts, samples_per_chart: int = 5, seed: int = 0):
    """Additivity, flow-invariance and linearity residuals of ``z``.

    Returns a dict with the three maxima.
    """
    rng = np.random.default_rng(seed)
    d = Phi.rank
    add = inv = lin = 0.0
    for chart in charts:
        a = choose_a_action(Phi, Psi, chart)
        for _ in range(samples_per_chart):
            u, v = (rng.uniform(-1, 1, (2, d)) * a / (2 * math.sqrt(d)))
            zu = recover_z_action(Phi, Psi, chart, u).z
            zuv = recover_z_action(Phi, Psi, chart, u + v).z
            y = Psi.act(u[None, :], chart.center_row)
            cy = build_flowbox(Phi, Phi.point(y[0]), chart.r0)
            zv_y = recover_z_action(Phi, Psi, cy, v).z
            add = max(add, float(np.max(np.abs(zuv - zu - zv_y))))

            w = rng.uniform(-1, 1, d)
            w *= rng.uniform(0, chart.mu) / np.linalg.norm(w)
            xw = Phi.act(w[None, :], chart.center_row)
            cw = build_flowbox(Phi, Phi.point(xw[0]), chart.r0)
            inv = max(inv, float(np.max(np.abs(recover_z_action(Phi, Psi, cw, u).z - zu))))

            for t in (-1.0, -0.5, 0.25, 0.5):
                lin = max(lin, float(np.max(np.abs(recover_z_action(Phi, Psi, chart, t * u).z - t * zu))))
    return {"additivity_residual": add, "invariance_residual": inv, "linearity_residual": lin}


def recover_A_action(Phi: System, Psi: System, charts, horizon: float = 20.0, seed: int = 0,
                     invariance_samples: int = 2, quasitrivial_samples: int = 8,
                     induction_points: int = 2) -> MatrixField:
    """Matrix cocycle ``A(x)`` at each chart center with audit residuals.

    Invariance compares ``A`` at ``Phi_v(x)`` for ``|v| <= 5``; quasi-triviality
    compares ``Psi_u(x)`` with ``Phi_{A(x) u}(x)`` for ``|u| <= horizon``, both
    directly and through an ``n``-fold composition of ``Psi_{u/n}`` with
    ``|u/n| <= a``; the basis check compares with :func:`basis_representation_A`.
    """
    _same_space(Phi, Psi)
    rng = np.random.default_rng(seed)
    d = Phi.rank
    samples, a_min = [], np.inf
    inv = qt = basis = 0.0
    for k, chart in enumerate(charts):
        a = choose_a_action(Phi, Psi, chart)
        a_min = min(a_min, a)
        A = recover_A_at(Phi, Psi, chart, a)
        samples.append((chart.center, A))
        x = chart.center_row
        for _ in range(invariance_samples):
            v = rng.standard_normal(d)
            v *= rng.uniform(0, INVARIANCE_NORM) / np.linalg.norm(v)
            cv = build_flowbox(Phi, Phi.point(Phi.act(v[None, :], x)[0]), chart.r0)
            A_v = recover_A_at(Phi, Psi, cv, choose_a_action(Phi, Psi, cv))
            inv = max(inv, float(np.max(np.abs(A_v - A))))
        U = rng.standard_normal((quasitrivial_samples, d))
        U *= (horizon * rng.uniform(0, 1, quasitrivial_samples) / np.linalg.norm(U, axis=1))[:, None]
        xs = np.repeat(x, len(U), 0)
        qt = max(qt, float(np.max(Phi.dist(Psi.act(U, xs), Phi.act(U @ A.T, xs)))))
        if k < induction_points:
            u = U[np.argmax(np.linalg.norm(U, axis=1))]
            n = math.ceil(np.linalg.norm(u) / a)
            y = x.copy()
            for _ in range(n):
                y = Psi.act((u / n)[None, :], y)
            qt = max(qt, float(Phi.dist(y, Phi.act((A @ u)[None, :], x))[0]))
        basis = max(basis, float(np.max(np.abs(basis_representation_A(Phi, Psi, chart.center) - A))))
    return MatrixField(float(a_min), samples, inv, qt, basis)

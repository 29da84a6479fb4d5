"""Local cross-sections through a point and the section-time solver.

For a center ``x`` the section is the level set

    S_x = {p : I(p, x) = I(x, x)},   I(p, x) = int_0^T0 d(phi_s(p), x) ds,

and the section time ``tau(p)`` is the unique small root of
``G(t, p) = I(phi_t(p), x) - I(x, x)``.  It is found by the fixed-point
iteration ``tau <- tau - G(tau, p) / g_slope`` whose contraction factor is
at most 7/12 inside the certified ball.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .constants import FlowConstants
from .engine import ChartPoint, System
from .errors import (BoundViolationError, DivergenceError, NonConvergenceError,
                     PreconditionError, WindowNotFoundError)

QUADRATURE_N = 256
TOL_G = 1e-10
MAX_ITER = 200
CONTRACTION = 7.0 / 12.0
RATE_SLACK = 0.05


@dataclass(frozen=True)
class SectionChart:
    system: System = field(repr=False)
    center: ChartPoint
    constants: FlowConstants
    I_center: float
    g_slope: float
    quadrature_n: int = QUADRATURE_N

    @property
    def center_row(self) -> np.ndarray:
        return self.system.to_array(self.center)[None, :]


@dataclass(frozen=True)
class OrbitWindow:
    l1: float
    l2: float


def _integral_batch(sys: System, P, X, T0, n, shift=0.0):
    """Composite Simpson value of ``int_0^T0 d(phi_{shift+s}(p), x) ds`` per row."""
    if n < 16 or n % 2:
        raise PreconditionError("quadrature needs an even n >= 16")
    P = np.atleast_2d(P)
    N = len(P)
    s = np.linspace(0.0, T0, n + 1)
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (N,))
    times = (shift[:, None] + s[None, :]).ravel()
    pts = sys.flow(times, np.repeat(P, n + 1, axis=0))
    X = np.atleast_2d(X)
    Xr = np.repeat(X, n + 1, axis=0) if len(X) == N else X
    d = sys.dist(pts, Xr).reshape(N, n + 1)
    return simpson(d, dx=T0 / n, axis=1)


def integral_I(sys: System, p: ChartPoint, x: ChartPoint, T0: float, n: int = QUADRATURE_N) -> float:
    """``I(p, x)`` by composite Simpson with ``n`` subintervals."""
    return float(_integral_batch(sys, sys.to_array(p), sys.to_array(x), T0, n)[0])


def build_chart_batch(sys: System, x_row, constants: FlowConstants, n: int = QUADRATURE_N) -> SectionChart:
    x_row = np.asarray(x_row, dtype=float).reshape(1, -1)
    return build_chart(sys, sys.point(x_row[0]), constants, n)


def build_chart(sys: System, center: ChartPoint, constants: FlowConstants,
                n: int = QUADRATURE_N) -> SectionChart:
    """Cache ``I(x, x)`` and ``dG/dt(0, x) = d(phi_T0(x), x)`` at ``center``."""
    x = sys.to_array(center)[None, :]
    T0 = constants.T0
    I_center = float(_integral_batch(sys, x, x, T0, n)[0])
    g_slope = float(sys.dist(sys.flow(T0, x), x)[0] - sys.dist(x, x)[0])
    if not g_slope > constants.eta / 2:
        raise BoundViolationError(f"dG/dt(0,x) = {g_slope:.6g} <= eta/2", where=center)
    return SectionChart(sys, center, constants, I_center, g_slope, n)


def _G(chart: SectionChart, T, P):
    c = chart.constants
    return _integral_batch(chart.system, P, chart.center_row, c.T0, chart.quadrature_n, T) - chart.I_center


def g_values(chart: SectionChart, T, P):
    """``dG/dt(t, p) = d(phi_{t+T0}(p), x) - d(phi_t(p), x)`` per row."""
    sys, x = chart.system, chart.center_row
    P = np.atleast_2d(P)
    T = np.broadcast_to(np.asarray(T, dtype=float), (len(P),))
    return sys.dist(sys.flow(T + chart.constants.T0, P), x) - sys.dist(sys.flow(T, P), x)


def g_derivative(sys: System, t: float, p: ChartPoint, chart: SectionChart) -> float:
    """Slope of ``G`` in ``t``; raises when it does not exceed ``eta/2``."""
    if sys.system_id != chart.system.system_id:
        raise PreconditionError("chart belongs to another system")
    val = float(g_values(chart, t, sys.to_array(p))[0])
    if not val > chart.constants.eta / 2:
        raise BoundViolationError(f"dG/dt = {val:.6g} <= eta/2 at t={t}", where=(t, p))
    return val


def solve_tau_batch(chart: SectionChart, P, tau0=0.0, tol=TOL_G, max_iter=MAX_ITER):
    """Run the section-time iteration on every row of ``P``.

    Returns ``(tau, iterations, rates)`` where ``rates[i]`` lists the ratios
    of consecutive step lengths for row ``i``.
    """
    P = np.atleast_2d(P)
    N = len(P)
    mu1 = chart.constants.mu1
    tau = np.array(np.broadcast_to(np.asarray(tau0, dtype=float), (N,)))
    iters = np.zeros(N, dtype=int)
    rates = [[] for _ in range(N)]
    prev = np.full(N, np.nan)
    G = _G(chart, tau, P)
    active = np.abs(G) >= tol
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        new = tau[idx] - G[idx] / chart.g_slope
        step = np.abs(new - tau[idx])
        for j, i in enumerate(idx):
            if prev[i] > 0:
                rates[i].append(float(step[j] / prev[i]))
        tau[idx] = new
        prev[idx] = step
        iters[idx] += 1
        bad = np.abs(new) > mu1
        if bad.any():
            raise DivergenceError(f"section time left [-mu1, mu1] (|tau| = {np.abs(new[bad]).max():.3g})")
        G[idx] = _G(chart, tau[idx], P[idx])
        active[idx] = np.abs(G[idx]) >= tol
    else:
        if active.any():
            raise NonConvergenceError(f"section time not converged after {max_iter} iterations")
    return tau, iters, rates


def solve_section_time(chart: SectionChart, p: ChartPoint, tau0: float = 0.0,
                       tol: float = TOL_G, max_iter: int = MAX_ITER):
    """Fixed point of ``tau -> tau - G(tau, p) / g_slope`` started at ``tau0``.

    Returns
    -------
    tau : float
        Section time, ``phi_tau(p)`` lies on the section.
    iterations : int
    rates : list of float
        ``|tau_{k+1} - tau_k| / |tau_k - tau_{k-1}|`` for each step after the first.
    """
    tau, it, rates = solve_tau_batch(chart, chart.system.to_array(p), tau0, tol, max_iter)
    return float(tau[0]), int(it[0]), rates[0]


def project_batch(chart: SectionChart, P):
    tau, _, _ = solve_tau_batch(chart, P)
    return chart.system.flow(tau, np.atleast_2d(P)), tau


def project_to_section(chart: SectionChart, p: ChartPoint) -> ChartPoint:
    """``P_x(p) = phi_tau(p)(p)``."""
    pts, _ = project_batch(chart, chart.system.to_array(p))
    return chart.system.point(pts[0])


def orbit_window(chart: SectionChart, p: ChartPoint) -> OrbitWindow:
    """First exit times of the orbit of ``p`` from ``B_delta(center)``.

    Scans ``[0, +-mu]`` for the first point outside and bisects the crossing.
    """
    sys, x = chart.system, chart.center_row
    delta, mu = chart.constants.delta, chart.constants.mu
    prow = sys.to_array(p)[None, :]
    if not sys.dist(prow, x)[0] < delta:
        raise PreconditionError("p must lie in the open ball B_delta(center)")

    def inside(t):
        return sys.dist(sys.flow(t, prow), x)[0] < delta

    def edge(sign):
        ts = sign * np.linspace(0.0, mu, 129)
        d = sys.dist(sys.flow(ts, np.repeat(prow, len(ts), 0)), x)
        out = np.flatnonzero(d >= delta)
        if out.size == 0:
            raise WindowNotFoundError("orbit stays in B_delta up to time mu; calibration is unsuitable")
        lo, hi = ts[out[0] - 1], ts[out[0]]
        while abs(hi - lo) > 1e-13:
            mid = 0.5 * (lo + hi)
            if inside(mid):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    return OrbitWindow(l1=float(edge(-1.0)), l2=float(edge(1.0)))


def ball_sample(sys: System, center_row, radius, n, seed):
    """``n`` seeded points uniformly distributed in the ball ``B_radius(center)``."""
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n, sys.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = radius * rng.uniform(0, 1, n) ** (1.0 / sys.dim)
    return sys.space.displace(np.repeat(np.atleast_2d(center_row), n, 0), r[:, None] * dirs)


def audit_chart(chart: SectionChart, points: int = 32, seed: int = 0, time_points: int = 9) -> dict:
    """Solve at seeded points of the closed ball and collect chart statistics."""
    sys, x = chart.system, chart.center_row
    P = ball_sample(sys, x, chart.constants.delta, points, seed)
    tau, iters, rates = solve_tau_batch(chart, P)
    all_rates = np.array([r for rr in rates for r in rr])
    proj = sys.flow(tau, P)
    level = np.abs(_G(chart, np.zeros(len(P)), proj))
    mu1 = chart.constants.mu1
    gv = np.concatenate([g_values(chart, t, P) for t in np.linspace(-mu1, mu1, time_points)])
    hist, edges = np.histogram(all_rates, bins=np.linspace(0, 1, 11)) if all_rates.size else (np.zeros(10, int), np.linspace(0, 1, 11))
    return {
        "g_slope": chart.g_slope,
        "solves": int(len(P)),
        "max_rate": float(all_rates.max()) if all_rates.size else 0.0,
        "rates": all_rates,
        "rate_histogram": {"edges": edges.tolist(), "counts": hist.tolist()},
        "level_residual_max": float(level.max()),
        "g_min": float(gv.min()),
        "g_violations": int(np.sum(gv <= chart.constants.eta / 2)),
        "tau_max": float(np.abs(tau).max()),
        "iterations_max": int(iters.max()),
    }

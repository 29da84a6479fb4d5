"""Sampled estimates of the local constants of a fixed-point-free flow.

All infima over the manifold become minima over a seeded low-discrepancy
sample, shrunk by :data:`SAFETY`.  The constants are:

``epsilon0``
    infimum of minimal periods of closed orbits, capped by 1.
``eta``
    lower bound of ``d(phi_T0(x), x)``.
``mu1``, ``delta``
    time and space radii on which the three local estimates used by the
    cross-section construction hold; ``mu = mu1 / 3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import minimize_scalar

from . import engine
from ._search import golden_min, parabolic_refine
from .engine import (ChartPoint, DirectionFlow, DisjointUnionFlow, Reparameterized,
                     SuspensionFlow, System, TorusTranslationAction, TorusTranslationFlow)
from .errors import CalibrationError, PreconditionError

SAFETY = 0.9
DELTA_FIT = 0.45
T0_FRACTION = 0.4
TIME_POINTS = 32
SHELL_POINTS = 64


@dataclass(frozen=True)
class FlowConstants:
    T0: float
    epsilon0: float
    eta: float
    mu1: float
    delta: float
    sample_count: int
    certified: bool
    mu: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mu", self.mu1 / 3.0)
        if not 0 < self.T0 < self.epsilon0:
            raise PreconditionError("need 0 < T0 < epsilon0")
        if not 0 < self.mu1 < self.T0:
            raise PreconditionError("need 0 < mu1 < T0")
        if not (self.eta > 0 and self.delta > 0):
            raise PreconditionError("eta and delta must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SeparationReport:
    delta: float
    horizon: float
    pairs_tested: int
    separated_fraction: float
    counterexamples: list
    rejected_on_orbit: int = 0
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "horizon": self.horizon,
            "pairs_tested": self.pairs_tested,
            "separated_fraction": self.separated_fraction,
            "rejected_on_orbit": self.rejected_on_orbit,
            "counterexamples": [
                {"x": list(x.coords), "y": list(y.coords), "max_distance": m}
                for x, y, m in self.counterexamples
            ],
            "note": self.note,
        }


@dataclass(frozen=True)
class AuditResult:
    """Worst values of the three local conditions over an audit sample."""

    cond1_max: float
    cond1_center_max: float
    cond1_bound: float
    cond2_max: float
    cond2_bound: float
    cond3_min: float
    cond3_bound: float

    @property
    def passed(self) -> bool:
        return (self.cond1_max < self.cond1_bound and self.cond2_max <= self.cond2_bound
                and self.cond3_min >= self.cond3_bound)


# ---------------------------------------------------------------------------
# epsilon0


def _translation_period(w, cap, tol=1e-9):
    w = np.abs(np.asarray(w, dtype=float))
    i = int(np.argmax(w))
    for k in range(1, int(np.floor(cap * w[i] + tol)) + 1):
        T = k / w[i]
        if np.all(np.abs(T * w - np.round(T * w)) < tol):
            return T
    return None


def exact_min_period(sys: System, cap: float):
    """Smallest closed-orbit period ``<= cap`` for closed-form flows.

    Returns ``None`` when no closed orbit with period up to ``cap`` exists,
    and raises ``NotImplementedError`` for systems without a closed form.
    """
    if isinstance(sys, TorusTranslationFlow):
        return _translation_period(sys.direction, cap)
    if isinstance(sys, DirectionFlow) and isinstance(sys.action, TorusTranslationAction):
        return _translation_period(sys.action.directions @ sys.v, cap)
    if isinstance(sys, SuspensionFlow):
        # the origin is fixed by every toral automorphism, and every closed
        # orbit crosses the base at a periodic point, so periods are k * roof
        return sys.roof if sys.roof <= cap else None
    if isinstance(sys, DisjointUnionFlow):
        found = [exact_min_period(c, cap) for c in sys.components]
        found = [p for p in found if p is not None]
        return min(found) if found else None
    if isinstance(sys, Reparameterized):
        speeds = np.abs(sys.speed)
        comps = sys.base.components if isinstance(sys.base, DisjointUnionFlow) else [sys.base]
        if len(speeds) == 1:
            speeds = np.repeat(speeds, len(comps))
        found = []
        for c, s in zip(comps, speeds):
            p = exact_min_period(c, cap * s)
            if p is not None:
                found.append(p / s)
        return min(found) if found else None
    raise NotImplementedError


def _scan_min_period(sys: System, samples: int, cap: float, seed: int):
    X = sys.sample(samples, seed)
    ts = np.linspace(0, cap, 2001)[1:]
    dt = ts[1] - ts[0]
    best = None
    for x in X:
        d = sys.dist(sys.flow(ts, np.repeat(x[None], len(ts), 0)), x[None])
        # local minima well below the sampling resolution scale
        cand = np.flatnonzero((d[1:-1] <= d[:-2]) & (d[1:-1] <= d[2:]) & (d[1:-1] < 10 * dt)) + 1
        for j in cand:
            f = lambda t: float(sys.dist(sys.flow(t, x[None]), x[None])[0])
            r = minimize_scalar(f, bounds=(ts[j] - dt, ts[j] + dt), method="bounded",
                                options={"xatol": 1e-13})
            if r.fun < 1e-9 and (best is None or r.x < best):
                best = float(r.x)
                break
    return best


def estimate_epsilon0_flow(sys: System, samples: int = 32, period_cap: float = 1.0,
                           seed: int = 0) -> float:
    """Estimate ``epsilon0`` as ``min(1, smallest certified period)``.

    Closed-form systems use exact period enumeration; other systems are
    scanned on a time grid over ``(0, period_cap]`` at sampled points, with
    each near-return refined and certified at ``d < 1e-9``.
    """
    if sys.rank != 1:
        raise PreconditionError("estimate_epsilon0_flow needs a flow")
    try:
        period = exact_min_period(sys, period_cap)
    except NotImplementedError:
        period = _scan_min_period(sys, samples, period_cap, seed)
    return 1.0 if period is None else min(1.0, period)


# ---------------------------------------------------------------------------
# eta


def eta_for(sys: System, T0: float, samples: int = 256, seed: int = 0) -> float:
    """Sampled lower bound for ``d(phi_T0(x), x)``, times the safety factor."""
    if not T0 > 0:
        raise PreconditionError("T0 must be positive")
    X = sys.sample(samples, seed)
    m = float(np.min(sys.dist(sys.flow(T0, X), X)))
    if m < 1e-9:
        raise PreconditionError(f"sampled min of d(phi_T0 x, x) is {m:.3g}; T0 reaches a period")
    return SAFETY * m


# ---------------------------------------------------------------------------
# local constants


def _ball_points(sys: System, X, radius, shell_points):
    """Each row of ``X`` followed by ``shell_points`` points at ``radius``."""
    dirs = engine.shell_directions(sys.dim, shell_points)
    n, m = len(X), len(dirs) + 1
    P = np.repeat(X, m, axis=0)
    V = np.zeros((n * m, sys.dim))
    V[np.arange(n * m) % m != 0] = np.tile(radius * dirs, (n, 1))
    return sys.space.displace(P, V), np.repeat(X, m, axis=0), m


def audit_local_constants(sys: System, T0, eta, mu1, delta, X,
                          time_points=TIME_POINTS, shell_points=SHELL_POINTS) -> AuditResult:
    """Evaluate the three local conditions on the audit points ``X``."""
    P, Xr, m = _ball_points(sys, X, delta, shell_points)
    # (1) d(phi_t p, x) < eta / 4 on t in [-mu1, mu1]
    c1 = np.zeros(len(P))
    for t in np.linspace(-mu1, mu1, time_points):
        c1 = np.maximum(c1, sys.dist(sys.flow(t, P), Xr))
    # (2) d(phi_tau p, phi_tau x) <= eta mu1 / (12 T0) on tau in [0, T0]
    c2 = np.zeros(len(P))
    for tau in np.linspace(0, T0, time_points):
        c2 = np.maximum(c2, sys.dist(sys.flow(tau, P), sys.flow(tau, Xr)))
    # (3) d(phi_{+-mu1/3} x, x) >= 2 delta
    c3 = np.minimum(sys.dist(sys.flow(mu1 / 3, X), X), sys.dist(sys.flow(-mu1 / 3, X), X))
    return AuditResult(
        cond1_max=float(c1.max()),
        cond1_center_max=float(c1[::m].max()),
        cond1_bound=eta / 4,
        cond2_max=float(c2.max()),
        cond2_bound=eta * mu1 / (12 * T0),
        cond3_min=float(c3.min()),
        cond3_bound=2 * delta,
    )


def calibrate_local_constants(sys: System, T0: float, eta: float, *, epsilon0: float | None = None,
                              audit_points: int = 64, seed: int = 0, max_rounds: int = 40,
                              time_points=TIME_POINTS, shell_points=SHELL_POINTS) -> FlowConstants:
    """Find ``mu1`` and ``delta`` for which the local conditions audit clean.

    Starts at ``mu1 = T0/3`` with ``delta`` fitted to 0.45 of the bound from
    condition (3).  A failure of condition (1) at the centers halves ``mu1``
    (and refits ``delta``); any other failure halves ``delta``.

    Raises
    ------
    PreconditionError
        If ``T0`` or ``eta`` is not positive.
    CalibrationError
        After ``max_rounds`` unsuccessful audits.
    """
    if not (T0 > 0 and eta > 0):
        raise PreconditionError("T0 and eta must be positive")
    if epsilon0 is None:
        epsilon0 = estimate_epsilon0_flow(sys)
    if not T0 < epsilon0:
        raise PreconditionError("T0 must be below epsilon0")
    X = sys.sample(audit_points, seed)

    def fit_delta(mu1):
        c3 = np.minimum(sys.dist(sys.flow(mu1 / 3, X), X), sys.dist(sys.flow(-mu1 / 3, X), X))
        return min(DELTA_FIT * float(c3.min()), 0.5 * sys.metric_window)

    mu1 = T0 / 3
    delta = fit_delta(mu1)
    for _ in range(max_rounds):
        res = audit_local_constants(sys, T0, eta, mu1, delta, X, time_points, shell_points)
        if res.passed:
            return FlowConstants(T0=T0, epsilon0=epsilon0, eta=eta, mu1=mu1, delta=delta,
                                 sample_count=audit_points, certified=True)
        if res.cond1_center_max >= res.cond1_bound:
            mu1 /= 2
            delta = fit_delta(mu1)
        else:
            delta /= 2
    raise CalibrationError(f"local constants not certified after {max_rounds} rounds")


def calibrate(sys: System, *, seed: int = 0, eta_samples: int = 256, audit_points: int = 64,
              T0_fraction: float = T0_FRACTION) -> FlowConstants:
    """Full calibration chain: epsilon0, ``T0 = 0.4 epsilon0``, eta, mu1, delta."""
    eps0 = estimate_epsilon0_flow(sys, seed=seed)
    T0 = T0_fraction * eps0
    eta = eta_for(sys, T0, eta_samples, seed)
    return calibrate_local_constants(sys, T0, eta, epsilon0=eps0, audit_points=audit_points,
                                     seed=seed)


# ---------------------------------------------------------------------------
# separation


def on_local_arc(sys: System, constants: FlowConstants, X, Y, tol: float = 1e-8):
    """Rows where ``Y`` lies on the arc ``phi_[-mu, mu](X)``.

    Inside the certified ball the test projects ``Y`` onto the cross-section
    at ``X``; beyond it the arc distance is minimized directly.
    """
    from .section import build_chart_batch, solve_tau_batch

    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    out = np.zeros(len(X), dtype=bool)
    d = sys.dist(X, Y)
    inside = d < constants.delta
    for i in np.flatnonzero(inside):
        chart = build_chart_batch(sys, X[i], constants)
        try:
            tau, _, _ = solve_tau_batch(chart, Y[i][None])
        except Exception:
            continue
        out[i] = sys.dist(sys.flow(tau, Y[i][None]), X[i][None])[0] < tol
    rest = np.flatnonzero(~inside)
    if rest.size:
        Xr, Yr = X[rest], Y[rest]
        f = lambda s: sys.dist(sys.flow(s, Xr), Yr)
        mu = constants.mu
        z, fz = golden_min(f, np.full(len(rest), -mu), np.full(len(rest), mu))
        z, fz = parabolic_refine(f, z, fz, 1e-6)
        out[rest] = fz < tol
    return out


def probe_separation(sys: System, delta: float, horizon: float, pairs: int, seed: int,
                     constants: FlowConstants | None = None, time_step: float = 0.05) -> SeparationReport:
    """Check how many nearby pairs separate to distance ``delta``.

    Pairs ``(x, y)`` with ``0 < d(x, y) < delta`` are drawn from a seeded
    generator, pairs on a common local orbit arc are redrawn, and both
    points are flowed forward and backward to ``+-horizon`` on a grid of
    step ``time_step``.
    """
    if not (delta > 0 and horizon > 0):
        raise PreconditionError("delta and horizon must be positive")
    if constants is None:
        constants = calibrate(sys, seed=seed)
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    rejected = 0
    attempts = 0
    while len(xs) < pairs and attempts < 50:
        attempts += 1
        need = pairs - len(xs)
        X = sys.space.sample(need, int(rng.integers(2**31)))
        dirs = rng.standard_normal((need, sys.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        r = delta * rng.uniform(1e-3, 0.999, need) ** (1.0 / sys.dim)
        Y = sys.space.displace(X, r[:, None] * dirs)
        d = sys.dist(X, Y)
        ok = (d > 0) & (d < delta)
        arc = on_local_arc(sys, constants, X, Y)
        rejected += int(np.sum(ok & arc))
        keep = ok & ~arc
        xs.extend(X[keep])
        ys.extend(Y[keep])
    X, Y = np.array(xs[:pairs]), np.array(ys[:pairs])
    n = len(X)
    ts = np.arange(time_step, horizon + 0.5 * time_step, time_step)
    ts[-1] = min(ts[-1], horizon)
    best = sys.dist(X, Y)
    for t in np.concatenate([ts, -ts]):
        best = np.maximum(best, sys.dist(sys.flow(t, X), sys.flow(t, Y)))
    separated = best >= delta
    counter = [(sys.point(X[i]), sys.point(Y[i]), float(best[i])) for i in np.flatnonzero(~separated)]
    note = ""
    if counter:
        note = ("some pairs stayed delta-close up to the horizon; for a separating "
                "system this means the horizon was too short")
    return SeparationReport(delta=float(delta), horizon=float(horizon), pairs_tested=n,
                            separated_fraction=float(np.mean(separated)) if n else 0.0,
                            counterexamples=counter, rejected_on_orbit=rejected, note=note)


def is_on_local_arc(sys: System, constants: FlowConstants, x: ChartPoint, y: ChartPoint) -> bool:
    """Single-point form of :func:`on_local_arc`."""
    return bool(on_local_arc(sys, constants, sys.to_array(x), sys.to_array(y))[0])

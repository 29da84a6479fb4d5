"""Recovery of the reparameterization cocycle of a commuting flow.

For ``psi`` in the centralizer of a separating flow ``phi`` and small
``|s| <= a``, ``psi_s(x) = phi_{z(s,x)}(x)`` with ``|z| <= mu``.  The
cocycle ``z`` is additive along ``psi``, invariant along ``phi`` and linear
in ``s``, so ``A(x) = z(a, x) / a`` reparameterizes ``psi`` globally:
``psi_t(x) = phi_{A(x) t}(x)`` for all ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._search import golden_min, parabolic_refine
from .constants import FlowConstants, calibrate
from .engine import ChartPoint, DirectionFlow, System
from .errors import DomainMismatchError, NoMatchError, PreconditionError

TOL_MATCH = 1e-8
TIME_RANGE = 5.0
INVARIANCE_RANGE = 10.0


@dataclass(frozen=True)
class CocycleSample:
    s: object
    x: ChartPoint
    z: object
    residual: float


@dataclass
class ReparamField:
    a: float
    samples: list
    invariance_residual_max: float
    quasitrivial_residual_max: float = float("nan")

    def values(self) -> np.ndarray:
        return np.array([A for _, A in self.samples])


class CocycleResiduals(NamedTuple):
    additivity_residual: float
    invariance_residual: float
    linearity_residual: float


def _same_space(phi: System, psi: System):
    if phi.system_id != psi.system_id:
        raise DomainMismatchError(f"{phi.system_id!r} and {psi.system_id!r} are different manifolds")


def _rows(sys: System, points):
    if isinstance(points, np.ndarray):
        return np.atleast_2d(points)
    return np.array([sys.to_array(p) for p in points])


def check_commutation(phi: System, psi: System, samples: int = 100, seed: int = 0) -> float:
    """Max of ``d(psi_s(phi_t x), phi_t(psi_s x))`` over seeded ``s, t in [-5, 5]``."""
    _same_space(phi, psi)
    rng = np.random.default_rng(seed)
    X = phi.sample(samples, seed)
    s = rng.uniform(-TIME_RANGE, TIME_RANGE, samples)
    t = rng.uniform(-TIME_RANGE, TIME_RANGE, samples)
    return float(np.max(phi.dist(psi.flow(s, phi.flow(t, X)), phi.flow(t, psi.flow(s, X)))))


def match_orbit_time(phi: System, X, Y, mu: float):
    """Per row, the ``z in [-mu, mu]`` minimizing ``d(phi_z(x), y)``."""
    f = lambda z: phi.dist(phi.flow(z, X), Y)
    n = len(X)
    z, fz = golden_min(f, np.full(n, -mu), np.full(n, mu))
    return parabolic_refine(f, z, fz, max(mu * 1e-4, 1e-9))


def recover_z_batch(phi: System, psi: System, constants: FlowConstants, s, X, tol_match: float = TOL_MATCH):
    """Vectorized :func:`recover_z`; returns ``(z, residual)`` arrays."""
    X = np.atleast_2d(X)
    s = np.broadcast_to(np.asarray(s, dtype=float), (len(X),))
    Y = psi.flow(s, X)
    z, res = match_orbit_time(phi, X, Y, constants.mu)
    bad = res > tol_match
    if bad.any():
        i = int(np.argmax(res))
        raise NoMatchError(
            f"psi_s(x) is off the local orbit arc (residual {res[i]:.3g} at s={s[i]:.3g})",
            residual=float(res[i]))
    return z, res


def recover_z(phi: System, psi: System, constants: FlowConstants, s: float, x: ChartPoint,
              tol_match: float = TOL_MATCH) -> CocycleSample:
    """Local orbit time ``z`` with ``psi_s(x) = phi_z(x)``, ``|z| <= mu``."""
    _same_space(phi, psi)
    z, res = recover_z_batch(phi, psi, constants, s, phi.to_array(x), tol_match)
    return CocycleSample(s=float(s), x=x, z=float(z[0]), residual=float(res[0]))


def choose_a(phi: System, psi: System, constants: FlowConstants, X, max_halvings: int = 60) -> float:
    """Largest ``a`` in ``{mu/2, mu/4, ...}`` with ``d(psi_s x, x) < delta`` for ``|s| <= a``."""
    X = np.atleast_2d(X)
    a = constants.mu / 2
    fracs = np.array([-1.0, -0.5, 0.5, 1.0])
    for _ in range(max_halvings):
        worst = max(float(np.max(phi.dist(psi.flow(f * a, X), X))) for f in fracs)
        if worst < constants.delta:
            return a
        a /= 2
    raise PreconditionError("no admissible a found; psi moves points too fast")


def verify_cocycle(phi: System, psi: System, constants: FlowConstants, samples: int = 500,
                   seed: int = 0, a: float | None = None) -> CocycleResiduals:
    """Residuals of additivity, invariance along ``phi`` and linearity of ``z``.

    Raises
    ------
    NoMatchError
        Propagated from the underlying recoveries.
    """
    _same_space(phi, psi)
    rng = np.random.default_rng(seed)
    X = phi.sample(samples, seed)
    if a is None:
        a = choose_a(phi, psi, constants, X)
    rz = lambda s, P: recover_z_batch(phi, psi, constants, s, P)[0]

    t = rng.uniform(-a, a, samples)
    s = rng.uniform(np.maximum(-a, -a - t), np.minimum(a, a - t))
    additivity = np.abs(rz(t + s, X) - rz(t, X) - rz(s, psi.flow(t, X)))

    s_inv = rng.uniform(-a, a, samples)
    t_inv = rng.uniform(-INVARIANCE_RANGE, INVARIANCE_RANGE, samples)
    invariance = np.abs(rz(s_inv, phi.flow(t_inv, X)) - rz(s_inv, X))

    slope = rz(a, X) / a
    lin = np.zeros(samples)
    for frac in (-1.0, -0.75, -0.5, -0.25, 0.25, 0.5, 0.75):
        lin = np.maximum(lin, np.abs(rz(frac * a, X) - slope * frac * a))
    return CocycleResiduals(float(additivity.max()), float(invariance.max()), float(lin.max()))


def recover_A_flow(phi: System, psi: System, constants: FlowConstants, sample_points,
                   a: float | None = None, seed: int = 0, invariance_times: int = 4) -> ReparamField:
    """``A(x) = z(a, x) / a`` at each sample point, with its orbit-invariance residual."""
    _same_space(phi, psi)
    X = _rows(phi, sample_points)
    if a is None:
        a = choose_a(phi, psi, constants, X)
    A = recover_z_batch(phi, psi, constants, a, X)[0] / a
    rng = np.random.default_rng(seed)
    inv = 0.0
    for _ in range(invariance_times):
        t = rng.uniform(-INVARIANCE_RANGE, INVARIANCE_RANGE, len(X))
        A_t = recover_z_batch(phi, psi, constants, a, phi.flow(t, X))[0] / a
        inv = max(inv, float(np.max(np.abs(A_t - A))))
    samples = [(phi.point(x), float(v)) for x, v in zip(X, A)]
    return ReparamField(a=float(a), samples=samples, invariance_residual_max=inv)


def verify_quasitrivial(phi: System, psi: System, field: ReparamField, horizon: float = 20.0,
                        samples: int | None = None, time_points: int = 41,
                        induction_points: int = 8) -> float:
    """Max of ``d(psi_t(x), phi_{A(x) t}(x))`` for ``|t| <= horizon``.

    Besides direct evaluation on a time grid, ``psi_{+-horizon}`` is rebuilt
    at a few points as an ``n``-fold composition of ``psi_tau`` with
    ``|tau| <= a``, the way the extension beyond ``[-a, a]`` is argued.
    """
    _same_space(phi, psi)
    pts = field.samples if samples is None else field.samples[:samples]
    X = np.array([phi.to_array(x) for x, _ in pts])
    A = np.array([v for _, v in pts])
    worst = 0.0
    for t in np.linspace(-horizon, horizon, time_points):
        worst = max(worst, float(np.max(phi.dist(psi.flow(t, X), phi.flow(A * t, X)))))
    if induction_points:
        Xi, Ai = X[:induction_points], A[:induction_points]
        n = math.ceil(horizon / field.a)
        for sign in (1.0, -1.0):
            tau = sign * horizon / n
            Y = Xi.copy()
            for _ in range(n):
                Y = psi.flow(tau, Y)
            worst = max(worst, float(np.max(phi.dist(Y, phi.flow(Ai * sign * horizon, Xi)))))
    return worst


def sampled_lipschitz(phi: System, field: ReparamField, radius: float | None = None) -> float:
    """Max of ``|A(x) - A(y)| / d(x, y)`` over sample pairs closer than ``radius``.

    A finite stand-in for continuity of ``A``; recorded, not bounded.
    """
    X = np.array([phi.to_array(x) for x, _ in field.samples])
    A = field.values()
    if radius is None:
        radius = phi.metric_window
    i, j = np.triu_indices(len(X), k=1)
    d = phi.dist(X[i], X[j])
    near = np.isfinite(d) & (d < radius) & (d > 0)
    if not near.any():
        return 0.0
    return float(np.max(np.abs(A[i] - A[j])[near] / d[near]))


def check_orbit_coincidence(action: System, v, u, samples: int = 16, horizon: float = 5.0,
                            seed: int = 0, time_points: int = 41) -> float:
    """Whether ``Phi_{t u}(x)`` stays on the orbit of the flow ``Phi_{s v}``.

    The flow ``phi_s = Phi_{s v}`` is calibrated, ``psi_t = Phi_{t u}`` is
    matched against it through the local cocycle and the resulting
    reparameterization is tested on ``[-horizon, horizon]``.

    Raises
    ------
    NoMatchError
        When ``Phi_{a u}(x)`` is off the local orbit arc, i.e. the orbits do
        not coincide.
    """
    if action.rank < 2:
        raise PreconditionError("orbit coincidence needs an action of rank >= 2")
    phi = DirectionFlow(action, v)
    psi = DirectionFlow(action, u)
    constants = calibrate(phi, seed=seed)
    X = action.sample(samples, seed)
    a = choose_a(phi, psi, constants, X)
    A = recover_z_batch(phi, psi, constants, a, X)[0] / a
    worst = 0.0
    for t in np.linspace(-horizon, horizon, time_points):
        worst = max(worst, float(np.max(phi.dist(psi.flow(t, X), phi.flow(A * t, X)))))
    return worst

"""Concrete fixed-point-free flows and translation actions on compact manifolds.

Two manifold families are supported: flat tori ``T^n`` and mapping tori of
integer unimodular 2x2 matrices (suspension flows).  Finite disjoint unions
of either are allowed so that orbit-invariant but non-constant
reparameterizations can be built.

Every system works on batches: coordinates are ``(N, k)`` float arrays and
times are scalars or ``(N,)`` arrays.  The single-point operations
(:func:`evaluate_flow`, :func:`distance`, ...) wrap the batch methods and
speak :class:`ChartPoint`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .errors import DomainMismatchError, InvalidArgumentError

FD_STEP = 1e-5


@dataclass(frozen=True)
class ChartPoint:
    """A normalized point of a system's fundamental domain."""

    system_id: str
    coords: tuple

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


@dataclass(frozen=True)
class TangentVector:
    """Tangent vector in the flat chart at ``base``."""

    base: ChartPoint
    components: tuple

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.components, dtype=float)


def _as_batch(X) -> np.ndarray:
    X = np.array(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    return X


def _times(t, n: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return np.full(n, float(t))
    return t.reshape(n)


def wrap(d):
    """Representative of ``d`` modulo 1 in [-1/2, 1/2]."""
    return d - np.round(d)


def _mod1(X):
    Y = np.mod(X, 1.0)
    Y[Y >= 1.0] = 0.0
    return Y


def shell_directions(dim: int, n: int) -> np.ndarray:
    """Deterministic, roughly uniform unit vectors in ``R^dim``."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if dim == 3:
        # Fibonacci sphere
        k = np.arange(n) + 0.5
        z = 1.0 - 2.0 * k / n
        r = np.sqrt(1.0 - z * z)
        ang = np.pi * (1.0 + 5.0**0.5) * k
        return np.column_stack([r * np.cos(ang), r * np.sin(ang), z])
    g = qmc.MultivariateNormalQMC(np.zeros(dim), seed=0).random(n)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Spaces


class Torus:
    """Flat torus ``R^n / Z^n`` with its exact quotient metric."""

    def __init__(self, dim: int):
        if dim < 1:
            raise InvalidArgumentError("torus dimension must be >= 1")
        self.dim = int(dim)
        self.coord_len = self.dim
        self.space_id = f"T{self.dim}"
        self.diameter = 0.5 * np.sqrt(self.dim)

    def normalize(self, X):
        return _mod1(_as_batch(X))

    def lift_diff(self, X, Y):
        """Shortest displacement taking ``X`` to ``Y``."""
        return wrap(_as_batch(Y) - _as_batch(X))

    def dist(self, X, Y):
        return np.linalg.norm(self.lift_diff(X, Y), axis=1)

    def displace(self, X, V):
        return self.normalize(_as_batch(X) + V)

    def sample(self, n: int, seed: int):
        return qmc.Halton(d=self.dim, scramble=True, seed=seed).random(n)

    def contains(self, X) -> bool:
        X = _as_batch(X)
        return X.shape[1] == self.dim and bool(np.all((X >= 0) & (X < 1)))


class MappingTorus:
    """Mapping torus ``T^2 x [0, roof] / (b, roof) ~ (M b, 0)``.

    Coordinates are ``(b1, b2, h)``.  The metric is the flat product metric
    of ``T^2 x R`` minimized over the identifications that move one of the
    two points by a single deck step, evaluated in both points' charts so
    that it is exactly symmetric.  It is only locally meaningful.
    """

    def __init__(self, matrix, roof: float = 1.0):
        M = np.array(matrix, dtype=float)
        if M.shape != (2, 2) or not np.all(M == np.round(M)):
            raise InvalidArgumentError("base matrix must be a 2x2 integer matrix")
        det = round(np.linalg.det(M))
        if abs(det) != 1:
            raise InvalidArgumentError("base matrix must have |det| = 1")
        if not roof > 0:
            raise InvalidArgumentError("roof must be positive")
        self.matrix = M
        self.inverse = np.round(np.linalg.inv(M))
        self.roof = float(roof)
        self.dim = 3
        self.coord_len = 3
        m = M.astype(int)
        self.space_id = f"S[{m[0,0]},{m[0,1]};{m[1,0]},{m[1,1]}]r{self.roof!r}"
        self.diameter = float(np.sqrt(0.5 + (0.5 * self.roof) ** 2))

    def apply_power(self, B, k):
        """``M^k b mod 1`` row-wise, one matrix step at a time."""
        B = np.array(B, dtype=float)
        k = np.asarray(k, dtype=int).reshape(len(B))
        for j in range(1, int(np.max(np.abs(k), initial=0)) + 1):
            up = k >= j
            if np.any(up):
                B[up] = _mod1(B[up] @ self.matrix.T)
            dn = k <= -j
            if np.any(dn):
                B[dn] = _mod1(B[dn] @ self.inverse.T)
        return _mod1(B)

    def normalize(self, X):
        X = _as_batch(X)
        h = X[:, 2]
        if np.all((h >= 0) & (h < self.roof)):
            # no seam crossing: only the base wraps
            out = X.copy()
            out[:, :2] = _mod1(X[:, :2])
            return out
        k = np.floor(h / self.roof).astype(int)
        hn = h - k * self.roof
        # h - k*roof can round up to roof
        over = hn >= self.roof
        k[over] += 1
        hn[over] -= self.roof
        hn[hn < 0] = 0.0
        out = np.empty_like(X)
        out[:, :2] = self.apply_power(X[:, :2], k)
        out[:, 2] = hn
        return out

    def _candidates(self, X, Y):
        bx, hx = X[:, :2], X[:, 2]
        by, hy = Y[:, :2], Y[:, 2]
        r = self.roof
        d0 = np.hypot(np.linalg.norm(wrap(by - bx), axis=1), hy - hx)
        # y one deck above x, compared in x's chart and in y's chart
        g_up = hy + r - hx
        up_x = np.hypot(np.linalg.norm(wrap(_mod1(by @ self.inverse.T) - bx), axis=1), g_up)
        up_y = np.hypot(np.linalg.norm(wrap(by - _mod1(bx @ self.matrix.T)), axis=1), g_up)
        g_dn = hx + r - hy
        dn_y = np.hypot(np.linalg.norm(wrap(_mod1(bx @ self.inverse.T) - by), axis=1), g_dn)
        dn_x = np.hypot(np.linalg.norm(wrap(bx - _mod1(by @ self.matrix.T)), axis=1), g_dn)
        return d0, up_x, up_y, dn_x, dn_y

    def dist(self, X, Y):
        X, Y = _as_batch(X), _as_batch(Y)
        # argument order of the candidate set is canonical -> exact symmetry
        d0, up_x, up_y, dn_x, dn_y = self._candidates(X, Y)
        return np.minimum.reduce([d0, np.minimum(up_x, up_y), np.minimum(dn_x, dn_y)])

    def lift_diff(self, X, Y):
        """Displacement in ``X``'s chart to the nearest representative of ``Y``."""
        X, Y = np.broadcast_arrays(_as_batch(X), _as_batch(Y))
        bx, hx = X[:, :2], X[:, 2]
        by, hy = Y[:, :2], Y[:, 2]
        r = self.roof
        cands = [
            np.column_stack([wrap(by - bx), hy - hx]),
            np.column_stack([wrap(_mod1(by @ self.inverse.T) - bx), hy + r - hx]),
            np.column_stack([wrap(_mod1(by @ self.matrix.T) - bx), hy - r - hx]),
        ]
        norms = np.stack([np.linalg.norm(c, axis=1) for c in cands])
        pick = np.argmin(norms, axis=0)
        return np.stack(cands)[pick, np.arange(len(X))]

    def displace(self, X, V):
        return self.normalize(_as_batch(X) + V)

    def sample(self, n: int, seed: int):
        U = qmc.Halton(d=3, scramble=True, seed=seed).random(n)
        U[:, 2] *= self.roof
        return U

    def contains(self, X) -> bool:
        X = _as_batch(X)
        return (X.shape[1] == 3 and bool(np.all((X[:, :2] >= 0) & (X[:, :2] < 1)))
                and bool(np.all((X[:, 2] >= 0) & (X[:, 2] < self.roof))))

    def unstable_direction(self):
        """Expanding eigenvalue and unit eigenvector of the base matrix."""
        w, v = np.linalg.eig(self.matrix)
        i = int(np.argmax(np.abs(w)))
        lam = float(np.real(w[i]))
        e = np.real(v[:, i])
        return lam, e / np.linalg.norm(e)


class DisjointUnion:
    """Finite disjoint union of spaces with identical coordinate layout.

    Batch coordinates carry the component index in column 0.  The distance
    between points of different components is ``inf`` (incomparable).
    """

    def __init__(self, components: Sequence):
        if len(components) < 1:
            raise InvalidArgumentError("disjoint union needs at least one component")
        lens = {c.coord_len for c in components}
        dims = {c.dim for c in components}
        if len(lens) != 1 or len(dims) != 1:
            raise InvalidArgumentError("union components must share their coordinate layout")
        self.components = list(components)
        self.dim = dims.pop()
        self.coord_len = lens.pop() + 1
        self.space_id = "U(" + ",".join(c.space_id for c in components) + ")"
        self.diameter = max(c.diameter for c in components)

    def _split(self, X):
        idx = X[:, 0].astype(int)
        return [(k, np.flatnonzero(idx == k)) for k in range(len(self.components))]

    def normalize(self, X):
        X = _as_batch(X)
        out = X.copy()
        for k, rows in self._split(X):
            if rows.size:
                out[rows, 1:] = self.components[k].normalize(X[rows, 1:])
        return out

    def dist(self, X, Y):
        X, Y = _as_batch(X), _as_batch(Y)
        if len(Y) == 1 and len(X) > 1:
            Y = np.repeat(Y, len(X), axis=0)
        if len(X) == 1 and len(Y) > 1:
            X = np.repeat(X, len(Y), axis=0)
        out = np.full(len(X), np.inf)
        same = X[:, 0] == Y[:, 0]
        for k, rows in self._split(X):
            rows = rows[same[rows]]
            if rows.size:
                out[rows] = self.components[k].dist(X[rows, 1:], Y[rows, 1:])
        return out

    def lift_diff(self, X, Y):
        X, Y = _as_batch(X), _as_batch(Y)
        if len(Y) == 1 and len(X) > 1:
            Y = np.repeat(Y, len(X), axis=0)
        if np.any(X[:, 0] != Y[:, 0]):
            raise DomainMismatchError("points lie on different components")
        out = np.empty((len(X), self.dim))
        for k, rows in self._split(X):
            if rows.size:
                out[rows] = self.components[k].lift_diff(X[rows, 1:], Y[rows, 1:])
        return out

    def displace(self, X, V):
        X = _as_batch(X).copy()
        X[:, 1:] = X[:, 1:] + V
        return self.normalize(X)

    def sample(self, n: int, seed: int):
        K = len(self.components)
        out = np.empty((n, self.coord_len))
        comp = np.arange(n) % K
        out[:, 0] = comp
        for k in range(K):
            rows = np.flatnonzero(comp == k)
            out[rows, 1:] = self.components[k].sample(len(rows), seed + k)
        return out

    def contains(self, X) -> bool:
        X = _as_batch(X)
        if X.shape[1] != self.coord_len:
            return False
        return all(self.components[k].contains(X[rows, 1:])
                   for k, rows in self._split(X) if rows.size)


# ---------------------------------------------------------------------------
# Systems


class System:
    """Base class for flows (rank 1) and R^d translation actions.

    Subclasses implement :meth:`act`; flows may override :meth:`flow`.
    """

    kind = "abstract"
    integrator = "closed_form"
    rank = 1

    def __init__(self, space, metric_window: float | None = None):
        self.space = space
        self.dim = space.dim
        if metric_window is None:
            metric_window = 0.25 * space.diameter
        if not metric_window > 0:
            raise InvalidArgumentError("metric_window must be positive")
        self.metric_window = float(metric_window)

    # identity -------------------------------------------------------------
    @property
    def system_id(self) -> str:
        return self.space.space_id

    def point(self, row) -> ChartPoint:
        row = np.asarray(row, dtype=float).reshape(-1)
        if isinstance(self.space, DisjointUnion):
            return ChartPoint(f"{self.system_id}#{int(row[0])}", tuple(float(c) for c in row[1:]))
        return ChartPoint(self.system_id, tuple(float(c) for c in row))

    def to_array(self, x: ChartPoint) -> np.ndarray:
        if not isinstance(x, ChartPoint):
            raise InvalidArgumentError("expected a ChartPoint")
        if isinstance(self.space, DisjointUnion):
            base, _, comp = x.system_id.rpartition("#")
            if base != self.system_id or not comp.isdigit():
                raise DomainMismatchError(f"point of {x.system_id!r} used with {self.system_id!r}")
            row = np.concatenate([[float(comp)], x.array])
        else:
            if x.system_id != self.system_id:
                raise DomainMismatchError(f"point of {x.system_id!r} used with {self.system_id!r}")
            row = x.array
        if row.shape != (self.space.coord_len,):
            raise DomainMismatchError("coordinate length does not match the system")
        return row

    def make_point(self, coords, component: int | None = None) -> ChartPoint:
        """Normalize raw coordinates into a :class:`ChartPoint`."""
        row = np.asarray(coords, dtype=float).reshape(-1)
        if isinstance(self.space, DisjointUnion):
            row = np.concatenate([[float(component or 0)], row])
        return self.point(self.space.normalize(row)[0])

    # dynamics -------------------------------------------------------------
    def act(self, V, X):
        raise NotImplementedError

    def flow(self, t, X):
        X = _as_batch(X)
        return self.act(_times(t, len(X))[:, None], X)

    def field(self, X, i: int = 0):
        """Generating field ``i`` (0-based) at each row of ``X``."""
        X = _as_batch(X)
        h = FD_STEP
        V = np.zeros((len(X), self.rank))
        V[:, i] = h
        fwd = self.act(V, X)
        V[:, i] = -h
        bwd = self.act(V, X)
        return self.space.lift_diff(bwd, fwd) / (2 * h)

    # helpers --------------------------------------------------------------
    def dist(self, X, Y):
        return self.space.dist(X, Y)

    def sample(self, n: int, seed: int = 0):
        return self.space.sample(n, seed)

    def _check_fixed_point_free(self, n: int = 1000):
        X = self.space.sample(n, 12345)
        for i in range(self.rank):
            if np.min(np.linalg.norm(self.field(X, i), axis=1)) <= 0:
                raise InvalidArgumentError("generating field vanishes at a sampled point")
        if self.rank > 1:
            for x in X[:: max(1, n // 50)]:
                F = np.column_stack([self.field(x, i)[0] for i in range(self.rank)])
                if np.linalg.matrix_rank(F, tol=1e-9) < self.rank:
                    raise InvalidArgumentError("orbit directions are linearly dependent")

    def describe(self) -> dict:
        raise NotImplementedError


class TorusTranslationFlow(System):
    """``phi_t(x) = x + t w mod 1``."""

    kind = "torus_translation_flow"

    def __init__(self, direction, metric_window=None):
        w = np.atleast_1d(np.asarray(direction, dtype=float))
        super().__init__(Torus(len(w)), metric_window)
        if not np.all(np.isfinite(w)) or np.linalg.norm(w) == 0:
            raise InvalidArgumentError("translation direction must be finite and nonzero")
        self.direction = w

    def act(self, V, X):
        X = _as_batch(X)
        V = np.asarray(V, dtype=float).reshape(len(X), 1)
        return _mod1(X + V * self.direction)

    def field(self, X, i=0):
        return np.tile(self.direction, (len(_as_batch(X)), 1))

    def describe(self):
        return {"kind": self.kind, "direction": self.direction.tolist()}


class TorusODEFlow(System):
    """Flow of ``x_i' = w_i + amp * sin(2 pi x_{i+1})`` by fixed-step RK4.

    The field is a periodic perturbation of a constant one; it is nowhere
    zero when some ``|w_i| > amp``.
    """

    kind = "torus_linear_ode_flow"

    def __init__(self, direction, amplitude=0.1, step=1e-3, metric_window=None):
        w = np.atleast_1d(np.asarray(direction, dtype=float))
        super().__init__(Torus(len(w)), metric_window)
        if not step > 0:
            raise InvalidArgumentError("rk4 step must be positive")
        self.direction = w
        self.amplitude = float(amplitude)
        self.step = float(step)
        self.integrator = f"rk4({self.step!r})"
        self._check_fixed_point_free()

    def rhs(self, X):
        X = _as_batch(X)
        return self.direction + self.amplitude * np.sin(2 * np.pi * np.roll(X, -1, axis=1))

    def act(self, V, X):
        X = _as_batch(X).copy()
        t = np.asarray(V, dtype=float).reshape(len(X))
        n = np.ceil(np.abs(t) / self.step).astype(int)
        dt = np.where(n > 0, t / np.maximum(n, 1), 0.0)
        f = self.rhs
        for j in range(int(n.max(initial=0))):
            live = n > j
            Y, h = X[live], dt[live][:, None]
            k1 = f(Y)
            k2 = f(Y + 0.5 * h * k1)
            k3 = f(Y + 0.5 * h * k2)
            k4 = f(Y + h * k3)
            X[live] = Y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        return _mod1(X)

    def describe(self):
        return {"kind": self.kind, "direction": self.direction.tolist(),
                "amplitude": self.amplitude, "step": self.step}


class SuspensionFlow(System):
    """Unit-speed vertical flow on a mapping torus."""

    kind = "suspension_flow"

    def __init__(self, matrix, roof=1.0, metric_window=None):
        super().__init__(MappingTorus(matrix, roof), metric_window)

    @property
    def matrix(self):
        return self.space.matrix

    @property
    def roof(self):
        return self.space.roof

    def act(self, V, X):
        X = _as_batch(X).copy()
        X[:, 2] = X[:, 2] + np.asarray(V, dtype=float).reshape(len(X))
        return self.space.normalize(X)

    def field(self, X, i=0):
        return np.tile([0.0, 0.0, 1.0], (len(_as_batch(X)), 1))

    def describe(self):
        return {"kind": self.kind, "matrix": self.matrix.astype(int).tolist(), "roof": self.roof}


class DisjointUnionFlow(System):
    """Flow acting componentwise on a disjoint union."""

    kind = "disjoint_union"

    def __init__(self, components: Sequence[System], metric_window=None):
        if any(c.rank != 1 for c in components):
            raise InvalidArgumentError("union components must be flows")
        space = DisjointUnion([c.space for c in components])
        if metric_window is None:
            metric_window = min(c.metric_window for c in components)
        super().__init__(space, metric_window)
        self.components = list(components)
        if any(c.integrator != "closed_form" for c in components):
            self.integrator = "mixed"

    def act(self, V, X):
        X = _as_batch(X)
        V = np.asarray(V, dtype=float).reshape(len(X), 1)
        out = X.copy()
        for k, rows in self.space._split(X):
            if rows.size:
                out[rows, 1:] = self.components[k].act(V[rows], X[rows, 1:])
        return out

    def field(self, X, i=0):
        X = _as_batch(X)
        out = np.empty((len(X), self.dim))
        for k, rows in self.space._split(X):
            if rows.size:
                out[rows] = self.components[k].field(X[rows, 1:], i)
        return out

    def describe(self):
        return {"kind": self.kind, "components": [c.describe() for c in self.components]}


class TorusTranslationAction(System):
    """``Phi_v(x) = x + V v mod 1`` for a ``dim x d`` direction matrix ``V``."""

    kind = "torus_translation_action"

    def __init__(self, directions, metric_window=None):
        V = np.asarray(directions, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        super().__init__(Torus(V.shape[0]), metric_window)
        self.rank = V.shape[1]
        if self.rank > V.shape[0]:
            raise InvalidArgumentError("action rank exceeds manifold dimension")
        if np.linalg.matrix_rank(V, tol=1e-12) < self.rank:
            raise InvalidArgumentError("direction columns must be linearly independent")
        self.directions = V

    def act(self, V, X):
        X = _as_batch(X)
        V = np.asarray(V, dtype=float).reshape(len(X), self.rank)
        return _mod1(X + V @ self.directions.T)

    def field(self, X, i=0):
        return np.tile(self.directions[:, i], (len(_as_batch(X)), 1))

    def describe(self):
        return {"kind": self.kind, "directions": self.directions.tolist()}


class Reparameterized(System):
    """``psi_t(x) = phi_{c(x) t}(x)`` with ``c`` constant on components.

    ``speed`` is a number or, on a disjoint union, one number per component.
    """

    kind = "reparameterized"

    def __init__(self, base: System, speed):
        super().__init__(base.space, base.metric_window)
        if base.rank != 1:
            raise InvalidArgumentError("reparameterization needs a flow")
        self.base = base
        speed = np.atleast_1d(np.asarray(speed, dtype=float))
        if len(speed) > 1 and not isinstance(base.space, DisjointUnion):
            raise InvalidArgumentError("per-component speeds need a disjoint union")
        if isinstance(base.space, DisjointUnion) and len(speed) not in (1, len(base.space.components)):
            raise InvalidArgumentError("one speed per component expected")
        self.speed = speed
        self.integrator = base.integrator

    def speed_at(self, X):
        X = _as_batch(X)
        if len(self.speed) == 1:
            return np.full(len(X), self.speed[0])
        return self.speed[X[:, 0].astype(int)]

    def act(self, V, X):
        X = _as_batch(X)
        t = np.asarray(V, dtype=float).reshape(len(X))
        return self.base.flow(self.speed_at(X) * t, X)

    def field(self, X, i=0):
        return self.speed_at(X)[:, None] * self.base.field(X)

    def describe(self):
        s = self.speed.tolist()
        return {"kind": self.kind, "speed": s[0] if len(s) == 1 else s}


class LeafShearFlow(System):
    """Shear along the unstable leaves of a suspension; does not commute.

    ``psi_s(b, h) = (b + s |lam|^(-h/roof) e_u, h)`` is well defined on the
    mapping torus but moves points off the vertical orbits, so it lies
    outside the centralizer of the suspension flow.
    """

    kind = "leaf_shear"

    def __init__(self, base: SuspensionFlow, rate=1.0):
        super().__init__(base.space, base.metric_window)
        lam, e = base.space.unstable_direction()
        if not lam > 1:
            raise InvalidArgumentError("leaf shear needs a positive expanding eigenvalue")
        self.base = base
        self.lam, self.e_u = lam, e
        self.rate = float(rate)

    def act(self, V, X):
        X = _as_batch(X).copy()
        s = np.asarray(V, dtype=float).reshape(len(X))
        c = self.rate * s * self.lam ** (-X[:, 2] / self.space.roof)
        X[:, :2] = X[:, :2] + c[:, None] * self.e_u
        return self.space.normalize(X)

    def describe(self):
        return {"kind": self.kind, "rate": self.rate}


class LinearReparamAction(System):
    """``Psi_u = Phi_{B u}`` for a fixed ``d x d`` matrix ``B``."""

    kind = "linear_reparam_action"

    def __init__(self, base: System, B):
        super().__init__(base.space, base.metric_window)
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if B.shape != (base.rank, base.rank):
            raise InvalidArgumentError("B must be d x d")
        self.base = base
        self.B = B
        self.rank = base.rank
        self.integrator = base.integrator

    def act(self, V, X):
        X = _as_batch(X)
        V = np.asarray(V, dtype=float).reshape(len(X), self.rank)
        return self.base.act(V @ self.B.T, X)

    def describe(self):
        return {"kind": self.kind, "B": self.B.tolist()}


class DirectionFlow(System):
    """The flow ``t -> Phi_{t v}`` of an action along a fixed direction."""

    kind = "direction_flow"

    def __init__(self, action: System, v):
        super().__init__(action.space, action.metric_window)
        v = np.asarray(v, dtype=float).reshape(action.rank)
        if np.linalg.norm(v) == 0:
            raise InvalidArgumentError("direction must be nonzero")
        self.action = action
        self.v = v
        self.integrator = action.integrator

    def act(self, V, X):
        X = _as_batch(X)
        t = np.asarray(V, dtype=float).reshape(len(X), 1)
        return self.action.act(t * self.v, X)

    def field(self, X, i=0):
        return sum(self.v[j] * self.action.field(X, j) for j in range(self.action.rank))

    def describe(self):
        return {"kind": self.kind, "v": self.v.tolist()}


# ---------------------------------------------------------------------------
# Single-point operations


def _check_point(sys: System, x: ChartPoint) -> np.ndarray:
    return sys.to_array(x)[None, :]


def evaluate_flow(sys: System, t: float, x: ChartPoint) -> ChartPoint:
    """Return ``phi_t(x)`` normalized to the fundamental domain."""
    if sys.rank != 1:
        raise InvalidArgumentError("evaluate_flow needs a flow (rank 1)")
    if not np.isfinite(t):
        raise InvalidArgumentError("time must be finite")
    return sys.point(sys.flow(float(t), _check_point(sys, x))[0])


def evaluate_action(sys: System, v, x: ChartPoint) -> ChartPoint:
    """Return ``Phi_v(x)``."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (sys.rank,):
        raise InvalidArgumentError(f"expected a vector of length {sys.rank}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("action parameter must be finite")
    return sys.point(sys.act(v[None, :], _check_point(sys, x))[0])


def distance(sys: System, x: ChartPoint, y: ChartPoint) -> float:
    """Metric distance; ``inf`` between components of a disjoint union."""
    return float(sys.dist(_check_point(sys, x), _check_point(sys, y))[0])


def vector_field(sys: System, i: int, x: ChartPoint) -> TangentVector:
    """Generating field ``X_i(x)`` with ``i`` counted from 1."""
    if not 1 <= i <= sys.rank:
        raise InvalidArgumentError(f"field index must be in 1..{sys.rank}")
    row = _check_point(sys, x)
    return TangentVector(x, tuple(float(c) for c in sys.field(row, i - 1)[0]))


# ---------------------------------------------------------------------------
# Construction from plain descriptions


def build_system(desc: dict, base: System | None = None) -> System:
    """Build a system from a JSON-style description.

    ``base`` is the already built ``phi`` for descriptions that modify it
    (``reparameterized``, ``leaf_shear``, ``linear_reparam_action``,
    ``direction_flow``).
    """
    kind = desc.get("kind")
    mw = desc.get("metric_window")
    if kind == "torus_translation_flow":
        return TorusTranslationFlow(desc["direction"], metric_window=mw)
    if kind == "torus_linear_ode_flow":
        return TorusODEFlow(desc["direction"], desc.get("amplitude", 0.1),
                            desc.get("step", 1e-3), metric_window=mw)
    if kind == "suspension_flow":
        return SuspensionFlow(desc["matrix"], desc.get("roof", 1.0), metric_window=mw)
    if kind == "disjoint_union":
        return DisjointUnionFlow([build_system(c) for c in desc["components"]], metric_window=mw)
    if kind == "torus_translation_action":
        return TorusTranslationAction(desc["directions"], metric_window=mw)
    if kind in ("reparameterized", "leaf_shear", "linear_reparam_action", "direction_flow"):
        if base is None:
            raise InvalidArgumentError(f"{kind!r} needs a base system")
        if kind == "reparameterized":
            return Reparameterized(base, desc["speed"])
        if kind == "leaf_shear":
            if not isinstance(base, SuspensionFlow):
                raise InvalidArgumentError("leaf_shear needs a suspension flow base")
            return LeafShearFlow(base, desc.get("rate", 1.0))
        if kind == "linear_reparam_action":
            return LinearReparamAction(base, desc["B"])
        return DirectionFlow(base, desc["v"])
    raise InvalidArgumentError(f"unknown system kind {kind!r}")

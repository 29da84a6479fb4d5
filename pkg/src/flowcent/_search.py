"""Vectorized one-dimensional minimization used for orbit-time matching."""

import numpy as np

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_min(f, lo, hi, iters=90):
    """Golden-section search run independently on every row.

    ``f`` maps an ``(N,)`` array of abscissae to ``(N,)`` values; ``lo`` and
    ``hi`` are ``(N,)`` brackets.  Returns ``(z, f(z))``.
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc < fd
        # keep [a, d] where f(c) < f(d), else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - INV_PHI * (b - a)
        new_d = a + INV_PHI * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        fc_next = np.where(left, np.nan, fd)
        fd_next = np.where(left, fc, np.nan)
        need_c, need_d = np.isnan(fc_next), np.isnan(fd_next)
        if need_c.any():
            vals = f(c_next)
            fc_next = np.where(need_c, vals, fc_next)
        if need_d.any():
            vals = f(d_next)
            fd_next = np.where(need_d, vals, fd_next)
        c, d, fc, fd = c_next, d_next, fc_next, fd_next
        if np.all(b - a <= 1e-15 * np.maximum(1.0, np.abs(a))):
            break
    z = np.where(fc < fd, c, d)
    # the ends of the bracket are candidates as well
    cand = np.stack([z, np.asarray(lo, float) * np.ones_like(z), np.asarray(hi, float) * np.ones_like(z)])
    vals = np.stack([f(row) for row in cand])
    pick = np.argmin(vals, axis=0)
    cols = np.arange(len(z))
    return cand[pick, cols], vals[pick, cols]


def parabolic_refine(f, z, fz, h):
    """One derivative-free vertex step on ``f**2`` around ``z``.

    For a point moving at constant speed along a straight chart line the
    squared distance to a target is an exact parabola in time, so one step
    lands on the minimizer.  The step is only kept where it lowers ``f``.
    """
    h = np.broadcast_to(np.asarray(h, dtype=float), z.shape)
    fm, fp = f(z - h), f(z + h)
    q0, qm, qp = fz**2, fm**2, fp**2
    curv = qp - 2 * q0 + qm
    ok = curv > 0
    step = np.where(ok, h * (qm - qp) / (2 * np.where(ok, curv, 1.0)), 0.0)
    step = np.clip(step, -h, h)
    zn = z + step
    fn = f(zn)
    better = fn < fz
    return np.where(better, zn, z), np.where(better, fn, fz)

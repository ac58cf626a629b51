"""Adaptive Dormand-Prince 5(4) integration with output on a uniform grid.

The marcher clips its adaptive steps so that every requested output node is
hit exactly, which doubles as dense output for the smooth, low-dimensional
fields used here.  Backward problems (``t1 < t0``) are handled by the time
substitution ``tau = t0 - t`` and marched forward in ``tau``.
"""

import numpy as np

from .errors import NumericalError
from .linalg import DEFAULT_TOL

# Butcher tableau of the Dormand-Prince 5(4) pair (FSAL).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4

_MAX_FACTOR = 5.0
_MIN_FACTOR = 0.2
_SAFETY = 0.9


def integrate_ode(field, y0, t0, t1, tol=DEFAULT_TOL, grid=101, postprocess=None):
    """Integrate ``dy/dt = field(t, y)`` from t0 to t1.

    Parameters
    ----------
    field : callable(t, y) -> array matching ``y``'s shape
    y0 : array-like, any shape (matrices are handled transparently)
    grid : number of output nodes; output times are uniform from t0 to t1
    postprocess : optional callable applied to y after every accepted step
        (used e.g. to re-symmetrize Riccati iterates)

    Returns
    -------
    ts : (grid,) array from t0 to t1 inclusive (in integration direction)
    ys : (grid, *shape(y0)) array of samples
    """
    if grid < 2:
        raise ValueError("grid must have at least 2 nodes")
    if t1 == t0:
        raise ValueError("integration span is empty (t0 == t1)")

    y0 = np.asarray(y0, dtype=float)
    shape = y0.shape

    if t1 < t0:
        # tau = t0 - t, z(tau) = y(t0 - tau)
        def back_field(tau, z):
            return -np.asarray(field(t0 - tau, z.reshape(shape)), dtype=float).ravel()

        taus, zs = _march(back_field, y0.ravel(), t0 - t1, tol, grid,
                          postprocess, shape)
        return t0 - taus, zs.reshape((grid,) + shape)

    def fwd_field(t, z):
        return np.asarray(field(t0 + t, z.reshape(shape)), dtype=float).ravel()

    taus, zs = _march(fwd_field, y0.ravel(), t1 - t0, tol, grid, postprocess, shape)
    return t0 + taus, zs.reshape((grid,) + shape)


def _march(f, y0, span, tol, grid, postprocess, shape):
    """Forward march over [0, span], landing exactly on the uniform grid."""
    rtol, atol = tol.ode_rel, tol.ode_abs
    nodes = np.linspace(0.0, span, grid)
    out = np.empty((grid, y0.size))
    out[0] = y0

    t = 0.0
    y = y0.copy()
    k1 = f(t, y)
    if not np.all(np.isfinite(k1)):
        raise NumericalError("vector field non-finite at the initial point")
    scale0 = atol + rtol * np.linalg.norm(y, np.inf)
    h = min(span / (grid - 1),
            0.1 * scale0 / max(np.linalg.norm(k1, np.inf), 1e-12), span)
    h = max(h, 1e3 * np.finfo(float).eps * span)

    hmin_floor = 16.0 * np.finfo(float).eps
    for j in range(1, grid):
        target = nodes[j]
        while target - t > hmin_floor * max(abs(target), 1.0):
            h = min(h, target - t)
            if h < hmin_floor * max(abs(t), 1.0):
                raise NumericalError(f"step size underflow at t={t:.9g}")
            k = np.empty((7, y.size))
            k[0] = k1
            for i in range(1, 7):
                yi = y + h * (_A[i] @ k[:i])
                k[i] = f(t + _C[i] * h, yi)
            y_new = y + h * (_B5 @ k)
            err_vec = h * (_E @ k)
            if not np.all(np.isfinite(y_new)):
                raise NumericalError(f"solution became non-finite near t={t:.9g}")
            sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = np.sqrt(np.mean((err_vec / sc) ** 2))
            if err <= 1.0:
                t_new = t + h
                if postprocess is not None:
                    y_new = postprocess(y_new.reshape(shape)).ravel()
                    k1 = f(t_new, y_new)
                else:
                    k1 = k[6]  # FSAL
                t, y = t_new, y_new
            factor = _MAX_FACTOR if err == 0.0 else _SAFETY * err ** -0.2
            h = h * min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        t = target
        out[j] = y
    return nodes, out


class CubicHermite:
    """Piecewise-cubic Hermite interpolant on a uniform grid with exact
    nodal slopes (values and derivatives supplied by the caller)."""

    def __init__(self, ts, ys, dys):
        self.ts = np.asarray(ts, dtype=float)
        ys = np.asarray(ys, dtype=float)
        dys = np.asarray(dys, dtype=float)
        if ys.shape != dys.shape or ys.shape[0] != self.ts.size:
            raise ValueError("inconsistent interpolation data")
        order = np.argsort(self.ts)
        self.ts = self.ts[order]
        self.ys = ys[order]
        self.dys = dys[order]
        self.h = np.diff(self.ts)

    def __call__(self, t):
        ts = self.ts
        i = int(np.clip(np.searchsorted(ts, t) - 1, 0, ts.size - 2))
        h = self.h[i]
        s = (t - ts[i]) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return (h00 * self.ys[i] + h10 * h * self.dys[i]
                + h01 * self.ys[i + 1] + h11 * h * self.dys[i + 1])

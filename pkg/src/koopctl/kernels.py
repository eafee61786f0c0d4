"""Hot inner loops with optional numba acceleration.

Every kernel here exists in two flavours: a scalar-loop implementation that
numba compiles with ``@njit``, and the same implementation running as plain
Python/NumPy when numba is unavailable or disabled.  Set the environment
variable ``KOOPCTL_NO_NUMBA=1`` before import to force the fallback path
(used by the benchmark in ``benchmarks/bench_kernels.py`` to compare both).

Within one path all kernels are deterministic: identical inputs give
bit-identical outputs.  Across paths results agree to floating-point
round-off (verified by tests), not bit-for-bit.
"""

import os

import numpy as np

NUMBA_ENV_FLAG = "KOOPCTL_NO_NUMBA"

_flag = os.environ.get(NUMBA_ENV_FLAG, "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

if not _disabled:
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def _maybe_jit(fn):
    if NUMBA_ENABLED:
        return _njit(cache=False)(fn)
    return fn


# Trajectories exceeding this magnitude are treated as numerical blow-up.
BLOWUP_LIMIT = 1.0e9


def vdp_rk4_step(x, y, mu, dt, u):
    """One classical RK4 step of the controlled Van der Pol field.

    xdot = y, ydot = mu*(1 - x^2)*y - x + u, with u held constant over the
    step (zero-order hold).
    """
    k1x = y
    k1y = mu * (1.0 - x * x) * y - x + u
    x2 = x + 0.5 * dt * k1x
    y2 = y + 0.5 * dt * k1y
    k2x = y2
    k2y = mu * (1.0 - x2 * x2) * y2 - x2 + u
    x3 = x + 0.5 * dt * k2x
    y3 = y + 0.5 * dt * k2y
    k3x = y3
    k3y = mu * (1.0 - x3 * x3) * y3 - x3 + u
    x4 = x + dt * k3x
    y4 = y + dt * k3y
    k4x = y4
    k4y = mu * (1.0 - x4 * x4) * y4 - x4 + u
    xn = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    yn = y + (dt / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return xn, yn


def henon_step_kernel(x, y, a, b, u):
    """One step of the controlled Henon map."""
    return 1.0 - a * x * x + y, b * x + u


def _ok(x, y):
    return (
        np.isfinite(x)
        and np.isfinite(y)
        and abs(x) < BLOWUP_LIMIT
        and abs(y) < BLOWUP_LIMIT
    )


def vdp_orbit(x0, y0, mu, dt, steps):
    """Unforced Van der Pol trajectory.

    Returns (states, n_done): states has shape (steps+1, 2); n_done < steps
    signals blow-up after n_done valid transitions.
    """
    states = np.empty((steps + 1, 2))
    states[0, 0] = x0
    states[0, 1] = y0
    x = x0
    y = y0
    n_done = 0
    for t in range(steps):
        x, y = vdp_rk4_step(x, y, mu, dt, 0.0)
        if not _ok(x, y):
            break
        states[t + 1, 0] = x
        states[t + 1, 1] = y
        n_done += 1
    return states, n_done


def henon_orbit(x0, y0, a, b, steps):
    """Unforced Henon trajectory; same return convention as vdp_orbit."""
    states = np.empty((steps + 1, 2))
    states[0, 0] = x0
    states[0, 1] = y0
    x = x0
    y = y0
    n_done = 0
    for t in range(steps):
        x, y = henon_step_kernel(x, y, a, b, 0.0)
        if not _ok(x, y):
            break
        states[t + 1, 0] = x
        states[t + 1, 1] = y
        n_done += 1
    return states, n_done


def feedback_value(x, y, exps, kw):
    """u = sum_i kw[i] * x**exps[i,0] * y**exps[i,1].

    kw is the gain pulled back to dictionary coordinates (W^T k), so the
    per-step control needs no matrix product.
    """
    u = 0.0
    for i in range(exps.shape[0]):
        p = 1.0
        e0 = exps[i, 0]
        for _ in range(e0):
            p *= x
        e1 = exps[i, 1]
        for _ in range(e1):
            p *= y
        u += kw[i] * p
    return u


def vdp_closed_loop(x0, y0, mu, dt, steps, exps, kw, umin, umax):
    """Closed-loop Van der Pol run with monomial state feedback.

    Returns (states, inputs, n_done).
    """
    states = np.empty((steps + 1, 2))
    inputs = np.empty(steps)
    states[0, 0] = x0
    states[0, 1] = y0
    x = x0
    y = y0
    n_done = 0
    for t in range(steps):
        u = feedback_value(x, y, exps, kw)
        if u < umin:
            u = umin
        elif u > umax:
            u = umax
        if not np.isfinite(u):
            break
        x, y = vdp_rk4_step(x, y, mu, dt, u)
        if not _ok(x, y):
            break
        inputs[t] = u
        states[t + 1, 0] = x
        states[t + 1, 1] = y
        n_done += 1
    return states, inputs, n_done


def henon_closed_loop(x0, y0, a, b, steps, exps, kw, umin, umax):
    """Closed-loop Henon run with monomial state feedback."""
    states = np.empty((steps + 1, 2))
    inputs = np.empty(steps)
    states[0, 0] = x0
    states[0, 1] = y0
    x = x0
    y = y0
    n_done = 0
    for t in range(steps):
        u = feedback_value(x, y, exps, kw)
        if u < umin:
            u = umin
        elif u > umax:
            u = umax
        if not np.isfinite(u):
            break
        x, y = henon_step_kernel(x, y, a, b, u)
        if not _ok(x, y):
            break
        inputs[t] = u
        states[t + 1, 0] = x
        states[t + 1, 1] = y
        n_done += 1
    return states, inputs, n_done


def lift_batch_loop(X, exps):
    """Evaluate all monomials at all rows of X; shape (M, n_monomials)."""
    m = X.shape[0]
    d = X.shape[1]
    n = exps.shape[0]
    out = np.empty((m, n))
    for r in range(m):
        for i in range(n):
            p = 1.0
            for j in range(d):
                e = exps[i, j]
                xj = X[r, j]
                for _ in range(e):
                    p *= xj
            out[r, i] = p
    return out


def histogram2d_loop(states, xmin, xmax, ymin, ymax, nx, ny):
    """Occupancy counts on a rectangular grid plus an overflow count.

    In-bounds means xmin <= x < xmax and ymin <= y < ymax.
    """
    counts = np.zeros((nx, ny))
    overflow = 0
    dx = (xmax - xmin) / nx
    dy = (ymax - ymin) / ny
    for r in range(states.shape[0]):
        x = states[r, 0]
        y = states[r, 1]
        if xmin <= x < xmax and ymin <= y < ymax:
            ix = int((x - xmin) / dx)
            iy = int((y - ymin) / dy)
            if ix >= nx:
                ix = nx - 1
            if iy >= ny:
                iy = ny - 1
            counts[ix, iy] += 1.0
        else:
            overflow += 1
    return counts, overflow


vdp_rk4_step = _maybe_jit(vdp_rk4_step)
henon_step_kernel = _maybe_jit(henon_step_kernel)
_ok = _maybe_jit(_ok)
feedback_value = _maybe_jit(feedback_value)
vdp_orbit = _maybe_jit(vdp_orbit)
henon_orbit = _maybe_jit(henon_orbit)
vdp_closed_loop = _maybe_jit(vdp_closed_loop)
henon_closed_loop = _maybe_jit(henon_closed_loop)
lift_batch_loop = _maybe_jit(lift_batch_loop)
histogram2d_loop = _maybe_jit(histogram2d_loop)


def lift_batch(X, exps):
    """Monomial lift of a batch of states.

    Uses the compiled loop when numba is on; otherwise a vectorized NumPy
    path (results agree to round-off).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    if NUMBA_ENABLED:
        return lift_batch_loop(X, exps)
    # overflow on extreme states intentionally surfaces as non-finite values
    with np.errstate(over="ignore", invalid="ignore"):
        return np.prod(X[:, None, :] ** exps[None, :, :], axis=2)

"""Benchmark dynamics, trajectory generation and closed-loop simulation.

Two reference systems: the Van der Pol oscillator discretized by classical
RK4 with zero-order-hold input, and the Henon map.  Both feed the EDMD
stage with unforced snapshot pairs and carry the synthesized lifted-space
feedback u = k^T W Phi(x) in closed loop.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .edmd import SnapshotData
from .errors import BlowupError


@dataclass(frozen=True)
class VanDerPolParams:
    mu: float = 1.0
    dt: float = 0.01

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if not 0 < self.dt <= 0.1:
            raise ValueError(f"dt must be in (0, 0.1], got {self.dt}")


@dataclass(frozen=True)
class HenonParams:
    a: float = 1.4
    b: float = 0.3

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("Henon parameters must be finite")


@dataclass(frozen=True)
class Trajectory:
    """Recorded run: states (N+1, d); inputs (N,) or None when unforced."""

    states: np.ndarray
    inputs: Optional[np.ndarray]
    dt: Optional[float]  # None marks a unit-step map

    @property
    def n_steps(self):
        return self.states.shape[0] - 1

    @property
    def state_dim(self):
        return self.states.shape[1]


class VanDerPol:
    """Controlled Van der Pol oscillator under RK4 discretization."""

    name = "vdp"
    state_dim = 2

    def __init__(self, params=None):
        self.params = params or VanDerPolParams()

    @property
    def time_step(self):
        return self.params.dt

    def step(self, x, u=0.0):
        x = np.asarray(x, dtype=np.float64)
        xn, yn = kernels.vdp_rk4_step(
            x[0], x[1], self.params.mu, self.params.dt, float(u)
        )
        return np.array([xn, yn])

    def orbit(self, x0, steps):
        x0 = np.asarray(x0, dtype=np.float64)
        return kernels.vdp_orbit(x0[0], x0[1], self.params.mu, self.params.dt, steps)

    def closed_loop(self, x0, steps, exps, kw, umin, umax):
        x0 = np.asarray(x0, dtype=np.float64)
        return kernels.vdp_closed_loop(
            x0[0], x0[1], self.params.mu, self.params.dt, steps, exps, kw, umin, umax
        )


class Henon:
    """Controlled Henon map."""

    name = "henon"
    state_dim = 2

    def __init__(self, params=None):
        self.params = params or HenonParams()

    @property
    def time_step(self):
        return None

    def step(self, x, u=0.0):
        x = np.asarray(x, dtype=np.float64)
        xn, yn = kernels.henon_step_kernel(
            x[0], x[1], self.params.a, self.params.b, float(u)
        )
        return np.array([xn, yn])

    def orbit(self, x0, steps):
        x0 = np.asarray(x0, dtype=np.float64)
        return kernels.henon_orbit(x0[0], x0[1], self.params.a, self.params.b, steps)

    def closed_loop(self, x0, steps, exps, kw, umin, umax):
        x0 = np.asarray(x0, dtype=np.float64)
        return kernels.henon_closed_loop(
            x0[0], x0[1], self.params.a, self.params.b, steps, exps, kw, umin, umax
        )


def vdp_step(x, u, params):
    """One RK4 step of the controlled Van der Pol field (ZOH input)."""
    if not (np.isfinite(x).all() and np.isfinite(u)):
        raise ValueError("non-finite state or input")
    out = VanDerPol(params).step(x, u)
    if not np.isfinite(out).all():
        raise BlowupError("Van der Pol step produced a non-finite state", step=0)
    return out


def henon_step(x, u, params):
    """One step of the controlled Henon map."""
    if not (np.isfinite(x).all() and np.isfinite(u)):
        raise ValueError("non-finite state or input")
    return Henon(params).step(x, u)


def simulate_unforced(system, x0, steps):
    """Unforced trajectory; raises BlowupError if it leaves the finite range."""
    states, n_done = system.orbit(x0, steps)
    if n_done < steps:
        raise BlowupError(
            f"{system.name} trajectory blew up at step {n_done + 1}", step=n_done + 1
        )
    return Trajectory(states=states, inputs=None, dt=system.time_step)


def generate_training_data(system, x0_list, steps_per_trajectory):
    """Unforced snapshot pairs concatenated across trajectories.

    A trajectory that blows up is truncated at its last finite state with a
    warning; its valid pairs are kept.
    """
    if len(x0_list) == 0:
        raise ValueError("x0_list must be nonempty")
    xs = []
    ys = []
    for idx, x0 in enumerate(x0_list):
        states, n_done = system.orbit(np.asarray(x0, dtype=np.float64), steps_per_trajectory)
        if n_done < steps_per_trajectory:
            warnings.warn(
                f"trajectory {idx} blew up after {n_done} steps; truncated",
                stacklevel=2,
            )
        if n_done >= 1:
            xs.append(states[:n_done])
            ys.append(states[1 : n_done + 1])
    if not xs:
        raise BlowupError("every trajectory blew up immediately", step=0)
    return SnapshotData(np.vstack(xs), np.vstack(ys))


def closed_loop_simulate(system, model, k, x0, steps, u_bounds=None):
    """Closed-loop run with the lifted-space linear feedback u = k^T W Phi(x).

    The gain is pulled back to dictionary coordinates once (kw = W^T k), so
    each step only evaluates monomials.  Raises BlowupError with the step
    index if the state or input leaves the finite range.
    """
    if model.dictionary.state_dim != system.state_dim:
        raise ValueError(
            f"model dictionary is on R^{model.dictionary.state_dim}, "
            f"system state is R^{system.state_dim}"
        )
    k = np.asarray(k, dtype=np.float64)
    kw = model.W.T @ k
    if u_bounds is None:
        umin, umax = -np.inf, np.inf
    else:
        umin, umax = float(u_bounds[0]), float(u_bounds[1])
    states, inputs, n_done = system.closed_loop(
        np.asarray(x0, dtype=np.float64),
        steps,
        model.dictionary.exponents,
        kw,
        umin,
        umax,
    )
    if n_done < steps:
        raise BlowupError(
            f"closed loop blew up at step {n_done + 1}", step=n_done + 1
        )
    return Trajectory(states=states, inputs=inputs, dt=system.time_step)


@dataclass(frozen=True)
class Histogram2D:
    """Normalized occupancy counts; in-bounds mass + overflow mass = 1."""

    counts: np.ndarray
    overflow_mass: float
    bounds: tuple
    bins: tuple


def invariant_measure_histogram(system, x0, steps, burn_in, bins, bounds):
    """Empirical invariant measure of the unforced system.

    bins = (nx, ny); bounds = (xmin, xmax, ymin, ymax).  Post-burn-in states
    are binned on the rectangle; anything outside lands in the overflow
    bucket.  Counts are normalized to total mass one.
    """
    if steps <= burn_in:
        raise ValueError("steps must exceed burn_in")
    states, n_done = system.orbit(np.asarray(x0, dtype=np.float64), steps)
    if n_done < steps:
        raise BlowupError(
            f"unforced trajectory blew up at step {n_done + 1}", step=n_done + 1
        )
    nx, ny = bins
    xmin, xmax, ymin, ymax = bounds
    tail = states[burn_in + 1 :]
    counts, overflow = kernels.histogram2d_loop(
        tail, float(xmin), float(xmax), float(ymin), float(ymax), int(nx), int(ny)
    )
    total = tail.shape[0]
    return Histogram2D(
        counts=counts / total,
        overflow_mass=overflow / total,
        bounds=tuple(bounds),
        bins=(int(nx), int(ny)),
    )

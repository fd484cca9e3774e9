"""Symplectic integration with event detection and conservation monitoring.

The kinetic energy couples positions and momenta through P_X and P_Y,
so the Hamiltonian is non-separable and explicit leapfrog does not
apply. Both schemes offered here are implicit and symplectic for
general Hamiltonians: the implicit midpoint rule (order 2) and 2-stage
Gauss collocation (order 4), with plain fixed-point iteration for the
implicit stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels, dynamics
from .dynamics import PhaseState
from .errors import CollisionError, StepFailureError

_METHODS = {"midpoint": _kernels.METHOD_MIDPOINT, "gauss2": _kernels.METHOD_GAUSS2}


@dataclass(frozen=True)
class IntegratorConfig:
    step_size: float = 1e-3
    method: str = "midpoint"
    fp_tol: float = 1e-13
    fp_maxiter: int = 50
    collision_rho: float = 1e-6
    max_time: float = 10.0
    # contract the step as h*min(1, rho^4) near the singularity
    dilational_step: bool = False
    max_steps: int = 0  # 0 = derive from max_time/step_size
    record_stride: int = 1  # store every n-th step

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}, want midpoint|gauss2")
        if not self.fp_tol > 0:
            raise ValueError("fp_tol must be positive")
        if not self.collision_rho > 0:
            raise ValueError("collision_rho must be positive")
        if not self.max_time > 0:
            raise ValueError("max_time must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    def step_budget(self) -> int:
        if self.max_steps:
            return self.max_steps
        n = int(math.ceil(self.max_time / self.step_size)) + 2
        # dilational steps contract near the singularity and need headroom
        return 16 * n if self.dilational_step else n


@dataclass(frozen=True)
class DriftStats:
    max_dH: float
    max_dptheta: float
    max_J_residual: float  # max |J(t) - J(0) - 2 H(0) t|


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped states plus detected events and conservation drift."""

    times: np.ndarray  # (n,), strictly increasing
    states: np.ndarray  # (n, 6)
    z_crossings: np.ndarray  # interpolated times of z sign changes
    collision_time: float | None
    termination: str  # max_time | collision | step_failure
    drift: DriftStats
    config: IntegratorConfig

    def __post_init__(self):
        self.times.flags.writeable = False
        self.states.flags.writeable = False

    def __len__(self) -> int:
        return len(self.times)

    def initial_state(self) -> PhaseState:
        return PhaseState.from_array(self.states[0])

    def final_state(self) -> PhaseState:
        return PhaseState.from_array(self.states[-1])

    def state_at(self, t) -> np.ndarray:
        """Cubic-Hermite interpolated raw state(s) at time(s) t."""
        return hermite_interp(self.times, self.states, t)


def step(state: PhaseState, config: IntegratorConfig,
         h: float | None = None) -> PhaseState:
    """Advance one step of h (default config.step_size; negative runs backward)."""
    if state.is_singular(config.collision_rho):
        raise CollisionError("cannot step from a collided state")
    if h is None:
        h = config.step_size
    out = np.empty(6)
    stepper = (_kernels.step_gauss2 if config.method == "gauss2"
               else _kernels.step_midpoint)
    ok = stepper(state.as_array(), h, config.fp_tol,
                 config.fp_maxiter, out)
    if not ok:
        raise StepFailureError(
            f"fixed point did not converge in {config.fp_maxiter} iterations "
            f"at h={h}"
        )
    nxt = PhaseState.from_array(out)
    if nxt.is_singular(config.collision_rho):
        raise CollisionError("step landed inside the collision radius")
    return nxt


def integrate(state: PhaseState, config: IntegratorConfig) -> Trajectory:
    """Integrate until max_time or collision, recording events and drift."""
    if state.is_singular(config.collision_rho):
        raise CollisionError("cannot integrate from a collided state")
    times, states, n, status = _kernels.integrate_kernel(
        state.as_array(), config.step_size, config.max_time,
        _METHODS[config.method], config.fp_tol, config.fp_maxiter,
        config.collision_rho, config.dilational_step, config.step_budget(),
        config.record_stride,
    )
    times = times[:n].copy()
    states = states[:n].copy()
    traj = _build_trajectory(times, states, status, config)
    if status == _kernels.STATUS_STEP_FAILURE:
        raise StepFailureError(
            f"fixed point stalled at t={times[-1]:.6g}", trajectory=traj
        )
    return traj


def _build_trajectory(times, states, status, config) -> Trajectory:
    h_arr = dynamics.hamiltonian_arr(states)
    pt_arr = dynamics.ptheta_arr(states)
    j_arr = dynamics.dilational_arr(states)
    drift = DriftStats(
        max_dH=float(np.max(np.abs(h_arr - h_arr[0]))),
        max_dptheta=float(np.max(np.abs(pt_arr - pt_arr[0]))),
        max_J_residual=float(np.max(np.abs(j_arr - j_arr[0] - 2.0 * h_arr[0] * times))),
    )
    termination = {
        _kernels.STATUS_DONE: "max_time",
        _kernels.STATUS_COLLISION: "collision",
        _kernels.STATUS_STEP_FAILURE: "step_failure",
    }[status]
    collision_time = float(times[-1]) if termination == "collision" else None
    return Trajectory(
        times=times,
        states=states,
        z_crossings=find_z_crossings(times, states),
        collision_time=collision_time,
        termination=termination,
        drift=drift,
        config=config,
    )


def z_rates(states: np.ndarray) -> np.ndarray:
    """dz/dt = (x P_Y - y P_X)/2 for an (n, 6) state array."""
    x, y, _, px, py, pz = (states[:, i] for i in range(6))
    pX = px - 0.5 * y * pz
    pY = py + 0.5 * x * pz
    return 0.5 * (x * pY - y * pX)


def find_z_crossings(times: np.ndarray, states: np.ndarray,
                     time_tol: float = 1e-10) -> np.ndarray:
    """Times where z changes sign, located on the cubic Hermite interpolant."""
    z = states[:, 2]
    zdot = z_rates(states)
    sign_change = np.nonzero(z[:-1] * z[1:] < 0.0)[0]
    out = []
    for i in sign_change:
        out.append(_hermite_root(times[i], times[i + 1], z[i], z[i + 1],
                                 zdot[i], zdot[i + 1], time_tol))
    # samples landing exactly on zero count as crossings too
    exact = np.nonzero(z == 0.0)[0]
    for i in exact:
        out.append(float(times[i]))
    return np.array(sorted(out))


def _hermite_root(t0, t1, z0, z1, d0, d1, tol):
    """Bisect the Hermite cubic for the sign change inside [t0, t1]."""
    h = t1 - t0

    def zval(theta):
        t2 = theta * theta
        t3 = t2 * theta
        return ((2 * t3 - 3 * t2 + 1) * z0 + (t3 - 2 * t2 + theta) * h * d0
                + (-2 * t3 + 3 * t2) * z1 + (t3 - t2) * h * d1)

    a, b = 0.0, 1.0
    fa = z0
    while (b - a) * h > tol:
        m = 0.5 * (a + b)
        fm = zval(m)
        if fm == 0.0:
            return t0 + m * h
        if (fa < 0) == (fm < 0):
            a, fa = m, fm
        else:
            b = m
    return t0 + 0.5 * (a + b) * h


def hermite_interp(times: np.ndarray, states: np.ndarray, t) -> np.ndarray:
    """Cubic Hermite interpolation of states at t (scalar or array).

    Uses exact derivatives from the equations of motion at the stored
    samples, so the interpolation error is O(h^4).
    """
    tq = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tq < times[0] - 1e-12) or np.any(tq > times[-1] + 1e-12):
        raise ValueError("interpolation time outside the trajectory range")
    idx = np.clip(np.searchsorted(times, tq, side="right") - 1, 0, len(times) - 2)
    t0 = times[idx]
    h = times[idx + 1] - times[idx]
    theta = np.clip((tq - t0) / h, 0.0, 1.0)

    s0 = states[idx]
    s1 = states[idx + 1]
    d0 = np.empty_like(s0)
    d1 = np.empty_like(s1)
    for k in range(len(tq)):
        _kernels.rhs(s0[k], d0[k])
        _kernels.rhs(s1[k], d1[k])

    th = theta[:, None]
    t2 = th * th
    t3 = t2 * th
    hh = h[:, None]
    vals = ((2 * t3 - 3 * t2 + 1) * s0 + (t3 - 2 * t2 + th) * hh * d0
            + (-2 * t3 + 3 * t2) * s1 + (t3 - t2) * hh * d1)
    return vals[0] if np.isscalar(t) or np.ndim(t) == 0 else vals


def closest_approaches(traj: Trajectory, ref: PhaseState,
                       exclusion: float) -> list[tuple[float, float]]:
    """Local minima of 6D distance to ref after the exclusion window.

    Minima are refined by quadratic interpolation of the squared
    distance through the three bracketing samples. Returns [] when the
    distance has no interior local minimum (monotone escape).
    """
    if traj.times[-1] <= exclusion:
        raise ValueError("trajectory does not extend past the exclusion window")
    cap = len(traj.times)
    out_t = np.empty(cap)
    out_d = np.empty(cap)
    m = _kernels.distance_minima(traj.times, traj.states, len(traj.times),
                                 ref.as_array(), exclusion, out_t, out_d)
    return [(float(out_t[i]), float(out_d[i])) for i in range(m)]

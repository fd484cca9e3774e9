"""Self-similar structure of zero-energy orbits.

A zero-energy orbit whose z(t) has three consecutive zeros t0, t1, t2
is determined by its values on [t0, t2]: the next domain is a rotated,
dilated, time-reparametrized copy. The dilation factor comes from the
logarithmic radial coordinate, lam = exp(s(t2) - s(t0)), the rotation
from the unwrapped polar angle, phi = theta(t2) - theta(t0), and the
clock from

    xi(t)  = (1/2) log_lam(1 - (t - t0)(1 - lam^2)/(t2 - t0))
    tau(t) = t0 + (t2 - t0)(1 - lam^(2 (xi - floor(xi))))/(1 - lam^2)

with floor(xi) counting how many copies to paste. The tau exponent is
implemented with the fractional part of xi: the boundary conditions
tau(t_n) = t0 and tau -> t2 at the end of each domain force it, and the
piecewise form tau = t0 + (t - t_n)/lam^(2n) agrees to rounding error
(see tau_piecewise, kept as an independent cross-check).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dynamics import PhaseState, dilate, rotate
from .errors import ClassificationError, CollisionError, ZAxisError
from .integrator import Trajectory, hermite_interp
from .search import winding_angle

ZERO_ENERGY_TOL = 1e-8
ZERO_J_TOL = 1e-8


@dataclass(frozen=True)
class LogCoords:
    """Logarithmic radial / angular / vertical-phase coordinates."""

    s: float
    theta: float  # nan when the point sits on the z-axis
    u: float

    @property
    def theta_defined(self) -> bool:
        return not math.isnan(self.theta)


def log_coords(state: PhaseState) -> LogCoords:
    r2 = state.x ** 2 + state.y ** 2
    q = r2 * r2 + 16.0 * state.z ** 2
    if q == 0.0:
        raise CollisionError("log coordinates undefined at the singularity")
    s = 0.25 * math.log(q)
    theta = math.atan2(state.y, state.x) if r2 > 0.0 else math.nan
    u = math.atan2(4.0 * state.z, r2)
    return LogCoords(s=s, theta=theta, u=u)


@dataclass(frozen=True)
class FundamentalDomain:
    """Orbit segment between alternate z-zeros plus its similarity factors."""

    t0: float
    t1: float
    t2: float
    times: np.ndarray   # dense samples covering [t0, t2]
    states: np.ndarray
    lam: float
    phi: float
    H: float
    J: float
    min_planar_radius: float  # closest approach to the z-axis on the segment

    def __post_init__(self):
        self.times.flags.writeable = False
        self.states.flags.writeable = False
        if not (self.t0 < self.t1 < self.t2):
            raise ValueError("domain needs three increasing zero times")
        if not self.lam > 0:
            raise ValueError("dilation factor must be positive")

    @property
    def duration(self) -> float:
        return self.t2 - self.t0

    def state_at(self, t) -> np.ndarray:
        return hermite_interp(self.times, self.states, t)


def fundamental_domain(traj: Trajectory, start: int = 0,
                       zero_energy_tol: float = ZERO_ENERGY_TOL
                       ) -> FundamentalDomain:
    """Build the domain spanned by crossings start, start+1, start+2."""
    zc = traj.z_crossings
    if len(zc) < start + 3:
        raise ClassificationError(
            f"need three consecutive z-zeros, found {len(zc) - start}")
    t0, t1, t2 = (float(zc[start + i]) for i in range(3))
    s0_arr = traj.state_at(t0)
    h0, _, _ = _kernels.hamiltonian_scalar(s0_arr)
    if abs(h0) > zero_energy_tol:
        raise ClassificationError(
            f"self-similar reconstruction needs H=0, got H={h0:.3e}")
    _, jdil = _kernels.momenta_scalar(s0_arr)

    inside = (traj.times > t0) & (traj.times < t2)
    times = np.concatenate(([t0], traj.times[inside], [t2]))
    states = np.vstack((s0_arr, traj.states[inside], traj.state_at(t2)))

    lc0 = log_coords(PhaseState.from_array(states[0]))
    lc2 = log_coords(PhaseState.from_array(states[-1]))
    lam = math.exp(lc2.s - lc0.s)
    phi = winding_angle(times, states, t0, t2)
    r_min = float(np.min(np.hypot(states[:, 0], states[:, 1])))
    return FundamentalDomain(t0=t0, t1=t1, t2=t2, times=times, states=states,
                             lam=lam, phi=phi, H=float(h0), J=float(jdil),
                             min_planar_radius=r_min)


def similarity_factors(domain: FundamentalDomain,
                       axis_radius: float = 1e-8) -> tuple[float, float]:
    """(lam, phi) for the domain; rejects segments touching the z-axis."""
    if domain.min_planar_radius < axis_radius:
        raise ZAxisError(
            f"segment reaches planar radius {domain.min_planar_radius:.2e}; "
            "the angle cannot be unwrapped across the z-axis")
    return domain.lam, domain.phi


def xi(t: float, t0: float, t2: float, lam: float) -> float:
    """Iteration clock: xi(t0)=0, xi(t2)=1, floor(xi) = copies to paste.

    Written in log1p/expm1 form: measured dilation factors of
    near-periodic orbits sit within rounding error of 1, where the
    plain formula loses all its digits to cancellation.
    """
    if lam == 1.0:
        raise ValueError("xi degenerates at lam=1; no reparametrization needed")
    if not t2 > t0:
        raise ValueError("domain must have positive duration")
    a = (1.0 - lam) * (1.0 + lam)  # 1 - lam^2 without squaring first
    u = a * (t - t0) / (t2 - t0)
    if u >= 1.0:
        raise CollisionError(
            f"time {t} lies beyond the collision of the lam={lam} family")
    return math.log1p(-u) / math.log1p(-a)


def tau(t: float, t0: float, t2: float, lam: float) -> float:
    """Pullback of t into the base domain [t0, t2]."""
    x = xi(t, t0, t2, lam)
    frac = x - math.floor(x)
    a = (1.0 - lam) * (1.0 + lam)
    return t0 - (t2 - t0) * math.expm1(frac * math.log1p(-a)) / a


def domain_start(n: int, t0: float, t2: float, lam: float) -> float:
    """Start time t_n of the n-th pasted copy (t_0 = t0, t_1 = t2)."""
    a = (1.0 - lam) * (1.0 + lam)
    return t0 - (t2 - t0) * math.expm1(n * math.log1p(-a)) / a


def tau_piecewise(t: float, t0: float, t2: float, lam: float) -> float:
    """Independent pullback: locate the copy by bracketing, shift, unscale."""
    x = xi(t, t0, t2, lam)
    n = math.floor(x)
    tn = domain_start(n, t0, t2, lam)
    return t0 + (t - tn) / lam ** (2 * n)


def collision_time(domain: FundamentalDomain) -> float | None:
    """Finite collision time for contracting domains (lam < 1), else None."""
    if domain.lam >= 1.0:
        return None
    return domain.t0 + domain.duration / (1.0 - domain.lam ** 2)


def extend(domain: FundamentalDomain, t: float) -> PhaseState:
    """Evaluate the orbit at any time from its fundamental domain alone.

    Pastes floor(xi(t)) rotated-dilated copies (negative counts walk
    into the past); raises CollisionError at or beyond the collision.
    """
    if domain.lam == 1.0:
        n = math.floor((t - domain.t0) / domain.duration)
        t_base = t - n * domain.duration
    else:
        n = math.floor(xi(t, domain.t0, domain.t2, domain.lam))
        t_base = tau(t, domain.t0, domain.t2, domain.lam)
    base = PhaseState.from_array(domain.state_at(t_base))
    return dilate(rotate(base, n * domain.phi), domain.lam ** n)


@dataclass(frozen=True)
class Stratum:
    label: str  # future-collision | past-collision | (quasi)periodic
    collision_time: float | None = None


def classify_stratum(H: float, J: float,
                     zero_energy_tol: float = ZERO_ENERGY_TOL,
                     j_tol: float = ZERO_J_TOL) -> Stratum:
    """Trichotomy of zero-energy motion by the sign of J."""
    if abs(H) > zero_energy_tol:
        raise ClassificationError(
            f"stratification is only established on H=0 (got H={H:.3e})")
    if J < -j_tol:
        return Stratum("future-collision")
    if J > j_tol:
        return Stratum("past-collision")
    return Stratum("(quasi)periodic")


def classify_domain(domain: FundamentalDomain,
                    zero_energy_tol: float = ZERO_ENERGY_TOL,
                    j_tol: float = ZERO_J_TOL) -> Stratum:
    """Stratum of the domain's orbit, with the predicted collision time."""
    base = classify_stratum(domain.H, domain.J, zero_energy_tol, j_tol)
    return Stratum(base.label, collision_time(domain))

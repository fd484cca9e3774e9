"""Phase space, Hamiltonian, conserved quantities, and symmetry actions.

The configuration space is R^3 carrying the Heisenberg frame

    X = d/dx - (y/2) d/dz,    Y = d/dy + (x/2) d/dz,

with dual momenta P_X = px - y*pz/2 and P_Y = py + x*pz/2. Kinetic
energy is K = (P_X^2 + P_Y^2)/2 and the gravitational potential is the
fundamental solution of the sub-Laplacian X^2 + Y^2,

    U = -(1/8pi) ((x^2+y^2)^2 + 16 z^2)^(-1/2),

so H = K + U is homogeneous of degree -2 under the dilation
(x, y, z) -> (lam*x, lam*y, lam^2*z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import CollisionError

# rho below this is treated as a collision with the sun
SINGULARITY_RHO = 1e-6

#: d/dt (x, y, z, px, py, pz) as a length-6 float array
PhaseStateDerivative = np.ndarray


@dataclass(frozen=True)
class PhaseState:
    """A point of the 6-dimensional phase space."""

    x: float
    y: float
    z: float
    px: float
    py: float
    pz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.px, self.py, self.pz])

    @classmethod
    def from_array(cls, arr) -> "PhaseState":
        a = np.asarray(arr, dtype=float)
        if a.shape != (6,):
            raise ValueError(f"phase state needs 6 components, got shape {a.shape}")
        return cls(*(float(v) for v in a))

    @property
    def rho(self) -> float:
        return heis_norm(self.x, self.y, self.z)

    def is_valid(self) -> bool:
        return all(math.isfinite(v) for v in self.as_array())

    def is_singular(self, threshold: float = SINGULARITY_RHO) -> bool:
        return self.rho < threshold


@dataclass(frozen=True)
class ConservedSet:
    """Energy split and the two momenta attached to the symmetries."""

    H: float
    K: float
    U: float
    ptheta: float
    J: float


@dataclass(frozen=True)
class GroupElement:
    """A dilation-rotation symmetry (lam > 0, phi in radians)."""

    lam: float
    phi: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"dilation factor must be positive, got {self.lam}")

    def compose(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.lam * other.lam, self.phi + other.phi)

    def inverse(self) -> "GroupElement":
        return GroupElement(1.0 / self.lam, -self.phi)

    def apply(self, state: PhaseState) -> PhaseState:
        return dilate(rotate(state, self.phi), self.lam)


def heis_norm(x: float, y: float, z: float) -> float:
    """Homogeneous norm rho = ((x^2+y^2)^2 + 16 z^2)^(1/4)."""
    r2 = x * x + y * y
    return (r2 * r2 + 16.0 * z * z) ** 0.25


def conserved(state: PhaseState) -> ConservedSet:
    """All five scalars; U (hence H) is -inf at the singularity itself."""
    s = state.as_array()
    h, k, u = _kernels.hamiltonian_scalar(s)
    ptheta, jdil = _kernels.momenta_scalar(s)
    return ConservedSet(H=h, K=k, U=u, ptheta=ptheta, J=jdil)


def hamiltonian(state: PhaseState) -> ConservedSet:
    """Like :func:`conserved` but rejects states at the collision singularity."""
    if state.is_singular():
        raise CollisionError(
            f"state at rho={state.rho:.3e} is inside the collision radius"
        )
    return conserved(state)


def vector_field(state: PhaseState) -> PhaseStateDerivative:
    """Right-hand side of Hamilton's equations (hand-coded partials of H)."""
    if state.is_singular():
        raise CollisionError(
            f"vector field undefined at rho={state.rho:.3e} (collision)"
        )
    out = np.empty(6)
    _kernels.rhs(state.as_array(), out)
    return out


def dilate(state: PhaseState, lam: float) -> PhaseState:
    """Cotangent lift of the Heisenberg dilation.

    Positions scale as (lam x, lam y, lam^2 z); the momenta scale
    inversely (px/lam, py/lam, pz/lam^2), the unique choice preserving
    the canonical pairing. H scales by lam^-2; ptheta and J are fixed.
    """
    if not lam > 0:
        raise ValueError(f"dilation factor must be positive, got {lam}")
    return PhaseState(
        x=lam * state.x,
        y=lam * state.y,
        z=lam * lam * state.z,
        px=state.px / lam,
        py=state.py / lam,
        pz=state.pz / (lam * lam),
    )


def rotate(state: PhaseState, phi: float) -> PhaseState:
    """Rotate positions and momenta about the z-axis; H, ptheta, J invariant."""
    c, s = math.cos(phi), math.sin(phi)
    return PhaseState(
        x=c * state.x - s * state.y,
        y=s * state.x + c * state.y,
        z=state.z,
        px=c * state.px - s * state.py,
        py=s * state.px + c * state.py,
        pz=state.pz,
    )


def potential(x: float, y: float, z: float) -> float:
    rho = heis_norm(x, y, z)
    if rho == 0.0:
        return -np.inf
    return -1.0 / (_kernels.EIGHT_PI * rho * rho)


def sublaplacian_of_potential(x: float, y: float, z: float,
                              step: float = 1e-4) -> float:
    """(X^2 + Y^2)U by centered second differences along the frame directions.

    The integral curves of X and Y through a point are straight lines
    (the coefficient of d/dz is constant along them), so a plain second
    difference along each line is the exact directional second
    derivative up to O(step^2). Away from the origin the result should
    vanish: U is harmonic for the sub-Laplacian.
    """
    if heis_norm(x, y, z) < SINGULARITY_RHO:
        raise CollisionError("sub-Laplacian probe at the collision singularity")
    h = step
    # X-direction (1, 0, -y/2)
    u_xp = potential(x + h, y, z - 0.5 * y * h)
    u_xm = potential(x - h, y, z + 0.5 * y * h)
    # Y-direction (0, 1, x/2)
    u_yp = potential(x, y + h, z + 0.5 * x * h)
    u_ym = potential(x, y - h, z - 0.5 * x * h)
    u0 = potential(x, y, z)
    return (u_xp + u_xm + u_yp + u_ym - 4.0 * u0) / (h * h)


# Array-level helpers for whole trajectories; states has shape (n, 6).

def hamiltonian_arr(states: np.ndarray) -> np.ndarray:
    x, y, z, px, py, pz = (states[:, i] for i in range(6))
    pX = px - 0.5 * y * pz
    pY = py + 0.5 * x * pz
    r2 = x * x + y * y
    q = r2 * r2 + 16.0 * z * z
    return 0.5 * (pX * pX + pY * pY) - 1.0 / (_kernels.EIGHT_PI * np.sqrt(q))


def ptheta_arr(states: np.ndarray) -> np.ndarray:
    return states[:, 0] * states[:, 4] - states[:, 1] * states[:, 3]


def dilational_arr(states: np.ndarray) -> np.ndarray:
    return (states[:, 0] * states[:, 3] + states[:, 1] * states[:, 4]
            + 2.0 * states[:, 2] * states[:, 5])


def rho_arr(states: np.ndarray) -> np.ndarray:
    r2 = states[:, 0] ** 2 + states[:, 1] ** 2
    return (r2 * r2 + 16.0 * states[:, 2] ** 2) ** 0.25


def gradients(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(grad H, grad J) at a raw state array, for constraint projections."""
    f = np.empty(6)
    _kernels.rhs(s, f)
    grad_h = np.array([-f[3], -f[4], -f[5], f[0], f[1], f[2]])
    x, y, z, px, py, pz = s
    grad_j = np.array([px, py, 2.0 * pz, x, y, 2.0 * z])
    return grad_h, grad_j

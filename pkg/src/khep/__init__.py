"""Numerical laboratory for the Kepler problem on the Heisenberg group."""

from .dynamics import (ConservedSet, GroupElement, PhaseState, conserved,
                       dilate, hamiltonian, heis_norm, rotate,
                       sublaplacian_of_potential, vector_field)
from .errors import (ClassificationError, CollisionError,
                     KeplerHeisenbergError, StepFailureError, ZAxisError)
from .integrator import (DriftStats, IntegratorConfig, Trajectory,
                         closest_approaches, integrate, step)
from .search import (OrbitRecord, RefineFailure, RotationNumber, SearchConfig,
                     farey_scan, monte_carlo_refine, objective,
                     rotation_number, seed_from_ptheta)
from .selfsim import (FundamentalDomain, LogCoords, Stratum, classify_stratum,
                      collision_time, extend, fundamental_domain, log_coords,
                      similarity_factors, tau, xi)

__version__ = "0.1.0"

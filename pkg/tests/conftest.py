import math

import numpy as np
import pytest

from khep.integrator import IntegratorConfig
from khep.search import OrbitRecord, SearchConfig, monte_carlo_refine, seed_from_ptheta

# family parameter of the 1/2 orbit, from bisecting the domain rotation
PTHETA_HALF = 0.164377


def search_config(tmax: float, rng_seed: int = 7, **kw) -> SearchConfig:
    return SearchConfig(
        rng_seed=rng_seed,
        integrator=IntegratorConfig(step_size=4e-3, max_time=tmax,
                                    method="gauss2"),
        **kw,
    )


@pytest.fixture(scope="session")
def orbit_half() -> OrbitRecord:
    """Converged rotation-number-1/2 periodic orbit."""
    rec = monte_carlo_refine(seed_from_ptheta(PTHETA_HALF), search_config(95.0))
    assert isinstance(rec, OrbitRecord), rec
    return rec


def random_bound_states(n, seed=0):
    """Random non-singular states with mostly bounded energies."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        s = rng.uniform(-1, 1, size=6) * np.array([1.5, 1.5, 0.8, 0.3, 0.3, 0.3])
        r2 = s[0] ** 2 + s[1] ** 2
        rho = (r2 * r2 + 16 * s[2] ** 2) ** 0.25
        if rho > 0.4:
            out.append(s)
    return out

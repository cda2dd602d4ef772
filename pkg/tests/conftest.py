import numpy as np
import pytest

from offload_opt.experiments import FleetDistribution, EvalDefaults, gen_instance
from offload_opt.model import ServerSpec, make_instance


@pytest.fixture
def fleet_instance():
    """100 servers drawn from the evaluation distribution, alpha=20, m=5."""
    return gen_instance(FleetDistribution(), EvalDefaults(), 20.0, 5, 1)


@pytest.fixture
def two_server_instance():
    return make_instance([ServerSpec("a", 5e8, 2e9), ServerSpec("b", 3e8, 3e9)], m=2)


def synthetic_fleet(N: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    r = rng.uniform(1e8, 1e9, N)
    c = rng.uniform(1e9, 4e9, N)
    return [ServerSpec(f"s{i}", float(a), float(b)) for i, (a, b) in enumerate(zip(r, c))]

import pytest
import sys
import numpy as np
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from actor.actor_system import ActorSystem
from qwork.core import GaussianPacket, GridSpec
from qwork.models import GravityModel


@pytest.fixture
async def actor_system():
    system = ActorSystem("test-system")
    yield system
    await system.shutdown()


@pytest.fixture
def configs_dir():
    return PROJECT_ROOT / "configs"


@pytest.fixture
def rng():
    return np.random.default_rng(np.random.SeedSequence([1234, 0]))


@pytest.fixture
def unit_gravity():
    return GravityModel(m=1.0, g=1.0)


@pytest.fixture
def wide_grid():
    return GridSpec(4096, -20.0, 20.0)


@pytest.fixture
def unit_packet():
    return GaussianPacket(x0=0.0, p0=0.0, sigma_x=1.0)

import sys
from pathlib import Path

import pytest
from hypothesis import settings

from pphpc.harness import CandidateSpec
from pphpc.sim import SimParams

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"
CONFIGS = Path(__file__).parent.parent / "configs"


def small_params(**changes) -> SimParams:
    base = SimParams(
        grid_x=20, grid_y=20, init_prey=80, init_predators=30, iterations=100,
        prey_gain=4, predator_gain=20, prey_loss=1, predator_loss=1,
        prey_repro_threshold=2, predator_repro_threshold=2,
        prey_repro_prob=10, predator_repro_prob=5, cell_food_restart=10,
    )
    return base.replace(**changes)


def script_candidate(name: str, **kw) -> CandidateSpec:
    script = FIXTURES / f"{name}.py"
    return CandidateSpec(id=name, command=(sys.executable, str(script)), artifact=str(script), **kw)


def reference_candidate(**kw) -> CandidateSpec:
    return CandidateSpec(id="reference", command=(sys.executable, "-m", "pphpc.candidate"), **kw)


@pytest.fixture
def params():
    return small_params()

"""
Shared fixtures for the pytest suites
"""
import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core.config import AnalysisOptions, SimulationOptions
from core.model import build_tabulated, model_birth_death, model_constant_column, model_uniform_catastrophe
from core.reproduce import random_rows

ROOT = Path(__file__).resolve().parent
MODELS = ROOT / 'models'

settings.register_profile('default', max_examples=25, deadline=None)
settings.load_profile('default')


@pytest.fixture
def opts():
    return AnalysisOptions()


@pytest.fixture
def sim_opts():
    return SimulationOptions(samples=4000, seed=11)


@pytest.fixture
def models_dir():
    return MODELS


@pytest.fixture
def uc11():
    """Uniform catastrophe a = b = q01 = 1"""
    return model_uniform_catastrophe(1.0, 1.0, 1.0)


@pytest.fixture
def bd12():
    """Birth-death with up 1, down 2"""
    return model_birth_death(1.0, 2.0)


@pytest.fixture
def bd21():
    """Transient birth-death with up 2, down 1"""
    return model_birth_death(2.0, 1.0)


@pytest.fixture
def explosive():
    return model_constant_column(1.0, '(i+1)^2')


@pytest.fixture
def random_model():
    """Factory of small random tabulated models (seeded)"""
    def make(seed: int, N: int):
        return build_tabulated(random_rows(np.random.default_rng(seed), N), name=f'random{seed}')
    return make

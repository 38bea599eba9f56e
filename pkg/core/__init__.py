"""
Core modules for birthchain: Poisson equations, criteria and moments of single birth processes
"""
__version__ = '1.0.0'

from .config import AnalysisOptions, OutputOptions, SimulationOptions, load_options
from .errors import SingleBirthError
from .model import (RateRow, SingleBirthModel, SingleDeathModel, build_tabulated, model_birth_death,
                    model_constant_column, model_expression, model_uniform_catastrophe)
from .specs import load_model
from .sequences import CoefficientVector, SequenceTable
from .poisson import PoissonProblem, poisson_residual, solve_poisson, solve_poisson_finite
from .criteria import analyze
from .reports import AnalysisReport, ReportGenerator

__all__ = [
    '__version__',
    'AnalysisOptions', 'SimulationOptions', 'OutputOptions', 'load_options',
    'SingleBirthError',
    'RateRow', 'SingleBirthModel', 'SingleDeathModel', 'build_tabulated',
    'model_uniform_catastrophe', 'model_constant_column', 'model_birth_death', 'model_expression',
    'load_model',
    'CoefficientVector', 'SequenceTable',
    'PoissonProblem', 'solve_poisson', 'solve_poisson_finite', 'poisson_residual',
    'analyze',
    'AnalysisReport', 'ReportGenerator',
]

"""
Configuration: defaults from config.json plus per-call overrides
"""
import json
import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .errors import ConfigError

logger = logging.getLogger(__name__)

THREADS_ENV = 'BIRTHCHAIN_THREADS'


@dataclass(frozen=True)
class AnalysisOptions:
    """Truncation, window and tolerance settings shared by the criteria"""
    truncation: int = 1000
    window: int = 50
    ratio_tol: float = 1e-8
    divergence_threshold: float = 1e12
    kummer_margin: float = 0.1
    compare_tol: float = 1e-9
    identity_tol: float = 1e-12
    max_moment_order: int = 6
    extra_digits: int = 30
    max_digits: int = 6000
    reliability_tol: float = 1e-8
    threads: int = 1

    def validate(self) -> 'AnalysisOptions':
        if self.truncation < 2:
            raise ConfigError("truncation must be at least 2", value=self.truncation)
        if self.window < 2:
            raise ConfigError("window must be at least 2", value=self.window)
        for name in ('ratio_tol', 'divergence_threshold', 'kummer_margin', 'compare_tol',
                     'identity_tol', 'reliability_tol'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive", value=getattr(self, name))
        if not 1 <= self.max_moment_order <= 20:
            raise ConfigError("max_moment_order must lie in 1..20", value=self.max_moment_order)
        if self.extra_digits < 5 or self.max_digits < self.extra_digits:
            raise ConfigError("extra_digits/max_digits out of range")
        if self.threads < 1:
            raise ConfigError("threads must be positive", value=self.threads)
        return self

    def with_overrides(self, **overrides: Any) -> 'AnalysisOptions':
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean).validate()


@dataclass(frozen=True)
class SimulationOptions:
    samples: int = 10000
    seed: int = 0
    workers: int = 1
    level_cap_factor: int = 10
    time_horizon_scale: float = 1e6
    batch_size: int = 4096

    def validate(self) -> 'SimulationOptions':
        if self.samples < 1:
            raise ConfigError("samples must be positive", value=self.samples)
        if self.workers < 1:
            raise ConfigError("workers must be positive", value=self.workers)
        if self.level_cap_factor < 1 or self.time_horizon_scale <= 0 or self.batch_size < 1:
            raise ConfigError("simulation caps must be positive")
        return self

    def with_overrides(self, **overrides: Any) -> 'SimulationOptions':
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean).validate()


@dataclass(frozen=True)
class OutputOptions:
    format: str = 'json'
    json_indent: int = 2
    human_digits: int = 6
    outputs_dir: str = 'outputs'

    def validate(self) -> 'OutputOptions':
        if self.format not in ('json', 'csv', 'human'):
            raise ConfigError("output format must be json, csv or human", value=self.format)
        return self


def _section(cls, data: Dict[str, Any], name: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in config section '{name}': {', '.join(unknown)}",
                          section=name, keys=unknown)
    return cls(**data).validate()


def env_threads(default: int = 1) -> int:
    """Thread count from BIRTHCHAIN_THREADS, falling back to default"""
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer", value=raw)
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be positive", value=value)
    return value


def load_options(config_path: Optional[str] = 'config.json'
                 ) -> Tuple[AnalysisOptions, SimulationOptions, OutputOptions]:
    """Load the three option groups from a JSON config file"""
    data: Dict[str, Any] = {}
    if config_path is not None:
        path = Path(config_path)
        if path.exists():
            with open(path, 'r') as f:
                try:
                    data = json.load(f)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        else:
            logger.debug("config file %s not found, using built-in defaults", path)

    analysis = _section(AnalysisOptions, data.get('analysis', {}), 'analysis')
    simulation = _section(SimulationOptions, data.get('simulation', {}), 'simulation')
    output = _section(OutputOptions, data.get('output', {}), 'output')

    threads = env_threads(analysis.threads)
    if threads != analysis.threads:
        analysis = replace(analysis, threads=threads)
    workers = env_threads(simulation.workers)
    if workers != simulation.workers:
        simulation = replace(simulation, workers=workers)
    return analysis, simulation, output

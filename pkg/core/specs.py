"""
Model specification documents (JSON) and their normalization
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

from .errors import ModelError, SpecError
from .model import (SingleBirthModel, build_tabulated, model_birth_death,
                    model_constant_column, model_expression, model_uniform_catastrophe)

logger = logging.getLogger(__name__)

_COMMON = {'kind', 'name', 'horizon'}
_KEYS = {
    'tabulated': {'rows'},
    'uniform_catastrophe': {'a', 'b', 'q01'},
    'constant_column': {'q_i0', 'up'},
    'birth_death': {'up', 'down'},
    'expression': {'up', 'down'},
}


def _require(spec: Dict[str, Any], kind: str) -> None:
    allowed = _KEYS[kind] | _COMMON
    unknown = sorted(set(spec) - allowed)
    if unknown:
        raise SpecError(f"unknown keys for kind '{kind}': {', '.join(unknown)}", keys=unknown)
    missing = sorted(_KEYS[kind] - set(spec))
    if missing:
        raise SpecError(f"missing keys for kind '{kind}': {', '.join(missing)}", keys=missing)


def _number(spec: Dict[str, Any], key: str) -> float:
    value = spec[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"'{key}' must be a number, got {value!r}")
    return float(value)


def _rate(spec: Dict[str, Any], key: str):
    value = spec[key]
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise SpecError(f"'{key}' must be a number or an expression in i, got {value!r}")
    return value


def model_from_spec(spec: Dict[str, Any]) -> SingleBirthModel:
    """Build a model from a parsed specification document"""
    if not isinstance(spec, dict):
        raise SpecError("a model specification must be a JSON object")
    kind = spec.get('kind')
    if kind not in _KEYS:
        raise SpecError(f"unknown model kind {kind!r}; expected one of {', '.join(sorted(_KEYS))}")
    _require(spec, kind)
    horizon = spec.get('horizon')
    if horizon is not None and (isinstance(horizon, bool) or not isinstance(horizon, int) or horizon < 1):
        raise SpecError("'horizon' must be a positive integer")

    if kind == 'tabulated':
        rows = spec['rows']
        if not isinstance(rows, list):
            raise SpecError("'rows' must be an array of {up, down} objects")
        model = build_tabulated(rows, name=spec.get('name', 'tabulated'))
    elif kind == 'uniform_catastrophe':
        model = model_uniform_catastrophe(_number(spec, 'a'), _number(spec, 'b'),
                                          _number(spec, 'q01'), horizon=horizon)
    elif kind == 'constant_column':
        model = model_constant_column(_rate(spec, 'q_i0'), _rate(spec, 'up'), horizon=horizon)
    elif kind == 'birth_death':
        model = model_birth_death(_rate(spec, 'up'), _rate(spec, 'down'), horizon=horizon)
    else:
        down = spec['down']
        if not isinstance(down, dict):
            raise SpecError("'down' must map targets ('0', 'i-1', 'all', ...) to expressions")
        model = model_expression(str(_rate(spec, 'up')), {k: str(v) for k, v in down.items()},
                                 horizon=horizon)

    if 'name' in spec:
        model.name = str(spec['name'])
    echo = dict(model.spec or {})
    echo['name'] = model.name
    if horizon is not None:
        echo['horizon'] = horizon
    model.spec = echo
    return model


def parse_spec_text(text: str) -> Dict[str, Any]:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"model specification is not valid JSON: {exc}")


def load_model(source: Union[str, Path, Dict[str, Any]]) -> SingleBirthModel:
    """Model from a dict, an inline JSON string or a path to a JSON file"""
    if isinstance(source, dict):
        return model_from_spec(source)
    text = str(source)
    if text.lstrip().startswith('{'):
        return model_from_spec(parse_spec_text(text))
    path = Path(text)
    if not path.exists():
        raise SpecError(f"model specification file {path} not found")
    with open(path, 'r') as f:
        try:
            spec = json.load(f)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path} is not valid JSON: {exc}")
    logger.debug("loaded model spec from %s", path)
    try:
        return model_from_spec(spec)
    except ModelError as exc:
        exc.details.setdefault('path', str(path))
        raise

"""
Command-line front end
"""
import argparse
import json
import logging
import math
import sys
from typing import Any, Dict, List, Optional, Sequence, TextIO

import numpy as np
import pandas as pd

from .config import AnalysisOptions, OutputOptions, SimulationOptions, load_options
from .criteria import (analyze, exp_moment_return, hitting_moment, laplace_return, lifetime_moment,
                       lifetime_transforms)
from .errors import SingleBirthError, UsageError
from .model import SingleBirthModel
from .poisson import PRESETS, PoissonProblem, problem_preset, solve_poisson, solve_poisson_finite
from .reports import ReportGenerator, jsonable
from .reproduce import run_suite
from .sequences import CoefficientVector, SequenceTable
from .simulator import (Caps, estimate_hitting_time_moment, estimate_return_probability,
                        estimate_return_time_moment, estimate_transform)
from .specs import load_model

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors share the error path"""

    def error(self, message: str):
        raise UsageError(message, usage=self.format_usage().strip())


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


def _finite_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = _finite_float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _nonnegative_float(text: str) -> float:
    value = _finite_float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog='birthchain', description="Poisson equation, criteria and moments of single birth processes")
    ap.add_argument('--config', default='config.json', help="Path to the JSON options file.")
    noise = ap.add_mutually_exclusive_group()
    noise.add_argument('-v', '--verbose', action='store_true', help="Debug logging.")
    noise.add_argument('-q', '--quiet', action='store_true', help="Warnings and errors only.")
    sub = ap.add_subparsers(dest='command', metavar='command', parser_class=_Parser)

    def with_model(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        p.add_argument('--model', required=True, help="Model spec: JSON file path or inline JSON.")
        p.add_argument('--N', type=_positive_int, default=None, help="Truncation level (default from config).")
        p.add_argument('--format', choices=('json', 'csv', 'human'), default=None)
        return p

    p = with_model(sub.add_parser('analyze', help="Every criterion and quantity in one report."))
    p.add_argument('--lambda', dest='lam', type=_positive_float, default=None,
                   help="Adds exponential ergodicity and the transforms at this rate.")
    p.add_argument('--ell', type=_positive_int, default=None, help="Adds hitting (and life time) moments.")
    p.add_argument('--i0', type=_nonnegative_int, default=0)
    p.add_argument('--mz', action='store_true', help="Adds the M sufficient condition.")
    p.add_argument('--head', type=_positive_int, default=21, help="Number of states per vector quantity.")
    p.add_argument('--excel', default=None, metavar='PATH', help="Also write an Excel report.")

    p = with_model(sub.add_parser('sequences', help="F~(0), m~ and d~ as a table."))
    p.add_argument('--lambda', dest='lam', type=_nonnegative_float, default=0.0)
    p.add_argument('--sign', choices=('+', '-'), default='+', help="c = +lambda or c = -lambda.")

    p = with_model(sub.add_parser('poisson', help="Solve (Q + c) g = f."))
    p.add_argument('--c-preset', nargs='+', default=['zero'], metavar='PRESET',
                   help="zero | plus LAMBDA | minus LAMBDA")
    p.add_argument('--f', default='0', help=f"Expression in i or a problem preset ({', '.join(PRESETS)}).")
    p.add_argument('--g0', type=_finite_float, default=1.0)
    p.add_argument('--i0', type=_nonnegative_int, default=0, help="Target state of the problem presets.")
    p.add_argument('--finite', action='store_true', help="Solve on {0..N} with the boundary identity.")

    p = with_model(sub.add_parser('moments', help="Polynomial moments of hitting or life times."))
    p.add_argument('--i0', type=_nonnegative_int, default=0)
    p.add_argument('--ell', type=_positive_int, default=1)
    p.add_argument('--of', choices=('hitting', 'lifetime'), default='hitting')

    p = with_model(sub.add_parser('laplace', help="E_n exp(-lambda T)."))
    p.add_argument('--lambda', dest='lam', type=_positive_float, required=True)
    p.add_argument('--of', choices=('return', 'lifetime'), default='return')

    p = with_model(sub.add_parser('expmoment', help="E_n exp(lambda T)."))
    p.add_argument('--lambda', dest='lam', type=_positive_float, required=True)
    p.add_argument('--of', choices=('return', 'lifetime'), default='return')

    p = with_model(sub.add_parser('simulate', help="Monte Carlo estimate with standard error."))
    p.add_argument('--start', type=_nonnegative_int, default=0)
    p.add_argument('--stop', nargs='+', default=['return0'], metavar='RULE',
                   help="return0 | hit J | horizon T")
    p.add_argument('--quantity', choices=('moment', 'laplace', 'expmoment', 'return-prob'), default='moment')
    p.add_argument('--of', choices=('return', 'lifetime'), default='return',
                   help="Return time to 0 or life time (followed up to the level cap).")
    p.add_argument('--ell', type=_positive_int, default=1)
    p.add_argument('--lambda', dest='lam', type=_positive_float, default=None)
    p.add_argument('--samples', type=_positive_int, default=None)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--workers', type=_positive_int, default=None)
    p.add_argument('--level-cap', type=_positive_int, default=None)

    p = sub.add_parser('reproduce', help="Run the bundled reproduction suite.")
    p.add_argument('--filter', default=None, help="Keep checks whose name contains this text.")
    p.add_argument('--N', type=_positive_int, default=None, help="Override every check's truncation.")
    p.add_argument('--strict', action='store_true', help="Inconclusive checks also fail the run.")
    p.add_argument('--seed', type=int, default=2024)
    p.add_argument('--format', choices=('json', 'csv', 'human'), default='human')

    p = sub.add_parser('validate', help="Validate a model spec and echo its normalized form.")
    p.add_argument('--model', required=True)
    p.add_argument('--rows', type=_nonnegative_int, default=3, help="Rows to print with the echo.")
    return ap


# -- output --------------------------------------------------------------------

def _dump(payload: Any, indent: Optional[int]) -> str:
    return json.dumps(jsonable(payload), indent=indent)


def _human(payload: Dict[str, Any], digits: int) -> str:
    lines = []
    for key, value in payload.items():
        if isinstance(value, float):
            value = f"{value:.{digits}g}"
        elif isinstance(value, list) and value and all(isinstance(v, float) for v in value):
            value = ', '.join(f"{v:.{digits}g}" for v in value)
        lines.append(f"{key}: {value}")
    return '\n'.join(lines)


def _emit(payload: Dict[str, Any], fmt: str, out: OutputOptions, stream: TextIO) -> None:
    payload = jsonable(payload)
    if fmt == 'human':
        stream.write(_human(payload, out.human_digits) + '\n')
    elif fmt == 'csv':
        vectors = {k: v for k, v in payload.items() if isinstance(v, list)}
        if not vectors:
            raise UsageError("this output has no vector to tabulate; use json or human")
        length = max(len(v) for v in vectors.values())
        frame = pd.DataFrame({'n': np.arange(length)})
        for key, values in vectors.items():
            frame[key] = list(values) + [None] * (length - len(values))
        stream.write(frame.to_csv(index=False))
    else:
        stream.write(_dump(payload, out.json_indent) + '\n')


def _moment_payload(mv, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    payload: Dict[str, Any] = dict(extra or {})
    payload.update({'quantity': mv.quantity, 'values': [None if np.isnan(x) else float(x) for x in mv.values],
                    'reliable_upto': mv.reliable_upto})
    if mv.notes:
        payload['notes'] = list(mv.notes)
    return payload


# -- commands ------------------------------------------------------------------

def _c_preset(words: Sequence[str]) -> CoefficientVector:
    name = words[0]
    if name == 'zero':
        if len(words) != 1:
            raise UsageError("--c-preset zero takes no value")
        return CoefficientVector.zero()
    if name not in ('plus', 'minus') or len(words) != 2:
        raise UsageError("--c-preset expects zero, plus LAMBDA or minus LAMBDA", given=' '.join(words))
    try:
        lam = _nonnegative_float(words[1])
    except (ValueError, argparse.ArgumentTypeError):
        raise UsageError(f"--c-preset {name} needs a finite number >= 0, got {words[1]}")
    return CoefficientVector.preset(name, lam)


def cmd_analyze(args, model: SingleBirthModel, N: int, opts: AnalysisOptions, sim: SimulationOptions,
                out: OutputOptions, stream: TextIO) -> int:
    report = analyze(model, N, opts, lam=args.lam, ell=args.ell, i0=args.i0, mz=args.mz, head=args.head)
    fmt = args.format or out.format
    if fmt == 'human':
        stream.write(report.to_human(out.human_digits) + '\n')
    elif fmt == 'csv':
        stream.write(ReportGenerator(out.human_digits).verdict_frame(report).to_csv(index=False))
    else:
        stream.write(report.to_json(out.json_indent) + '\n')
    if args.excel:
        ReportGenerator(out.human_digits).generate_excel(report, args.excel)
    return 0


def cmd_sequences(args, model: SingleBirthModel, N: int, opts: AnalysisOptions, sim: SimulationOptions,
                  out: OutputOptions, stream: TextIO) -> int:
    if args.lam == 0:
        c = CoefficientVector.zero()
    elif args.sign == '+':
        c = CoefficientVector.constant(args.lam)
    else:
        c = CoefficientVector.killing(args.lam)
    frame = SequenceTable(model, c, N).to_frame()
    fmt = args.format or 'csv'
    if fmt == 'json':
        stream.write(_dump({'c': c.label, **frame.to_dict(orient='list')}, out.json_indent) + '\n')
    elif fmt == 'human':
        stream.write(frame.to_string(index=False, float_format=lambda x: f"{x:.{out.human_digits}g}") + '\n')
    else:
        stream.write(frame.to_csv(index=False, float_format='%.17g'))
    return 0


def cmd_poisson(args, model: SingleBirthModel, N: int, opts: AnalysisOptions, sim: SimulationOptions,
                out: OutputOptions, stream: TextIO) -> int:
    c = _c_preset(args.c_preset)
    f: Any = args.f
    if args.f in PRESETS:
        lam = c.constant_value or 0.0
        given = c
        c, f = problem_preset(args.f, model, N, lam=abs(lam), g0=args.g0, i0=args.i0, c=c)
        if not given.is_zero and c.constant_value != given.constant_value:
            raise UsageError(f"problem preset '{args.f}' fixes c = {c.label}, which conflicts with --c-preset {given.label}",
                             preset=args.f, c=c.label, given=given.label)
    if args.finite:
        payload = solve_poisson_finite(model, c, f, N, g0=args.g0).to_dict()
    else:
        payload = solve_poisson(PoissonProblem(model, c, f, args.g0, N)).to_dict()
    payload['c'] = c.label
    _emit(payload, args.format or out.format, out, stream)
    return 0


def cmd_moments(args, model: SingleBirthModel, N: int, opts: AnalysisOptions, sim: SimulationOptions,
                out: OutputOptions, stream: TextIO) -> int:
    if args.of == 'lifetime':
        payload = _moment_payload(lifetime_moment(model, args.ell, N, opts), {'ell': args.ell})
    else:
        result = hitting_moment(model, args.i0, args.ell, N, opts)
        payload = _moment_payload(result.E, {'i0': args.i0, 'ell': args.ell, 'E_i0': result.E_i0,
                                             'estimate': result.estimate.to_dict()})
    _emit(payload, args.format or out.format, out, stream)
    return 0


def cmd_laplace(args, model: SingleBirthModel, N: int, opts: AnalysisOptions, sim: SimulationOptions,
                out: OutputOptions, stream: TextIO) -> int:
    if args.of == 'lifetime':
        mv = lifetime_transforms(model, args.lam, N, 'laplace', opts)
    else:
        mv = laplace_return(model, args.lam, N, opts)
    _emit(_moment_payload(mv, {'lambda': args.lam, 'of': args.of}), args.format or out.format, out, stream)
    return 0


def cmd_expmoment(args, model: SingleBirthModel, N: int, opts: AnalysisOptions, sim: SimulationOptions,
                  out: OutputOptions, stream: TextIO) -> int:
    if args.of == 'lifetime':
        payload = _moment_payload(lifetime_transforms(model, args.lam, N, 'exp_moment', opts),
                                  {'lambda': args.lam, 'of': args.of})
    else:
        result = exp_moment_return(model, args.lam, N, opts)
        payload = _moment_payload(result.E, {'lambda': args.lam, 'of': args.of,
                                             'feasible': result.feasible.to_dict(),
                                             'd_tilde': result.d_tilde.to_dict()})
    _emit(payload, args.format or out.format, out, stream)
    return 0


def _stop_rule(words: List[str]):
    """('return', None) | ('hit', j) | ('horizon', T)"""
    kind = words[0]
    if kind == 'return0' and len(words) == 1:
        return 'return', None
    if kind == 'hit' and len(words) == 2:
        try:
            return 'hit', int(words[1])
        except ValueError:
            pass
    if kind == 'horizon' and len(words) == 2:
        try:
            T = float(words[1])
        except ValueError:
            T = -1.0
        if T > 0:
            return 'horizon', T
    raise UsageError("--stop expects return0, hit J or horizon T", given=' '.join(words))


def cmd_simulate(args, model: SingleBirthModel, N: int, opts: AnalysisOptions, sim: SimulationOptions,
                 out: OutputOptions, stream: TextIO) -> int:
    kind, value = _stop_rule(args.stop)
    caps = Caps.default(model, N, sim)
    if args.level_cap is not None:
        caps = Caps(args.level_cap, caps.time, caps.time_scale)
    if kind == 'horizon':
        caps = Caps(caps.level, value, caps.time_scale)
    if args.workers is not None:
        sim = sim.with_overrides(workers=args.workers)
    common = dict(samples=args.samples, caps=caps, seed=args.seed, opts=sim)
    of = 'lifetime' if args.of == 'lifetime' else 'return_time'

    if args.quantity in ('laplace', 'expmoment'):
        if args.lam is None:
            raise UsageError(f"--quantity {args.quantity} needs --lambda")
        if kind == 'hit':
            raise UsageError("transforms are estimated for the return time to 0 or the life time only")
        lam = -args.lam if args.quantity == 'laplace' else args.lam
        estimate = estimate_transform(model, args.start, lam, of, **common)
    elif args.quantity == 'return-prob':
        estimate = estimate_return_probability(model, args.start, **common)
    elif args.of == 'lifetime':
        estimate = estimate_return_time_moment(model, args.start, args.ell, of=of, **common)
    elif kind == 'hit':
        estimate = estimate_hitting_time_moment(model, args.start, value, args.ell, **common)
    else:
        estimate = estimate_return_time_moment(model, args.start, args.ell, **common)

    payload = {'start': args.start, 'stop': ' '.join(args.stop), 'quantity': args.quantity, 'of': args.of,
               **estimate.to_dict()}
    if estimate.bias_warning:
        logger.warning("%.3g of the paths were capped; the estimate is biased", estimate.capped_fraction)
    _emit(payload, args.format or out.format, out, stream)
    return 0


COMMANDS = {
    'analyze': cmd_analyze,
    'sequences': cmd_sequences,
    'poisson': cmd_poisson,
    'moments': cmd_moments,
    'laplace': cmd_laplace,
    'expmoment': cmd_expmoment,
    'simulate': cmd_simulate,
}


def _configure_logging(args) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def run(argv: Optional[Sequence[str]] = None, stream: Optional[TextIO] = None) -> int:
    """Parse ``argv``, dispatch, and return the exit code; errors go to stderr as JSON"""
    stream = stream or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args)
        if args.command is None:
            raise UsageError("a command is required", commands=sorted(list(COMMANDS) + ['reproduce', 'validate']))
        opts, sim, out = load_options(args.config)

        if args.command == 'reproduce':
            suite = run_suite(args.filter, args.N, args.strict, opts, sim, args.seed)
            frame = suite.to_frame()
            if args.format == 'json':
                stream.write(_dump({'passed': suite.passed, 'checks': frame.to_dict(orient='records')},
                                   out.json_indent) + '\n')
            elif args.format == 'csv':
                stream.write(frame.to_csv(index=False))
            else:
                stream.write(suite.to_text() + '\n')
            return suite.exit_code

        model = load_model(args.model)
        if args.command == 'validate':
            echo = model.describe()
            echo['first_rows'] = [model.row(i).to_dict() for i in range(min(args.rows, model.horizon or args.rows))]
            stream.write(_dump(echo, out.json_indent) + '\n')
            return 0

        N = args.N or opts.truncation
        if model.horizon is not None:
            N = min(N, model.horizon - 1)
            if args.N is not None and args.N > N:
                logger.warning("truncation lowered to %d to stay on the model's horizon", N)
        return COMMANDS[args.command](args, model, N, opts, sim, out, stream)
    except SingleBirthError as exc:
        sys.stderr.write(json.dumps(jsonable(exc.to_dict())) + '\n')
        return exc.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run(argv)


if __name__ == '__main__':
    raise SystemExit(main())

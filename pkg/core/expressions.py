"""
Safe arithmetic expressions in the state variable i (+, -, *, /, ^, numbers, parentheses)
"""
import ast
import operator
from functools import lru_cache
from typing import Callable

from .errors import SpecError

_BINARY = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _check(node: ast.AST, source: str) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, source)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINARY:
            raise SpecError(f"operator not allowed in '{source}'")
        _check(node.left, source)
        _check(node.right, source)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNARY:
            raise SpecError(f"operator not allowed in '{source}'")
        _check(node.operand, source)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise SpecError(f"only numeric literals are allowed in '{source}'")
    elif isinstance(node, ast.Name):
        if node.id != 'i':
            raise SpecError(f"unknown variable '{node.id}' in '{source}' (only 'i' is allowed)")
    else:
        raise SpecError(f"unsupported syntax in '{source}'")


def _evaluate(node: ast.AST, i: int) -> float:
    if isinstance(node, ast.BinOp):
        return _BINARY[type(node.op)](_evaluate(node.left, i), _evaluate(node.right, i))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_evaluate(node.operand, i))
    if isinstance(node, ast.Constant):
        return node.value
    return i


@lru_cache(maxsize=256)
def compile_expression(source: str) -> Callable[[int], float]:
    """Parse an expression once and return a function of the state index"""
    text = str(source).strip()
    if not text:
        raise SpecError("empty rate expression")
    try:
        tree = ast.parse(text.replace('^', '**'), mode='eval')
    except SyntaxError as exc:
        raise SpecError(f"cannot parse rate expression '{source}': {exc.msg}")
    _check(tree, text)

    def rate(i: int) -> float:
        try:
            return float(_evaluate(tree.body, int(i)))
        except ZeroDivisionError:
            raise SpecError(f"division by zero evaluating '{text}' at i={i}")
        except OverflowError:
            raise SpecError(f"overflow evaluating '{text}' at i={i}")
        except (TypeError, ValueError):
            raise SpecError(f"'{text}' has no real value at i={i}")

    rate.source = text
    return rate

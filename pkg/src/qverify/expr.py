"""A tiny arithmetic expression language for registry data.

Expressions are Python-syntax strings restricted to numbers, names,
``+ - * / **``, unary minus, comparisons, ``and``, and the functions
``abs``, ``sqrt`` and ``log``.  A constraint may be quantified over an
index range with the prefix ``forall n in 0..N:``.

Evaluation happens in a caller-supplied mpmath context, so the same text
serves for rejection sampling and for the derived quantities used at
working precision.
"""

from __future__ import annotations

import ast
import operator
import re
from functools import lru_cache

from .errors import DomainError

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_CMPOPS = {
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
}
_FUNCS = ("abs", "sqrt", "log")
_FORALL = re.compile(r"^\s*forall\s+(\w+)\s+in\s+(\d+)\.\.(\d+)\s*:\s*(.+)$")


@lru_cache(maxsize=None)
def parse(src: str):
    """Parse and validate ``src``; returns ``(index_var, lo, hi, tree)``."""
    match = _FORALL.match(src)
    if match:
        var, lo, hi, body = match.groups()
        quantifier = (var, int(lo), int(hi))
    else:
        quantifier, body = None, src
    try:
        tree = ast.parse(body.strip(), mode="eval").body
    except SyntaxError as exc:
        raise DomainError(f"malformed expression {src!r}: {exc.msg}") from None
    _validate(tree, src)
    return quantifier, tree


def _validate(node, src):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return
    if isinstance(node, ast.Name):
        return
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _validate(node.left, src)
        _validate(node.right, src)
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        _validate(node.operand, src)
        return
    if isinstance(node, ast.Compare) and all(type(op) in _CMPOPS for op in node.ops):
        _validate(node.left, src)
        for c in node.comparators:
            _validate(c, src)
        return
    if isinstance(node, ast.BoolOp) and isinstance(node.op, ast.And):
        for v in node.values:
            _validate(v, src)
        return
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
        _validate(node.args[0], src)
        return
    raise DomainError(f"unsupported construct in expression {src!r}: {ast.dump(node)[:60]}")


def names(src: str) -> set[str]:
    quantifier, tree = parse(src)
    found = {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)} - set(_FUNCS)
    if quantifier:
        found.discard(quantifier[0])
    return found


def evaluate(src: str, env: dict, mp):
    """Value of ``src`` with ``env`` bound; quantified sources return a bool."""
    quantifier, tree = parse(src)
    if quantifier is None:
        return _eval(tree, env, mp)
    var, lo, hi = quantifier
    scope = dict(env)
    for k in range(lo, hi + 1):
        scope[var] = mp.mpf(k)
        if not _eval(tree, scope, mp):
            return False
    return True


def _eval(node, env, mp):
    if isinstance(node, ast.Constant):
        return mp.mpf(repr(node.value)) if isinstance(node.value, float) else mp.mpf(node.value)
    if isinstance(node, ast.Name):
        try:
            return env[node.id]
        except KeyError:
            raise DomainError(f"unknown name {node.id!r}") from None
    if isinstance(node, ast.BinOp):
        left, right = _eval(node.left, env, mp), _eval(node.right, env, mp)
        if isinstance(node.op, ast.Pow) and left < 0 and right != int(right):
            raise DomainError("negative base with a non-integer exponent")
        if isinstance(node.op, ast.Div) and right == 0:
            raise ZeroDivisionError("division by zero in expression")
        return _BINOPS[type(node.op)](left, right)
    if isinstance(node, ast.UnaryOp):
        value = _eval(node.operand, env, mp)
        return -value if isinstance(node.op, ast.USub) else value
    if isinstance(node, ast.Compare):
        left = _eval(node.left, env, mp)
        for op, comp in zip(node.ops, node.comparators):
            right = _eval(comp, env, mp)
            if not _CMPOPS[type(op)](left, right):
                return False
            left = right
        return True
    if isinstance(node, ast.BoolOp):
        return all(_eval(v, env, mp) for v in node.values)
    if isinstance(node, ast.Call):
        arg = _eval(node.args[0], env, mp)
        if node.func.id == "abs":
            return abs(arg)
        if arg < 0 or (node.func.id == "log" and arg == 0):
            raise DomainError(f"{node.func.id} of a non-positive number")
        return mp.sqrt(arg) if node.func.id == "sqrt" else mp.log(arg)
    raise DomainError("unsupported expression node")

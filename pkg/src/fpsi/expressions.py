"""Restricted arithmetic expressions in x, y, t for config files."""
from __future__ import annotations

import ast
from typing import Callable

import numpy as np

from .errors import ArgumentError

FUNCTIONS = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "sinh", "cosh", "arctan", "arctan2", "minimum", "maximum", "where", "heaviside")
}
CONSTANTS = {"pi": np.pi, "e": np.e}
VARIABLES = ("x", "y", "t")

_ALLOWED = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant, ast.Compare,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod, ast.USub, ast.UAdd,
    ast.Lt, ast.LtE, ast.Gt, ast.GtE,
)


def _check(tree: ast.AST, text: str) -> None:
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ArgumentError(f"unsupported syntax {type(node).__name__} in expression {text!r}")
        if isinstance(node, ast.Name) and node.id not in FUNCTIONS and node.id not in CONSTANTS and node.id not in VARIABLES:
            raise ArgumentError(f"unknown name {node.id!r} in expression {text!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in FUNCTIONS):
            raise ArgumentError(f"only {sorted(FUNCTIONS)} may be called, in {text!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ArgumentError(f"only numeric literals are allowed, in {text!r}")


def compile_scalar(text: str) -> Callable:
    """Compile ``text`` into ``f(x, y, t)`` returning an array broadcast to the shape of x."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ArgumentError(f"cannot parse expression {text!r}: {exc.msg}") from None
    _check(tree, text)
    code = compile(tree, "<expression>", "eval")
    env = {"__builtins__": {}, **FUNCTIONS, **CONSTANTS}

    def f(x, y, t=0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        val = eval(code, env, {"x": x, "y": y, "t": t})  # noqa: S307 - AST validated above
        return np.broadcast_to(np.asarray(val, dtype=float), np.broadcast(x, y).shape).copy()

    f.__doc__ = text
    return f


def parse_value(value):
    """Config value to a constant, a callable, or a tuple of those for vectors.

    Numbers stay numbers; strings become expressions; lists become vectors
    (a callable returning a stacked array if any entry is an expression).
    """
    if isinstance(value, bool):
        raise ArgumentError("booleans are not numeric values")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return compile_scalar(value)
    if isinstance(value, (list, tuple)):
        parts = [parse_value(v) for v in value]
        if any(isinstance(p, tuple) for p in parts):
            raise ArgumentError("nested vectors are not supported")
        if all(isinstance(p, float) for p in parts):
            return tuple(parts)

        def vec(x, y, t=0.0):
            x = np.asarray(x, dtype=float)
            shape = np.broadcast(x, np.asarray(y)).shape
            return np.stack([p(x, y, t) if callable(p) else np.full(shape, p) for p in parts])

        return vec
    raise ArgumentError(f"cannot interpret config value {value!r}")

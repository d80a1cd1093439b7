"""A tiny arithmetic expression language for configuration files.

Supported: numbers, ``pi``, named variables, ``+ - * / **``, unary minus and
the functions ``exp``, ``sin``, ``cos``, ``abs`` and ``bump``, where
``bump(s) = (1 - s**2)**2`` on ``|s| < 1`` and zero elsewhere.  Expressions compile to
numpy-vectorised callables; nothing is ever passed to :func:`eval`.
"""

from __future__ import annotations

import ast
import math
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError



def _bump(s):
    s = np.asarray(s, float)
    return np.where(np.abs(s) < 1.0, (1.0 - s * s) ** 2, 0.0)


_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "abs": np.abs, "bump": _bump}
_CONSTS = {"pi": math.pi}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class Expression:
    """A compiled expression in a fixed set of variables.

    >>> e = Expression("2*x + sin(0)", ("x",))
    >>> float(e(x=1.5))
    3.0
    """

    def __init__(self, text: str, variables: Sequence[str]):
        self.text = str(text).strip()
        self.variables = tuple(variables)
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {text!r}: {exc}") from exc
        self._body = tree.body
        self._check(self._body)
        self.names = frozenset(
            n.id for n in ast.walk(self._body) if isinstance(n, ast.Name)
        ) - set(_FUNCS) - set(_CONSTS)

    def _check(self, node: ast.AST) -> None:
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise ConfigError(f"non-numeric constant in {self.text!r}")
        elif isinstance(node, ast.Name):
            if node.id not in self.variables and node.id not in _CONSTS:
                raise ConfigError(f"unknown name {node.id!r} in {self.text!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ConfigError(f"operator not allowed in {self.text!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ConfigError(f"operator not allowed in {self.text!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ConfigError(f"function not allowed in {self.text!r}")
            if len(node.args) != 1 or node.keywords:
                raise ConfigError(f"functions take one argument: {self.text!r}")
            self._check(node.args[0])
        else:
            raise ConfigError(f"unsupported syntax in {self.text!r}")

    def depends_on(self, name: str) -> bool:
        return name in self.names

    def _eval(self, node: ast.AST, env: dict):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            return env[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            val = self._eval(node.operand, env)
            return -val if isinstance(node.op, ast.USub) else val
        # ast.Call, validated in _check
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, *args, **kwargs):
        env = dict(zip(self.variables, args))
        env.update(kwargs)
        missing = [v for v in self.variables if v not in env and v in self.names]
        if missing:
            raise ConfigError(f"missing variables {missing} for {self.text!r}")
        shape = np.broadcast(*[np.asarray(v) for v in env.values()]).shape if env else ()
        out = self._eval(self._body, env)
        return np.broadcast_to(np.asarray(out, dtype=float), shape) if shape else np.asarray(out, dtype=float)

    def __repr__(self) -> str:
        return f"Expression({self.text!r})"


def compile_expression(text: str, variables: Sequence[str]) -> Callable:
    return Expression(text, variables)

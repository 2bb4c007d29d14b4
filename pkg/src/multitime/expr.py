"""Tiny arithmetic expression language for configuration files.

Grammar: numbers, variables, ``+ - * / ^`` (``^`` is power), unary signs,
parentheses and the functions ``exp sin cos sqrt log``.  Recognized
variables are ``q<i>``, ``p<i>``, ``qdot<i>`` and ``t<i>`` (1-based), the bare
``q`` and ``t`` for one-dimensional functions, and any named constants
supplied by the caller.  Expressions compile to numpy-aware callables.
"""

from __future__ import annotations

import ast
import re

import numpy as np

from .errors import ExpressionError

_VAR = re.compile(r"^(q|p|qdot|t)([1-9][0-9]*)?$")
_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt, "log": np.log}
_BIN = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
        ast.Div: np.divide, ast.Pow: np.power}


class Expression:
    """Compiled expression; call with a mapping of variable values."""

    def __init__(self, text: str, constants: dict | None = None):
        if not isinstance(text, str) or not text.strip():
            raise ExpressionError("expression must be a non-empty string")
        self.text = text
        self.constants = {k: float(v) for k, v in (constants or {}).items()}
        for name in self.constants:
            if _VAR.match(name) or name in _FUNCS:
                raise ExpressionError(f"constant name {name!r} shadows a variable or function")
        try:
            tree = ast.parse(text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
        self.variables: set[str] = set()
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.BinOp) and type(node.op) in _BIN:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            self._check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            pass
        elif isinstance(node, ast.Name):
            if node.id in self.constants:
                return
            if not _VAR.match(node.id):
                raise ExpressionError(f"unknown name {node.id!r} in {self.text!r}")
            self.variables.add(node.id)
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
            self._check(node.args[0])
        else:
            raise ExpressionError(f"unsupported construct {type(node).__name__} in {self.text!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            return _BIN[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else +v
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in self.constants:
                return self.constants[node.id]
            try:
                return env[node.id]
            except KeyError:
                raise ExpressionError(f"no value bound for {node.id!r}") from None
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, env: dict):
        with np.errstate(all="ignore"):
            return self._eval(self._tree, env)

    def __repr__(self):
        return f"Expression({self.text!r})"


def bind(prefix: str, values) -> dict:
    """``bind("q", [a, b]) -> {"q1": a, "q2": b}``."""
    return {f"{prefix}{i + 1}": v for i, v in enumerate(values)}


def function_of(text: str, var: str, constants: dict | None = None):
    """Compile a one-variable expression into ``f(x)``; ``var`` is e.g. ``"q"``."""
    e = Expression(text, constants)
    extra = e.variables - {var}
    if extra:
        raise ExpressionError(f"{text!r} may only depend on {var!r}, found {sorted(extra)}")
    return lambda x: e({var: np.asarray(x, dtype=float)})

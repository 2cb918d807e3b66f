"""Small arithmetic expression grammar for scenario files.

Load and initial-data fields accept strings over the variables ``x``, ``y``,
``t`` with ``+ - * / **``, parentheses, the constant ``pi`` and the functions
``sin``, ``cos``, ``exp``, ``min``, ``max``, ``abs``.  Expressions are parsed
into the Python AST and compiled against a whitelist; nothing outside the
grammar can execute.
"""

from __future__ import annotations

import ast

import numpy as np

__all__ = ["ExpressionError", "compile_expression"]

_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    """Expression outside the supported grammar."""


def _compile_node(node, variables):
    if isinstance(node, ast.Expression):
        return _compile_node(node.body, variables)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)):
            val = float(node.value)
            return lambda env: val
        raise ExpressionError(f"literal {node.value!r} is not a number")
    if isinstance(node, ast.Name):
        if node.id == "pi":
            return lambda env: np.pi
        if node.id in variables:
            name = node.id
            return lambda env: env[name]
        raise ExpressionError(f"unknown name '{node.id}' (variables: {sorted(variables)})")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        inner = _compile_node(node.operand, variables)
        if isinstance(node.op, ast.USub):
            return lambda env: -inner(env)
        return inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left = _compile_node(node.left, variables)
        right = _compile_node(node.right, variables)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError("only sin, cos, exp, min, max, abs may be called")
        if node.keywords:
            raise ExpressionError("keyword arguments are not supported")
        fn = _FUNCTIONS[node.func.id]
        args = [_compile_node(a, variables) for a in node.args]
        if node.func.id in ("min", "max"):
            if len(args) < 2:
                raise ExpressionError(f"{node.func.id} needs at least two arguments")

            def call(env, fn=fn, args=args):
                out = fn(args[0](env), args[1](env))
                for a in args[2:]:
                    out = fn(out, a(env))
                return out

            return call
        if len(args) != 1:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        return lambda env: fn(args[0](env))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node, annotate_fields=False)}")


def compile_expression(source, variables=("x", "y", "t")):
    """Compile ``source`` into ``f(**vars) -> array``; numbers pass through.

    The returned callable broadcasts over array-valued variables and accepts
    the listed variable names as keyword arguments.
    """
    variables = tuple(variables)
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        val = float(source)

        def constant(**env):
            if env:
                shape = np.broadcast(*[np.asarray(v) for v in env.values()]).shape
                return np.full(shape, val)
            return val

        return constant
    if not isinstance(source, str):
        raise ExpressionError(f"expected a number or expression string, got {type(source).__name__}")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"invalid expression {source!r}: {exc.msg}") from exc
    fn = _compile_node(tree, frozenset(variables))

    def evaluate(**env):
        unknown = set(env) - set(variables)
        if unknown:
            raise ExpressionError(f"unexpected variables {sorted(unknown)}")
        out = fn(env)
        if env:
            out = np.broadcast_arrays(*(list(env.values()) + [np.asarray(out, float)]))[-1]
        return out

    return evaluate

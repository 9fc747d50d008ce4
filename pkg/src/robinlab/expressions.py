"""Small arithmetic expression language for coefficient and data fields.

Expressions may use ``+ - * / **``, numeric literals, the variables ``x``,
``y`` and ``t``, the constants ``pi`` and ``e`` and the functions ``sin``,
``cos``, ``exp``, ``sqrt``, ``abs``, ``sign``.  They are validated against
the AST whitelist below and evaluated vectorised with numpy.
"""
import ast

import numpy as np

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sign": np.sign,
}
_CONSTS = {"pi": np.pi, "e": np.e}
_VARS = ("x", "y", "t")
_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Call,
    ast.Name,
    ast.Load,
    ast.Constant,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.USub,
    ast.UAdd,
)


class ExpressionError(ValueError):
    pass


class Expression:
    """Compiled expression; call with ``x`` of shape (npts, dim) and ``t``."""

    def __init__(self, source):
        self.source = source
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        for node in ast.walk(tree):
            if not isinstance(node, _NODES):
                raise ExpressionError(f"{type(node).__name__} not allowed in {source!r}")
            if isinstance(node, ast.Name) and node.id not in _FUNCS and node.id not in _CONSTS and node.id not in _VARS:
                raise ExpressionError(f"unknown name {node.id!r} in {source!r}")
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or len(node.args) != 1 or node.keywords:
                    raise ExpressionError(f"bad function call in {source!r}")
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ExpressionError(f"non-numeric literal in {source!r}")
        self._code = compile(tree, "<expr>", "eval")
        self.names = {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)}

    def __call__(self, x, t=0.0):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ns = dict(_FUNCS)
        ns.update(_CONSTS)
        ns["x"] = x[:, 0]
        ns["y"] = x[:, 1] if x.shape[1] > 1 else np.zeros(x.shape[0])
        ns["t"] = t
        val = eval(self._code, {"__builtins__": {}}, ns)
        return np.broadcast_to(np.asarray(val, dtype=float), (x.shape[0],)).copy()

    def __repr__(self):
        return f"Expression({self.source!r})"


def as_field(value):
    """Turn a number, expression string or callable into a callable of x."""
    if callable(value):
        return value
    if isinstance(value, str):
        return Expression(value)
    c = float(value)

    def const(x, t=0.0):
        return np.full(np.atleast_2d(x).shape[0], c)

    const.constant = c
    return const

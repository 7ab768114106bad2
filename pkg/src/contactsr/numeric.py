"""Compile expressions to fast numeric callables.

Tree-walking evaluation is fine for the zero tester but too slow inside an
RK4 loop, so expressions feeding the integrator and the invariant monitor are
compiled once into Python lambdas.  ``compile_scalar`` binds ``math``
functions for scalar stepping; ``compile_vectorized`` binds ``numpy`` so a
whole trajectory column can be evaluated at once.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .expressions import Expr, Fun, Num, Pow, Prod, Sum, Sym


def _emit(e: Expr, names: dict) -> str:
    if isinstance(e, Num):
        v = e.value
        if isinstance(v, Fraction):
            if v.denominator == 1:
                return f"({v.numerator})"
            return f"({v.numerator}/{v.denominator})"
        return f"({v!r})"
    if isinstance(e, Sym):
        try:
            return names[e.name]
        except KeyError:
            raise KeyError(f"expression name '{e.name}' not among arguments") from None
    if isinstance(e, Fun):
        fname = "log" if e.fname == "ln" else e.fname
        return f"{fname}({_emit(e.arg, names)})"
    if isinstance(e, Pow):
        return f"({_emit(e.base, names)})**({e.exponent})"
    if isinstance(e, Prod):
        return "(" + "*".join(_emit(f, names) for f in e.factors) + ")"
    if isinstance(e, Sum):
        return "(" + "+".join(_emit(t, names) for t in e.terms) + ")"
    raise TypeError(f"not an expression: {e!r}")


_SCALAR_NS = {
    "sin": math.sin,
    "cos": math.cos,
    "sqrt": math.sqrt,
    "exp": math.exp,
    "log": math.log,
}

_VECTOR_NS = {
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
}


def _compile(exprs, arg_names, namespace):
    arg_names = list(arg_names)
    local = {n: f"_a{i}" for i, n in enumerate(arg_names)}
    body = "(" + ",".join(_emit(e, local) for e in exprs) + ",)"
    src = f"lambda {','.join(local.values()) or '_'}: {body}"
    return eval(compile(src, "<contactsr-expr>", "eval"), dict(namespace))


def compile_scalar(exprs, arg_names):
    """Callable (x1, ..., xk) -> tuple of floats, one per expression."""
    return _compile(exprs, arg_names, _SCALAR_NS)


def compile_vectorized(exprs, arg_names):
    """Like :func:`compile_scalar` but numpy-backed, accepting arrays."""
    fn = _compile(exprs, arg_names, _VECTOR_NS)

    def wrapped(*cols):
        out = fn(*cols)
        width = np.broadcast(*cols).shape if cols else ()
        return tuple(np.broadcast_to(np.asarray(o, dtype=float), width)
                     for o in out)

    return wrapped

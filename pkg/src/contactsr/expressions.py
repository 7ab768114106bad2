"""Immutable symbolic expression trees with a small fixed rewrite system.

An expression is one of:

    Num   — numeric constant: exact ``Fraction`` where possible, else ``float``
    Sym   — a named variable or parameter reference
    Fun   — unary function application, name in {sin, cos, sqrt, exp, ln}
    Pow   — integer power of a base expression
    Prod  — n-ary product with commutative operands in canonical order
    Sum   — n-ary sum with commutative operands in canonical order

Negation and division are normalised away at construction time: ``-x`` is the
product ``(-1)*x`` and ``x/y`` is the product ``x*y^(-1)``.  The module-level
constructors (``num``, ``add``, ``mul``, ``pow_``, ``fun``) flatten nested
sums/products, fold numeric subterms, absorb 0/1, merge repeated bases into
powers and sort commutative operands, so every reachable tree has a
deterministic shape: equal trees serialize identically.

``simplify`` goes further and rewrites an expression into a canonical
polynomial form: products are distributed over sums, like terms are collected,
non-negative integer powers of sums are expanded, and the Pythagorean pair
``c*sin(u)^2*K + c*cos(u)^2*K`` collapses to ``c*K``.  The rewrite set is fixed
and value-preserving; ``simplify`` is idempotent.

Merging powers of a common base (``x^2 * x^-1 -> x``) assumes nonzero bases
for negative exponents, consistent with the sampling boxes used for zero
testing (declared singular loci are excluded there).
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Mapping, Union

from .errors import EvaluationError, UnknownFunction

Number = Union[Fraction, float]

#: Supported unary functions.
FUNCTIONS = ("sin", "cos", "sqrt", "exp", "ln")

_MATH = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
}


def _num_value(v) -> Number:
    """Normalise a Python number: exact Fraction when possible, else float."""
    if isinstance(v, bool):
        raise TypeError("booleans are not numbers")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
            return Fraction(int(v))
        return v
    raise TypeError(f"not a number: {v!r}")


class Expr:
    """Base class for expression nodes.  Instances are immutable and hashable."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _as_expr(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(num(-1), _as_expr(other)))

    def __rsub__(self, other):
        return add(_as_expr(other), mul(num(-1), self))

    def __mul__(self, other):
        return mul(self, _as_expr(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return mul(self, pow_(_as_expr(other), -1))

    def __rtruediv__(self, other):
        return mul(_as_expr(other), pow_(self, -1))

    def __pow__(self, exponent):
        return pow_(self, exponent)

    def __neg__(self):
        return mul(num(-1), self)

    def __repr__(self):
        return f"{type(self).__name__}({serialize(self)!r})"

    def __str__(self):
        return serialize(self)


class Num(Expr):
    __slots__ = ("value", "_h", "_k")

    def __init__(self, value: Number):
        object.__setattr__(self, "value", _num_value(value))

    def __setattr__(self, *args):  # pragma: no cover - immutability guard
        raise AttributeError("expressions are immutable")

    def __eq__(self, other):
        # Exact and floating constants are distinct trees even when their
        # numeric values coincide, so serialization stays injective.
        return (
            isinstance(other, Num)
            and type(other.value) is type(self.value)
            and other.value == self.value
        )

    def __hash__(self):
        try:
            return self._h
        except AttributeError:
            h = hash(("num", type(self.value).__name__, self.value))
            object.__setattr__(self, "_h", h)
            return h

    @property
    def is_exact(self):
        return isinstance(self.value, Fraction)


class Sym(Expr):
    __slots__ = ("name", "_h", "_k")

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)

    def __setattr__(self, *args):  # pragma: no cover
        raise AttributeError("expressions are immutable")

    def __eq__(self, other):
        return isinstance(other, Sym) and other.name == self.name

    def __hash__(self):
        try:
            return self._h
        except AttributeError:
            h = hash(("sym", self.name))
            object.__setattr__(self, "_h", h)
            return h


class Fun(Expr):
    __slots__ = ("fname", "arg", "_h", "_k")

    def __init__(self, fname: str, arg: Expr):
        if fname not in FUNCTIONS:
            raise UnknownFunction(f"unsupported function '{fname}'")
        object.__setattr__(self, "fname", fname)
        object.__setattr__(self, "arg", arg)

    def __setattr__(self, *args):  # pragma: no cover
        raise AttributeError("expressions are immutable")

    def __eq__(self, other):
        return (
            isinstance(other, Fun)
            and other.fname == self.fname
            and other.arg == self.arg
        )

    def __hash__(self):
        try:
            return self._h
        except AttributeError:
            h = hash(("fun", self.fname, self.arg))
            object.__setattr__(self, "_h", h)
            return h


class Pow(Expr):
    __slots__ = ("base", "exponent", "_h", "_k")

    def __init__(self, base: Expr, exponent: int):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", exponent)

    def __setattr__(self, *args):  # pragma: no cover
        raise AttributeError("expressions are immutable")

    def __eq__(self, other):
        return (
            isinstance(other, Pow)
            and other.exponent == self.exponent
            and other.base == self.base
        )

    def __hash__(self):
        try:
            return self._h
        except AttributeError:
            h = hash(("pow", self.base, self.exponent))
            object.__setattr__(self, "_h", h)
            return h


class Prod(Expr):
    __slots__ = ("factors", "_h", "_k")

    def __init__(self, factors: tuple):
        object.__setattr__(self, "factors", factors)

    def __setattr__(self, *args):  # pragma: no cover
        raise AttributeError("expressions are immutable")

    def __eq__(self, other):
        return isinstance(other, Prod) and other.factors == self.factors

    def __hash__(self):
        try:
            return self._h
        except AttributeError:
            h = hash(("prod", self.factors))
            object.__setattr__(self, "_h", h)
            return h


class Sum(Expr):
    __slots__ = ("terms", "_h", "_k")

    def __init__(self, terms: tuple):
        object.__setattr__(self, "terms", terms)

    def __setattr__(self, *args):  # pragma: no cover
        raise AttributeError("expressions are immutable")

    def __eq__(self, other):
        return isinstance(other, Sum) and other.terms == self.terms

    def __hash__(self):
        try:
            return self._h
        except AttributeError:
            h = hash(("sum", self.terms))
            object.__setattr__(self, "_h", h)
            return h


ZERO = Num(0)
ONE = Num(1)


def _as_expr(obj) -> Expr:
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, (int, Fraction, float)):
        return Num(obj)
    raise TypeError(f"cannot coerce {obj!r} to an expression")


# ---------------------------------------------------------------------------
# ordering


def sort_key(e: Expr):
    """Total order on expression trees used for canonical operand ordering.

    Keys are cached per node (nodes are immutable)."""
    try:
        return e._k
    except AttributeError:
        pass
    if isinstance(e, Num):
        k = (0, float(e.value), 0 if e.is_exact else 1)
    elif isinstance(e, Sym):
        k = (1, e.name)
    elif isinstance(e, Fun):
        k = (2, e.fname, sort_key(e.arg))
    elif isinstance(e, Pow):
        k = (3, sort_key(e.base), e.exponent)
    elif isinstance(e, Prod):
        k = (4, tuple(sort_key(f) for f in e.factors))
    elif isinstance(e, Sum):
        k = (5, tuple(sort_key(t) for t in e.terms))
    else:
        raise TypeError(f"not an expression: {e!r}")
    object.__setattr__(e, "_k", k)
    return k


# ---------------------------------------------------------------------------
# numeric folding helpers


def num(v) -> Num:
    return Num(v)


def _nmul(a: Number, b: Number) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a * b
    return float(a) * float(b)


def _nadd(a: Number, b: Number) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    return float(a) + float(b)


def _npow(a: Number, k: int) -> Number:
    if a == 0 and k < 0:
        raise EvaluationError("zero denominator in constant folding")
    if isinstance(a, Fraction):
        return a ** k
    try:
        return float(a) ** k
    except OverflowError as exc:
        raise EvaluationError(f"overflow folding {a}^{k}") from exc


# ---------------------------------------------------------------------------
# smart constructors


def add(*terms) -> Expr:
    """Sum of the arguments: flattened, numerics folded, operands sorted."""
    flat = []
    const: Number = Fraction(0)
    for t in terms:
        t = _as_expr(t)
        parts = t.terms if isinstance(t, Sum) else (t,)
        for s in parts:
            if isinstance(s, Num):
                const = _nadd(const, s.value)
            else:
                flat.append(s)
    flat.sort(key=sort_key)
    if const != 0:
        flat.insert(0, Num(const))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def _pow_split(f: Expr):
    if isinstance(f, Pow):
        return f.base, f.exponent
    return f, 1


def mul(*factors) -> Expr:
    """Product of the arguments: flattened, folded, like bases merged, sorted."""
    coeff: Number = Fraction(1)
    bases: dict = {}
    order: list = []

    def feed(f: Expr):
        nonlocal coeff
        if isinstance(f, Num):
            coeff = _nmul(coeff, f.value)
            return
        if isinstance(f, Prod):
            for g in f.factors:
                feed(g)
            return
        base, k = _pow_split(f)
        if isinstance(base, Num):
            coeff = _nmul(coeff, _npow(base.value, k))
            return
        if base in bases:
            bases[base] += k
        else:
            bases[base] = k
            order.append(base)

    for f in factors:
        feed(_as_expr(f))
    if coeff == 0:
        return ZERO
    parts = [pow_(b, k) for b in order if (k := bases[b]) != 0]
    parts = [p for p in parts if not (isinstance(p, Num) and p.value == 1)]
    parts.sort(key=sort_key)
    if coeff != 1:
        parts.insert(0, Num(coeff))
    if not parts:
        return ONE
    if len(parts) == 1:
        return parts[0]
    return Prod(tuple(parts))


def pow_(base, exponent) -> Expr:
    """Integer power with folding; distributes over products, collapses nests."""
    base = _as_expr(base)
    if isinstance(exponent, Expr):
        if (
            isinstance(exponent, Num)
            and exponent.is_exact
            and exponent.value.denominator == 1
        ):
            exponent = int(exponent.value)
        else:
            raise TypeError("exponent must be an integer")
    if not isinstance(exponent, int):
        raise TypeError("exponent must be an integer")
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Num):
        return Num(_npow(base.value, exponent))
    if isinstance(base, Pow):
        return pow_(base.base, base.exponent * exponent)
    if isinstance(base, Prod):
        return mul(*(pow_(f, exponent) for f in base.factors))
    return Pow(base, exponent)


_EXACT_FUN = {
    ("sin", Fraction(0)): ZERO,
    ("cos", Fraction(0)): ONE,
    ("exp", Fraction(0)): ONE,
    ("ln", Fraction(1)): ZERO,
}


def fun(fname: str, arg) -> Expr:
    """Apply a supported unary function, folding numeric arguments."""
    if fname not in FUNCTIONS:
        raise UnknownFunction(f"unsupported function '{fname}'")
    arg = _as_expr(arg)
    if isinstance(arg, Num):
        v = arg.value
        if isinstance(v, Fraction):
            hit = _EXACT_FUN.get((fname, v))
            if hit is not None:
                return hit
            if fname == "sqrt" and v >= 0:
                root = Fraction(math.isqrt(v.numerator), math.isqrt(v.denominator))
                if root * root == v:
                    return Num(root)
        x = float(v)
        try:
            if fname == "sqrt":
                return Num(math.sqrt(x))
            if fname == "ln":
                return Num(math.log(x))
            return Num(_MATH[fname](x))
        except (ValueError, OverflowError):
            pass  # e.g. sqrt(-2): keep symbolic, evaluation will report it
    return Fun(fname, arg)


def sym(name: str) -> Sym:
    return Sym(name)


# ---------------------------------------------------------------------------
# structural queries


def free_names(e: Expr) -> frozenset:
    """Set of symbol names occurring in the expression."""
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, Sym):
        return frozenset((e.name,))
    if isinstance(e, Fun):
        return free_names(e.arg)
    if isinstance(e, Pow):
        return free_names(e.base)
    if isinstance(e, (Prod, Sum)):
        out = frozenset()
        for f in e.factors if isinstance(e, Prod) else e.terms:
            out |= free_names(f)
        return out
    raise TypeError(f"not an expression: {e!r}")


def is_zero_literal(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 0


def terms_of(e: Expr):
    """Top-level additive terms (the expression itself if not a sum)."""
    if isinstance(e, Sum):
        return list(e.terms)
    return [e]


# ---------------------------------------------------------------------------
# substitution / differentiation / evaluation


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace named symbols; the result is re-normalised by the constructors."""
    if not mapping:
        return e
    if isinstance(e, Num):
        return e
    if isinstance(e, Sym):
        repl = mapping.get(e.name)
        return _as_expr(repl) if repl is not None else e
    if isinstance(e, Fun):
        return fun(e.fname, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return pow_(substitute(e.base, mapping), e.exponent)
    if isinstance(e, Prod):
        return mul(*(substitute(f, mapping) for f in e.factors))
    if isinstance(e, Sum):
        return add(*(substitute(t, mapping) for t in e.terms))
    raise TypeError(f"not an expression: {e!r}")


_DERIVATIVES = {
    "sin": lambda a: fun("cos", a),
    "cos": lambda a: mul(num(-1), fun("sin", a)),
    "exp": lambda a: fun("exp", a),
    "ln": lambda a: pow_(a, -1),
    "sqrt": lambda a: mul(num(Fraction(1, 2)), pow_(fun("sqrt", a), -1)),
}


def _diff(e: Expr, name: str) -> Expr:
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Sym):
        return ONE if e.name == name else ZERO
    if isinstance(e, Sum):
        return add(*(_diff(t, name) for t in e.terms))
    if isinstance(e, Prod):
        parts = []
        fs = e.factors
        for i, f in enumerate(fs):
            d = _diff(f, name)
            if is_zero_literal(d):
                continue
            parts.append(mul(*fs[:i], d, *fs[i + 1:]))
        return add(*parts)
    if isinstance(e, Pow):
        d = _diff(e.base, name)
        if is_zero_literal(d):
            return ZERO
        return mul(num(e.exponent), pow_(e.base, e.exponent - 1), d)
    if isinstance(e, Fun):
        d = _diff(e.arg, name)
        if is_zero_literal(d):
            return ZERO
        return mul(_DERIVATIVES[e.fname](e.arg), d)
    raise TypeError(f"not an expression: {e!r}")


def differentiate(e: Expr, name: str) -> Expr:
    """Exact symbolic partial derivative, simplified."""
    return simplify(_diff(e, name))


def evaluate(e: Expr, binding: Mapping[str, float]) -> float:
    """Evaluate at a point.  Every free name must be bound."""
    if isinstance(e, Num):
        return float(e.value)
    if isinstance(e, Sym):
        try:
            return float(binding[e.name])
        except KeyError:
            raise EvaluationError(f"unbound name '{e.name}'") from None
    if isinstance(e, Sum):
        return math.fsum(evaluate(t, binding) for t in e.terms)
    if isinstance(e, Prod):
        out = 1.0
        for f in e.factors:
            out *= evaluate(f, binding)
        return out
    if isinstance(e, Pow):
        b = evaluate(e.base, binding)
        try:
            return b ** e.exponent
        except (ZeroDivisionError, OverflowError) as exc:
            raise EvaluationError(f"power failed: {b}^{e.exponent}") from exc
    if isinstance(e, Fun):
        x = evaluate(e.arg, binding)
        try:
            if e.fname == "sqrt":
                return math.sqrt(x)
            if e.fname == "ln":
                return math.log(x)
            return _MATH[e.fname](x)
        except (ValueError, OverflowError) as exc:
            raise EvaluationError(f"{e.fname}({x}) out of domain") from exc
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# canonical polynomial form (simplify)
#
# Working representation: a "poly" is dict[monomial, coeff] where a monomial
# is a sorted tuple of (atom, exponent) pairs, atoms being canonical non-sum,
# non-product expressions (Sym, Fun, or an opaque negative/unexpandable power
# of a sum).  The empty monomial is the constant term.

_EMPTY = ()


def _mono_key(m):
    return tuple((sort_key(a), k) for a, k in m)


def _poly_insert(out: dict, m, c) -> None:
    if m in out:
        s = _nadd(out[m], c)
        if s == 0:
            del out[m]
        else:
            out[m] = s
    elif c != 0:
        out[m] = c


def _poly_add(p: dict, q: dict) -> dict:
    out = dict(p)
    for m, c in q.items():
        _poly_insert(out, m, c)
    return out


def _mono_mul(m1, m2):
    d = dict(m1)
    for a, k in m2:
        d[a] = d.get(a, 0) + k
    return tuple(
        sorted(
            ((a, k) for a, k in d.items() if k != 0),
            key=lambda ak: (sort_key(ak[0]), ak[1]),
        )
    )


def _poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            _poly_insert(out, _mono_mul(m1, m2), _nmul(c1, c2))
    return out


def _poly_pow(p: dict, k: int) -> dict:
    out = {_EMPTY: Fraction(1)}
    for _ in range(k):
        out = _poly_mul(out, p)
    return out


def _atom_poly(atom: Expr, k: int = 1) -> dict:
    if k == 0:
        return {_EMPTY: Fraction(1)}
    return {((atom, k),): Fraction(1)}


def _const_poly(v: Number) -> dict:
    if v == 0:
        return {}
    return {_EMPTY: v}


def _to_poly(e: Expr) -> dict:
    """Lower a constructor-normalised tree into expanded polynomial form."""
    if isinstance(e, Num):
        return _const_poly(e.value)
    if isinstance(e, Sym):
        return _atom_poly(e)
    if isinstance(e, Fun):
        folded = fun(e.fname, simplify(e.arg))
        if isinstance(folded, Num):
            return _const_poly(folded.value)
        return _atom_poly(folded)
    if isinstance(e, Pow):
        k = e.exponent
        b = e.base
        if isinstance(b, Sym):
            return _atom_poly(b, k)
        if isinstance(b, Fun):
            folded = fun(b.fname, simplify(b.arg))
            if isinstance(folded, Num):
                return _const_poly(_npow(folded.value, k))
            if isinstance(folded, Fun):
                return _atom_poly(folded, k)
            return _to_poly(pow_(folded, k))
        # b is a Sum: constructors collapse Num/Pow/Prod bases.
        if k >= 2:
            return _poly_pow(_to_poly(b), k)
        canon = simplify(b)
        if isinstance(canon, Num):
            return _const_poly(_npow(canon.value, k))
        if isinstance(canon, (Sym, Fun)):
            return _atom_poly(canon, k)
        if isinstance(canon, Sum):
            return _atom_poly(Pow(canon, k))
        return _to_poly(pow_(canon, k))
    if isinstance(e, Prod):
        out = {_EMPTY: Fraction(1)}
        for f in e.factors:
            out = _poly_mul(out, _to_poly(f))
        return out
    if isinstance(e, Sum):
        out: dict = {}
        for t in e.terms:
            out = _poly_add(out, _to_poly(t))
        return out
    raise TypeError(f"not an expression: {e!r}")


def _pythagoras(poly: dict) -> dict:
    """Collapse equal-coefficient pairs c*sin(u)^2*K + c*cos(u)^2*K -> c*K."""
    changed = True
    while changed:
        changed = False
        for mono in sorted(poly, key=_mono_key):
            if mono not in poly:
                continue
            coeff = poly[mono]
            for atom, k in mono:
                if not (isinstance(atom, Fun) and atom.fname == "sin" and k >= 2):
                    continue
                rest = _mono_mul(mono, ((atom, -2),))
                partner = _mono_mul(rest, ((Fun("cos", atom.arg), 2),))
                if partner != mono and poly.get(partner) == coeff:
                    del poly[mono]
                    del poly[partner]
                    _poly_insert(poly, rest, coeff)
                    changed = True
                    break
            if changed:
                break
    return poly


def _from_poly(poly: dict) -> Expr:
    terms = []
    for mono in sorted(poly, key=_mono_key):
        coeff = poly[mono]
        factors = [pow_(a, k) for a, k in mono]
        terms.append(mul(Num(coeff), *factors))
    return add(*terms)


_SIMPLIFY_MEMO: dict = {}
_SIMPLIFY_MEMO_CAP = 50_000


def simplify(e: Expr) -> Expr:
    """Rewrite into the canonical expanded form.  Idempotent, value-preserving."""
    e = _as_expr(e)
    hit = _SIMPLIFY_MEMO.get(e)
    if hit is not None:
        return hit
    out = _from_poly(_pythagoras(_to_poly(e)))
    if len(_SIMPLIFY_MEMO) >= _SIMPLIFY_MEMO_CAP:
        _SIMPLIFY_MEMO.clear()
    _SIMPLIFY_MEMO[e] = out
    _SIMPLIFY_MEMO[out] = out
    return out


# ---------------------------------------------------------------------------
# serialization


def _fmt_number(v: Number) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"{v.numerator}/{v.denominator}"
    return repr(v)


def _split_sign(t: Expr):
    """Return (positive?, magnitude expression) for a sum term."""
    if isinstance(t, Num):
        if t.value < 0:
            return False, Num(-t.value)
        return True, t
    if isinstance(t, Prod):
        head = t.factors[0]
        if isinstance(head, Num) and head.value < 0:
            return False, mul(Num(-head.value), *t.factors[1:])
        return True, t
    return True, t


_P_SUM, _P_PROD, _P_NEG = 1, 2, 3


def _ser(e: Expr, ctx: int) -> str:
    if isinstance(e, Num):
        v = e.value
        body = _fmt_number(v)
        if v < 0:
            return body if ctx <= _P_SUM else f"({body})"
        if isinstance(v, Fraction) and v.denominator != 1:
            return body if ctx <= _P_PROD else f"({body})"
        return body
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Fun):
        return f"{e.fname}({_ser(e.arg, _P_SUM)})"
    if isinstance(e, Pow):
        if isinstance(e.base, Sum):
            base = f"({_ser(e.base, _P_SUM)})"
        else:
            base = _ser(e.base, _P_NEG)
        if e.exponent < 0:
            body = f"1/{base}" if e.exponent == -1 else f"1/{base}^{-e.exponent}"
            return body if ctx <= _P_PROD else f"({body})"
        return f"{base}^{e.exponent}"
    if isinstance(e, Prod):
        neg, mag = _split_sign(e)
        if not neg:
            out = f"-{_ser(mag, _P_PROD)}"
            return out if ctx <= _P_SUM else f"({out})"
        numer, denom = [], []
        coeff_num = None
        for f in e.factors:
            if isinstance(f, Num):
                v = f.value
                if isinstance(v, Fraction) and v.denominator != 1:
                    coeff_num = str(v.numerator)
                    denom.append(str(v.denominator))
                else:
                    coeff_num = _fmt_number(v)
                continue
            base, k = _pow_split(f)
            if k < 0:
                if isinstance(base, Sum):
                    inner = f"({_ser(base, _P_SUM)})"
                else:
                    inner = _ser(base, _P_NEG)
                denom.append(inner if k == -1 else f"{inner}^{-k}")
            else:
                numer.append(_ser(f, _P_NEG))
        if coeff_num is not None and coeff_num != "1":
            numer.insert(0, coeff_num)
        if not numer:
            numer = ["1"]
        out = "*".join(numer)
        for d in denom:
            out += f"/{d}"
        return out if ctx <= _P_PROD else f"({out})"
    if isinstance(e, Sum):
        chunks = []
        for i, t in enumerate(e.terms):
            pos, mag = _split_sign(t)
            body = _ser(mag, _P_PROD)
            if i == 0:
                chunks.append(body if pos else f"-{body}")
            else:
                chunks.append(f" + {body}" if pos else f" - {body}")
        out = "".join(chunks)
        return out if ctx <= _P_SUM else f"({out})"
    raise TypeError(f"not an expression: {e!r}")


def serialize(e: Expr) -> str:
    """Deterministic infix form; ``parse_expr`` inverts it exactly."""
    return _ser(_as_expr(e), _P_SUM)

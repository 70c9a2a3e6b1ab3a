"""Immutable expression trees over chart coordinates and real parameters.

Nodes are hash-consed: two structurally equal trees are the same object, so
structural equality is identity and every node is usable as a dict key.
Construction goes through the smart constructors (``add``, ``mul``,
``power``, ``exp`` ...), which flatten, fold numeric constants and combine
like terms.  There is deliberately no general simplifier beyond that.
"""

from __future__ import annotations

import threading
import weakref
import zlib
from fractions import Fraction
from functools import lru_cache
from numbers import Rational, Real
from typing import Callable, Iterable, Mapping, Union

__all__ = [
    "Expr", "Const", "Var", "Param", "Add", "Mul", "Pow", "Function",
    "Exp", "Ln", "Sinh", "Cosh", "Sin", "Cos", "ExpInt1",
    "const", "var", "param", "add", "mul", "power", "exp", "ln", "sinh",
    "cosh", "sin", "cos", "ei1", "as_expr", "diff", "subs", "render",
    "variables", "parameters", "expand", "ZERO", "ONE",
]

Number = Union[int, Fraction, float]

_lock = threading.Lock()
_table: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()
_MASK = (1 << 64) - 1


def _digest(*parts) -> int:
    """Deterministic 64-bit mix used only for canonical ordering."""
    acc = 1469598103934665603
    for p in parts:
        if isinstance(p, int):
            v = p & _MASK
        else:
            v = zlib.crc32(str(p).encode())
        acc = ((acc ^ v) * 1099511628211) & _MASK
    return acc


class Expr:
    __slots__ = ("_hash", "_skey", "__weakref__")

    # precedence used by the compact renderer
    _prec = 100

    @classmethod
    def _intern(cls, key: tuple, init: Callable[["Expr"], None], skey: int):
        k = (cls, key)
        with _lock:
            obj = _table.get(k)
            if obj is None:
                obj = object.__new__(cls)
                init(obj)
                obj._hash = hash(k)
                obj._skey = skey
                _table[k] = obj
        return obj

    def __hash__(self) -> int:
        return self._hash

    def __reduce__(self):
        return (_rebuild, (render(self), sorted(variables(self)), sorted(parameters(self))))

    # arithmetic sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, mul(MINUS_ONE, as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), mul(MINUS_ONE, self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), -1))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, -1))

    def __neg__(self):
        return mul(MINUS_ONE, self)

    def __pos__(self):
        return self

    def __pow__(self, n):
        return power(self, n)

    def __str__(self) -> str:
        return render(self, full=False)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({render(self, full=False)!r})"

    @property
    def children(self) -> tuple["Expr", ...]:
        return ()

    def is_const(self, value=None) -> bool:
        return False


def _rebuild(text, coords, params):
    from .parse import parse

    return parse(text, coords=coords, params=params)


class Const(Expr):
    __slots__ = ("value",)

    def __new__(cls, value: Number):
        v = _to_fraction(value)

        def init(o):
            o.value = v

        return cls._intern((v,), init, _digest("C", v.numerator, v.denominator))

    def is_const(self, value=None) -> bool:
        return value is None or self.value == value


class Var(Expr):
    """A chart coordinate (or the reserved time variable)."""

    __slots__ = ("name",)

    def __new__(cls, name: str):
        def init(o):
            o.name = name

        return cls._intern((name,), init, _digest("V", name))


class Param(Expr):
    __slots__ = ("name",)

    def __new__(cls, name: str):
        def init(o):
            o.name = name

        return cls._intern((name,), init, _digest("P", name))


class Add(Expr):
    __slots__ = ("terms",)
    _prec = 10

    @classmethod
    def _make(cls, terms: tuple[Expr, ...]):
        def init(o):
            o.terms = terms

        return cls._intern(terms, init, _digest("A", *(t._skey for t in terms)))

    @property
    def children(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)
    _prec = 20

    @classmethod
    def _make(cls, factors: tuple[Expr, ...]):
        def init(o):
            o.factors = factors

        return cls._intern(factors, init, _digest("M", *(f._skey for f in factors)))

    @property
    def children(self):
        return self.factors


class Pow(Expr):
    __slots__ = ("base", "exp")
    _prec = 30

    @classmethod
    def _make(cls, base: Expr, n: Fraction):
        def init(o):
            o.base = base
            o.exp = n

        return cls._intern((base, n), init, _digest("W", base._skey, n.numerator, n.denominator))

    @property
    def children(self):
        return (self.base,)


class Function(Expr):
    """Unary elementary function node; subclasses fix ``fname``."""

    __slots__ = ("arg",)
    fname = ""

    @classmethod
    def _make(cls, arg: Expr):
        def init(o):
            o.arg = arg

        return cls._intern((arg,), init, _digest("F", cls.fname, arg._skey))

    @property
    def children(self):
        return (self.arg,)


class Exp(Function):
    __slots__ = ()
    fname = "exp"


class Ln(Function):
    __slots__ = ()
    fname = "ln"


class Sinh(Function):
    __slots__ = ()
    fname = "sinh"


class Cosh(Function):
    __slots__ = ()
    fname = "cosh"


class Sin(Function):
    __slots__ = ()
    fname = "sin"


class Cos(Function):
    __slots__ = ()
    fname = "cos"


class ExpInt1(Function):
    """Exponential integral E1; real principal value for negative arguments."""

    __slots__ = ()
    fname = "Ei1"


FUNCTIONS: dict[str, type[Function]] = {
    c.fname: c for c in (Exp, Ln, Sinh, Cosh, Sin, Cos, ExpInt1)
}


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a numeric constant")
    if isinstance(value, Rational):
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, Real):
        f = float(value)
        if f != f or f in (float("inf"), float("-inf")):
            raise ValueError(f"non-finite constant {value!r}")
        # shortest round-trip decimal keeps 0.1 as 1/10
        return Fraction(repr(f))
    raise TypeError(f"cannot use {type(value).__name__} as a constant")


ZERO = Const(0)
ONE = Const(1)
MINUS_ONE = Const(-1)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(value)


def const(value: Number) -> Const:
    return Const(value)


def var(name: str) -> Var:
    return Var(name)


def param(name: str) -> Param:
    return Param(name)


# smart constructors ----------------------------------------------------

def _coeff_split(t: Expr) -> tuple[Fraction, Expr]:
    if isinstance(t, Mul) and isinstance(t.factors[0], Const):
        rest = t.factors[1:]
        return t.factors[0].value, rest[0] if len(rest) == 1 else Mul._make(rest)
    return Fraction(1), t


def _scaled(c: Fraction, rest: Expr) -> Expr:
    if c == 1:
        return rest
    fs = rest.factors if isinstance(rest, Mul) else (rest,)
    return Mul._make((Const(c),) + fs)


def _sorted(items: Iterable[Expr]) -> tuple[Expr, ...]:
    return tuple(sorted(items, key=lambda e: e._skey))


def add(*terms) -> Expr:
    constant = Fraction(0)
    coeffs: dict[Expr, Fraction] = {}
    stack = [as_expr(t) for t in reversed(terms)]
    while stack:
        t = stack.pop()
        if isinstance(t, Add):
            stack.extend(reversed(t.terms))
        elif isinstance(t, Const):
            constant += t.value
        else:
            c, rest = _coeff_split(t)
            if isinstance(rest, Add):
                # distribute c*(a + b) so that sums of sums can cancel
                stack.extend(mul(Const(c), u) for u in reversed(rest.terms))
                continue
            coeffs[rest] = coeffs.get(rest, Fraction(0)) + c
    out = [_scaled(c, r) for r, c in coeffs.items() if c != 0]
    out = list(_sorted(out))
    if constant != 0:
        out.insert(0, Const(constant))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return Add._make(tuple(out))


def mul(*factors) -> Expr:
    coeff = Fraction(1)
    powers: dict[Expr, Fraction] = {}
    exp_args: list[Expr] = []
    stack = [as_expr(f) for f in reversed(factors)]
    while stack:
        f = stack.pop()
        if isinstance(f, Mul):
            stack.extend(reversed(f.factors))
        elif isinstance(f, Const):
            if f.value == 0:
                return ZERO
            coeff *= f.value
        elif isinstance(f, Exp):
            exp_args.append(f.arg)
        elif isinstance(f, Pow):
            powers[f.base] = powers.get(f.base, Fraction(0)) + f.exp
        else:
            powers[f] = powers.get(f, Fraction(0)) + 1
    out: list[Expr] = []
    for base, n in powers.items():
        if n == 0:
            continue
        p = power(base, n)
        if isinstance(p, Const):
            coeff *= p.value
        elif isinstance(p, Mul):
            # power() may split a coefficient off a Mul base
            for g in p.factors:
                if isinstance(g, Const):
                    coeff *= g.value
                else:
                    out.append(g)
        else:
            out.append(p)
    if exp_args:
        e = exp(add(*exp_args))
        if e is not ONE:
            out.append(e)
    if coeff == 0:
        return ZERO
    if not out:
        return Const(coeff)
    out = list(_sorted(out))
    if len(out) == 1:
        if coeff == 1:
            return out[0]
        return Mul._make((Const(coeff), out[0]))
    if coeff != 1:
        out.insert(0, Const(coeff))
    return Mul._make(tuple(out))


EXPAND_LIMIT = 512


def expand(e: Expr) -> Expr:
    """Distribute products over sums, recursively, so that cancellations surface.

    sinh and cosh are rewritten through exp.
    Products whose expansion would exceed ``EXPAND_LIMIT`` terms are left alone.
    """
    return _expand(as_expr(e))


@lru_cache(maxsize=65536)
def _expand(e: Expr) -> Expr:
    if isinstance(e, Add):
        return add(*(_expand(t) for t in e.terms))
    if isinstance(e, Mul):
        sums: list[tuple[Expr, ...]] = [()]
        for f in e.factors:
            f = _expand(f)
            parts = f.terms if isinstance(f, Add) else (f,)
            if len(sums) * len(parts) > EXPAND_LIMIT:
                return mul(*(_expand(f) for f in e.factors))
            sums = [s + (p,) for s in sums for p in parts]
        return add(*(mul(*s) for s in sums))
    if isinstance(e, Pow):
        return power(_expand(e.base), e.exp)
    if isinstance(e, (Sinh, Cosh)):
        # exponential form lets hyperbolic terms cancel against exp terms
        u = _expand(e.arg)
        sign = -1 if isinstance(e, Sinh) else 1
        return add(mul(Fraction(1, 2), exp(u)), mul(Fraction(sign, 2), exp(mul(-1, u))))
    if isinstance(e, Function):
        return _BUILDERS[type(e)](_expand(e.arg))
    return e


def power(base, n) -> Expr:
    base = as_expr(base)
    if isinstance(n, Expr):
        if not isinstance(n, Const):
            raise ValueError("exponent must be a numeric constant")
        n = n.value
    n = _to_fraction(n)
    if n == 0:
        return ONE
    if n == 1:
        return base
    if isinstance(base, Const):
        v = base.value
        if n.denominator == 1:
            if v == 0 and n < 0:
                raise ZeroDivisionError("0 raised to a negative power")
            return Const(v ** int(n))
        if v == 1:
            return ONE
        if v == 0:
            return ZERO
        return Pow._make(base, n)
    if isinstance(base, Pow) and n.denominator == 1:
        return power(base.base, base.exp * n)
    if isinstance(base, Exp):
        return exp(mul(Const(n), base.arg))
    if isinstance(base, Mul) and n.denominator == 1:
        return mul(*(power(f, n) for f in base.factors))
    return Pow._make(base, n)


def exp(u) -> Expr:
    u = as_expr(u)
    if u is ZERO:
        return ONE
    if isinstance(u, Ln):
        return u.arg
    return Exp._make(u)


def ln(u) -> Expr:
    u = as_expr(u)
    if u is ONE:
        return ZERO
    if isinstance(u, Exp):
        return u.arg
    return Ln._make(u)


def sinh(u) -> Expr:
    u = as_expr(u)
    return ZERO if u is ZERO else Sinh._make(u)


def cosh(u) -> Expr:
    u = as_expr(u)
    return ONE if u is ZERO else Cosh._make(u)


def sin(u) -> Expr:
    u = as_expr(u)
    return ZERO if u is ZERO else Sin._make(u)


def cos(u) -> Expr:
    u = as_expr(u)
    return ONE if u is ZERO else Cos._make(u)


def ei1(u) -> Expr:
    return ExpInt1._make(as_expr(u))


_BUILDERS: dict[type, Callable[[Expr], Expr]] = {
    Exp: exp, Ln: ln, Sinh: sinh, Cosh: cosh, Sin: sin, Cos: cos, ExpInt1: ei1,
}


# calculus ----------------------------------------------------------------

@lru_cache(maxsize=1 << 17)
def diff(e: Expr, v: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to coordinate ``v``."""
    if isinstance(e, (Const, Param)):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if v not in variables(e):
        return ZERO
    if isinstance(e, Add):
        return add(*(diff(t, v) for t in e.terms))
    if isinstance(e, Mul):
        fs = e.factors
        parts = []
        for i, f in enumerate(fs):
            df = diff(f, v)
            if df is not ZERO:
                parts.append(mul(*fs[:i], df, *fs[i + 1:]))
        return add(*parts)
    if isinstance(e, Pow):
        return mul(Const(e.exp), power(e.base, e.exp - 1), diff(e.base, v))
    du = diff(e.arg, v)
    u = e.arg
    if isinstance(e, Exp):
        return mul(e, du)
    if isinstance(e, Ln):
        return mul(du, power(u, -1))
    if isinstance(e, Sinh):
        return mul(cosh(u), du)
    if isinstance(e, Cosh):
        return mul(sinh(u), du)
    if isinstance(e, Sin):
        return mul(cos(u), du)
    if isinstance(e, Cos):
        return mul(MINUS_ONE, sin(u), du)
    if isinstance(e, ExpInt1):
        # d/du E1(u) = -exp(-u)/u
        return mul(MINUS_ONE, exp(mul(MINUS_ONE, u)), power(u, -1), du)
    raise TypeError(f"unknown node {type(e).__name__}")


@lru_cache(maxsize=1 << 16)
def variables(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    out = frozenset()
    for c in e.children:
        out |= variables(c)
    return out


@lru_cache(maxsize=1 << 16)
def parameters(e: Expr) -> frozenset[str]:
    if isinstance(e, Param):
        return frozenset((e.name,))
    out = frozenset()
    for c in e.children:
        out |= parameters(c)
    return out


def subs(e: Expr, mapping: Mapping[str, object]) -> Expr:
    """Replace coordinates or parameters by name with expressions or numbers."""
    repl = {k: as_expr(v) for k, v in mapping.items()}
    memo: dict[Expr, Expr] = {}

    def go(x: Expr) -> Expr:
        hit = memo.get(x)
        if hit is not None:
            return hit
        if isinstance(x, (Var, Param)):
            out = repl.get(x.name, x)
        elif isinstance(x, Const):
            out = x
        elif isinstance(x, Add):
            out = add(*(go(t) for t in x.terms))
        elif isinstance(x, Mul):
            out = mul(*(go(f) for f in x.factors))
        elif isinstance(x, Pow):
            out = power(go(x.base), x.exp)
        else:
            out = _BUILDERS[type(x)](go(x.arg))
        memo[x] = out
        return out

    return go(e)


# rendering -----------------------------------------------------------------

def _frac(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def render(e: Expr, full: bool = True) -> str:
    """Infix text that parses back to the same tree.

    ``full=True`` parenthesizes every compound node (the interchange form);
    ``full=False`` gives a compact, precedence-aware form for display.
    """
    return _render_full(e) if full else _render_compact(e)


def _render_full(e: Expr) -> str:
    if isinstance(e, Const):
        s = _frac(e.value)
        return s if e.value >= 0 and e.value.denominator == 1 else f"({s})"
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Add):
        return "(" + " + ".join(_render_full(t) for t in e.terms) + ")"
    if isinstance(e, Mul):
        return "(" + "*".join(_render_full(f) for f in e.factors) + ")"
    if isinstance(e, Pow):
        return f"({_render_full(e.base)}^({_frac(e.exp)}))"
    return f"{e.fname}({_render_full(e.arg)})"


def _paren(s: str, inner: int, outer: int) -> str:
    return f"({s})" if inner < outer else s


def _render_compact(e: Expr) -> str:
    if isinstance(e, Const):
        return _frac(e.value)
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Function):
        return f"{e.fname}({_render_compact(e.arg)})"
    if isinstance(e, Pow):
        b = _render_compact(e.base)
        if not isinstance(e.base, (Var, Param, Function)) and not (
            isinstance(e.base, Const) and e.base.value >= 0 and e.base.value.denominator == 1
        ):
            b = f"({b})"
        n = _frac(e.exp)
        return f"{b}^{n}" if e.exp > 0 and e.exp.denominator == 1 else f"{b}^({n})"
    if isinstance(e, Add):
        out = ""
        for i, t in enumerate(e.terms):
            c, rest = _coeff_split(t)
            if isinstance(t, Const):
                c, rest = t.value, ONE
            neg = c < 0
            body = _render_compact(_scaled(abs(c), rest) if rest is not ONE else Const(abs(c)))
            if i == 0:
                out = ("-" + body) if neg else body
            else:
                out += (" - " if neg else " + ") + body
        return out
    if isinstance(e, Mul):
        num, den = [], []
        c = Fraction(1)
        for f in e.factors:
            if isinstance(f, Const):
                c *= f.value
            elif isinstance(f, Pow) and f.exp < 0:
                den.append(power(f.base, -f.exp))
            else:
                num.append(f)
        sign = "-" if c < 0 else ""
        c = abs(c)
        parts = [_paren(_render_compact(f), f._prec, Mul._prec) for f in num]
        if c.numerator != 1 or not parts:
            parts.insert(0, str(c.numerator))
        s = "*".join(parts)
        dparts = [_paren(_render_compact(f), f._prec, Mul._prec) for f in den]
        if c.denominator != 1:
            dparts.insert(0, str(c.denominator))
        if dparts:
            d = "*".join(dparts)
            s = f"{s}/{d}" if len(dparts) == 1 else f"{s}/({d})"
        return sign + s
    raise TypeError(type(e).__name__)

"""Floating-point evaluation by compiling expression DAGs to numpy code.

Every distinct node becomes one local assignment, so shared subtrees are
evaluated once.  Compiled functions work on scalars and on arrays of
sample points alike and are cached per tuple of expressions.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .nodes import (Add, Const, Cos, Cosh, Exp, Expr, ExpInt1, Ln, Mul, Param,
                    Pow, Sin, Sinh, Var)
from .special import exp_int1

__all__ = ["DomainError", "UnboundNameError", "compile_exprs", "evaluate", "evaluate_many"]


class DomainError(ArithmeticError):
    """Evaluation left the domain of a sub-function (or overflowed).

    ``index`` is the first offending sample when evaluating on arrays.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class UnboundNameError(LookupError):
    pass


def _first_bad(mask) -> int | None:
    if np.ndim(mask) == 0:
        return None
    return int(np.argmax(mask))


def _ln(u):
    bad = u <= 0
    if np.any(bad):
        raise DomainError("ln of a nonpositive argument", _first_bad(bad))
    return np.log(u)


def _ei1(u):
    bad = u == 0
    if np.any(bad):
        raise DomainError("Ei1 evaluated at its pole u = 0", _first_bad(bad))
    return exp_int1(u)


def _recip(u):
    bad = u == 0
    if np.any(bad):
        raise DomainError("division by zero", _first_bad(bad))
    return 1.0 / u


def _rpow(u, p: int, q: int):
    # real q-th root; negative bases only for odd q
    if q % 2 == 0:
        bad = u < 0
        if np.any(bad):
            raise DomainError("even root of a negative argument", _first_bad(bad))
    if p < 0:
        u = _recip(u)
        p = -p
    root = np.sign(u) * np.abs(u) ** (1.0 / q)
    return root ** p


_NAMESPACE = {
    "_exp": np.exp, "_ln": _ln, "_sinh": np.sinh, "_cosh": np.cosh,
    "_sin": np.sin, "_cos": np.cos, "_ei1": _ei1, "_recip": _recip, "_rpow": _rpow,
}

_FUNC = {Exp: "_exp", Ln: "_ln", Sinh: "_sinh", Cosh: "_cosh", Sin: "_sin", Cos: "_cos", ExpInt1: "_ei1"}


def _topo(roots: Sequence[Expr]) -> list[Expr]:
    order: list[Expr] = []
    seen: set[int] = set()
    for root in roots:
        stack = [(root, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for c in reversed(node.children):
                if id(c) not in seen:
                    stack.append((c, False))
    return order


def _source(roots: Sequence[Expr]) -> str:
    names: dict[int, str] = {}
    lines = ["def _f(env):"]
    for k, node in enumerate(_topo(roots)):
        if isinstance(node, Const):
            v = float(node.value)
            names[id(node)] = repr(v) if v >= 0 else f"({v!r})"
            continue
        t = f"t{k}"
        names[id(node)] = t
        if isinstance(node, (Var, Param)):
            rhs = f"env[{node.name!r}]"
        elif isinstance(node, Add):
            rhs = " + ".join(names[id(c)] for c in node.terms)
        elif isinstance(node, Mul):
            rhs = " * ".join(names[id(c)] for c in node.factors)
        elif isinstance(node, Pow):
            b = names[id(node.base)]
            n = node.exp
            if n.denominator == 1 and n > 0:
                rhs = f"{b} ** {int(n)}"
            elif n.denominator == 1:
                rhs = f"_recip({b}) ** {int(-n)}"
            else:
                rhs = f"_rpow({b}, {n.numerator}, {n.denominator})"
        else:
            rhs = f"{_FUNC[type(node)]}({names[id(node.arg)]})"
        lines.append(f"    {t} = {rhs}")
    lines.append("    return [" + ", ".join(names[id(r)] for r in roots) + "]")
    return "\n".join(lines)


@lru_cache(maxsize=4096)
def _compile(roots: tuple[Expr, ...]) -> Callable:
    ns = dict(_NAMESPACE)
    exec(compile(_source(roots), "<expr>", "exec"), ns)
    return ns["_f"]


def compile_exprs(exprs: Sequence[Expr]) -> Callable[[Mapping[str, object]], list]:
    """Return ``fn(env) -> list`` evaluating all ``exprs`` with shared subterms.

    The returned function raises ``DomainError`` for domain faults and
    ``UnboundNameError`` for names missing from ``env``; results are not
    checked for finiteness (``evaluate_many`` does that).
    """
    raw = _compile(tuple(exprs))

    def fn(env):
        try:
            with np.errstate(all="ignore"):
                return raw(env)
        except KeyError as exc:
            raise UnboundNameError(f"no value bound for {exc.args[0]!r}") from None

    return fn


def evaluate_many(exprs: Sequence[Expr], env: Mapping[str, object]) -> list[np.ndarray]:
    """Evaluate on arrays of sample points; each result is broadcast to the sample shape."""
    arrays = {k: np.asarray(v, dtype=float) for k, v in env.items()}
    shape = np.broadcast_shapes(*(a.shape for a in arrays.values())) if arrays else ()
    vals = compile_exprs(exprs)(arrays)
    out = []
    for v in vals:
        v = np.broadcast_to(np.asarray(v, dtype=float), shape)
        bad = ~np.isfinite(v)
        if np.any(bad):
            raise DomainError("non-finite value", _first_bad(bad))
        out.append(v)
    return out


def evaluate(e: Expr, point: Mapping[str, float]) -> float:
    """Evaluate ``e`` at a single point binding every free name."""
    env = {k: np.float64(v) for k, v in point.items()}
    v = compile_exprs((e,))(env)[0]
    v = float(v)
    if not np.isfinite(v):
        raise DomainError("non-finite value")
    return v

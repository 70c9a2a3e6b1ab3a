"""Multivector fields on a coordinate chart.

A degree-k field is stored as ``{(i1, ..., ik): coefficient}`` over strictly
increasing coordinate indices, without any 1/k! factor, so the (x, y)
component of a bivector is exactly the coefficient of dx-dual wedge dy-dual.

The Schouten-Nijenhuis bracket follows the convention in which

    [X, f] = X(f),  [f, X] = X(f),  [X, Y] = Lie bracket,
    [P, Q] = (-1)^(pq) [Q, P],
    [P, Q ^ R] = [P, Q] ^ R + (-1)^((p-1)q) Q ^ [P, R],

so that [L, f] is the vector field L#(df) and a Jacobi pair (L, E) obeys
[L, L] = 2 E ^ L.  ``schouten`` evaluates these rules recursively on
monomials; ``schouten_coordinate`` is an independent closed formula in odd
(Grassmann) coordinates used as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Union

import numpy as np

from .expr import (ONE, ZERO, Expr, SamplingBox, ZeroTest, add, as_expr, combine_tests, diff,
                   expand, is_zero, mul, parse, render, subs)
from .expr.sampling import DEFAULT_SAMPLES, DEFAULT_TOL

__all__ = [
    "Chart", "MultiVectorField", "OneForm", "ChartMismatchError", "DegreeError",
    "wedge", "schouten", "schouten_coordinate", "lie_derivative", "lie_bracket", "sharp",
    "pair2", "interior", "differential", "field_is_zero", "fields_equal",
]

RESERVED = ("t",)


class ChartMismatchError(ValueError):
    pass


class DegreeError(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    """Ordered coordinates, declared parameters and a default sampling box."""

    coords: tuple[str, ...]
    params: tuple[str, ...] = ()
    box: SamplingBox | None = None

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "params", tuple(self.params))
        if not self.coords:
            raise ValueError("a chart needs at least one coordinate")
        names = self.coords + self.params
        if len(set(names)) != len(names):
            raise ValueError(f"coordinate and parameter names must be distinct: {names}")
        for r in RESERVED:
            if r in self.coords:
                raise ValueError(f"{r!r} is reserved for time and cannot be a coordinate")
        if self.box is None:
            object.__setattr__(self, "box", SamplingBox.uniform(self.coords))

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def index(self, name: str) -> int:
        try:
            return self.coords.index(name)
        except ValueError:
            raise KeyError(f"{name!r} is not a coordinate of {self.coords}") from None

    def parse(self, text: str) -> Expr:
        return parse(text, self.coords, self.params)

    def with_box(self, box: SamplingBox) -> "Chart":
        return Chart(self.coords, self.params, box)


def _check_chart(a: Chart, b: Chart) -> None:
    if a.coords != b.coords:
        raise ChartMismatchError(f"charts differ: {a.coords} vs {b.coords}")


def _perm_sign(idx: Iterable[int]) -> tuple[int, tuple[int, ...]]:
    """Sign of the sorting permutation and the sorted tuple (sign 0 on repeats)."""
    seq = list(idx)
    if len(set(seq)) != len(seq):
        return 0, ()
    inv = 0
    for a in range(len(seq)):
        for b in range(a + 1, len(seq)):
            if seq[a] > seq[b]:
                inv += 1
    return (-1 if inv % 2 else 1), tuple(sorted(seq))


def _accumulate(items: Iterable[tuple[tuple[int, ...], Expr]]) -> dict[tuple[int, ...], Expr]:
    parts: dict[tuple[int, ...], list[Expr]] = {}
    for k, v in items:
        parts.setdefault(k, []).append(v)
    out = {}
    for k in sorted(parts):
        v = add(*parts[k])
        if v is not ZERO:
            out[k] = v
    return out


Key = Union[str, tuple]


class MultiVectorField:
    """Degree-k antisymmetric contravariant field with expression components."""

    __slots__ = ("chart", "degree", "_comps")

    def __init__(self, chart: Chart, degree: int, components: Mapping[Key, object] | None = None):
        # degrees above the dimension are allowed and always zero
        if degree < 0:
            raise DegreeError(f"negative degree {degree}")
        self.chart = chart
        self.degree = degree
        items = []
        for key, val in (components or {}).items():
            idx = self._index_key(chart, key)
            if len(idx) != degree:
                raise DegreeError(f"component {key!r} does not have degree {degree}")
            sign, srt = _perm_sign(idx)
            if sign == 0:
                continue
            e = chart.parse(val) if isinstance(val, str) else as_expr(val)
            items.append((srt, e if sign > 0 else mul(-1, e)))
        self._comps = _accumulate(items)

    @staticmethod
    def _index_key(chart: Chart, key: Key) -> tuple[int, ...]:
        if isinstance(key, str):
            key = tuple(k.strip() for k in key.split(",")) if key.strip() else ()
        idx = tuple(chart.index(k) if isinstance(k, str) else int(k) for k in key)
        for i in idx:
            if not 0 <= i < chart.dimension:
                raise IndexError(f"coordinate index {i} out of range")
        return idx

    @classmethod
    def _raw(cls, chart: Chart, degree: int, comps: dict[tuple[int, ...], Expr]) -> "MultiVectorField":
        obj = object.__new__(cls)
        obj.chart = chart
        obj.degree = degree
        obj._comps = {k: comps[k] for k in sorted(comps) if comps[k] is not ZERO}
        return obj

    # constructors ------------------------------------------------------
    @classmethod
    def zero(cls, chart: Chart, degree: int) -> "MultiVectorField":
        return cls(chart, degree)

    @classmethod
    def scalar(cls, chart: Chart, f) -> "MultiVectorField":
        return cls(chart, 0, {(): f})

    @classmethod
    def vector(cls, chart: Chart, components: Mapping[Key, object]) -> "MultiVectorField":
        return cls(chart, 1, {(k if isinstance(k, tuple) else (k,)) if not isinstance(k, str) else k: v
                              for k, v in components.items()})

    @classmethod
    def from_strings(cls, chart: Chart, components: Mapping[str, str], degree: int | None = None):
        """Build from the interchange map ``{"x,y": "expr"}``; degree inferred from keys."""
        if degree is None:
            lens = {len(cls._index_key(chart, k)) for k in components}
            if len(lens) > 1:
                raise DegreeError(f"mixed component degrees {sorted(lens)}")
            if not lens:
                raise DegreeError("cannot infer the degree of an empty field")
            degree = lens.pop()
        return cls(chart, degree, components)

    @classmethod
    def from_dict(cls, chart: Chart, data: Mapping) -> "MultiVectorField":
        return cls(chart, int(data["degree"]), data.get("components", {}))

    # access --------------------------------------------------------------
    @property
    def components(self) -> dict[tuple[int, ...], Expr]:
        return dict(self._comps)

    def __getitem__(self, key: Key) -> Expr:
        sign, srt = _perm_sign(self._index_key(self.chart, key))
        if sign == 0:
            return ZERO
        e = self._comps.get(srt, ZERO)
        return e if sign > 0 else mul(-1, e)

    def items(self):
        return self._comps.items()

    def key_name(self, idx: tuple[int, ...]) -> str:
        return ",".join(self.chart.coords[i] for i in idx)

    def is_structurally_zero(self) -> bool:
        return not self._comps

    def as_scalar(self) -> Expr:
        if self.degree != 0:
            raise DegreeError("not a degree-0 field")
        return self._comps.get((), ZERO)

    # algebra ---------------------------------------------------------------
    def _same(self, other: "MultiVectorField") -> None:
        _check_chart(self.chart, other.chart)
        if self.degree != other.degree:
            raise DegreeError(f"cannot add degrees {self.degree} and {other.degree}")

    def __add__(self, other: "MultiVectorField") -> "MultiVectorField":
        self._same(other)
        return MultiVectorField._raw(self.chart, self.degree, _accumulate(
            list(self._comps.items()) + list(other._comps.items())))

    def __sub__(self, other: "MultiVectorField") -> "MultiVectorField":
        return self + (-other)

    def __neg__(self) -> "MultiVectorField":
        return self.scale(-1)

    def scale(self, f) -> "MultiVectorField":
        f = as_expr(f)
        return MultiVectorField._raw(self.chart, self.degree, {k: mul(f, v) for k, v in self._comps.items()})

    def __mul__(self, f):
        return self.scale(f)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiVectorField):
            return NotImplemented
        return (self.chart.coords == other.chart.coords and self.degree == other.degree
                and self._comps == other._comps)

    def __hash__(self) -> int:
        return hash((self.chart.coords, self.degree, tuple(self._comps.items())))

    def apply(self, f) -> Expr:
        """X(f) for a vector field X."""
        if self.degree != 1:
            raise DegreeError("only vector fields act on functions")
        f = as_expr(f)
        return add(*(mul(v, diff(f, self.chart.coords[i])) for (i,), v in self._comps.items()))

    def subs(self, mapping: Mapping[str, object]) -> "MultiVectorField":
        return MultiVectorField._raw(self.chart, self.degree,
                                     {k: subs(v, mapping) for k, v in self._comps.items()})

    def map(self, fn: Callable[[Expr], Expr]) -> "MultiVectorField":
        """Apply ``fn`` to every component (zero results are dropped)."""
        return MultiVectorField._raw(self.chart, self.degree, {k: fn(v) for k, v in self._comps.items()})

    def expand(self) -> "MultiVectorField":
        return self.map(expand)

    def with_chart(self, chart: Chart) -> "MultiVectorField":
        _check_chart(self.chart, chart)
        return MultiVectorField._raw(chart, self.degree, dict(self._comps))

    def values(self, points: Mapping[str, np.ndarray]) -> np.ndarray:
        """Components at sample points as an array (samples, C(n, k)) in index order."""
        from itertools import combinations

        from .expr import evaluate_many

        keys = list(combinations(range(self.chart.dimension), self.degree))
        n = len(next(iter(points.values())))
        exprs = [self._comps.get(k, ZERO) for k in keys]
        vals = evaluate_many(exprs, points)
        return np.stack([np.broadcast_to(v, (n,)) for v in vals], axis=1)

    # interchange -------------------------------------------------------------
    def to_strings(self, full: bool = True) -> dict[str, str]:
        return {self.key_name(k): render(v, full=full) for k, v in self._comps.items()}

    def to_dict(self) -> dict:
        return {"degree": self.degree, "components": self.to_strings()}

    def __str__(self) -> str:
        if not self._comps:
            return "0"
        if self.degree == 0:
            return str(self._comps[()])
        parts = []
        for k, v in self._comps.items():
            basis = "∧".join(f"∂{self.chart.coords[i]}" for i in k)
            parts.append(f"({v}) {basis}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"MultiVectorField(degree={self.degree}, {self.to_strings(full=False)})"


class OneForm:
    """Covector field sum_i a_i dx^i."""

    __slots__ = ("chart", "_comps")

    def __init__(self, chart: Chart, components: Mapping[Union[int, str], object] | None = None):
        self.chart = chart
        comps = {}
        for k, v in (components or {}).items():
            i = chart.index(k) if isinstance(k, str) else int(k)
            if not 0 <= i < chart.dimension:
                raise IndexError(f"coordinate index {i} out of range")
            e = chart.parse(v) if isinstance(v, str) else as_expr(v)
            e = add(comps.get(i, ZERO), e)
            if e is ZERO:
                comps.pop(i, None)
            else:
                comps[i] = e
        self._comps = dict(sorted(comps.items()))

    def __getitem__(self, key: Union[int, str]) -> Expr:
        i = self.chart.index(key) if isinstance(key, str) else key
        return self._comps.get(i, ZERO)

    def items(self):
        return self._comps.items()

    def __call__(self, X: MultiVectorField) -> Expr:
        """Pairing with a vector field."""
        _check_chart(self.chart, X.chart)
        if X.degree != 1:
            raise DegreeError("one-forms pair with vector fields")
        return add(*(mul(a, X[(i,)]) for i, a in self._comps.items()))

    def __add__(self, other: "OneForm") -> "OneForm":
        _check_chart(self.chart, other.chart)
        out = dict(self._comps)
        for i, v in other._comps.items():
            out[i] = add(out.get(i, ZERO), v)
        return OneForm(self.chart, out)

    def scale(self, f) -> "OneForm":
        f = as_expr(f)
        return OneForm(self.chart, {i: mul(f, v) for i, v in self._comps.items()})

    def __repr__(self) -> str:
        return "OneForm(" + ", ".join(f"d{self.chart.coords[i]}: {v}" for i, v in self._comps.items()) + ")"


def differential(chart: Chart, f) -> OneForm:
    f = as_expr(f)
    return OneForm(chart, {i: diff(f, c) for i, c in enumerate(chart.coords)})


# wedge -------------------------------------------------------------------------

def _wedge_dicts(A: Mapping, B: Mapping) -> dict:
    items = []
    for I, f in A.items():
        for J, g in B.items():
            sign, K = _perm_sign(I + J)
            if sign:
                items.append((K, mul(f, g) if sign > 0 else mul(-1, f, g)))
    return _accumulate(items)


def _as_field(P, chart: Chart | None) -> MultiVectorField:
    if isinstance(P, MultiVectorField):
        return P
    if chart is None:
        raise TypeError("need at least one MultiVectorField to fix the chart")
    return MultiVectorField.scalar(chart, P)


def _charts(P, Q) -> Chart:
    cp = P.chart if isinstance(P, MultiVectorField) else None
    cq = Q.chart if isinstance(Q, MultiVectorField) else None
    if cp is not None and cq is not None:
        _check_chart(cp, cq)
    return cp or cq


def wedge(P, Q) -> MultiVectorField:
    chart = _charts(P, Q)
    P, Q = _as_field(P, chart), _as_field(Q, chart)
    k = P.degree + Q.degree
    if k > chart.dimension:
        raise DegreeError(f"wedge degree {k} exceeds dimension {chart.dimension}")
    return MultiVectorField._raw(P.chart, k, _wedge_dicts(P._comps, Q._comps))


# Schouten-Nijenhuis: recursive rules ----------------------------------------------

class _Recursive:
    def __init__(self, coords: tuple[str, ...]):
        self.coords = coords
        self.memo: dict = {}

    def bracket(self, f: Expr, I: tuple, g: Expr, J: tuple) -> dict:
        key = (f, I, g, J)
        hit = self.memo.get(key)
        if hit is None:
            hit = self._bracket(f, I, g, J)
            self.memo[key] = hit
        return hit

    def _bracket(self, f, I, g, J) -> dict:
        p, q = len(I), len(J)
        d = self.coords
        if p == 0 and q == 0:
            return {}
        if p == 1 and q == 0:
            return _accumulate([((), mul(f, diff(g, d[I[0]])))])
        if p == 1 and q == 1:
            return _accumulate([(J, mul(f, diff(g, d[I[0]]))),
                                (I, mul(-1, g, diff(f, d[J[0]])))])
        if q >= 2:
            # g dJ = (g d_j1) ^ d_J'  and the graded Leibniz rule
            head, tail = (J[0],), J[1:]
            first = _wedge_dicts(self.bracket(f, I, g, head), {tail: ONE})
            second = _wedge_dicts({head: g}, self.bracket(f, I, ONE, tail))
            if (p - 1) % 2:
                second = {k: mul(-1, v) for k, v in second.items()}
            return _accumulate(list(first.items()) + list(second.items()))
        # p >= 2 (or p == 0) against q <= 1: graded symmetry
        swapped = self.bracket(g, J, f, I)
        if (p * q) % 2:
            return {k: mul(-1, v) for k, v in swapped.items()}
        return swapped


def _result(chart: Chart, degree: int, comps: dict):
    field = MultiVectorField._raw(chart, degree, comps)
    return field.as_scalar() if degree == 0 else field


def _prepare(P, Q):
    chart = _charts(P, Q)
    P, Q = _as_field(P, chart), _as_field(Q, chart)
    k = P.degree + Q.degree - 1
    if k < 0:
        raise DegreeError("the bracket of two functions is not defined")
    return chart, P, Q, k


def schouten(P, Q):
    """Schouten-Nijenhuis bracket by the recursive rules (see module docstring).

    Degree-0 arguments may be plain expressions; a degree-0 result is
    returned as an expression.
    """
    chart, P, Q, k = _prepare(P, Q)
    if k > chart.dimension:
        return MultiVectorField.zero(chart, k)
    rec = _Recursive(chart.coords)
    items = []
    for I, f in P._comps.items():
        for J, g in Q._comps.items():
            items.extend(rec.bracket(f, I, g, J).items())
    return _result(chart, k, _accumulate(items))


# Schouten-Nijenhuis: closed formula in odd coordinates -----------------------------

def _odd_product(I: tuple, J: tuple) -> tuple[int, tuple]:
    """theta_I * theta_J = sign * theta_K, sorted by bubble swaps."""
    seq = list(I) + list(J)
    sign = 1
    for a in range(len(seq)):
        for b in range(len(seq) - 1 - a):
            if seq[b] == seq[b + 1]:
                return 0, ()
            if seq[b] > seq[b + 1]:
                seq[b], seq[b + 1] = seq[b + 1], seq[b]
                sign = -sign
    if len(set(seq)) != len(seq):
        return 0, ()
    return sign, tuple(seq)


def _right_odd_derivative(I: tuple, i: int):
    if i not in I:
        return 0, ()
    m = I.index(i)
    return (-1) ** (len(I) - 1 - m), I[:m] + I[m + 1:]


def _left_odd_derivative(I: tuple, i: int):
    if i not in I:
        return 0, ()
    m = I.index(i)
    return (-1) ** m, I[:m] + I[m + 1:]


def schouten_coordinate(P, Q):
    """Oracle: [P, Q] = (-1)^(p-1) sum_i (P d<theta_i)(d_x^i Q) - (d_x^i P)(d>theta_i Q).

    P and Q are read as functions of coordinates x and odd variables theta;
    d<theta is the right and d>theta the left odd derivative.
    """
    chart, P, Q, k = _prepare(P, Q)
    if k > chart.dimension:
        return MultiVectorField.zero(chart, k)
    p = P.degree
    coords = chart.coords
    items = []
    for i, xi in enumerate(coords):
        for I, f in P._comps.items():
            sR, IR = _right_odd_derivative(I, i)
            dfi = diff(f, xi)
            for J, g in Q._comps.items():
                if sR:
                    dg = diff(g, xi)
                    s, K = _odd_product(IR, J)
                    if s:
                        items.append((K, mul(sR * s, f, dg)))
                sL, JL = _left_odd_derivative(J, i)
                if sL:
                    s, K = _odd_product(I, JL)
                    if s:
                        items.append((K, mul(-sL * s, dfi, g)))
    comps = _accumulate(items)
    if (p - 1) % 2:
        comps = {K: mul(-1, v) for K, v in comps.items()}
    return _result(chart, k, comps)


def lie_derivative(X: MultiVectorField, P):
    if not isinstance(X, MultiVectorField) or X.degree != 1:
        raise DegreeError("the Lie derivative needs a vector field")
    return schouten(X, P)


def lie_bracket(X: MultiVectorField, Y: MultiVectorField) -> MultiVectorField:
    """[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i."""
    _check_chart(X.chart, Y.chart)
    if X.degree != 1 or Y.degree != 1:
        raise DegreeError("the commutator is defined for vector fields")
    comps = {}
    for i in range(X.chart.dimension):
        comps[(i,)] = add(X.apply(Y[(i,)]), mul(-1, Y.apply(X[(i,)])))
    return MultiVectorField._raw(X.chart, 1, _accumulate(comps.items()))


# musical map and pairings ------------------------------------------------------------

def _need_bivector(L: MultiVectorField) -> None:
    if L.degree != 2:
        raise DegreeError(f"expected a bivector, got degree {L.degree}")


def sharp(L: MultiVectorField, alpha: OneForm) -> MultiVectorField:
    """(L# alpha)^nu = sum_mu L^{mu nu} alpha_mu."""
    _need_bivector(L)
    _check_chart(L.chart, alpha.chart)
    items = []
    for (i, j), v in L._comps.items():
        items.append(((j,), mul(v, alpha[i])))
        items.append(((i,), mul(-1, v, alpha[j])))
    return MultiVectorField._raw(L.chart, 1, _accumulate(items))


def pair2(L: MultiVectorField, alpha: OneForm, beta: OneForm) -> Expr:
    """L(alpha, beta) = sum_{i<j} L^{ij} (alpha_i beta_j - alpha_j beta_i)."""
    _need_bivector(L)
    _check_chart(L.chart, alpha.chart)
    _check_chart(L.chart, beta.chart)
    return add(*(mul(v, add(mul(alpha[i], beta[j]), mul(-1, alpha[j], beta[i])))
                 for (i, j), v in L._comps.items()))


def interior(phi: OneForm, P: MultiVectorField) -> MultiVectorField:
    """Contraction of ``phi`` into the first slot of ``P``."""
    _check_chart(phi.chart, P.chart)
    if P.degree < 1:
        raise DegreeError("cannot contract a function")
    items = []
    for I, v in P._comps.items():
        for m, i in enumerate(I):
            a = phi[i]
            if a is not ZERO:
                items.append((I[:m] + I[m + 1:], mul(-1 if m % 2 else 1, a, v)))
    return MultiVectorField._raw(P.chart, P.degree - 1, _accumulate(items))


# numeric comparison -----------------------------------------------------------------

def field_is_zero(P, box: SamplingBox | None = None, samples: int = DEFAULT_SAMPLES,
                  tol: float = DEFAULT_TOL, seed: int = 0, label: str | None = None) -> ZeroTest:
    """Componentwise zero test; the witness label names the failing component."""
    if not isinstance(P, MultiVectorField):
        if box is None:
            raise TypeError("a box is required for scalar zero tests")
        return is_zero(as_expr(P), box, samples, tol, seed, label)
    box = box or P.chart.box
    tests = [is_zero(v, box, samples, tol, seed, label=P.key_name(k) or "scalar")
             for k, v in P._comps.items()]
    return combine_tests(tests, samples, tol, seed, label)


def fields_equal(P, Q, box: SamplingBox | None = None, samples: int = DEFAULT_SAMPLES,
                 tol: float = DEFAULT_TOL, seed: int = 0, label: str | None = None) -> ZeroTest:
    if isinstance(P, MultiVectorField) and isinstance(Q, MultiVectorField):
        return field_is_zero(P - Q, box or P.chart.box, samples, tol, seed, label)
    return field_is_zero(add(as_expr(P), mul(-1, as_expr(Q))), box, samples, tol, seed, label)

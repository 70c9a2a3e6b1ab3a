"""Jacobi structures (L, E): axiom checks, Kirillov bracket, Hamiltonian fields.

A pair (L, E) is a Jacobi structure when [L, L] = 2 E ^ L and [E, L] = 0.
Its bracket on functions is {f, g} = L(df, dg) + f E(g) - g E(f) and the
Hamiltonian field of f is X_f = L#(df) + f E.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

from .expr import (DEFAULT_SAMPLES, DEFAULT_TOL, Expr, SamplingBox, ZeroTest, add, as_expr,
                   combine_tests, expand, is_zero, mul)
from .multivec import (Chart, MultiVectorField, differential, field_is_zero, fields_equal,
                       lie_bracket, pair2, schouten, sharp, wedge, _check_chart)

__all__ = [
    "JacobiStructure", "AxiomCheck", "VerificationReport", "StructureUnverifiedError",
    "verify_jacobi", "jacobi_bracket", "hamiltonian_vf", "is_good_hamiltonian",
    "check_hamiltonian_pair", "is_constant_of_motion", "symmetry_field", "check_lie_symmetry",
    "homomorphism_check", "AXIOM_LAMBDA", "AXIOM_REEB",
]

AXIOM_LAMBDA = "[L,L] = 2 E^L"
AXIOM_REEB = "[E,L] = 0"

Bracket = Callable[[object, object], object]


class StructureUnverifiedError(RuntimeError):
    """Raised when an operation needs a structure whose axioms do not hold."""


@dataclass(frozen=True, eq=False)
class JacobiStructure:
    chart: Chart
    lam: MultiVectorField
    reeb: MultiVectorField
    box: SamplingBox | None = None
    name: str = "anonymous"

    def __post_init__(self):
        _check_chart(self.chart, self.lam.chart)
        _check_chart(self.chart, self.reeb.chart)
        if self.lam.degree != 2:
            raise ValueError("L must be a bivector")
        if self.reeb.degree != 1:
            raise ValueError("E must be a vector field")
        if self.box is None:
            object.__setattr__(self, "box", self.chart.box)

    @classmethod
    def from_strings(cls, coords: Sequence[str], lam: dict, reeb: dict, params: Sequence[str] = (),
                     box: SamplingBox | None = None, name: str = "anonymous") -> "JacobiStructure":
        chart = Chart(tuple(coords), tuple(params), box)
        return cls(chart, MultiVectorField(chart, 2, lam), MultiVectorField(chart, 1, reeb),
                   chart.box, name)

    @cached_property
    def verification(self) -> "VerificationReport":
        """Axiom check with default settings, computed once."""
        return verify_jacobi(self)


@dataclass(frozen=True)
class AxiomCheck:
    axiom: str
    test: ZeroTest

    def record(self, entry: str) -> dict:
        t = self.test
        return {
            "entry": entry,
            "axiom": self.axiom,
            "verdict": "pass" if t.passed else ("bad_box" if t.verdict == "bad_box" else "fail"),
            "max_residual": t.max_residual if t.max_residual == t.max_residual else None,
            "witness": t.witness,
            "component": t.label if not t.passed else None,
            "seed": t.seed,
            "samples": t.samples,
            "tol": t.tol,
        }


@dataclass(frozen=True)
class VerificationReport:
    entry: str
    checks: tuple[AxiomCheck, ...]
    samples: int
    tol: float
    seed: int
    implementation: str = "recursive"

    @property
    def passed(self) -> bool:
        return all(c.test.passed for c in self.checks)

    @property
    def bad_box(self) -> bool:
        return any(c.test.verdict == "bad_box" for c in self.checks)

    def __bool__(self) -> bool:
        return self.passed

    def check(self, axiom: str) -> AxiomCheck:
        for c in self.checks:
            if c.axiom == axiom:
                return c
        raise KeyError(axiom)

    def records(self) -> list[dict]:
        return [c.record(self.entry) for c in self.checks]

    def to_dict(self) -> dict:
        return {
            "entry": self.entry,
            "verdict": "pass" if self.passed else ("bad_box" if self.bad_box else "fail"),
            "implementation": self.implementation,
            "seed": self.seed,
            "samples": self.samples,
            "tol": self.tol,
            "axioms": self.records(),
        }


def verify_jacobi(J: JacobiStructure, samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL,
                  seed: int = 42, bracket: Bracket = schouten,
                  implementation: str = "recursive") -> VerificationReport:
    """Check both axioms componentwise with ``is_zero``.

    ``bracket`` selects the Schouten implementation, so the same check can
    be repeated with the coordinate oracle.
    """
    L, E = J.lam, J.reeb
    n = J.chart.dimension
    ll = bracket(L, L)
    if n >= 3:
        first = field_is_zero(ll - 2 * wedge(E, L), J.box, samples, tol, seed)
    else:
        # trivially zero: a 3-vector on a chart of dimension < 3
        first = field_is_zero(ll, J.box, samples, tol, seed)
    second = field_is_zero(bracket(E, L), J.box, samples, tol, seed)
    return VerificationReport(
        J.name, (AxiomCheck(AXIOM_LAMBDA, first), AxiomCheck(AXIOM_REEB, second)),
        samples, tol, seed, implementation)


def jacobi_bracket(J: JacobiStructure, f, g) -> Expr:
    """{f, g} = L(df, dg) + f E(g) - g E(f)."""
    f, g = as_expr(f), as_expr(g)
    c = J.chart
    E = J.reeb
    return expand(add(pair2(J.lam, differential(c, f), differential(c, g)),
                      mul(f, E.apply(g)), mul(-1, g, E.apply(f))))


def hamiltonian_vf(J: JacobiStructure, f) -> MultiVectorField:
    """X_f = L#(df) + f E."""
    f = as_expr(f)
    return (sharp(J.lam, differential(J.chart, f)) + J.reeb.scale(f)).expand()


def symmetry_field(J: JacobiStructure, h) -> MultiVectorField:
    """Hamiltonian field of a constant of motion, viewed as a candidate symmetry."""
    return hamiltonian_vf(J, h)


def _opts(J, samples, tol, seed):
    return J.box, samples, tol, seed


def is_good_hamiltonian(J: JacobiStructure, f, samples: int = DEFAULT_SAMPLES,
                        tol: float = DEFAULT_TOL, seed: int = 42) -> ZeroTest:
    """E(f) = 0."""
    return is_zero(J.reeb.apply(as_expr(f)), *_opts(J, samples, tol, seed), label="E(f)")


def check_hamiltonian_pair(J: JacobiStructure, X: MultiVectorField, f, samples: int = DEFAULT_SAMPLES,
                           tol: float = DEFAULT_TOL, seed: int = 42) -> ZeroTest:
    """X equals the Hamiltonian field of f, componentwise."""
    _check_chart(J.chart, X.chart)
    return fields_equal(X, hamiltonian_vf(J, f), *_opts(J, samples, tol, seed))


def is_constant_of_motion(J: JacobiStructure, h, generators: Sequence, samples: int = DEFAULT_SAMPLES,
                          tol: float = DEFAULT_TOL, seed: int = 42) -> ZeroTest:
    """{f_i, h} = 0 for every Hamiltonian function f_i."""
    tests = [is_zero(jacobi_bracket(J, f, h), *_opts(J, samples, tol, seed), label=f"{{f{i + 1},h}}")
             for i, f in enumerate(generators)]
    return combine_tests(tests, samples, tol, seed)


def check_lie_symmetry(Xh: MultiVectorField, generators: Sequence[MultiVectorField],
                       box: SamplingBox | None = None, samples: int = DEFAULT_SAMPLES,
                       tol: float = DEFAULT_TOL, seed: int = 42) -> ZeroTest:
    """[X_h, X_i] = 0 for every generator."""
    box = box or Xh.chart.box
    tests = [field_is_zero(lie_bracket(Xh, X), box, samples, tol, seed, label=f"[Xh,X{i + 1}]")
             for i, X in enumerate(generators)]
    return combine_tests(tests, samples, tol, seed)


def homomorphism_check(J: JacobiStructure, f, g, samples: int = DEFAULT_SAMPLES,
                       tol: float = DEFAULT_TOL, seed: int = 42) -> ZeroTest:
    """X_{f,g} = [X_f, X_g]; needs J to pass ``verify_jacobi``."""
    report = J.verification
    if not report.passed:
        raise StructureUnverifiedError(f"structure unverified: {J.name} fails its Jacobi axioms")
    lhs = hamiltonian_vf(J, jacobi_bracket(J, f, g))
    rhs = lie_bracket(hamiltonian_vf(J, f), hamiltonian_vf(J, g))
    return fields_equal(lhs, rhs, *_opts(J, samples, tol, seed))

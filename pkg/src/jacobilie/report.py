"""Example pipeline: every identity attached to a catalog example, checked twice.

Each check has a primary computation (sharp map, Kirillov formula, vector
commutator).  When it fails, the same quantity is recomputed through both
Schouten implementations, using X_f = [L, f] + f E and
{f, g} = [[L, f], g] + f E(g) - g E(f).  A failure confirmed by both is a
``discrepancy`` in the data; if the implementations disagree the check is
a ``disagreement``, which always indicates a bug in this package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .catalog import BoundExample, Catalog, CatalogEntry, bind_example, default_draws
from .expr import (DEFAULT_SAMPLES, DEFAULT_TOL, ZeroTest, add, as_expr, mul)
from .jacobi import JacobiStructure, hamiltonian_vf, jacobi_bracket, symmetry_field, verify_jacobi
from .liesys import StructureConstants, lie_closure, structure_constants
from .multivec import MultiVectorField, field_is_zero, lie_bracket, schouten, schouten_coordinate

__all__ = ["CheckResult", "example_checks", "run_report", "SN_ROUTES"]

SN_ROUTES = {"recursive": schouten, "coordinate": schouten_coordinate}


@dataclass(frozen=True)
class CheckResult:
    entry: str
    example: str
    check: str
    status: str  # pass | fail | discrepancy | disagreement | bad_box
    max_residual: float | None
    witness: dict | None = None
    flagged: bool = False
    params: Mapping[str, float] | None = None

    @property
    def ok(self) -> bool:
        """Passing, or a confirmed discrepancy that the data already records."""
        return self.status == "pass" or (self.status == "discrepancy" and self.flagged)

    def to_dict(self) -> dict:
        r = self.max_residual
        return {
            "entry": self.entry,
            "example": self.example,
            "check": self.check,
            "status": self.status,
            "max_residual": None if r is None or r != r else r,
            "witness": self.witness,
            "flagged": self.flagged,
            "params": dict(self.params or {}),
        }


def _ham_sn(J: JacobiStructure, f, bracket) -> MultiVectorField:
    return bracket(J.lam, as_expr(f)) + J.reeb.scale(f)


def _bracket_sn(J: JacobiStructure, f, g, bracket):
    f, g = as_expr(f), as_expr(g)
    inner = bracket(J.lam, f)
    return add(bracket(inner, g), mul(f, J.reeb.apply(g)), mul(-1, g, J.reeb.apply(f)))


class _Runner:
    def __init__(self, entry: str, ex: BoundExample, samples: int, tol: float, seed: int,
                 params: Mapping[str, float]):
        self.entry = entry
        self.ex = ex
        self.J = ex.structure
        self.samples, self.tol, self.seed = samples, tol, seed
        self.params = dict(params)
        self.results: list[CheckResult] = []

    def zero(self, value) -> ZeroTest:
        return field_is_zero(value, self.J.box, self.samples, self.tol, self.seed)

    def record(self, name: str, primary: Callable[[], object],
               routes: Mapping[str, Callable[[], object]] | None, items: Iterable[str] = ()):
        """``primary`` and every route return a quantity that should vanish."""
        test = self.zero(primary())
        flagged = any(self.ex.flagged(i) for i in items)
        status = "pass"
        if test.verdict == "bad_box":
            status = "bad_box"
        elif not test.passed:
            if routes:
                verdicts = {k: self.zero(fn()).passed for k, fn in routes.items()}
                status = "discrepancy" if not any(verdicts.values()) else "disagreement"
            else:
                status = "fail"
        elif routes:
            # a pass must also be reproduced by every route
            if not all(self.zero(fn()).passed for fn in routes.values()):
                status = "disagreement"
        self.results.append(CheckResult(self.entry, self.ex.kind, name, status, test.max_residual,
                                        test.witness, flagged, self.params))


def example_checks(entry: CatalogEntry, kind: str, params: Mapping[str, float] | None = None,
                   samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL,
                   seed: int = 42) -> list[CheckResult]:
    """Run every identity recorded for one example of ``entry``."""
    params = default_draws(entry)[0] if params is None else dict(params)
    ex = bind_example(entry, kind, params)
    J = ex.structure
    run = _Runner(entry.id, ex, samples, tol, seed, params)
    fs = ex.hamiltonians

    rec = verify_jacobi(J, samples, tol, seed, schouten, "recursive")
    cor = verify_jacobi(J, samples, tol, seed, schouten_coordinate, "coordinate")
    status = "pass" if rec.passed else ("discrepancy" if not cor.passed else "disagreement")
    if rec.passed != cor.passed:
        status = "disagreement"
    worst = max(c.test.max_residual for c in rec.checks)
    run.results.append(CheckResult(entry.id, kind, "jacobi axioms", status, worst, None,
                                   entry.discrepancy is not None, params))

    # printed Hamiltonian fields against X_f
    for i, X in enumerate(ex.fields, 1):
        f = fs[i - 1]
        run.record(
            f"X{i} = hamiltonian_vf(f{i})",
            lambda X=X, f=f: X - hamiltonian_vf(J, f),
            {k: (lambda X=X, f=f, b=b: X - _ham_sn(J, f, b)) for k, b in SN_ROUTES.items()},
            [f"fields[{i}]"],
        )

    # bracket table of the Hamiltonians
    for comb in ex.brackets:
        i, j = comb.pair
        target = ex.combination(comb)
        run.record(
            f"{{f{i},f{j}}} = {_combo_text(comb, 'f')}",
            lambda i=i, j=j, target=target: add(jacobi_bracket(J, fs[i - 1], fs[j - 1]), mul(-1, target)),
            {k: (lambda i=i, j=j, target=target, b=b: add(_bracket_sn(J, fs[i - 1], fs[j - 1], b), mul(-1, target)))
             for k, b in SN_ROUTES.items()},
        )

    # commutator table of the printed fields
    if ex.fields:
        for comb in ex.commutators:
            i, j = comb.pair
            target = ex.combination(comb, of="fields")
            Xi, Xj = ex.fields[i - 1], ex.fields[j - 1]
            run.record(
                f"[X{i},X{j}] = {_combo_text(comb, 'X')}",
                lambda Xi=Xi, Xj=Xj, target=target: lie_bracket(Xi, Xj) - target,
                {k: (lambda Xi=Xi, Xj=Xj, target=target, b=b: b(Xi, Xj) - target) for k, b in SN_ROUTES.items()},
                [f"fields[{i}]", f"fields[{j}]"] + [f"fields[{k}]" for k, _ in comb.coeffs],
            )

    # structure constants recovered from X_{f_i}
    if ex.commutators and len(fs) > 0:
        gens = [hamiltonian_vf(J, f) for f in fs]
        try:
            sc = structure_constants(gens, J.box, seed)
            err = _constants_error(sc, ex.commutators, len(fs))
            status = "pass" if err < 1e-6 and sc.closed else "fail"
            run.results.append(CheckResult(entry.id, kind, "structure constants of X_f", status, err,
                                           None, False, params))
        except ValueError as exc:
            run.results.append(CheckResult(entry.id, kind, f"structure constants of X_f ({exc})", "fail",
                                           None, None, False, params))
        closure = lie_closure(gens, max_dim=len(gens) + 3, box=J.box, seed=seed)
        run.results.append(CheckResult(entry.id, kind, f"lie closure (dimension {closure.dimension})",
                                       "pass" if closure.closed else "fail", None, None, False, params))

    # constants of motion and their symmetry fields
    for m, h in enumerate(ex.constants_of_motion, 1):
        for i, f in enumerate(fs, 1):
            run.record(
                f"{{f{i},h{m}}} = 0",
                lambda f=f, h=h: jacobi_bracket(J, f, h),
                {k: (lambda f=f, h=h, b=b: _bracket_sn(J, f, h, b)) for k, b in SN_ROUTES.items()},
            )
        if m <= len(ex.symmetry_fields):
            Xh = ex.symmetry_fields[m - 1]
            run.record(
                f"X_h{m} = symmetry_field(h{m})",
                lambda Xh=Xh, h=h: Xh - symmetry_field(J, h),
                {k: (lambda Xh=Xh, h=h, b=b: Xh - _ham_sn(J, h, b)) for k, b in SN_ROUTES.items()},
                [f"symmetry_fields[{m}]"],
            )
            for i, X in enumerate(ex.fields, 1):
                run.record(
                    f"[X_h{m},X{i}] = 0",
                    lambda Xh=Xh, X=X: lie_bracket(Xh, X),
                    {k: (lambda Xh=Xh, X=X, b=b: b(Xh, X)) for k, b in SN_ROUTES.items()},
                    [f"fields[{i}]", f"symmetry_fields[{m}]"],
                )
    return run.results


def _combo_text(comb, sym: str) -> str:
    if not comb.coeffs:
        return "0"
    parts = []
    for k, c in comb.coeffs:
        c = float(c)
        coef = "" if abs(c) == 1 else f"{abs(c):g}*"
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {coef}{sym}{k}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[2:]


def _constants_error(sc: StructureConstants, table, r: int) -> float:
    expected = np.zeros((r, r, r))
    for comb in table:
        i, j = comb.pair
        for k, c in comb.coeffs:
            expected[i - 1, j - 1, k - 1] = c
            expected[j - 1, i - 1, k - 1] = -c
    return float(np.max(np.abs(sc.c - expected))) if r else 0.0


def run_report(catalog: Catalog, samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL,
               seed: int = 42) -> list[CheckResult]:
    """Example checks for every entry that carries examples, at every default draw."""
    out: list[CheckResult] = []
    for entry in sorted(catalog, key=lambda e: e.id):
        for kind in sorted(entry.examples):
            for d in default_draws(entry):
                out.extend(example_checks(entry, kind, d, samples, tol, seed))
    return out

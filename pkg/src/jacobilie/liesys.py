"""Time-dependent Lie systems X(t, x) = sum_i b_i(t) X_i(x).

Generator algebras are analysed numerically: structure constants by a least
squares fit over sample points, and the smallest Lie algebra containing the
generators by adjoining commutators until a rank test stops growing.
Integration is fixed-step classical RK4.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .expr import (DEFAULT_TOL, DomainError, Expr, SamplingBox, as_expr, compile_exprs,
                   evaluate_many, parse, variables)
from .multivec import Chart, MultiVectorField, lie_bracket, _check_chart

__all__ = [
    "LieSystemSpec", "StructureConstants", "ClosureResult", "Trajectory", "RankDeficiencyError",
    "commutator", "structure_constants", "lie_closure", "integrate", "check_invariant_along",
    "TIME",
]

TIME = "t"
RANK_RTOL = 1e-9
SPAN_POINTS = 25


class RankDeficiencyError(ValueError):
    pass


def commutator(X: MultiVectorField, Y: MultiVectorField) -> MultiVectorField:
    return lie_bracket(X, Y)


@dataclass(frozen=True)
class LieSystemSpec:
    chart: Chart
    generators: tuple[MultiVectorField, ...]
    coefficients: tuple[Expr, ...]
    hamiltonians: tuple[Expr, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "coefficients", tuple(as_expr(c) for c in self.coefficients))
        if len(self.generators) != len(self.coefficients):
            raise ValueError("one time coefficient per generator is required")
        for X in self.generators:
            _check_chart(self.chart, X.chart)
            if X.degree != 1:
                raise ValueError("generators must be vector fields")
        if self.hamiltonians is not None:
            object.__setattr__(self, "hamiltonians", tuple(as_expr(h) for h in self.hamiltonians))
            if len(self.hamiltonians) != len(self.generators):
                raise ValueError("one Hamiltonian per generator is required")
        for c in self.coefficients:
            extra = variables(c) - {TIME}
            if extra:
                raise ValueError(f"time coefficients may only depend on t, found {sorted(extra)}")

    @staticmethod
    def parse_coefficient(text: str) -> Expr:
        return parse(text, coords=(TIME,))


def _stack(fields: Sequence[MultiVectorField], pts) -> np.ndarray:
    """Columns are generators, rows are (point, coordinate) pairs."""
    return np.stack([X.values(pts).reshape(-1) for X in fields], axis=1)


def _rank(M: np.ndarray) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


@dataclass(frozen=True)
class StructureConstants:
    """c[i, j, k] with [X_i, X_j] = sum_k c[i, j, k] X_k (zero-based indices)."""

    c: np.ndarray
    residual: float
    tol: float = DEFAULT_TOL

    @property
    def closed(self) -> bool:
        return self.residual <= self.tol

    def __call__(self, i: int, j: int, k: int) -> float:
        """One-based accessor matching the usual c_ij^k notation."""
        return float(self.c[i - 1, j - 1, k - 1])

    def to_dict(self) -> dict:
        return {"c": self.c.tolist(), "residual": self.residual, "closed": self.closed}


def structure_constants(generators: Sequence[MultiVectorField], box: SamplingBox | None = None,
                        seed: int = 42, tol: float = DEFAULT_TOL) -> StructureConstants:
    """Least-squares fit of [X_i, X_j] in the span of the generators."""
    gens = list(generators)
    r = len(gens)
    if r == 0:
        return StructureConstants(np.zeros((0, 0, 0)), 0.0, tol)
    box = box or gens[0].chart.box
    m = max(SPAN_POINTS, 3 * r)
    pts = box.sample(m, seed)
    G = _stack(gens, pts)
    if _rank(G) < r:
        raise RankDeficiencyError("generators are linearly dependent at every sampled point")
    c = np.zeros((r, r, r))
    worst = 0.0
    for i in range(r):
        for j in range(i + 1, r):
            v = commutator(gens[i], gens[j]).values(pts).reshape(-1)
            coef, *_ = np.linalg.lstsq(G, v, rcond=None)
            res = np.max(np.abs(G @ coef - v)) / max(1.0, float(np.max(np.abs(v))))
            worst = max(worst, float(res))
            c[i, j] = coef
            c[j, i] = -coef
    return StructureConstants(c, worst, tol)


@dataclass(frozen=True)
class ClosureResult:
    basis: tuple[MultiVectorField, ...]
    closed: bool

    @property
    def dimension(self) -> int:
        return len(self.basis)


def lie_closure(generators: Sequence[MultiVectorField], max_dim: int, box: SamplingBox | None = None,
                seed: int = 42) -> ClosureResult:
    """Adjoin commutators outside the numeric span until closed or ``max_dim`` is exceeded."""
    gens = list(generators)
    if not gens:
        raise ValueError("at least one generator is required")
    if max_dim < len(gens):
        raise ValueError("max_dim must be at least the number of generators")
    box = box or gens[0].chart.box
    pts = box.sample(SPAN_POINTS, seed)
    basis: list[MultiVectorField] = []
    cols: list[np.ndarray] = []

    def adjoin(X: MultiVectorField) -> bool:
        col = X.values(pts).reshape(-1)
        trial = np.stack(cols + [col], axis=1)
        if _rank(trial) > len(cols):
            basis.append(X)
            cols.append(col)
            return True
        return False

    for X in gens:
        adjoin(X)
    i = 0
    while i < len(basis):
        for j in range(i):
            if adjoin(commutator(basis[j], basis[i])) and len(basis) > max_dim:
                return ClosureResult(tuple(basis), False)
        i += 1
    return ClosureResult(tuple(basis), True)


@dataclass(frozen=True)
class Trajectory:
    coords: tuple[str, ...]
    times: np.ndarray
    states: np.ndarray
    dt: float
    method: str = "rk4"
    fault: str | None = None
    boundary: bool = False

    def __post_init__(self):
        self.times.setflags(write=False)
        self.states.setflags(write=False)

    @property
    def complete(self) -> bool:
        return self.fault is None and not self.boundary

    def point(self, i: int) -> dict[str, float]:
        return {c: float(v) for c, v in zip(self.coords, self.states[i])}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow((TIME,) + self.coords)
        for t, row in zip(self.times, self.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "coords": list(self.coords),
            "t": [float(t) for t in self.times],
            "points": [[float(v) for v in row] for row in self.states],
            "dt": self.dt,
            "method": self.method,
            "fault": self.fault,
            "boundary": self.boundary,
        })


def _velocity(sys: LieSystemSpec):
    n = sys.chart.dimension
    exprs = [c for c in sys.coefficients]
    for X in sys.generators:
        exprs.extend(X[(i,)] for i in range(n))
    fn = compile_exprs(exprs)
    r = len(sys.generators)
    coords = sys.chart.coords

    def f(t: float, x: np.ndarray) -> np.ndarray:
        env = {TIME: np.float64(t)}
        env.update({c: np.float64(v) for c, v in zip(coords, x)})
        vals = np.array([float(v) for v in fn(env)])
        b = vals[:r]
        comps = vals[r:].reshape(r, n)
        out = b @ comps
        if not np.all(np.isfinite(out)):
            raise DomainError("non-finite velocity")
        return out

    return f


def _inside(box: SamplingBox, coords, x) -> bool:
    lims = {name: (lo, hi) for name, lo, hi in box.intervals}
    for c, v in zip(coords, x):
        if c in lims and not lims[c][0] <= v <= lims[c][1]:
            return False
    return True


def integrate(sys: LieSystemSpec, x0: Mapping[str, float] | Sequence[float], t0: float, t1: float,
              dt: float, domain: SamplingBox | None = None) -> Trajectory:
    """Classical RK4 from t0 to t1 inclusive; the last step is shortened to land on t1.

    A domain fault stops integration and returns the trajectory so far with
    ``fault`` set.  If ``domain`` is given, leaving it stops with ``boundary``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    coords = sys.chart.coords
    if isinstance(x0, Mapping):
        x = np.array([float(x0[c]) for c in coords])
    else:
        x = np.array([float(v) for v in x0])
        if len(x) != len(coords):
            raise ValueError(f"x0 needs {len(coords)} values")
    f = _velocity(sys)
    nsteps = int(np.ceil((t1 - t0) / dt - 1e-9))
    times = [float(t0)]
    states = [x.copy()]
    fault = None
    boundary = False
    t = float(t0)
    for k in range(nsteps):
        t_next = t0 + (k + 1) * dt if k + 1 < nsteps else float(t1)
        h = t_next - t
        try:
            k1 = f(t, x)
            k2 = f(t + h / 2, x + h / 2 * k1)
            k3 = f(t + h / 2, x + h / 2 * k2)
            k4 = f(t + h, x + h * k3)
        except DomainError as exc:
            fault = f"{exc} near t={t!r}, x={[float(v) for v in x]}"
            break
        x_new = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x_new)):
            fault = f"non-finite state near t={t!r}"
            break
        if domain is not None and not _inside(domain, coords, x_new):
            boundary = True
            break
        t, x = t_next, x_new
        times.append(t)
        states.append(x.copy())
    return Trajectory(tuple(coords), np.array(times), np.array(states), float(dt), "rk4", fault, boundary)


@dataclass(frozen=True)
class InvariantCheck:
    passed: bool
    max_drift: float
    tol: float

    def __bool__(self) -> bool:
        return self.passed


def check_invariant_along(traj: Trajectory, h: Expr, tol: float = 1e-6) -> InvariantCheck:
    """max_t |h(x(t)) - h(x(t0))| <= tol * (1 + |h(x(t0))|)."""
    pts = {c: traj.states[:, i] for i, c in enumerate(traj.coords)}
    pts[TIME] = traj.times
    (vals,) = evaluate_many([as_expr(h)], pts)
    drift = float(np.max(np.abs(vals - vals[0])))
    return InvariantCheck(drift <= tol * (1 + abs(float(vals[0]))), drift, tol)

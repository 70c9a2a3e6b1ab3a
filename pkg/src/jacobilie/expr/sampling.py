"""Sampling boxes and the probabilistic zero test."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .evaluate import DomainError, evaluate_many
from .nodes import Add, Expr

__all__ = ["SamplingBox", "ZeroTest", "BadBoxError", "is_zero", "combine_tests"]

DEFAULT_SAMPLES = 200
DEFAULT_TOL = 1e-8


class BadBoxError(ValueError):
    """The box cannot produce points that respect its exclusions."""


@dataclass(frozen=True)
class SamplingBox:
    """Closed intervals per coordinate and parameter, plus exclusion predicates.

    Each exclusion ``(expr, clearance)`` requires ``|expr| >= clearance`` at
    every sampled point.
    """

    intervals: tuple[tuple[str, float, float], ...]
    param_intervals: tuple[tuple[str, float, float], ...] = ()
    exclusions: tuple[tuple[Expr, float], ...] = ()

    def __post_init__(self):
        for name, lo, hi in self.intervals + self.param_intervals:
            if not lo <= hi:
                raise ValueError(f"empty interval for {name}: [{lo}, {hi}]")

    @classmethod
    def uniform(cls, names: Iterable[str], lo: float = 0.2, hi: float = 1.2, **kw) -> "SamplingBox":
        return cls(tuple((n, float(lo), float(hi)) for n in names), **kw)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _, _ in self.intervals + self.param_intervals)

    def with_exclusions(self, exclusions: Iterable[tuple[Expr, float]]) -> "SamplingBox":
        return SamplingBox(self.intervals, self.param_intervals, self.exclusions + tuple(exclusions))

    def sample(self, n: int, seed: int) -> dict[str, np.ndarray]:
        """``n`` points drawn with ``numpy.random.default_rng(seed)``; read-only arrays."""
        return _sample(self, int(n), int(seed))

    def point(self, samples: Mapping[str, np.ndarray], i: int) -> dict[str, float]:
        return {k: float(v[i]) for k, v in samples.items()}


@lru_cache(maxsize=1024)
def _sample(box: SamplingBox, n: int, seed: int) -> dict[str, np.ndarray]:
    if n < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    spans = box.intervals + box.param_intervals
    kept = {name: [] for name, _, _ in spans}
    have = 0
    for _ in range(200):
        batch = {name: rng.uniform(lo, hi, size=n) for name, lo, hi in spans}
        ok = np.ones(n, dtype=bool)
        if box.exclusions:
            try:
                vals = evaluate_many([e for e, _ in box.exclusions], batch)
            except DomainError as exc:
                raise BadBoxError(f"exclusion predicate faults inside the box: {exc}") from None
            for v, (_, clearance) in zip(vals, box.exclusions):
                ok &= np.abs(v) >= clearance
        for name in kept:
            kept[name].append(batch[name][ok])
        have += int(ok.sum())
        if have >= n:
            break
    if have < n:
        raise BadBoxError("exclusions reject almost every point of the box")
    out = {}
    for name, parts in kept.items():
        arr = np.concatenate(parts)[:n]
        arr.setflags(write=False)
        out[name] = arr
    return out


@dataclass(frozen=True)
class ZeroTest:
    """Outcome of a zero test: ``zero``, ``nonzero`` or ``bad_box``.

    ``max_residual`` is the largest raw |value| seen; on failure ``witness``
    is the first failing point and ``witness_residual`` its |value|.
    Truthy only for ``zero``.
    """

    verdict: str
    max_residual: float
    samples: int
    tol: float
    seed: int
    witness: dict | None = None
    witness_residual: float | None = None
    label: str | None = None
    message: str | None = None

    def __bool__(self) -> bool:
        return self.verdict == "zero"

    @property
    def passed(self) -> bool:
        return self.verdict == "zero"

    def relabel(self, label: str) -> "ZeroTest":
        return ZeroTest(self.verdict, self.max_residual, self.samples, self.tol, self.seed,
                        self.witness, self.witness_residual, label, self.message)

    def to_dict(self) -> dict:
        d = {
            "verdict": self.verdict,
            "max_residual": self.max_residual,
            "witness": self.witness,
            "witness_residual": self.witness_residual,
            "seed": self.seed,
            "samples": self.samples,
            "tol": self.tol,
        }
        if self.label is not None:
            d["label"] = self.label
        if self.message is not None:
            d["message"] = self.message
        return d


def is_zero(e: Expr, box: SamplingBox, samples: int = DEFAULT_SAMPLES,
            tol: float = DEFAULT_TOL, seed: int = 0, label: str | None = None) -> ZeroTest:
    """Probabilistic zero test of ``e`` on ``box``.

    Passes iff |e(p)| <= tol * (1 + scale(p)) at every sample p, where
    scale(p) is the largest absolute top-level additive term of ``e``.
    """
    pts = box.sample(samples, seed)
    terms = e.terms if isinstance(e, Add) else (e,)
    try:
        vals = evaluate_many(terms, pts)
    except DomainError as exc:
        witness = box.point(pts, exc.index) if exc.index is not None else None
        return ZeroTest("bad_box", float("nan"), samples, tol, seed, witness, None, label, str(exc))
    total = np.zeros(samples)
    scale = np.zeros(samples)
    for v in vals:
        total = total + v
        scale = np.maximum(scale, np.abs(v))
    resid = np.abs(total)
    max_res = float(resid.max())
    bad = resid > tol * (1.0 + scale)
    if not np.any(bad):
        return ZeroTest("zero", max_res, samples, tol, seed, label=label)
    i = int(np.argmax(bad))
    return ZeroTest("nonzero", max_res, samples, tol, seed, box.point(pts, i), float(resid[i]), label)


def combine_tests(tests: Sequence[ZeroTest], samples: int, tol: float, seed: int,
                  label: str | None = None) -> ZeroTest:
    """Fold component tests: first bad box, else first failure, else pass.

    The combined ``max_residual`` is the largest over components.
    """
    res = [t.max_residual for t in tests if t.verdict != "bad_box"]
    max_res = max(res) if res else 0.0
    for kind in ("bad_box", "nonzero"):
        for t in tests:
            if t.verdict == kind:
                return ZeroTest(kind, max_res if kind == "nonzero" else t.max_residual, samples, tol,
                                seed, t.witness, t.witness_residual, label or t.label, t.message)
    return ZeroTest("zero", max_res, samples, tol, seed, label=label)

"""Catalog of Jacobi structures on low-dimensional Lie groups.

Entries are loaded from a versioned JSON file (schema shipped alongside),
instantiated at concrete parameter values, and verified in bulk with both
Schouten bracket implementations.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import jsonschema

from ..expr import (DEFAULT_SAMPLES, DEFAULT_TOL, Expr, ParseError, SamplingBox, as_expr, mul,
                    subs)
from ..jacobi import JacobiStructure, VerificationReport, verify_jacobi
from ..multivec import Chart, MultiVectorField, schouten, schouten_coordinate, wedge
from ..expr import exp as _exp

__all__ = [
    "CatalogError", "ExcludedParameterError", "Catalog", "CatalogEntry", "ExampleData",
    "BoundExample", "GroupData", "ParamSpec", "EntryReport", "DrawReport", "load_catalog",
    "instantiate", "build_from_group_data", "verify_all", "default_draws", "default_catalog_path",
    "ENV_VAR",
]

ENV_VAR = "JACOBI_CATALOG"
DRAWS = ({"b": 1, "a": 2}, {"b": -2, "a": -3})
FALLBACKS = (3, 5, -5, 0.5, -0.5)
DEFAULT_INTERVAL = (0.2, 1.2)


class CatalogError(ValueError):
    """Schema violation (with JSON pointer) or malformed entry (with entry id)."""

    def __init__(self, message: str, pointer: str | None = None, entry: str | None = None):
        self.pointer = pointer
        self.entry = entry
        where = []
        if entry:
            where.append(f"entry {entry}")
        if pointer is not None:
            where.append(f"at {pointer or '/'}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ExcludedParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    range: tuple[float, float]
    excluded: tuple[float, ...] = ()

    def allows(self, v: float) -> bool:
        return self.range[0] <= v <= self.range[1] and all(abs(v - e) > 1e-12 for e in self.excluded)


@dataclass(frozen=True)
class Combination:
    """{f_i, f_j} (or [X_i, X_j]) = sum_k coeff_k * f_k, one-based indices."""

    pair: tuple[int, int]
    coeffs: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class ExampleData:
    kind: str
    hamiltonians: tuple[Expr, ...]
    fields: tuple[MultiVectorField, ...]
    brackets: tuple[Combination, ...]
    commutators: tuple[Combination, ...]
    constants_of_motion: tuple[Expr, ...] = ()
    symmetry_fields: tuple[MultiVectorField, ...] = ()
    discrepancies: tuple[tuple[str, str], ...] = ()

    def bind(self, J: JacobiStructure, values: Mapping[str, float]) -> "BoundExample":
        def fld(X):
            return X.subs(values).with_chart(J.chart)

        return BoundExample(
            self.kind, J,
            tuple(subs(h, values) for h in self.hamiltonians),
            tuple(fld(X) for X in self.fields),
            self.brackets, self.commutators,
            tuple(subs(h, values) for h in self.constants_of_motion),
            tuple(fld(X) for X in self.symmetry_fields),
            self.discrepancies,
        )


@dataclass(frozen=True)
class BoundExample:
    """Example data at concrete parameter values, on the structure's chart."""

    kind: str
    structure: JacobiStructure
    hamiltonians: tuple[Expr, ...]
    fields: tuple[MultiVectorField, ...]
    brackets: tuple[Combination, ...]
    commutators: tuple[Combination, ...]
    constants_of_motion: tuple[Expr, ...]
    symmetry_fields: tuple[MultiVectorField, ...]
    discrepancies: tuple[tuple[str, str], ...]

    def combination(self, comb: Combination, of: str = "hamiltonians"):
        items = self.hamiltonians if of == "hamiltonians" else self.fields
        if of == "hamiltonians":
            from ..expr import add

            return add(*(mul(c, items[k - 1]) for k, c in comb.coeffs))
        out = MultiVectorField.zero(self.structure.chart, 1)
        for k, c in comb.coeffs:
            out = out + items[k - 1].scale(c)
        return out

    def flagged(self, item: str) -> bool:
        return any(i == item for i, _ in self.discrepancies)


@dataclass(frozen=True)
class GroupData:
    """Invariant-field data from which L and E are assembled.

    L = 1/2 sum_ij r^ij (X_i^R ^ X_j^R - exp(-sigma) X_i^L ^ X_j^L),
    E = -sum_i alpha^i X_i^R.
    """

    chart: Chart
    r: tuple[tuple[float, ...], ...]
    right: tuple[MultiVectorField, ...]
    left: tuple[MultiVectorField, ...]
    sigma: Expr
    alpha: tuple[Expr, ...]

    @property
    def dimension(self) -> int:
        return len(self.right)

    def __post_init__(self):
        d = len(self.right)
        if len(self.left) != d or len(self.alpha) != d or len(self.r) != d or any(len(row) != d for row in self.r):
            raise ValueError("r, invariant fields and alpha must all have the group dimension")
        for i in range(d):
            for j in range(d):
                if abs(self.r[i][j] + self.r[j][i]) > 1e-12:
                    raise ValueError("r must be antisymmetric")
        for X in self.right + self.left:
            if X.degree != 1:
                raise ValueError("invariant fields must be vector fields")


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    table: int
    label: str
    chart: Chart
    params: tuple[ParamSpec, ...]
    lam: MultiVectorField
    reeb: MultiVectorField
    intervals: tuple[tuple[str, float, float], ...]
    exclusions: tuple[tuple[Expr, float], ...]
    examples: Mapping[str, ExampleData] = field(default_factory=dict)
    group_data: GroupData | None = None
    discrepancy: str | None = None

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def example(self, kind: str) -> ExampleData | None:
        return self.examples.get(kind)


class Catalog(Sequence[CatalogEntry]):
    def __init__(self, entries: Sequence[CatalogEntry], path: str | None = None):
        self._entries = tuple(entries)
        self._index = {e.id: e for e in self._entries}
        if len(self._index) != len(self._entries):
            raise CatalogError("duplicate entry ids")
        self.path = path

    def __getitem__(self, i):
        if isinstance(i, str):
            try:
                return self._index[i]
            except KeyError:
                raise KeyError(f"unknown catalog entry {i!r}") from None
        return self._entries[i]

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key) -> bool:
        if isinstance(key, str):
            return key in self._index
        return key in self._entries

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self._entries)


# loading ------------------------------------------------------------------------

def default_catalog_path() -> str:
    env = os.environ.get(ENV_VAR)
    if env:
        return env
    return str(resources.files(__package__).joinpath("data/catalog.json"))


@lru_cache(maxsize=1)
def _schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("data/catalog.schema.json").read_text("utf-8"))


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def _field(chart: Chart, comps: Mapping[str, str], degree: int, entry: str, where: str):
    try:
        return MultiVectorField(chart, degree, comps)
    except ParseError as exc:
        raise CatalogError(f"cannot parse {where}: {exc}", entry=entry) from None
    except (KeyError, IndexError, ValueError) as exc:
        raise CatalogError(f"bad {where}: {exc}", entry=entry) from None


def _expr(chart: Chart, text: str, entry: str, where: str) -> Expr:
    try:
        return chart.parse(text)
    except ParseError as exc:
        raise CatalogError(f"cannot parse {where} {text!r}: {exc}", entry=entry) from None


def _combos(items) -> tuple[Combination, ...]:
    return tuple(Combination(tuple(c["pair"]), tuple(sorted((int(k), v) for k, v in c["combination"].items())))
                 for c in items)


def _entry(raw: dict, default_interval) -> CatalogEntry:
    eid = raw["id"]
    coords = tuple(raw["coords"])
    params = tuple(ParamSpec(p["name"], tuple(p["range"]), tuple(p.get("excluded", ()))) for p in raw["params"])
    try:
        chart = Chart(coords, tuple(p.name for p in params))
    except ValueError as exc:
        raise CatalogError(str(exc), entry=eid) from None
    lam = _field(chart, raw["lambda"], 2, eid, "lambda")
    reeb = _field(chart, raw["E"], 1, eid, "E")
    box = raw.get("box", {})
    intervals = tuple((c, float(box.get(c, default_interval)[0]), float(box.get(c, default_interval)[1]))
                      for c in coords)
    exclusions = tuple((_expr(chart, x["expr"], eid, "exclusion"), float(x["clearance"]))
                       for x in raw.get("exclusions", ()))
    examples = {}
    for kind, ex in raw.get("examples", {}).items():
        nfix = len(ex["hamiltonians"])
        if "fields" in ex and len(ex["fields"]) != nfix:
            raise CatalogError(f"{kind} example: fields and hamiltonians differ in length", entry=eid)
        examples[kind] = ExampleData(
            kind,
            tuple(_expr(chart, h, eid, f"{kind} hamiltonian") for h in ex["hamiltonians"]),
            tuple(_field(chart, X, 1, eid, f"{kind} field") for X in ex.get("fields", ())),
            _combos(ex.get("brackets", ())),
            _combos(ex.get("commutators", ())),
            tuple(_expr(chart, h, eid, f"{kind} constant of motion") for h in ex.get("constants_of_motion", ())),
            tuple(_field(chart, X, 1, eid, f"{kind} symmetry field") for X in ex.get("symmetry_fields", ())),
            tuple((d.get("item", ""), d["note"]) for d in ex.get("discrepancies", ())),
        )
    gd = None
    if "group_data" in raw:
        g = raw["group_data"]
        try:
            gd = GroupData(
                chart,
                tuple(tuple(float(v) for v in row) for row in g["r"]),
                tuple(_field(chart, X, 1, eid, "right-invariant field") for X in g["right"]),
                tuple(_field(chart, X, 1, eid, "left-invariant field") for X in g["left"]),
                _expr(chart, g["sigma"], eid, "sigma"),
                tuple(_expr(chart, a, eid, "alpha") for a in g["alpha"]),
            )
        except ValueError as exc:
            if isinstance(exc, CatalogError):
                raise
            raise CatalogError(f"bad group data: {exc}", entry=eid) from None
    disc = raw.get("discrepancy")
    return CatalogEntry(eid, int(raw["table"]), raw["label"], chart, params, lam, reeb, intervals,
                        exclusions, examples, gd, disc["note"] if disc else None)


def load_catalog(path: str | os.PathLike | None = None) -> Catalog:
    """Load and validate a catalog file (default: ``$JACOBI_CATALOG`` or the shipped data)."""
    p = str(path) if path is not None else default_catalog_path()
    try:
        text = Path(p).read_text("utf-8")
    except OSError as exc:
        raise CatalogError(f"cannot read catalog {p}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"invalid JSON in {p}: {exc.msg} at line {exc.lineno}") from None
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise CatalogError(f"schema violation: {err.message}", pointer=_pointer(err.absolute_path))
    interval = tuple(doc.get("box", {}).get("default_interval", DEFAULT_INTERVAL))
    return Catalog([_entry(e, interval) for e in doc["entries"]], p)


# instantiation ---------------------------------------------------------------------

def _check_params(entry: CatalogEntry, values: Mapping[str, float]) -> dict[str, float]:
    names = set(entry.param_names)
    unknown = set(values) - names
    if unknown:
        raise ValueError(f"{entry.id} has no parameter(s) {sorted(unknown)}; declared: {sorted(names) or 'none'}")
    missing = names - set(values)
    if missing:
        raise ValueError(f"{entry.id} needs values for {sorted(missing)}")
    out = {}
    for p in entry.params:
        v = float(values[p.name])
        if not p.range[0] <= v <= p.range[1]:
            raise ValueError(f"{p.name}={v:g} outside the range [{p.range[0]:g}, {p.range[1]:g}] of {entry.id}")
        if not p.allows(v):
            raise ExcludedParameterError(f"{p.name}={v:g} is excluded for {entry.id} (excluded: {list(p.excluded)})")
        out[p.name] = v
    return out


def _box(entry: CatalogEntry, values: Mapping[str, float]) -> SamplingBox:
    return SamplingBox(entry.intervals, (),
                       tuple((subs(e, values), c) for e, c in entry.exclusions))


def default_draws(entry: CatalogEntry) -> list[dict[str, float]]:
    """b = 1, a = 2, then b = -2, a = -3; excluded values fall back to other small numbers."""
    if not entry.params:
        return [{}]
    draws = []
    for base in DRAWS:
        d = {}
        for p in entry.params:
            candidates = ((base[p.name],) if p.name in base else ()) + FALLBACKS
            d[p.name] = float(next(v for v in candidates if p.allows(v)))
        if d not in draws:
            draws.append(d)
    return draws


def instantiate(entry: CatalogEntry, params: Mapping[str, float] | None = None) -> JacobiStructure:
    """Substitute parameter values; ``None`` uses the first default draw."""
    values = _check_params(entry, default_draws(entry)[0] if params is None else params)
    chart = Chart(entry.chart.coords, (), _box(entry, values))
    return JacobiStructure(chart, entry.lam.subs(values).with_chart(chart),
                           entry.reeb.subs(values).with_chart(chart), chart.box, entry.id)


def bind_example(entry: CatalogEntry, kind: str, params: Mapping[str, float] | None = None) -> BoundExample:
    ex = entry.example(kind)
    if ex is None:
        raise KeyError(f"{entry.id} has no {kind} example")
    values = _check_params(entry, default_draws(entry)[0] if params is None else params)
    return ex.bind(instantiate(entry, values), values)


def build_from_group_data(gd: GroupData, params: Mapping[str, float] | None = None,
                          box: SamplingBox | None = None, name: str = "group-data") -> JacobiStructure:
    """Assemble (L, E) from r-matrix and invariant fields; the result is not verified here."""
    values = dict(params or {})
    base = gd.chart
    chart = Chart(base.coords, (), box or base.box)
    R = [X.subs(values).with_chart(chart) for X in gd.right]
    Lf = [X.subs(values).with_chart(chart) for X in gd.left]
    weight = _exp(mul(-1, subs(gd.sigma, values)))
    lam = MultiVectorField.zero(chart, 2)
    half = as_expr(0.5)
    for i in range(gd.dimension):
        for j in range(gd.dimension):
            rij = gd.r[i][j]
            if rij == 0:
                continue
            term = wedge(R[i], R[j]) - wedge(Lf[i], Lf[j]).scale(weight)
            lam = lam + term.scale(mul(half, rij))
    reeb = MultiVectorField.zero(chart, 1)
    for a, X in zip(gd.alpha, R):
        reeb = reeb - X.scale(subs(a, values))
    return JacobiStructure(chart, lam, reeb, chart.box, name)


# bulk verification -------------------------------------------------------------------

@dataclass(frozen=True)
class DrawReport:
    params: dict[str, float]
    recursive: VerificationReport
    coordinate: VerificationReport

    @property
    def agree(self) -> bool:
        return self.recursive.passed == self.coordinate.passed

    @property
    def confirmed_failure(self) -> bool:
        return not self.recursive.passed and not self.coordinate.passed

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "verdict": "pass" if self.recursive.passed else "fail",
            "implementations_agree": self.agree,
            "axioms": self.recursive.records(),
            "oracle_axioms": self.coordinate.records(),
        }


@dataclass(frozen=True)
class EntryReport:
    entry: str
    label: str
    draws: tuple[DrawReport, ...]
    recorded_discrepancy: bool
    error: str | None = None

    @property
    def agree(self) -> bool:
        return all(d.agree for d in self.draws)

    @property
    def discrepancy(self) -> bool:
        """Failure confirmed by both bracket implementations."""
        return any(d.confirmed_failure for d in self.draws)

    @property
    def passed(self) -> bool:
        return self.error is None and all(d.recursive.passed for d in self.draws)

    @property
    def flag_stable(self) -> bool:
        return self.discrepancy == self.recorded_discrepancy

    @property
    def status(self) -> str:
        if self.error is not None:
            return "error"
        if not self.agree:
            return "disagreement"
        if self.passed:
            return "pass"
        return "discrepancy" if self.recorded_discrepancy else "fail"

    @property
    def ok(self) -> bool:
        """Pass, or a failure that both implementations confirm and the catalog pre-flags."""
        return self.status in ("pass", "discrepancy") and self.flag_stable

    def to_dict(self) -> dict:
        return {
            "entry": self.entry,
            "label": self.label,
            "status": self.status,
            "discrepancy": self.discrepancy,
            "recorded_discrepancy": self.recorded_discrepancy,
            "implementations_agree": self.agree,
            "error": self.error,
            "draws": [d.to_dict() for d in self.draws],
        }


def verify_entry(entry: CatalogEntry, seed: int = 42, samples: int = DEFAULT_SAMPLES,
                 tol: float = DEFAULT_TOL, draws: Sequence[Mapping[str, float]] | None = None) -> EntryReport:
    out = []
    try:
        for d in (draws if draws is not None else default_draws(entry)):
            J = instantiate(entry, d)
            rec = verify_jacobi(J, samples, tol, seed, schouten, "recursive")
            cor = verify_jacobi(J, samples, tol, seed, schouten_coordinate, "coordinate")
            out.append(DrawReport(dict(d), rec, cor))
    except Exception as exc:  # failures are data here
        return EntryReport(entry.id, entry.label, tuple(out), entry.discrepancy is not None,
                           f"{type(exc).__name__}: {exc}")
    return EntryReport(entry.id, entry.label, tuple(out), entry.discrepancy is not None)


@lru_cache(maxsize=4)
def _cached_catalog(path: str) -> Catalog:
    return load_catalog(path)


def _worker(args) -> EntryReport:
    path, eid, seed, samples, tol = args
    return verify_entry(_cached_catalog(path)[eid], seed, samples, tol)


def verify_all(entries: Sequence[CatalogEntry] | Catalog, seed: int = 42, samples: int = DEFAULT_SAMPLES,
               tol: float = DEFAULT_TOL, workers: int = 1) -> list[EntryReport]:
    """Verify every entry at its default draws; results sorted by entry id.

    With ``workers > 1`` and a file-backed ``Catalog``, entries fan out to
    worker processes that reload the catalog from its path.
    """
    path = entries.path if isinstance(entries, Catalog) else None
    entries = list(entries)
    if workers > 1 and path and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_worker, [(path, e.id, seed, samples, tol) for e in entries]))
    else:
        reports = [verify_entry(e, seed, samples, tol) for e in entries]
    return sorted(reports, key=lambda r: r.entry)

import copy
import json
from pathlib import Path

import pytest

from jacobilie.catalog import (CatalogError, ExcludedParameterError, GroupData, bind_example,
                               build_from_group_data, default_catalog_path, default_draws,
                               instantiate, load_catalog, verify_all, verify_entry)
from jacobilie.expr import Const, parse
from jacobilie.jacobi import verify_jacobi
from jacobilie.multivec import Chart, MultiVectorField, fields_equal
from jacobilie.report import example_checks, run_report

RAW = json.loads(Path(default_catalog_path()).read_text("utf-8"))


def write(tmp_path, doc):
    p = tmp_path / "catalog.json"
    p.write_text(json.dumps(doc), "utf-8")
    return p


def raw_entry(doc, eid):
    return next(e for e in doc["entries"] if e["id"] == eid)


def F(J, comps, degree):
    return MultiVectorField(J.chart, degree, {k: J.chart.parse(v) for k, v in comps.items()})


# -- loading -----------------------------------------------------------------------------------------

def test_every_table_row_is_present(catalog):
    tables = [e.table for e in catalog]
    assert len(catalog) == 57
    assert (tables.count(1), tables.count(2), tables.count(3)) == (3, 40, 14)
    assert len(set(catalog.ids)) == len(catalog)


def test_table_one_first_row(structure):
    J = structure("T1:A1-A1")
    assert J.lam == F(J, {"x,y": "1 - exp(-x)"}, 2)
    assert J.reeb == F(J, {"y": "-1"}, 1)


def test_table_one_third_row_has_zero_lambda(structure):
    J = structure("T1:A1-A2")
    assert J.lam.is_structurally_zero()
    assert J.reeb == F(J, {"y": "1"}, 1)


def test_labels_keep_the_table_notation(catalog):
    assert catalog["T1:A2-A2i"].label == "((A₂,bX̃²),(A₂.i,−bX₁))"


def test_env_var_overrides_default(tmp_path, monkeypatch):
    doc = copy.deepcopy(RAW)
    doc["entries"] = doc["entries"][:2]
    monkeypatch.setenv("JACOBI_CATALOG", str(write(tmp_path, doc)))
    assert len(load_catalog()) == 2


def test_missing_file_is_a_catalog_error(tmp_path):
    with pytest.raises(CatalogError, match="cannot read"):
        load_catalog(tmp_path / "absent.json")


def test_empty_file_is_a_catalog_error(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    with pytest.raises(CatalogError, match="invalid JSON"):
        load_catalog(p)


def test_schema_violation_carries_pointer(tmp_path):
    doc = copy.deepcopy(RAW)
    doc["entries"][3]["table"] = 7
    with pytest.raises(CatalogError) as info:
        load_catalog(write(tmp_path, doc))
    assert info.value.pointer == "/entries/3/table"


def test_malformed_component_names_the_entry(tmp_path):
    doc = copy.deepcopy(RAW)
    raw_entry(doc, "T2:II-I")["lambda"]["x,y"] = "exp(x"
    with pytest.raises(CatalogError) as info:
        load_catalog(write(tmp_path, doc))
    assert info.value.entry == "T2:II-I"
    assert "T2:II-I" in str(info.value)


def test_unknown_identifier_names_the_entry(tmp_path):
    doc = copy.deepcopy(RAW)
    raw_entry(doc, "T1:A1-A1")["E"]["y"] = "q"
    with pytest.raises(CatalogError, match="T1:A1-A1"):
        load_catalog(write(tmp_path, doc))


# -- instantiation ------------------------------------------------------------------------------------

@pytest.mark.parametrize("b", [1.0, -2.0])
def test_instantiate_with_parameter(structure, b):
    J = structure("T1:A2-A2i", b=b)
    assert J.lam == MultiVectorField(J.chart, 2, {"x,y": parse(f"1 - exp(-({b}+1)*y)", ("y",))})
    assert J.reeb == MultiVectorField(J.chart, 1, {"x": Const(b)})


def test_instantiate_parameter_free_entry(structure):
    J = structure("T2:III-VI0iv")
    assert J.lam == F(J, {"y,z": "-2*(y+z)"}, 2)
    assert J.reeb == F(J, {"y": "-1", "z": "1"}, 1)


def test_excluded_parameter_rejected(catalog):
    with pytest.raises(ExcludedParameterError):
        instantiate(catalog["T2:III-VIavii"], {"a": 1})
    with pytest.raises(ExcludedParameterError):
        instantiate(catalog["T1:A2-A2i"], {"b": 0})


@pytest.mark.parametrize("params", [{"b": 50}, {"c": 1}, {}])
def test_bad_parameters_rejected(catalog, params):
    with pytest.raises(ValueError):
        instantiate(catalog["T1:A2-A2i"], params)


def test_default_draws(catalog):
    assert default_draws(catalog["T1:A2-A2i"]) == [{"b": 1.0}, {"b": -2.0}]
    assert default_draws(catalog["T2:III-IIIv"]) == [{}]
    # a = 2 is fine but the fallback kicks in where the draw is excluded
    draws = default_draws(catalog["T2:III-VIaviii"])
    assert all(d["a"] != -1 for d in draws)


def test_bind_example(catalog):
    ex = bind_example(catalog["T2:IV-IIIvi"], "symmetry")
    assert ex.flagged("fields[2]") and not ex.flagged("fields[1]")
    with pytest.raises(KeyError):
        bind_example(catalog["T1:A1-A1"], "system")


# -- group data -----------------------------------------------------------------------------------------

C2 = Chart(("x", "y"))


def vf(**comps):
    return MultiVectorField(C2, 1, {k: C2.parse(v) for k, v in comps.items()})


def test_group_data_with_zero_r():
    gd = GroupData(C2, ((0, 0), (0, 0)), (vf(x="1"), vf(x="-x", y="1")), (vf(x="1"), vf(y="1")),
                   Const(0), (Const(1), Const(2)))
    J = build_from_group_data(gd)
    assert J.lam.is_structurally_zero()
    assert fields_equal(J.reeb, vf(x="-1") - vf(x="-x", y="1").scale(2))


def test_group_data_cancels_when_right_equals_left():
    fields = (vf(x="1"), vf(x="y", y="1"))
    gd = GroupData(C2, ((0, 1), (-1, 0)), fields, fields, Const(0), (Const(0), Const(0)))
    assert build_from_group_data(gd).lam.is_structurally_zero()


def test_group_data_rejects_symmetric_r():
    with pytest.raises(ValueError):
        GroupData(C2, ((0, 1), (1, 0)), (vf(x="1"), vf(y="1")), (vf(x="1"), vf(y="1")), Const(0),
                  (Const(0), Const(0)))


@pytest.mark.parametrize("b", [1.0, -2.0])
def test_group_data_reproduces_table_one_row_two(catalog, structure, b):
    entry = catalog["T1:A2-A2i"]
    J = structure("T1:A2-A2i", b=b)
    built = build_from_group_data(entry.group_data, {"b": b}, J.box)
    assert fields_equal(built.lam, J.lam, J.box)
    assert fields_equal(built.reeb, J.reeb, J.box)
    assert verify_jacobi(built).passed


# -- verification ---------------------------------------------------------------------------------------

@pytest.mark.parametrize("eid", ["T2:III-IIIiv", "T2:III-IIIv", "T1:A2-A2i", "T2:IV-IIIvi", "T2:VI0-IIIix"])
def test_worked_structures_pass(catalog, eid):
    r = verify_entry(catalog[eid])
    assert r.status == "pass" and r.ok and r.agree


def test_full_sweep_one_report_per_entry(catalog):
    reports = verify_all(catalog)
    assert [r.entry for r in reports] == sorted(catalog.ids)
    assert all(r.agree for r in reports)
    assert [r.entry for r in reports if r.status != "pass"] == ["T3:VIa-IIIx"]
    assert all(r.ok for r in reports)


def test_parallel_sweep_matches_serial(catalog):
    a = [r.to_dict() for r in verify_all(catalog, workers=1)]
    b = [r.to_dict() for r in verify_all(catalog, workers=3)]
    assert a == b


@pytest.mark.parametrize("seed", [0, 42, 1234])
def test_discrepancy_flag_is_stable(catalog, seed):
    r = verify_entry(catalog["T3:VIa-IIIx"], seed=seed)
    assert r.status == "discrepancy" and r.discrepancy and r.recorded_discrepancy and r.flag_stable
    assert r.ok
    bad = r.draws[0].recursive.check("[E,L] = 0").test
    assert bad.witness is not None and bad.label == "y,z"


def test_corrected_reeb_field_passes_and_flag_becomes_stale(tmp_path):
    doc = copy.deepcopy(RAW)
    raw_entry(doc, "T3:VIa-IIIx")["E"] = {"y": "exp((a-1)*x)", "z": "-exp((a-1)*x)"}
    r = verify_entry(load_catalog(write(tmp_path, doc))["T3:VIa-IIIx"])
    assert r.passed and not r.flag_stable and not r.ok


def test_unrecorded_failure_is_not_ok(tmp_path):
    doc = copy.deepcopy(RAW)
    raw_entry(doc, "T3:VIa-IIIx").pop("discrepancy")
    r = verify_entry(load_catalog(write(tmp_path, doc))["T3:VIa-IIIx"])
    assert r.status == "fail" and not r.ok


# -- example pipeline -------------------------------------------------------------------------------------

def test_example_pipeline(catalog):
    checks = run_report(catalog)
    assert all(c.status != "disagreement" for c in checks)
    failing = [c for c in checks if not c.status == "pass"]
    assert {(c.entry, c.example) for c in failing} == {("T2:IV-IIIvi", "symmetry")}
    assert all(c.status == "discrepancy" and c.flagged and c.ok for c in failing)
    assert sorted(c.check for c in failing) == ["X2 = hamiltonian_vf(f2)", "[X1,X2] = X1", "[X_h1,X2] = 0"]


def test_example_pipeline_is_deterministic(catalog):
    a = [c.to_dict() for c in example_checks(catalog["T2:III-IIIiv"], "symmetry", {"b": -2.0})]
    b = [c.to_dict() for c in example_checks(catalog["T2:III-IIIiv"], "symmetry", {"b": -2.0})]
    assert a == b and all(c["status"] == "pass" for c in a)

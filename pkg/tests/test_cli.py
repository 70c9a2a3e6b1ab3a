import json
import subprocess
import sys
from importlib.resources import files

import jsonschema
import pytest

from jacobilie.cli import main, split_top


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def schema(name):
    return json.loads(files("jacobilie").joinpath("schemas", f"{name}.schema.json").read_text("utf-8"))


# -- list -------------------------------------------------------------------------------------------

def test_list_text(capsys):
    code, out, _ = run(capsys, "list")
    assert code == 0
    assert "T1:A2-A2i  ((A₂,bX̃²),(A₂.i,−bX₁))  params: b" in out.splitlines()
    assert len(out.splitlines()) == 57


def test_list_json_validates(capsys):
    code, out, _ = run(capsys, "list", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and isinstance(doc, list) and len(doc) == 57
    jsonschema.validate(doc, schema("list"))


def test_empty_catalog_path_fails(capsys, tmp_path):
    p = tmp_path / "c.json"
    p.write_text("")
    code, _, err = run(capsys, "list", "--catalog", str(p))
    assert code == 2 and "invalid JSON" in err


def test_catalog_env_var(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("JACOBI_CATALOG", str(tmp_path / "missing.json"))
    code, _, err = run(capsys, "list")
    assert code == 2 and "cannot read catalog" in err


# -- verify -------------------------------------------------------------------------------------------

def test_verify_single_entry(capsys):
    code, out, _ = run(capsys, "verify", "--entry", "T2:III-IIIiv", "--param", "b=1")
    assert code == 0
    assert out.startswith("T2:III-IIIiv  PASS")
    assert "seed 42" in out


def test_verify_unknown_entry(capsys):
    code, _, err = run(capsys, "verify", "--entry", "NOPE")
    assert code == 2 and "unknown entry" in err


@pytest.mark.parametrize("param", ["b=0", "b=abc", "c=1", "b"])
def test_verify_bad_parameters(capsys, param):
    code, _, _ = run(capsys, "verify", "--entry", "T1:A2-A2i", "--param", param)
    assert code == 2


def test_verify_all_json(capsys):
    code, out, _ = run(capsys, "verify", "--all", "--format", "json")
    doc = json.loads(out)
    jsonschema.validate(doc, schema("verify"))
    assert code == 0 and doc["ok"] and doc["seed"] == 42
    assert len(doc["reports"]) == 57
    assert all(r["implementations_agree"] for r in doc["reports"])


def test_verify_flagged_entry_fails_when_forced_by_params(capsys):
    # a single draw of the flagged entry is still a recorded discrepancy
    code, out, _ = run(capsys, "verify", "--entry", "T3:VIa-IIIx", "--param", "a=2")
    assert code == 0 and "DISCREPANCY" in out and "witness y,z" in out


def test_verify_unrecorded_failure_exits_one(capsys, tmp_path):
    from jacobilie.catalog import default_catalog_path
    doc = json.loads(open(default_catalog_path(), encoding="utf-8").read())
    next(e for e in doc["entries"] if e["id"] == "T3:VIa-IIIx").pop("discrepancy")
    p = tmp_path / "c.json"
    p.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "verify", "--entry", "T3:VIa-IIIx", "--catalog", str(p))
    assert code == 1 and "FAIL" in out


def test_text_and_json_verdicts_agree(capsys):
    _, text, _ = run(capsys, "verify", "--all", "--seed", "7")
    _, js, _ = run(capsys, "verify", "--all", "--seed", "7", "--format", "json")
    statuses = {r["entry"]: r["status"].upper() for r in json.loads(js)["reports"]}
    text_statuses = dict(line.split("  ") for line in text.splitlines()
                         if line and not line.startswith((" ", "seed")))
    assert statuses == text_statuses


def test_json_is_byte_identical_across_runs(tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"r{i}.json"
        assert main(["verify", "--all", "--format", "json", "--seed", "3", "--output", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_seed_changes_samples(capsys):
    _, a, _ = run(capsys, "verify", "--entry", "T3:VIa-IIIx", "--format", "json", "--seed", "1")
    _, b, _ = run(capsys, "verify", "--entry", "T3:VIa-IIIx", "--format", "json", "--seed", "2")
    assert a != b and json.loads(a)["seed"] == 1


# -- bracket and hamvf ---------------------------------------------------------------------------------

def test_bracket_expect_passes(capsys):
    code, out, _ = run(capsys, "bracket", "--entry", "T1:A2-A2i", "--param", "b=1",
                       "--f", "exp(-x)", "--g", "1", "--expect", "exp(-x)")
    assert code == 0 and "pass" in out


def test_bracket_of_function_with_itself(capsys):
    code, out, _ = run(capsys, "bracket", "--entry", "T1:A2-A2i", "--param", "b=1", "--f", "x", "--g", "x")
    assert code == 0 and out.splitlines()[0] == "{f,g} = 0"


def test_bracket_of_good_hamiltonians_iii_iiiiv(capsys):
    code, _, _ = run(capsys, "bracket", "--entry", "T2:III-IIIiv", "--param", "b=1",
                     "--f", "y", "--g", "Ei1(-(y+z))*exp(-2*y)", "--expect", "-1")
    assert code == 0


def test_bracket_expect_mismatch_exits_one(capsys):
    code, out, _ = run(capsys, "bracket", "--entry", "T1:A2-A2i", "--param", "b=1",
                       "--f", "exp(-x)", "--g", "1", "--expect", "1", "--format", "json")
    doc = json.loads(out)
    assert code == 1 and doc["verdict"] == "fail" and doc["witness"]


def test_bracket_parse_error(capsys):
    code, _, err = run(capsys, "bracket", "--entry", "T1:A2-A2i", "--f", "exp(x", "--g", "1")
    assert code == 2 and "byte" in err


def test_hamvf(capsys):
    code, out, _ = run(capsys, "hamvf", "--entry", "T1:A2-A2i", "--param", "b=1", "--f", "1")
    assert code == 0 and out.startswith("X_f = (1) ∂x")


# -- integrate -------------------------------------------------------------------------------------------

def test_integrate_constant_field(capsys, tmp_path):
    traj = tmp_path / "t.csv"
    code, out, _ = run(capsys, "integrate", "--coords", "x,y", "--generator", "x=1,y=0", "--b", "1",
                       "--x0", "0,0", "--t1", "1", "--dt", "0.1", "--trajectory", str(traj))
    assert code == 0 and "x=1, y=0" in out
    lines = traj.read_text().splitlines()
    assert lines[0] == "t,x,y" and lines[-1] == "1.0,1.0,0.0"


@pytest.mark.parametrize("dt", ["0", "-0.1"])
def test_integrate_nonpositive_step(capsys, dt):
    code, _, _ = run(capsys, "integrate", "--coords", "x", "--generator", "x=1", "--b", "1",
                     "--x0", "0", "--t1", "1", "--dt", dt)
    assert code == 2


def test_integrate_domain_fault(capsys, tmp_path):
    traj = tmp_path / "t.json"
    code, out, _ = run(capsys, "integrate", "--coords", "x", "--generator", "x=ln(x)", "--b", "1",
                       "--x0", "0.5", "--t1", "5", "--dt", "0.01", "--trajectory", str(traj))
    assert code == 3 and "domain fault" in out and "near t=" in out
    doc = json.loads(traj.read_text())
    assert doc["fault"] and doc["t"][-1] < 5


def test_integrate_invariant_failure_exits_one(capsys):
    code, out, _ = run(capsys, "integrate", "--coords", "x,y", "--generator", "x=1", "--b", "1",
                       "--x0", "0,0", "--t1", "1", "--dt", "0.1", "--invariant", "x")
    assert code == 1 and "fail" in out


def test_integrate_entry_example_reports_drift(capsys):
    code, out, _ = run(capsys, "integrate", "--entry", "T2:III-IIIiv", "--param", "b=1",
                       "--b", "sin(t),1", "--x0", "1,0.5,0.2", "--t1", "2", "--dt", "0.01",
                       "--invariant", "x", "--format", "json")
    doc = json.loads(out)
    assert code == 1 and doc["verdict"] == "fail" and doc["max_drift"] > 0.1


def test_integrate_coefficient_count_mismatch(capsys):
    code, _, err = run(capsys, "integrate", "--entry", "T2:III-IIIiv", "--b", "1,2,3",
                       "--x0", "1,0.5,0.2", "--t1", "1", "--dt", "0.1")
    assert code == 2 and "3 coefficients for 2 generators" in err


def test_split_top_respects_parentheses():
    assert split_top("sin(t),max(1,2) ,1") == ["sin(t)", "max(1,2)", "1"]


# -- symmetry ---------------------------------------------------------------------------------------------

def test_symmetry_on_iii_iiiiv(capsys):
    code, out, _ = run(capsys, "symmetry", "--entry", "T2:III-IIIiv", "--param", "b=1",
                       "--h", "1-exp(-(y-z))")
    assert code == 0
    assert out.splitlines()[0] == "X_h = (y + z) ∂y + (y + z) ∂z"


def test_symmetry_of_zero(capsys):
    code, out, _ = run(capsys, "symmetry", "--entry", "T2:III-IIIiv", "--param", "b=1", "--h", "0")
    assert code == 0 and out.startswith("X_h = 0")


def test_symmetry_failure(capsys):
    code, out, _ = run(capsys, "symmetry", "--entry", "T2:III-IIIiv", "--param", "b=1", "--h", "x",
                       "--format", "json")
    doc = json.loads(out)
    assert code == 1 and doc["verdict"] == "fail" and doc["witness"]


def test_symmetry_without_examples(capsys):
    code, _, err = run(capsys, "symmetry", "--entry", "T1:A1-A1", "--h", "x")
    assert code == 2 and "no example" in err


# -- report ------------------------------------------------------------------------------------------------

def test_report_json_validates(capsys):
    code, out, _ = run(capsys, "report", "--format", "json")
    doc = json.loads(out)
    jsonschema.validate(doc, schema("report"))
    assert code == 0 and doc["ok"]
    assert not any(c["status"] == "disagreement" for c in doc["checks"])


def test_usage_error_from_argparse(capsys):
    assert main(["verify", "--bogus"]) == 2
    assert main([]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "jacobilie", "verify", "--entry", "NOPE"],
                       capture_output=True, text=True)
    assert r.returncode == 2
    r = subprocess.run([sys.executable, "-m", "jacobilie", "list", "--format", "json"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)

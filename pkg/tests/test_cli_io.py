import json
import subprocess
import sys

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from padic_cris.cli_io import (
    PRECISION_ENV,
    CrystalDocError,
    crystal_from_doc,
    crystal_to_doc,
    main,
    run_command,
)
from padic_cris.fcrystal import FCrystal, supersingular_curve


def _run(*argv):
    code, rep = run_command(["--no-timings", *argv])
    assert "timings" not in rep
    return code, rep


def test_teich_known_values():
    code, rep = _run("teich", "--p", "5", "--N", "2", "--a", "2")
    assert code == 0 and rep["results"]["teich"] == 7
    assert rep["status"] == "ok" and rep["tool"] == "padic-cris"
    code, rep = _run("teich", "--p", "2", "--f", "4", "--N", "3", "--a", "0,1,0,0")
    assert code == 0 and rep["results"]["teich"] == [2, 3, 0, 0]


def test_field_report():
    code, rep = _run("field", "--p", "2", "--f", "4", "--N", "2")
    assert code == 0
    assert rep["results"]["minpoly"] == [1, 0, 0, 1, 1] and rep["results"]["order"] == 16


def test_slopes_and_fppf_reports():
    code, rep = _run("fcrystal-slopes", "--preset", "ordinary-av", "--g", "2", "--degree", "1", "--p", "5")
    assert code == 0 and rep["results"]["slopes"] == [["0", 2], ["1", 2]]
    code, rep = _run("fcrystal-fppf", "--preset", "ordinary-av", "--g", "2", "--all-degrees", "--p", "5", "--tower-levels", "1")
    assert code == 0 and rep["results"]["ranks"] == [0, 2, 4, 2, 0]


def test_brauer_and_negative_rank():
    code, rep = _run("fcrystal-brauer", "--preset", "supersingular-exe", "--degree", "2", "--ns-rank", "6")
    assert code == 0 and rep["results"]["profile"]["h2_free_rank"] == 6
    code, rep = _run("fcrystal-brauer", "--preset", "supersingular-exe", "--degree", "2", "--ns-rank", "7")
    assert code == 2


def test_cech_and_acris_commands():
    code, rep = _run("cech-h", "--p", "3", "--D", "9", "--degree", "0")
    assert code == 0 and rep["results"]["H0"]["basis"] == ["1", "x^3"]
    code, rep = _run("acris-log", "--p", "2", "--exps", "1")
    assert code == 0 and all(c["status"] == "pass" for c in rep["checks"])
    code, rep = _run("acris-exact", "--p", "3", "--samples", "5")
    assert code == 0


@pytest.mark.parametrize(
    "argv",
    [
        ["teich", "--p", "4", "--a", "1"],
        ["bogus"],
        ["teich", "--p", "2"],
        ["fcrystal-slopes", "--preset", "slope-module", "--slope", "2", "2"],
        ["fcrystal-slopes"],
    ],
)
def test_usage_errors_exit_2(argv):
    code, rep = run_command(argv)
    assert code == 2


def test_fault_injection_exits_1():
    code, rep = _run("selftest", "--criteria", "3", "--inject-fault", "gamma_val")
    assert code == 1 and rep["status"] == "check-failed"
    code, rep = _run("selftest", "--criteria", "3")
    assert code == 0


def test_invalid_document_diagnostics(tmp_path):
    bad = {"p": 2, "f": 1, "N": 2, "rank": 2, "label": "x", "matrix": [["0", "1"]], "extra": 1}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    code, rep = _run("fcrystal-slopes", "--input", str(path))
    assert code == 2 and rep["diagnostics"]
    with pytest.raises(CrystalDocError) as ei:
        crystal_from_doc(bad)
    assert len(ei.value.diagnostics) >= 1


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(p=6),
        lambda d: d.update(rank=3),
        lambda d: d["matrix"][0].append("0"),
        lambda d: d["matrix"][0].__setitem__(0, "a"),
        lambda d: d.pop("matrix"),
    ],
)
def test_document_consistency(mutate):
    doc = crystal_to_doc(supersingular_curve(3, 2))
    mutate(doc)
    with pytest.raises(CrystalDocError):
        crystal_from_doc(doc)


@st.composite
def _crystals(draw):
    p = draw(st.sampled_from([2, 3, 5]))
    f = draw(st.integers(1, 2))
    N = draw(st.integers(1, 3))
    r = draw(st.integers(1, 3))
    coords = st.lists(st.integers(0, p ** (N + 1) - 1), min_size=f, max_size=f)
    rows = draw(st.lists(st.lists(coords, min_size=r, max_size=r), min_size=r, max_size=r))
    label = draw(st.text(alphabet="abcXYZ_0123", min_size=1, max_size=8))
    return FCrystal.from_matrix(p, f, N, rows, label)


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(_crystals())
def test_document_round_trip(X):
    doc = crystal_to_doc(X)
    Y = crystal_from_doc(json.loads(json.dumps(doc)))
    assert Y == X and Y.label == X.label
    assert crystal_to_doc(Y) == doc


def test_document_round_trip_through_cli(tmp_path):
    code, rep = _run("fcrystal-new", "--preset", "slope-module", "--slope", "2", "1", "--p", "3", "--N", "2")
    path = tmp_path / "m.json"
    path.write_text(json.dumps(rep["results"]["crystal"]))
    code, rep2 = _run("fcrystal-slopes", "--input", str(path))
    assert code == 0 and rep2["results"]["slopes"] == [["1/2", 2]]


def test_precision_env(monkeypatch):
    monkeypatch.delenv(PRECISION_ENV, raising=False)
    assert _run("fcrystal-new", "--preset", "slope-module", "--slope", "1", "0")[1]["config"]["N"] == 3
    monkeypatch.setenv(PRECISION_ENV, "5")
    assert _run("fcrystal-new", "--preset", "slope-module", "--slope", "1", "0")[1]["config"]["N"] == 5
    monkeypatch.setenv(PRECISION_ENV, "zero")
    assert run_command(["teich", "--p", "2", "--a", "1"])[0] == 2


def test_main_prints_sorted_json(capsys):
    assert main(["--no-timings", "teich", "--p", "3", "--N", "2", "--a", "2"]) == 0
    out = capsys.readouterr().out
    rep = json.loads(out)
    assert rep["results"]["teich"] == 8
    assert out == json.dumps(rep, indent=2, sort_keys=True) + "\n"


def test_module_entry_point_reads_stdin():
    doc = json.dumps(crystal_to_doc(supersingular_curve(2, 3)))
    proc = subprocess.run(
        [sys.executable, "-m", "padic_cris", "--no-timings", "fcrystal-slopes", "--input", "-"],
        input=doc, capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["results"]["slopes"] == [["1/2", 2]]


def test_output_is_deterministic():
    argv = ["fcrystal-fppf", "--preset", "supersingular-exe", "--degree", "2", "--tower-levels", "2"]
    assert _run(*argv) == _run(*argv)

import csv
import json
import math
import subprocess
import sys

import pytest

from kappaform.cli import DEFAULT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_USAGE, main

SMALL = {"grid": {"n": 1024, "r_max": 30.0}, "l_max": 2}


@pytest.fixture
def cfg(tmp_path):
    def write(extra=None):
        data = json.loads(json.dumps(SMALL))
        for k, v in (extra or {}).items():
            if isinstance(v, dict) and isinstance(data.get(k), dict):
                data[k].update(v)
            else:
                data[k] = v
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(data))
        return str(path)

    return write


def report(out, name):
    return json.loads((out / name).read_text())


def test_print_config_round_trips(capsys, tmp_path):
    assert main(["print-config"]) == EXIT_OK
    dumped = json.loads(capsys.readouterr().out)
    assert dumped["grid"] == DEFAULT_CONFIG["grid"]
    (tmp_path / "c.json").write_text(json.dumps(dumped))
    assert main(["print-config", "--config", str(tmp_path / "c.json")]) == EXIT_OK


def test_vsh_check_default_and_corrupted(tmp_path, cfg):
    assert main(["vsh-check", "--out", str(tmp_path / "a")]) == EXIT_OK
    rep = report(tmp_path / "a", "vsh_check.json")
    assert rep["pass"] and rep["schema_version"] == "1.0"
    assert {"check", "measured", "tolerance", "pass"} <= set(rep["checks"][0])
    bad = cfg({"l_max": 4, "quadrature": {"n_theta": 1, "n_phi": 1}})
    assert main(["vsh-check", "--config", bad, "--out", str(tmp_path / "b")]) == EXIT_FAIL
    assert not report(tmp_path / "b", "vsh_check.json")["pass"]
    zero = cfg({"l_max": 0})
    assert main(["vsh-check", "--config", zero, "--out", str(tmp_path / "c")]) == EXIT_OK


def test_spectrum_rows(tmp_path):
    out = tmp_path / "s"
    args = ["spectrum", "--kappa", "0", "--kappa", "1", "--kappa", "-1", "--kappa", "inf", "--out", str(out)]
    assert main(args) == EXIT_OK
    rows0 = list(csv.DictReader(open(out / "spectrum_kappa_0.csv")))
    assert all(float(r["zeta"]) == 0.0 for r in rows0)
    rows1 = list(csv.DictReader(open(out / "spectrum_kappa_1.csv")))
    at1 = [r for r in rows1 if r["lambda"] and float(r["lambda"]) == 1.0]
    assert float(at1[0]["zeta"]) == pytest.approx(-math.pi / 4, abs=1e-15)
    rows_m = list(csv.DictReader(open(out / "spectrum_kappa_-1.csv")))
    disc = [r for r in rows_m if r["kind"] == "discrete"]
    assert len(disc) == 1
    assert float(disc[0]["eigenvalue"]) == -1.0
    assert float(disc[0]["norm"]) == pytest.approx(1.0, abs=1e-8)
    assert (out / "spectrum_kappa_inf.csv").exists()
    # 17 significant digits
    assert rows1[0]["lambda"] == "0.10000000000000001"


def test_make_field_qform_decompose(tmp_path, cfg):
    out = tmp_path / "q"
    c = cfg({"field": {"kind": "singular", "profile": "r_exp"}})
    assert main(["make-field", "--config", c, "--out", str(out)]) == EXIT_OK
    field = str(out / "field_singular.txt")
    assert main(["qform", "--config", c, "--field", field, "--kappa", "-1", "--kappa", "1", "--out", str(out)]) == EXIT_OK
    res = json.loads((out / "qform_result.json").read_text())
    assert res["singular"]
    # single l = 1 mode with amplitude sqrt(4 pi / 3): Q_k = (4 pi / 3)(55/12 - 44 k / 9)
    amp = 4 * math.pi / 3
    for item in res["results"]:
        assert item["value"] == pytest.approx(amp * (55 / 12 - 44 * item["kappa"] / 9), rel=1e-5)
    assert main(["decompose", "--config", c, "--field", field, "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(open(out / "decompose.csv")))
    assert {(r["l"], r["m"], r["channel"]) for r in rows} == {("1", "0", "u")}


def test_regular_field_is_kappa_independent(tmp_path, cfg):
    out = tmp_path / "r"
    c = cfg({"field": {"kind": "regular", "profile": "r2_exp", "l": 2, "m": 0}})
    assert main(["make-field", "--config", c, "--out", str(out)]) == EXIT_OK
    field = str(out / "field_regular.txt")
    assert main(["qform", "--config", c, "--field", field, "--kappa", "-1", "--kappa", "1", "--out", str(out)]) == EXIT_OK
    res = json.loads((out / "qform_result.json").read_text())
    assert not res["singular"]
    vals = [r["value"] for r in res["results"]]
    assert vals[0] == pytest.approx(vals[1], rel=1e-6)


def test_zero_and_longitudinal_fields(tmp_path, cfg, caplog):
    out = tmp_path / "z"
    c = cfg({"field": {"kind": "zero"}})
    main(["make-field", "--config", c, "--out", str(out)])
    assert main(["decompose", "--config", c, "--field", str(out / "field_zero.txt"), "--out", str(out)]) == EXIT_OK
    assert (out / "decompose.csv").read_text().count("\n") == 1
    c = cfg({"field": {"kind": "longitudinal", "profile": "r2_gauss", "l": 1}})
    main(["make-field", "--config", c, "--out", str(out)])
    code = main(["decompose", "--config", c, "--field", str(out / "field_longitudinal.txt"), "--out", str(out)])
    assert code == EXIT_FAIL
    assert "not transverse" in caplog.text
    rows = list(csv.DictReader(open(out / "decompose.csv")))
    assert all(abs(float(r["value_re"])) + abs(float(r["value_im"])) < 1e-8 for r in rows)


def test_usage_errors(tmp_path, cfg):
    out = str(tmp_path / "e")
    assert main(["qform", "--field", str(tmp_path / "missing.txt"), "--out", out]) == EXIT_USAGE
    assert main(["qform", "--out", out]) == EXIT_USAGE
    assert main(["spectrum", "--kappa", "abc", "--out", out]) == EXIT_USAGE
    assert main(["spectrum", "--kappa=-inf", "--out", out]) == EXIT_USAGE
    (tmp_path / "bad.json").write_text('{"grid": {"nodes": 3}}')
    assert main(["vsh-check", "--config", str(tmp_path / "bad.json"), "--out", out]) == EXIT_USAGE
    (tmp_path / "neg.json").write_text('{"tolerances": {"gram": 0}}')
    assert main(["vsh-check", "--config", str(tmp_path / "neg.json"), "--out", out]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == EXIT_USAGE


def test_fock_check(tmp_path, cfg):
    out = tmp_path / "f"
    assert main(["fock-check", "--out", str(out)]) == EXIT_OK
    rep = report(out, "fock_check.json")
    by = {c["check"]: c for c in rep["checks"]}
    assert by["discrete_vacuum_eigenvalue"]["value"] == "2j"
    assert by["vacuum_eigenvalue[continuum]"]["value"] == "22"
    one = cfg({"fock": {"lambdas": [1.0], "kappa": None}})
    assert main(["fock-check", "--config", one, "--out", str(out)]) == EXIT_OK
    by = {c["check"]: c for c in report(out, "fock_check.json")["checks"]}
    assert by["vacuum_eigenvalue[continuum]"]["value"] == "1"


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "kappaform", "vsh-check", "--out", str(tmp_path)], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("PASS")

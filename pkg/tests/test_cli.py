import json
import subprocess
import sys
import time

import numpy as np
import pytest

from entcap.cli import main
from entcap.documents import OperatorDocument, ResultDocument, encode_complex_array
from entcap.gco import gco_build, qft_powers
from entcap.linalg import random_unitary, swap_operator


@pytest.fixture
def files(tmp_path, cz_matrix):
    paths = {}

    def put(name, mat, dims=None, label=None):
        p = tmp_path / f"{name}.json"
        OperatorDocument(mat, dims, label).dump(p)
        paths[name] = str(p)

    put("I4", np.eye(4), (2, 2))
    put("CZ", cz_matrix, (2, 2), "CZ")
    put("SWAP", swap_operator(2), (2, 2))
    put("U", random_unitary(4, 0).matrix)
    put("U6", random_unitary(6, 0).matrix)
    put("qft3", gco_build(qft_powers(3)).unitary, (3, 3))
    (tmp_path / "bad.json").write_text(json.dumps({"dims": [2, 2], "matrix": [[1, 0]]}))
    paths["bad"] = str(tmp_path / "bad.json")
    (tmp_path / "trivial.json").write_text(json.dumps({"m": 2, "n": 2, "members": ["I", "I"]}))
    paths["trivial"] = str(tmp_path / "trivial.json")
    (tmp_path / "wide.json").write_text(json.dumps({"m": 3, "n": 2,
                                                    "members": ["I", "I", "I"]}))
    paths["wide"] = str(tmp_path / "wide.json")
    paths["dir"] = tmp_path
    return paths


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, "--json", *argv)
    assert code == 0, err
    return json.loads(out)["values"]


def test_metric_identity_vs_cz(capsys, files):
    v = run_json(capsys, "metric", "--a", files["I4"], "--b", files["CZ"], "--dims", "2", "2")
    assert v["d_eigenphase"] == 1.0
    # the product-state maximum is 1, reached at |1>|+>
    assert v["d_pi"] == pytest.approx(1.0, abs=1e-4)


def test_metric_same_operator(capsys, files):
    code, out, _ = run(capsys, "metric", "--a", files["U"], "--b", files["U"])
    assert code == 0
    assert "d_eigenphase = 0" in out


def test_metric_malformed_names_field(capsys, files):
    code, _, err = run(capsys, "metric", "--a", files["bad"], "--b", files["I4"])
    assert code == 2
    assert "matrix" in err


def test_metric_dimension_mismatch(capsys, files):
    code, _, err = run(capsys, "metric", "--a", files["I4"], "--b", files["U6"])
    assert code == 3
    code, _, _ = run(capsys, "metric", "--a", files["I4"], "--b", files["CZ"], "--dims", "2", "3")
    assert code == 3


def test_capacity_both_cz(capsys, files):
    v = run_json(capsys, "capacity", "--both", "--dims", "2", "2", files["CZ"])
    assert v["C_E"] == pytest.approx(1 / np.sqrt(2), abs=2e-3)
    assert v["C"] == pytest.approx(1 / np.sqrt(2), abs=2e-3)
    assert abs(v["gap"]) < 2e-3 and v["violation"] is False
    assert set(v["C_witness_local_unitary"]) == {"v1", "v2", "swap"}


def test_capacity_dual_swap(capsys, files):
    v = run_json(capsys, "capacity", "--dual", "--dims", "2", "2", files["SWAP"])
    assert v["C_E"] < 1e-8


def test_capacity_dual_qft3(capsys, files):
    code, out, _ = run(capsys, "capacity", "--dual", "--dims", "3", "3", files["qft3"])
    assert code == 0
    assert "C_E = 0.8165" in out


def test_capacity_requires_dims(capsys, files):
    code, _, err = run(capsys, "capacity", files["U"])
    assert code == 2 and "--dims" in err
    code, _, _ = run(capsys, "capacity", "--dims", "2", "3", files["U"])
    assert code == 3


def test_gco_builtin_cz(capsys):
    v = run_json(capsys, "gco", "--builtin", "cz")
    assert v["family_rank"] == 2 and v["abelian"] is True
    assert v["C_E"] == pytest.approx(0.70711, abs=1e-4)
    assert v["C_E_abelian"] == pytest.approx(0.70711, abs=1e-4)


def test_gco_builtin_shift_phase(capsys):
    v = run_json(capsys, "gco", "--builtin", "shift_phase_3")
    assert v["abelian"] is False
    assert v["witness_beta"] is not None
    assert v["C_E"] == pytest.approx(np.sqrt(2 / 3), abs=2e-3)


def test_gco_family_trivial_and_emit(capsys, files):
    out_op = files["dir"] / "op.json"
    v = run_json(capsys, "gco", "--family", files["trivial"], "--emit-operator", str(out_op))
    assert v["family_rank"] == 1
    assert v["C_E"] < 1e-8
    assert v["witness_beta"] is None
    assert np.array_equal(OperatorDocument.load(out_op).matrix, np.eye(4))


def test_gco_exit_codes(capsys, files):
    assert run(capsys, "gco", "--family", files["wide"])[0] == 5
    assert run(capsys, "gco", "--builtin", "nope")[0] == 2
    assert run(capsys, "gco", "--builtin", "qft_powers:x")[0] == 2
    assert run(capsys, "gco")[0] == 2


def test_usage_errors(capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "metric", "--a", "x.json")[0] == 2


def test_json_and_out(capsys, files):
    out_path = files["dir"] / "res.json"
    argv = ["metric", "--a", files["I4"], "--b", files["CZ"], "--dims", "2", "2", "--seed", "3"]
    code, first, _ = run(capsys, "--json", "--out", str(out_path), *argv)
    assert code == 0
    doc = ResultDocument.from_json(first)
    assert doc.seed == 3 and doc.command[0] == "entcap"
    assert ResultDocument.from_json(out_path.read_text()) == doc
    # deterministic given the flags
    assert run(capsys, "--json", "--out", str(out_path), *argv)[1] == first
    # flags after the subcommand work too
    code, out, _ = run(capsys, *argv, "--json")
    assert code == 0 and json.loads(out)["values"] == doc.values


def test_human_output_five_digits(capsys, files):
    code, out, _ = run(capsys, "capacity", "--dims", "2", "2", files["CZ"])
    assert code == 0
    assert "C_E = 0.70711" in out


def test_reproduce_quick_and_seed_verdicts(capsys):
    verdicts = []
    for seed in ("7", "8"):
        t0 = time.perf_counter()
        code, out, err = run(capsys, "--json", "reproduce", "--quick", "--seed", seed)
        assert time.perf_counter() - t0 < 60
        rows = json.loads(out)["values"]["rows"]
        assert code == 0, [r for r in rows if not r["passed"]]
        verdicts.append([(r["name"], r["passed"]) for r in rows])
    assert verdicts[0] == verdicts[1]


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "entcap", "capacity", "--dims", "2", "2",
                           files["SWAP"]], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "C_E = " in proc.stdout


def test_operator_file_format(files):
    obj = json.loads(open(files["CZ"]).read())
    assert obj["dims"] == [2, 2]
    assert obj["matrix"][3][3] == [-1.0, 0.0]
    assert obj["matrix"] == encode_complex_array(np.diag([1, 1, 1, -1]))

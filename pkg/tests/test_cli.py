"""End-to-end tests of the command-line front end."""

import json
import os

import pytest

from src.main import run_command
from src.utils.file_utils import FileUtils

EXAMPLES = FileUtils.get_examples_directory()


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    monkeypatch.delenv("PEAKS_THREADS", raising=False)


class TestExample:
    def test_worked_example(self, capsys):
        status = run_command(["example", "--p", "30", "--mu", "1/3", "--pair", "pairB", "--grid", "400"])
        out = capsys.readouterr().out
        assert status == 0
        assert "nu_opt = 300.00" in out
        assert "k_opt = 8" in out
        assert "K_bound = 10" in out
        assert "n_0 = 10" in out

    def test_out_of_range_parameters(self, capsys):
        assert run_command(["example", "--p", "1", "--mu", "1/3"]) == 2
        assert capsys.readouterr().out == ""


class TestSolve:
    def test_pair_file(self, capsys):
        status = run_command(["solve", "--input", str(EXAMPLES / "worked_pair.json")])
        out = capsys.readouterr().out
        assert status == 0
        assert "K_bound = 10" in out
        assert "nu_opt = 300.00" in out

    def test_classical_route(self, capsys):
        status = run_command(["solve", "--input", str(EXAMPLES / "contraction_1d.json"),
                              "--route", "classical", "--grid", "200"])
        out = capsys.readouterr().out
        assert status == 0
        assert "nu_opt = 2.00" in out
        assert "k_opt = 0" in out

    def test_missing_input(self):
        assert run_command(["solve"]) == 2

    def test_unknown_argument(self):
        assert run_command(["solve", "--bogus"]) == 2

    def test_route_without_certificate(self):
        path = str(EXAMPLES / "worked_pair.json")
        assert run_command(["solve", "--input", path, "--route", "klgen"]) == 2

    def test_violated_pair(self, tmp_path):
        path = _write(tmp_path, "bad.json", {
            "example": {"p": 30, "mu": "1/3"},
            "pair": {"h": {"kind": "linear", "a": 1}, "beta": 0.5},
            "solver": {"grid": 200, "horizon": 10},
        })
        assert run_command(["solve", "--input", path]) == 1

    def test_pair_that_is_not_useful(self, tmp_path):
        path = _write(tmp_path, "loose.json", {
            "example": {"p": 30, "mu": "1/3"},
            "pair": {"h": {"kind": "affine", "a": 1, "c": 1000}, "beta": 0.5},
            "solver": {"grid": 200, "horizon": 10},
        })
        assert run_command(["solve", "--input", path]) == 1

    def test_save_and_csv(self, tmp_path, capsys):
        saved = tmp_path / "out" / "report.json"
        status = run_command(["solve", "--input", str(EXAMPLES / "worked_pair.json"),
                              "--grid", "300", "--format", "csv", "--save", str(saved)])
        out = capsys.readouterr().out
        assert status == 0
        assert out.startswith("section,key,value\n")
        assert "report,k_opt,8" in out
        data = json.loads(saved.read_text(encoding="utf-8"))
        assert data['entries']['k_opt'] == "8"
        assert float(data['appendix']['nu_opt']) == pytest.approx(300.0)


class TestCertificates:
    def test_klgen_to_pair(self, capsys):
        status = run_command(["convert", "klgen-to-pair", "--input", str(EXAMPLES / "worked_klgen.json"),
                              "--grid", "300"])
        out = capsys.readouterr().out
        assert status == 0
        assert "nu_opt = 300.00" in out
        assert "useful = yes" in out

    def test_verify_lyapunov(self, capsys):
        status = run_command(["verify", "lyapunov", "--input", str(EXAMPLES / "worked_lyapunov.json")])
        out = capsys.readouterr().out
        assert status == 0
        assert "certificate_passed = yes" in out
        assert "in_class_N = yes" in out

    def test_verify_pair(self, capsys):
        status = run_command(["verify", "pair", "--input", str(EXAMPLES / "worked_system.json"),
                              "--grid", "300"])
        out = capsys.readouterr().out
        assert status == 0
        assert "useful_witness = 0" in out
        assert "beta_interval = " in out


class TestTables:
    def test_table_1_matches_golden(self, capsys, golden_dir):
        assert run_command(["tables", "1"]) == 0
        with open(os.path.join(golden_dir, "table1.txt"), encoding="utf-8") as f:
            assert capsys.readouterr().out == f.read()

    def test_table_2_explains_every_discrepancy(self, capsys):
        assert run_command(["tables", "2"]) == 0
        out = capsys.readouterr().out
        assert "floating-point floor" in out
        assert "printed-value note" in out
        assert "mismatch" not in out

    def test_table_3_csv(self, capsys):
        assert run_command(["tables", "3", "--format", "csv"]) == 0
        assert capsys.readouterr().out.startswith('quantity,"30,1/3"')

    def test_no_such_table(self):
        assert run_command(["tables", "4"]) == 2

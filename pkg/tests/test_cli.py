import json
import subprocess
import sys

from confgeo.chart import save_chart
from confgeo.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestClassifyCommand:
    def test_assembled_chart_classifies(self, capsys):
        code, out, _ = run_cli(
            capsys, "classify", "--catalog", "ex33", "--m", "4", "--K", "2", "--grid", "3"
        )
        assert code == 0
        data = json.loads(out)
        assert data["branch"] == "ParallelB"
        assert data["eigenstructure"]["t"] == 2

    def test_infeasible_construction_exit_code(self, capsys):
        code, _, err = run_cli(capsys, "classify", "--catalog", "ex32", "--m", "4", "--K", "2")
        assert code == 2
        assert "infeasible" in err

    def test_invalid_parameters_exit_code(self, capsys):
        code, _, err = run_cli(capsys, "classify", "--catalog", "wp", "--m", "3", "--p", "2")
        assert code == 1
        assert "p + q < m" in err


class TestMapCommand:
    def test_pi_plus_representative_rejected(self, capsys):
        code, _, err = run_cli(capsys, "map", "--which", "psi1", "--point", "0,1,1,0,0,0")
        assert code == 1
        assert "pi_plus" in err

    def test_embedding_output_lightlike(self, capsys):
        code, out, _ = run_cli(capsys, "map", "--which", "sigma1", "--point", "2,2.2360679774997896,0,0")
        assert code == 0
        data = json.loads(out)
        assert data["lightlike"] is True
        assert data["output"] == [1.0, 2.0, 2.2360679774997896, 0.0, 0.0]

    def test_composite_reports_permutation(self, capsys):
        code, out, _ = run_cli(capsys, "map", "--which", "sigma^1", "--point", "0,0,0,0")
        assert code == 0
        data = json.loads(out)
        assert data["output"][-1] == 1.0
        assert "permutation" in data

    def test_unknown_map(self, capsys):
        code, _, err = run_cli(capsys, "map", "--which", "sigma^9", "--point", "0,0,0,0")
        assert code == 1


class TestAnalyzeCommand:
    def test_json_deterministic(self, capsys, tmp_path):
        args = ["analyze", "--catalog", "sxh", "--grid", "3"]
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        assert main(args + ["--out", str(p1)]) == 0
        assert main(args + ["--out", str(p2)]) == 0
        assert p1.read_bytes() == p2.read_bytes()
        data = json.loads(p1.read_text())
        assert data["n_points"] == 27
        assert set(data["points"][0]) == {
            "u",
            "rho",
            "H",
            "A_eigs",
            "B_eigs",
            "Phi_norm",
            "residuals",
        }

    def test_csv_output(self, capsys, tmp_path):
        out = tmp_path / "a.csv"
        code = main(["analyze", "--catalog", "sxh", "--grid", "3", "--format", "csv", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 28
        assert lines[0].startswith("u_0,u_1,u_2,rho,H")

    def test_chart_file_source(self, capsys, tmp_path, sxh_chart):
        path = tmp_path / "chart.json"
        save_chart(sxh_chart, path)
        code, out, _ = run_cli(capsys, "residuals", "--chart-file", str(path), "--grid", "3")
        assert code == 0
        data = json.loads(out)
        assert data["pass"] is True

    def test_requires_exactly_one_source(self, capsys):
        code, _, err = run_cli(capsys, "analyze")
        assert code == 1
        assert "exactly one" in err


class TestThreadsEnv:
    def test_invalid_value_rejected(self, capsys, monkeypatch):
        monkeypatch.setenv("CONFGEO_THREADS", "lots")
        code, _, err = run_cli(capsys, "residuals", "--catalog", "sxh", "--grid", "3")
        assert code == 1
        assert "CONFGEO_THREADS" in err

    def test_value_recorded(self, capsys, monkeypatch):
        monkeypatch.setenv("CONFGEO_THREADS", "2")
        code, out, _ = run_cli(capsys, "residuals", "--catalog", "sxh", "--grid", "3")
        assert code == 0
        assert json.loads(out)["threads"] == 2


class TestVerifyCatalog:
    def test_full_catalog_passes(self, capsys):
        code, out, _ = run_cli(capsys, "verify-catalog", "--grid", "3")
        data = json.loads(out)
        assert code == 0, data
        assert data["pass"] is True
        assert data["catalog"]["ex32"]["status"] == "infeasible (documented)"
        for name in ("hxr", "sxh", "hxh", "wp", "ex33"):
            assert data["catalog"][name]["status"] == "pass"


def test_console_script_help():
    proc = subprocess.run(
        [sys.executable, "-m", "confgeo.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "verify-catalog" in proc.stdout

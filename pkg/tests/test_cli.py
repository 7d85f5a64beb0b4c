import json
import subprocess
import sys

import pytest

from hss_stab.cli import main
from hss_stab.runner import export_results, run_command
from hss_stab import ConfigurationError, load_scenario
from tests.conftest import scenario_path

TWO_NODE = str(scenario_path("two_node"))
RLC = str(scenario_path("rlc_grid"))
TOY = str(scenario_path("toy_gain"))


def run_cli(*argv):
    return main(list(argv))


class TestEig:
    def test_csv_output(self, tmp_path):
        out = tmp_path / "eig.csv"
        code = run_cli(
            "eig", "--scenario", RLC, "--out", str(out), "--no-timestamp"
        )
        assert code == 0
        lines = out.read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")][0]
        assert header == "index,re,im,dominant_component,dominant_harmonic,classification,spurious_flag"
        rows = [l for l in lines if not l.startswith("#")][1:]
        assert len(rows) == 6  # 6 grid states at hmax 0

    def test_json_output(self, tmp_path):
        out = tmp_path / "eig.json"
        assert run_cli("eig", "--scenario", RLC, "--format", "json", "--out", str(out)) == 0
        doc = json.loads(out.read_text())
        assert doc["meta"]["stable"] is True
        assert len(doc["records"]) == 6

    def test_hmax_override(self, tmp_path):
        out = tmp_path / "eig.csv"
        assert run_cli("eig", "--scenario", RLC, "--hmax", "1", "--out", str(out), "--no-timestamp") == 0
        rows = [l for l in out.read_text().splitlines() if not l.startswith("#")][1:]
        assert len(rows) == 18

    def test_fail_on_unstable(self, tmp_path):
        # negative gain makes the toy plant unstable: eigenvalue at +|k|
        raw = json.loads(open(TOY).read())
        raw["ciders"][0]["control"][0]["d"]["0"] = [
            [-2.0, 0.0, 0.0],
            [0.0, -2.0, 0.0],
            [0.0, 0.0, -2.0],
        ]
        p = tmp_path / "unstable.json"
        p.write_text(json.dumps(raw))
        out = tmp_path / "out.csv"
        code = run_cli(
            "eig", "--scenario", str(p), "--out", str(out), "--fail-on-unstable"
        )
        assert code == 4
        assert "# stable=false" in out.read_text()

    def test_determinism_subprocess(self, tmp_path):
        outputs = []
        for k in range(2):
            out = tmp_path / f"run{k}.csv"
            res = subprocess.run(
                [
                    sys.executable,
                    "-m",
                    "hss_stab.cli",
                    "eig",
                    "--scenario",
                    TWO_NODE,
                    "--hmax",
                    "2",
                    "--out",
                    str(out),
                    "--no-timestamp",
                ],
                capture_output=True,
            )
            assert res.returncode == 0, res.stderr
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


class TestValidationErrors:
    def test_bad_scenario_exit_2(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{}")
        assert run_cli("eig", "--scenario", str(p)) == 2
        err = capsys.readouterr().err
        record = json.loads(err.strip().splitlines()[-1])
        assert record["exit_code"] == 2

    def test_sweep_one_value_exit_2(self, capsys):
        code = run_cli(
            "sweep", "--scenario", RLC, "--param", "grid.branches.0.r", "--values", "0.1"
        )
        assert code == 2

    def test_classify_missing_hardware_exit_2(self, capsys):
        code = run_cli(
            "classify",
            "--scenario",
            RLC,
            "--control-params",
            "analysis.stability_margin",
        )
        assert code == 2

    def test_htf_at_pole_exit_3(self, capsys):
        # s exactly on an RLC eigenvalue
        code = run_cli("htf", "--scenario", RLC, "--s=-50+9999.8749992187j")
        assert code == 3
        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["error"] == "PoleProximityError"


class TestCommands:
    def test_htf(self, tmp_path):
        out = tmp_path / "htf.csv"
        assert run_cli(
            "htf", "--scenario", RLC, "--s", "10+100j", "--out", str(out), "--no-timestamp"
        ) == 0
        rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert rows[0] == "row,col,re,im"
        assert len(rows) == 1 + 6 * 6

    def test_sweep_named(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run_cli(
            "sweep", "--scenario", RLC, "--sweep", "resistance", "--out", str(out), "--no-timestamp"
        ) == 0
        rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert rows[0] == "param_value,trace_id,re,im"
        assert len(rows) == 1 + 20 * 6

    def test_classify_runs(self, tmp_path):
        out = tmp_path / "cls.csv"
        code = run_cli(
            "classify",
            "--scenario",
            RLC,
            "--control-params",
            "analysis.stability_margin",
            "--hardware-params",
            "grid.branches.0.r",
            "--out",
            str(out),
            "--no-timestamp",
        )
        assert code == 0
        body = out.read_text()
        assert "CDI" in body

    def test_spurious_runs(self, tmp_path):
        out = tmp_path / "sp.csv"
        code = run_cli(
            "spurious",
            "--scenario",
            RLC,
            "--hmax",
            "2",
            "--hmax-probe",
            "5",
            "--out",
            str(out),
            "--no-timestamp",
        )
        assert code == 0
        header = [l for l in out.read_text().splitlines() if not l.startswith("#")][0]
        assert "spurious_flag" in header


class TestExport:
    def test_round_trip_exact(self, tmp_path):
        scenario = load_scenario(RLC)
        results = run_command("eig", scenario)
        out = tmp_path / "r.csv"
        export_results(results, "csv", out, timestamp=False)
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        header = lines[0].split(",")
        for line, rec in zip(lines[1:], results.records):
            parts = line.split(",")
            assert float(parts[header.index("re")]) == rec[1]
            assert float(parts[header.index("im")]) == rec[2]
        # json round trip
        out_json = tmp_path / "r.json"
        export_results(results, "json", out_json, timestamp=False)
        doc = json.loads(out_json.read_text())
        for row, rec in zip(doc["records"], results.records):
            assert row["re"] == rec[1]
            assert row["im"] == rec[2]

    def test_empty_rejected(self):
        from hss_stab.runner import ResultSet

        with pytest.raises(ConfigurationError):
            export_results(ResultSet("eigenvalues", ("a",), ()), "csv", "/tmp/x.csv")

    def test_trace_long_format(self, tmp_path):
        scenario = load_scenario(TOY)
        results = run_command(
            "sweep",
            scenario,
            parameter="ciders.0.control.0.d.0.0.0",
            values=[1.0, 2.0, 3.0],
        )
        assert len(results.records) == 3 * 3  # 3 steps x 3 eigenvalues

"""CLI harness: config validation, exit codes, reproducible output."""
import json

import pytest

from dqsim.circuit import Circuit
from dqsim.cli import main


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def _bell_ir():
    c = Circuit(2, 2)
    c.h(0).cx(0, 1).measure(0, 0).measure(1, 1)
    return c.to_ir()


class TestConfigHandling:
    def test_missing_config_file(self, tmp_path, capsys):
        rc = main(["run", "--config", str(tmp_path / "nope.json")])
        assert rc == 2
        assert "config error" in capsys.readouterr().err

    def test_version_required(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"circuit": _bell_ir()})
        assert main(["run", "--config", cfg]) == 2

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"version": 1, "circuit": _bell_ir(), "shotz": 10})
        assert main(["run", "--config", cfg]) == 2
        assert "shotz" in capsys.readouterr().err

    def test_unknown_scenario_value(self, tmp_path, capsys):
        cfg = _write(
            tmp_path,
            "c.json",
            {"version": 1, "n": 3, "scenario": {"eps_m": "half"}, "shots": 10,
             "replications": 1, "eps_g": [0.01]},
        )
        assert main(["qpe-sweep", "--config", cfg]) == 2


class TestRun:
    def test_local_run_report(self, tmp_path, capsys):
        cfg = _write(
            tmp_path,
            "c.json",
            {"version": 1, "circuit": _bell_ir(), "shots": 200, "seed": 3},
        )
        assert main(["run", "--config", cfg]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["gate_app"] == 1
        assert report["nonlocal_count"] == 0
        assert report["histogram"]["shots"] == 200
        keys = set(report["histogram"]["counts"])
        assert keys <= {"00", "11"}

    def test_distributed_run_report(self, tmp_path, capsys):
        cfg = _write(
            tmp_path,
            "c.json",
            {
                "version": 1,
                "circuit": _bell_ir(),
                "nodes": {"nodes": {"1": [0], "2": [1]}, "coupling_p": 0.5},
                "noise": {"eps_d": 0.001, "eps_g": 0.01, "eps_m": 0.0025},
                "shots": 500,
                "seed": 5,
            },
        )
        assert main(["run", "--config", cfg]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["gate_app"] == 1
        assert report["nonlocal_count"] == 1
        assert len(report["gadgets"]) == 1
        assert report["gadget_physical_cnots"] == 3
        assert abs(report["analytic_fidelity"] - 0.984) < 1e-9
        assert report["link"]["gadget_count"] == 1
        assert report["link"]["total_trials"] >= 1

    def test_compile_failure_exit_code(self, tmp_path, capsys):
        import numpy as np

        cnotish = np.eye(4)[[0, 3, 2, 1]].astype(complex)
        swap = np.eye(4)[[0, 2, 1, 3]].astype(complex)
        c = Circuit(2, 2)
        c.unitary(swap @ cnotish @ np.diag([1, 1j, 1, -1j]), [0, 1])
        c.measure(0, 0).measure(1, 1)
        cfg = _write(
            tmp_path,
            "c.json",
            {
                "version": 1,
                "circuit": c.to_ir(),
                "nodes": {"nodes": {"1": [0], "2": [1]}},
                "shots": 10,
            },
        )
        assert main(["run", "--config", cfg]) == 3
        report = json.loads(capsys.readouterr().out)
        assert report["gate_app"] == 0
        assert "error" in report

    def test_circuit_from_file(self, tmp_path, capsys):
        circ_path = _write(tmp_path, "circ.json", _bell_ir())
        cfg = _write(
            tmp_path, "c.json", {"version": 1, "circuit": circ_path, "shots": 50, "seed": 1}
        )
        assert main(["run", "--config", cfg]) == 0
        assert json.loads(capsys.readouterr().out)["shots"] == 50


class TestSweeps:
    def test_qpe_sweep_csv(self, tmp_path):
        cfg = _write(
            tmp_path,
            "c.json",
            {"version": 1, "n": 3, "eps_g": [0.01], "shots": 200, "replications": 2},
        )
        out = tmp_path / "sweep.csv"
        assert main(["qpe-sweep", "--config", cfg, "--out", str(out), "--seed", "7"]) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "variant,eps_g,mean_p_correct,std_p_correct,replications,shots"
        assert len(lines) == 3
        variants = [line.split(",")[0] for line in lines[1:]]
        assert variants == ["QPE", "DQPE"]
        for line in lines[1:]:
            mean = float(line.split(",")[2])
            assert 0.0 <= mean <= 1.0

    def test_qae_csv(self, tmp_path):
        cfg = _write(
            tmp_path,
            "c.json",
            {
                "version": 1,
                "n": 1,
                "powers": [0, 1],
                "shots_per_power": 50,
                "node_counts": [1, 2],
                "p": [1.0],
                "replications": 2,
            },
        )
        out = tmp_path / "qae.csv"
        assert main(["qae", "--config", cfg, "--out", str(out), "--seed", "9"]) == 0
        lines = out.read_text().strip().split("\n")
        header = lines[0].split(",")
        assert header[:3] == ["n_nodes", "n_grover", "p"]
        # 2 node counts x 2 schedule prefixes x 1 p value
        assert len(lines) == 5
        for line in lines[1:]:
            row = dict(zip(header, line.split(",")))
            assert int(row["k_sampled"]) == int(float(row["k_expected"]))  # p = 1

    def test_distload_csv(self, tmp_path):
        cfg = _write(
            tmp_path,
            "c.json",
            {"version": 1, "n": 3, "nodes": [1, 2], "eps": [0.0], "shots": 400},
        )
        out = tmp_path / "dist.csv"
        assert main(["distload", "--config", cfg, "--out", str(out), "--seed", "11"]) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "n_nodes,eps,hellinger_fidelity,gadgets,shots"
        assert len(lines) == 3
        for line in lines[1:]:
            fid = float(line.split(",")[2])
            assert 0.9 < fid <= 1.0

    def test_resources_csv(self, tmp_path):
        cfg = _write(
            tmp_path,
            "c.json",
            {"version": 1, "n": 1, "powers": [0, 1], "node_counts": [2], "p": [1.0, 0.5]},
        )
        out = tmp_path / "res.csv"
        assert main(["resources", "--config", cfg, "--out", str(out), "--seed", "13"]) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "run_id,n_nodes,n_grover,p,k_total"
        assert len(lines) == 5


class TestReproducibility:
    def test_bit_identical_csv(self, tmp_path):
        cfg = _write(
            tmp_path,
            "c.json",
            {"version": 1, "n": 3, "eps_g": [0.005], "shots": 100, "replications": 2},
        )
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["qpe-sweep", "--config", cfg, "--out", str(a), "--seed", "21"]) == 0
        assert main(["qpe-sweep", "--config", cfg, "--out", str(b), "--seed", "21"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_output(self, tmp_path):
        cfg = _write(
            tmp_path,
            "c.json",
            {"version": 1, "n": 3, "eps_g": [0.005], "shots": 100, "replications": 2},
        )
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["qpe-sweep", "--config", cfg, "--out", str(a), "--seed", "21"])
        main(["qpe-sweep", "--config", cfg, "--out", str(b), "--seed", "22"])
        assert a.read_bytes() != b.read_bytes()

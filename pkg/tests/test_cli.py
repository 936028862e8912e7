import csv
import json

import pytest

from spinmet import cli


def write_config(tmp_path, name="cfg.json", **cfg):
    cfg.setdefault("seed", 0)
    cfg.setdefault("output_dir", "out")
    cfg.setdefault("parallelism", 1)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_bounds_task(tmp_path, capsys):
    path = write_config(tmp_path, task="bounds")
    assert cli.main(["run", str(path)]) == 0
    out = capsys.readouterr().out
    assert "one_qubit_max=500.0" in out and "two_qubit_max=1000.5" in out
    assert "two_qubit_from_01_max=500.5" in out and "two_qubit_min=200.5" in out
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["seed"] == 0 and "numpy" in manifest["versions"]
    assert set(manifest["files"]) == {"bounds.csv", "result.json"}
    assert cli.main(["report", str(tmp_path / "out")]) == 0
    assert "two_qubit_min: 200.5" in capsys.readouterr().out


def test_met_scan_on_bundled_one_qubit_fixture(tmp_path):
    path = write_config(tmp_path, task="met-scan", n_qubits=1,
                        hamiltonian={"bundled": "qubit_z"},
                        scan={"t_grid": [0, 100, 190, 210, 250]},
                        optimizer={"n_random_restarts": 1})
    assert cli.main(["run", str(path)]) == 0
    rows = read_csv(tmp_path / "out" / "scan.csv")
    env = [float(r["envelope"]) for r in rows]
    assert all(b <= a for a, b in zip(env, env[1:]))
    (met,) = read_csv(tmp_path / "out" / "met.csv")
    assert float(met["met"]) == 210.0 and float(met["bracket_low"]) == 190.0


def test_malformed_hamiltonian_exit_2(tmp_path, capsys):
    (tmp_path / "h.json").write_text(json.dumps(
        {"n_qubits": 1, "terms": [{"pauli": "Q", "coeff": 1.0}], "metadata": {"hf_state": "0"}}))
    path = write_config(tmp_path, task="met-scan", n_qubits=1, hamiltonian="h.json",
                        scan={"t_grid": [0]})
    assert cli.main(["run", str(path)]) == cli.EXIT_CONFIG
    assert "terms[0].pauli[0]" in capsys.readouterr().err
    assert cli.main(["validate", str(path)]) == cli.EXIT_CONFIG


@pytest.mark.parametrize("cfg, code", [
    ({"task": "nonsense"}, cli.EXIT_CONFIG),
    ({"task": "bounds", "seed": "x"}, cli.EXIT_CONFIG),
    ({"task": "met-scan", "target": "1"}, cli.EXIT_CONFIG),  # no scan block
    ({"task": "met-scan", "target": "1", "scan": {"t_grid": [0]},
      "device": {"j_max_ghz": -1.0}}, cli.EXIT_VALIDATION),
    ({"task": "met-scan", "target": [1.0, 1.0], "scan": {"t_grid": [0]}}, cli.EXIT_VALIDATION),
    ({"task": "met-scan", "target": "1", "scan": {"t_grid": [0]},
      "optimizer": {"bogus": 1}}, cli.EXIT_CONFIG),
    ({"task": "bounds", "budget": {"pi_gate_time": -5}}, cli.EXIT_VALIDATION),
])
def test_error_codes(tmp_path, cfg, code):
    path = write_config(tmp_path, **cfg)
    assert cli.main(["validate", str(path)]) == code


def test_missing_seed_and_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"task": "bounds"}))
    assert cli.main(["validate", str(p)]) == cli.EXIT_CONFIG
    p.write_text("{not json")
    assert cli.main(["run", str(p)]) == cli.EXIT_CONFIG
    assert cli.main(["run", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG


def test_report_requires_manifest(tmp_path):
    assert cli.main(["report", str(tmp_path)]) == cli.EXIT_CONFIG


def test_fit_task_report_trace_and_determinism(tmp_path, capsys):
    cfg = dict(task="fit", data={"d": 2, "synthetic": {"n_pairs": 256, "components": [
        {"v": 0.1}, {"v": 0.2}]}, "t_range": {"t_min": 0, "t_max": 32, "linear_step": 1}},
        bootstrap={"n_resamples": 500})
    a = write_config(tmp_path, "a.json", output_dir="a", **cfg)
    b = write_config(tmp_path, "b.json", output_dir="b", **cfg)
    assert cli.main(["run", str(a)]) == 0 and cli.main(["run", str(b)]) == 0
    assert (tmp_path / "a" / "cdf.csv").read_bytes() == (tmp_path / "b" / "cdf.csv").read_bytes()
    capsys.readouterr()
    assert cli.main(["report", str(tmp_path / "a")]) == 0
    text = capsys.readouterr().out
    assert "fit hi: v =" in text and "terms 2 (L=2)" in text and "fit expansion" in text


def test_param_sweep_and_bond_sweep(tmp_path):
    sweep = write_config(tmp_path, "s.json", task="param-sweep", n_qubits=1, target="1",
                         axis="iq_max", factors=[1.0, 2.0], output_dir="s",
                         scan={"t_grid": [0, 90, 110, 190, 210]})
    assert cli.main(["run", str(sweep)]) == 0
    rows = read_csv(tmp_path / "s" / "sweep.csv")
    assert [float(r["met"]) for r in rows] == [210.0, 110.0]
    bond = write_config(tmp_path, "b.json", task="bond-sweep", n_qubits=2, output_dir="b",
                        series={"bundled": "dimerseries"}, scan={"t_grid": [0, 1]},
                        optimizer={"n_random_restarts": 0, "max_iterations": 5})
    assert cli.main(["run", str(bond)]) == 0
    assert len(read_csv(tmp_path / "b" / "mets.csv")) == 5


def test_haar_campaign_small(tmp_path, capsys):
    path = write_config(tmp_path, task="haar-campaign", n_qubits=1, n_pairs=3,
                        t_grid=[0, 100, 200, 300], n_segments=10,
                        optimizer={"n_random_restarts": 1}, bootstrap={"n_resamples": 200},
                        fit={"models": ["hi"]})
    assert cli.main(["run", str(path)]) == 0
    assert len(read_csv(tmp_path / "out" / "pairs.csv")) == 12
    capsys.readouterr()
    cli.main(["report", str(tmp_path / "out")])
    assert "maximal MET" in capsys.readouterr().out

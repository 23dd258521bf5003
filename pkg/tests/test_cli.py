import json
import subprocess
import sys

import numpy as np
import pytest

from younghom import young
from younghom.cli import main
from younghom.transport import FluxProfile


def _cfg(tmp_path, name, obj):
    f = tmp_path / name
    f.write_text(json.dumps(obj))
    return str(f)


ELSASSER = {"model": "elsasser", "beta": 1.0, "epsilon": 1e-2}


def test_measure_writes_round_trippable_json(tmp_path, capsys):
    cfg = _cfg(tmp_path, "m.json", {"opacity": ELSASSER, "bands": 12, "groups": 2, "n_samples": 5000})
    assert main(["measure", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    m = young.load(tmp_path / "o" / "measure.json")
    assert m.groups.n_groups == 2 and m.parameter_count == 24
    diag = json.loads((tmp_path / "o" / "diagnostics.json").read_text())
    assert diag["row_sums"] == pytest.approx([1.0, 1.0], abs=1e-12)
    assert "row_sums" in capsys.readouterr().out


def test_measure_seed_flag(tmp_path):
    cfg = _cfg(tmp_path, "m.json", {"opacity": ELSASSER, "sampler": "uniform", "n_samples": 2000})
    main(["measure", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "3"])
    main(["measure", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "3"])
    main(["measure", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "4"])
    a, b, c = ((tmp_path / d / "measure.json").read_bytes() for d in "abc")
    assert a == b and a != c


def test_joint_identical_reports_diagonal(tmp_path, capsys):
    cfg = _cfg(
        tmp_path,
        "j.json",
        {"kind": "joint", "opacity": ELSASSER, "bands": 8, "spacing": "logarithmic", "n_samples": 4000},
    )
    assert main(["measure", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert json.loads(capsys.readouterr().out)["diagonal"] is True
    assert young.load(tmp_path / "joint.json").probabilities.shape == (8, 8)


def test_kappa_table(tmp_path):
    layers = [
        {"model": "synthetic", "n_lines": 30, "seed": 1, "temperature": T, "pressure": p}
        for T, p in [(280.0, 9e4), (240.0, 4e4)]
    ]
    cfg = _cfg(
        tmp_path,
        "k.json",
        {"kind": "kappa", "layers": layers, "energy_range": [1000, 2000], "groups": 3, "bands": 5, "n_samples": 3000},
    )
    assert main(["measure", "--config", cfg, "--out", str(tmp_path)]) == 0
    t = young.load(tmp_path / "kappa.json")
    assert t.n_layers == 2 and len(t.kappa) == 3


@pytest.mark.parametrize("method", ["exact", "homogenized", "planck"])
def test_solve_methods(tmp_path, method):
    cfg = _cfg(
        tmp_path,
        "s.json",
        {"method": method, "opacity": ELSASSER, "n_samples": 20_000, "fine_points": 20_001, "n_x": 5},
    )
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    prof = FluxProfile.from_csv(tmp_path / "profile.csv")
    assert prof.positions.size == 5 and np.all(prof.values > 0)


def test_compare(tmp_path, capsys):
    FluxProfile(np.arange(3.0), np.array([1.0, 2.0, 4.0])).save(tmp_path / "a.csv")
    FluxProfile(np.arange(3.0), np.array([1.0, 2.0, 5.0])).save(tmp_path / "b.csv")
    assert main(["compare", "--ref", str(tmp_path / "a.csv"), "--test", str(tmp_path / "b.csv")]) == 0
    assert "max_rel_err=0.25" in capsys.readouterr().out


def test_experiment_with_overrides(tmp_path, capsys):
    cfg = _cfg(tmp_path, "e.json", {"epsilon": 1e-2, "n_samples": 50_000})
    rc = main(["experiment", "elsasser", "--config", cfg, "--out", str(tmp_path / "o"), "--bands", "10"])
    assert rc == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["parameter_counts"]["homogenized"] == 10
    assert "homogenized" in capsys.readouterr().out


def test_experiment_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("YOUNGHOM_OUT", str(tmp_path))
    cfg = _cfg(tmp_path, "e.json", {"epsilon": 1e-2, "n_samples": 10_000})
    assert main(["experiment", "elsasser", "--config", cfg]) == 0
    assert (tmp_path / "elsasser" / "summary.json").exists()


def test_iron_without_data_exits_3(tmp_path, capsys):
    rc = main(["experiment", "iron", "--out", str(tmp_path)])
    assert rc == 3
    assert "skipped" in capsys.readouterr().err
    assert json.loads((tmp_path / "summary.json").read_text())["status"] == "skipped"


def test_config_errors_exit_2(tmp_path):
    assert main(["experiment", "elsasser", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    bad = _cfg(tmp_path, "b.json", {"bands": 0})
    assert main(["experiment", "elsasser", "--config", bad, "--out", str(tmp_path)]) == 2
    other = _cfg(tmp_path, "o.json", {"problem": "iron"})
    assert main(["experiment", "elsasser", "--config", other, "--out", str(tmp_path)]) == 2
    unknown = _cfg(tmp_path, "u.json", {"opacity": {"model": "voigt"}})
    assert main(["measure", "--config", unknown, "--out", str(tmp_path)]) == 2


def test_missing_table_exits_3(tmp_path):
    cfg = _cfg(tmp_path, "m.json", {"opacity": {"model": "table", "path": str(tmp_path / "none.txt")}})
    assert main(["measure", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_numerical_failure_exits_4(tmp_path):
    # Planck weighting is undefined for a vanishing opacity
    cfg = _cfg(tmp_path, "s.json", {"method": "planck", "opacity": {"model": "constant", "value": 0.0}, "fine_points": 11})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 4


def test_missing_out_without_env(tmp_path, monkeypatch):
    monkeypatch.delenv("YOUNGHOM_OUT", raising=False)
    cfg = _cfg(tmp_path, "e.json", {"epsilon": 1e-2, "n_samples": 1000})
    assert main(["experiment", "elsasser", "--config", cfg]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "younghom", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "experiment" in r.stdout

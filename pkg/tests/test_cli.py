import csv
import json
import math

import numpy as np
import pytest

from chi2chaos import cli
from chi2chaos.cli import (
    config_diagnostics,
    family_kernel,
    load_config,
    main,
    resolve_config,
    run_scenario,
    shipped_scenarios,
    validate_config,
)
from chi2chaos.errors import ConfigError
from chi2chaos.spectral2 import spectral


BASE_CONFIG = {
    "id": "tiny",
    "target": {"alphas": [1.0, 2.0]},
    "family": {"name": "diag", "entries": [[1.0, 1.0], [2.0, -1.0], [0.0, 1.0]]},
    "indices": [2, 4, 8],
    "mc": {"samples": 2000, "seed": 321},
    "outputs": ["cumulant_gaps", "gamma_stat", "ks", "empirical_cumulants"],
}


def write_config(tmp_path, **overrides):
    doc = json.loads(json.dumps(BASE_CONFIG))
    doc.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def test_shipped_scenarios_present_and_valid():
    shipped = shipped_scenarios()
    assert set(shipped) == {
        "second-chaos-converging", "gaussian-counterexample",
        "two-eigenvalue-q2-example", "gamma-nu1",
    }
    for path in shipped.values():
        assert validate_config(path) == []


def test_validate_ok(tmp_path):
    path = write_config(tmp_path)
    assert validate_config(path) == []


def test_validate_duplicate_alphas(tmp_path):
    path = write_config(tmp_path, target={"alphas": [1.0, 1.0]})
    problems = validate_config(path)
    assert problems and "alphas[1]" in problems[0]


def test_validate_decreasing_indices(tmp_path):
    path = write_config(tmp_path, indices=[4, 2])
    problems = validate_config(path)
    assert problems and "strictly increasing" in problems[0]


def test_validate_unknown_family_and_outputs(tmp_path):
    path = write_config(tmp_path, family={"name": "nope"})
    assert any("unknown family" in p for p in validate_config(path))
    path = write_config(tmp_path, outputs=["gamma_stat", "wat"])
    assert any("unknown metric" in p for p in validate_config(path))


def test_validate_q_chaos_needs_two_weights(tmp_path):
    path = write_config(tmp_path, target={"alphas": [1.0]},
                        outputs=["q_chaos"])
    assert any("two-weight" in p for p in validate_config(path))


def test_load_config_raises_on_invalid(tmp_path):
    path = write_config(tmp_path, indices=[])
    with pytest.raises(ConfigError):
        load_config(path)


def test_family_kernels():
    diag = family_kernel(BASE_CONFIG["family"], 4)
    assert np.allclose(diag.coeffs, np.diag([1.25, 1.75, 0.25]))

    split = family_kernel({"name": "equal-split", "signs": "alternating"}, 6)
    vals = np.diag(split.coeffs)
    assert np.allclose(np.abs(vals), 1.0 / math.sqrt(12.0))
    assert np.sum(vals > 0) == 3

    rank1 = family_kernel({"name": "rank-one-difference", "scale": 0.5}, 4)
    eig = spectral(rank1).eigenvalues
    c = 0.25
    assert np.allclose(sorted(eig), sorted([0.5 * math.sqrt(1 - c * c),
                                            -0.5 * math.sqrt(1 - c * c)]))


def test_run_scenario_outputs(tmp_path):
    path = write_config(tmp_path)
    csv_path, summary_path = run_scenario(path, tmp_path / "out")
    rows = list(csv.DictReader(open(csv_path)))
    assert [int(r["n"]) for r in rows] == [2, 4, 8]
    assert list(rows[0]) == ["n", "kappa_gap_2", "kappa_gap_3", "gamma_stat",
                             "ks", "emp_kappa_2", "emp_kappa_3", "emp_kappa_4"]
    gs = [float(r["gamma_stat"]) for r in rows]
    assert gs[0] > gs[1] > gs[2]

    summary = json.load(open(summary_path))
    assert summary["metrics"]["gamma_stat"]["monotone_decreasing"] is True
    assert summary["labels"]["gamma_stat"] == "unconditional (sufficient)"
    assert summary["labels"]["distance"] == "kolmogorov"


def test_run_scenario_no_mc(tmp_path):
    path = write_config(tmp_path)
    csv_path, _ = run_scenario(path, tmp_path / "out", no_mc=True)
    rows = list(csv.DictReader(open(csv_path)))
    assert "ks" not in rows[0] and "emp_kappa_2" not in rows[0]
    assert "gamma_stat" in rows[0]


def test_run_scenario_exact_columns_independent_of_mc(tmp_path):
    path = write_config(tmp_path)
    a, _ = run_scenario(path, tmp_path / "a")
    b, _ = run_scenario(path, tmp_path / "b", seed=999)
    rows_a = list(csv.DictReader(open(a)))
    rows_b = list(csv.DictReader(open(b)))
    for ra, rb in zip(rows_a, rows_b):
        assert ra["gamma_stat"] == rb["gamma_stat"]
        assert ra["kappa_gap_2"] == rb["kappa_gap_2"]
        assert ra["ks"] != rb["ks"]


def test_run_scenario_q_chaos_columns(tmp_path):
    path = write_config(
        tmp_path,
        id="q2",
        target={"alphas": [0.5, -0.5]},
        family={"name": "rank-one-difference", "scale": 0.5},
        outputs=["gamma_stat", "q_chaos"],
    )
    csv_path, _ = run_scenario(path, tmp_path / "out", no_mc=True)
    rows = list(csv.DictReader(open(csv_path)))
    assert "cond_a" in rows[0] and "cond_b1" in rows[0]
    assert float(rows[-1]["cond_b1"]) < float(rows[0]["cond_b1"])


def test_resolve_config_and_exit_codes(tmp_path, capsys):
    assert resolve_config("gamma-nu1").name == "gamma-nu1.json"
    with pytest.raises(ConfigError):
        resolve_config("no-such-scenario")

    assert main(["list-scenarios"]) == 0
    assert "gamma-nu1" in capsys.readouterr().out

    bad = write_config(tmp_path, indices=[])
    assert main(["validate", str(bad)]) == 2
    good = write_config(tmp_path)
    assert main(["validate", str(good)]) == 0
    assert main(["run", "missing.json", "--out", str(tmp_path)]) == 2


def test_guard_abort_exit_code(tmp_path, capsys):
    config = write_config(
        tmp_path,
        family={"name": "equal-split", "signs": "alternating"},
        indices=[2, 4000],  # 4000^2 coefficients trip the size guard
        outputs=["gamma_stat"],
    )
    code = main(["run", str(config), "--out", str(tmp_path / "out"), "--no-mc"])
    assert code == 3
    err = capsys.readouterr().err
    assert "n=4000" in err


def test_main_run_tiny(tmp_path, capsys):
    config = write_config(tmp_path, mc={"samples": 500, "seed": 5},
                          indices=[2, 4])
    code = main(["run", str(config), "--out", str(tmp_path / "runout"),
                 "--mc-samples", "400"])
    assert code == 0
    out_lines = capsys.readouterr().out.splitlines()
    assert out_lines[0].endswith("tiny.csv")

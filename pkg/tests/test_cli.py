import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sta_thermalizer import __version__
from sta_thermalizer.cli import main, parse_range


def read_csv(path):
    meta, rows, header = {}, [], None
    for line in path.read_text().splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        elif header is None:
            header = line.split(",")
        else:
            rows.append([float(v) for v in line.split(",")])
    return meta, header, np.array(rows)


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


FAST = ["--steps", "400"]
ENSEMBLE = ["ensemble", "--omegaf", "0.25", "--tf", "6", "--steps", "400", "--ntraj", "200",
            "--sde-steps", "2000", "--samples", "20"]


def test_synthesize(tmp_path):
    code, out = run(tmp_path, "s.csv", "synthesize", "--tf", "2", *FAST)
    assert code == 0
    meta, header, data = read_csv(out)
    assert header[:3] == ["t", "omega_sq", "gamma"]
    assert data.shape == (401, len(header))
    assert meta["command"] == "synthesize" and meta["version"] == __version__
    assert meta["non_markovian"] == "true" and meta["trap_inversion"] == "false"
    assert float(meta["min_omega_sq"]) == pytest.approx(1.0, abs=1e-9)
    # round-trip precision
    first = out.read_text().splitlines()[len(meta) + 1]
    assert all(float(format(float(v), ".17g")) == float(v) for v in first.split(","))


def test_synthesize_expansion_flags_inversion(tmp_path):
    code, out = run(tmp_path, "s.csv", "synthesize", "--omegaf", "0.25", "--tf", "2", *FAST)
    meta, _, _ = read_csv(out)
    assert meta["trap_inversion"] == "true" and meta["non_markovian"] == "false"


def test_synthesize_to_stdout(capsys):
    assert main(["synthesize", *FAST]) == 0
    assert capsys.readouterr().out.startswith("# command: synthesize\n")


def test_propagate(tmp_path, capsys):
    code, out = run(tmp_path, "p.csv", "propagate", "--tf", "2", *FAST)
    assert code == 0
    meta, header, data = read_csv(out)
    assert float(meta["final_deviation"]) < 1e-6
    col = {h: i for i, h in enumerate(header)}
    rel = data[:, col["relative_entropy"]]
    assert rel[0] < 1e-8 and rel[-1] < 1e-8 and rel.max() > 0.01
    assert math.isnan(data[0, col["entropy_rate_lhs"]])
    lhs, rhs = data[1:-1, col["entropy_rate_lhs"]], data[1:-1, col["entropy_rate_rhs"]]
    assert np.max(np.abs(lhs - rhs)) < 1e-3
    assert "final deviation" in capsys.readouterr().out


def test_ensemble_reproducible_across_runs_and_workers(tmp_path):
    a = run(tmp_path, "a.csv", *ENSEMBLE, "--seed", "3", "--workers", "1")
    b = run(tmp_path, "b.csv", *ENSEMBLE, "--seed", "3", "--workers", "2")
    c = run(tmp_path, "c.csv", *ENSEMBLE, "--seed", "4", "--workers", "1")
    assert a[0] == b[0] == c[0] == 0
    assert a[1].read_bytes() == b[1].read_bytes()
    assert a[1].read_bytes() != c[1].read_bytes()
    meta, header, data = read_csv(a[1])
    assert "workers" not in meta and meta["seed"] == "3"
    assert data.shape == (20, len(header))


def test_ensemble_rejects_non_markovian(tmp_path, capsys):
    code, _ = run(tmp_path, "e.csv", "ensemble", "--omegaf", "3", "--ntraj", "100", "--sde-steps", "1000",
                  "--samples", "10", *FAST)
    assert code == 2
    assert "PreconditionError" in capsys.readouterr().err


def test_ensemble_minimum_size(tmp_path):
    assert run(tmp_path, "e.csv", *ENSEMBLE[:-6], "--ntraj", "10")[0] == 2


def test_sweep(tmp_path):
    code, out = run(tmp_path, "w.csv", "sweep", "--omegaf-range", "0.2:4:7", "--betaf-range", "0.2:4:7",
                    "--tf", "2", "--steps", "200", "--workers", "2")
    assert code == 0
    meta, header, data = read_csv(out)
    assert meta["cells"] == "49" and meta["error_cells"] == "0"
    ratio, g = data[:, 5], data[:, 2]
    clear = np.abs(ratio - 1.0) > 0.02
    assert np.all((g[clear] < 0) == (ratio[clear] > 1))
    on = np.abs(ratio - 1.0) < 1e-12
    assert np.all(np.abs(data[on, 4]) < 1e-10)


def test_sweep_failed_cells_are_nan(tmp_path):
    code, out = run(tmp_path, "w.csv", "sweep", "--omegaf-range", "1:400:2", "--betaf-range", "2:2:1",
                    "--workers", "1", "--steps", "200")
    assert code == 0
    meta, _, data = read_csv(out)
    assert meta["error_cells"] == "1"
    assert np.isfinite(data[0, 2]) and np.isnan(data[1, 2])


def test_check(tmp_path):
    code, out = run(tmp_path, "c.txt", "check", "--skip-stochastic")
    assert code == 0
    text = out.read_text()
    assert "[FAIL]" not in text and "sinh" in text


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"omegaf": 0.25, "tf": 2.0, "steps": 200}))
    code, out = run(tmp_path, "s.csv", "synthesize", "--config", str(cfg), "--tf", "6")
    meta, _, data = read_csv(out)
    assert code == 0
    assert meta["omegaf"] == "0.25" and meta["tf"] == "6" and meta["steps"] == "200"
    assert data[-1, 0] == 6.0


@pytest.mark.parametrize(
    "argv, code",
    [
        (["nope"], 1),
        (["synthesize", "--tf", "abc"], 1),
        (["sweep", "--omegaf-range", "1:2"], 1),
        (["synthesize", "--tf", "-1"], 2),
        (["synthesize", "--steps", "1"], 2),
        (["synthesize", "--betaf", "1000"], 2),
        (["synthesize", "--out", "/nonexistent/dir/x.csv"], 2),
    ],
)
def test_exit_codes(argv, code, capsys):
    assert main(argv) == code


def test_bad_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["synthesize", "--config", str(bad)]) == 1
    bad.write_text(json.dumps({"frequency": 2}))
    assert main(["synthesize", "--config", str(bad)]) == 1
    bad.write_text(json.dumps({"tf": "long"}))
    assert main(["synthesize", "--config", str(bad)]) == 1


def test_parse_range():
    assert list(parse_range("0:1:3")) == [0.0, 0.5, 1.0]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "sta_thermalizer", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout


def test_debug_logging(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("STA_LOG", "debug")
    import logging

    logging.getLogger().handlers.clear()
    assert main(["synthesize", "--steps", "100", "--out", str(tmp_path / "x.csv")]) == 0
    assert "configuration" in capsys.readouterr().err
    logging.getLogger().handlers.clear()

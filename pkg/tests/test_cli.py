import csv
import json

import numpy as np
import pytest

from dispinn import exact
from dispinn.cli import RunManifest, bundled_configs, main, uq_table
from dispinn.metrics import UQ_BOX
from dispinn.network import load_checkpoint, init_params

TINY = {
    "name": "tiny",
    "equation": {"kind": "kdv_kawahara", "solution": "kdv_single"},
    "domain": {"x_left": -5, "x_right": 5, "T": 1},
    "n_int": 64, "n_sb": 16, "n_tb": 16, "hidden_layers": 1, "width": 6, "lam": 0.1,
    "n_theta": 2, "max_iters": 3, "eval_nx": 21, "eval_nt": 6,
    "grid": {"width": [4, 6], "lam": [0.1, 1.0]},
}

TINY_UQ = {
    "name": "tiny_uq",
    "equation": {"kind": "kdv_parametric", "solution": "kdv_param"},
    "domain": {"x_left": -8, "x_right": 11, "T": 1, "param_low": [9, 0, 1, 1], "param_high": [9, 0, 1, 1]},
    "n_int": 64, "n_sb": 16, "n_tb": 16, "hidden_layers": 1, "width": 6, "lam": 0.1,
    "n_theta": 1, "max_iters": 2, "eval_nx": 21, "eval_nt": 6, "eval_params": 2,
}


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "absent.json"
    assert main(["train", "--config", str(missing), "--out-dir", str(tmp_path)]) != 0
    assert str(missing) in capsys.readouterr().err


def test_invalid_config(tmp_path, capsys):
    bad = write(tmp_path, {**TINY, "widht": 3})
    assert main(["train", "--config", bad, "--out-dir", str(tmp_path)]) == 1
    assert "widht" in capsys.readouterr().err


def test_bad_flags(tmp_path):
    cfg = write(tmp_path, TINY)
    assert main(["train", "--config", cfg, "--max-iters", "-1"]) == 2
    assert main(["ensemble", "--config", cfg, "--jobs", "0"]) == 2


def test_train_zero_iterations_is_untrained(tmp_path):
    cfg = write(tmp_path, TINY)
    assert main(["train", "--config", cfg, "--out-dir", str(tmp_path), "--max-iters", "0", "--seed", "3"]) == 0
    files = {p.name for p in tmp_path.iterdir()} - {"cfg.json"}
    assert files == {"tiny_seed3.ckpt", "tiny_seed3_history.csv", "tiny_seed3_samples.csv",
                     "tiny_seed3_manifest.json"}
    params = load_checkpoint(tmp_path / "tiny_seed3.ckpt")
    assert np.array_equal(params.theta, init_params(params.arch, 3).theta)
    assert read_csv(tmp_path / "tiny_seed3_history.csv") == [["iter", "loss"]]


def test_manifest_round_trip_and_rerun(tmp_path):
    cfg = write(tmp_path, TINY)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--config", cfg, "--out-dir", str(a)]) == 0
    text = (a / "tiny_seed0_manifest.json").read_text()
    m = RunManifest.from_json(text)
    assert m.to_json() == text
    assert m.seeds == [0] and m.config["max_iters"] == 3 and m.timings["wall_clock_s"] > 0
    # rerunning from the manifest reproduces identical numbers
    assert main(["train", "--config", str(a / "tiny_seed0_manifest.json"), "--out-dir", str(b)]) == 0
    assert np.array_equal(load_checkpoint(a / "tiny_seed0.ckpt").theta, load_checkpoint(b / "tiny_seed0.ckpt").theta)
    assert read_csv(a / "tiny_seed0_samples.csv") == read_csv(b / "tiny_seed0_samples.csv")


def test_samples_csv_parses_back(tmp_path):
    cfg = write(tmp_path, TINY)
    assert main(["train", "--config", cfg, "--out-dir", str(tmp_path), "--max-iters", "0"]) == 0
    rows = read_csv(tmp_path / "tiny_seed0_samples.csv")
    assert rows[0] == ["x", "t", "u_pinn", "u_exact"]
    data = np.array(rows[1:], dtype=float)
    assert data.shape == (201 * 51, 4)
    assert np.array_equal(data[:, 3], exact.kdv_single(data[:, 0], data[:, 1]))


def test_ensemble_table(tmp_path):
    cfg = write(tmp_path, TINY)
    assert main(["ensemble", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "tiny_ensemble.csv")
    assert len(rows) - 1 == 4 * 2
    header = rows[0]
    losses = [float(r[header.index("loss")]) for r in rows[1:]]
    e_t = [float(r[header.index("E_T")]) for r in rows[1:]]
    best = int(np.argmin(losses))
    manifest = RunManifest.from_json((tmp_path / "tiny_ensemble_manifest.json").read_text())
    assert manifest.command == "ensemble" and manifest.seeds == [0, 1]
    assert (tmp_path / "tiny_ensemble_best.ckpt").is_file()
    # without regularisation E_T is monotone in the loss, so the selected row holds the minimum
    assert e_t[best] == min(e_t)


def test_single_config_ensemble_equals_train(tmp_path):
    single = {k: v for k, v in TINY.items() if k != "grid"}
    single["n_theta"] = 1
    cfg = write(tmp_path, single)
    assert main(["ensemble", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    assert main(["train", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    assert np.array_equal(load_checkpoint(tmp_path / "tiny_ensemble_best.ckpt").theta,
                          load_checkpoint(tmp_path / "tiny_seed0.ckpt").theta)


def test_verify_bound(tmp_path):
    cfg = write(tmp_path, TINY)
    assert main(["train", "--config", cfg, "--out-dir", str(tmp_path), "--max-iters", "0"]) == 0
    ckpt = str(tmp_path / "tiny_seed0.ckpt")
    assert main(["verify-bound", "--config", cfg, "--checkpoint", ckpt, "--out-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "tiny_bound.json").read_text())
    assert report["status"] == "ok"
    assert {"E_G", "residual_integrals", "constants", "bound_rhs", "satisfied"} <= set(report)
    assert report["satisfied"] == (report["E_G"] <= report["bound_rhs"])
    assert main(["verify-bound", "--config", cfg, "--checkpoint", str(tmp_path / "none.ckpt")]) == 1


def test_parametric_verify_bound_not_covered(tmp_path):
    cfg = write(tmp_path, TINY_UQ)
    assert main(["train", "--config", cfg, "--out-dir", str(tmp_path), "--max-iters", "0"]) == 0
    ckpt = str(tmp_path / "tiny_uq_seed0.ckpt")
    assert main(["verify-bound", "--config", cfg, "--checkpoint", ckpt, "--out-dir", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "tiny_uq_bound.json").read_text())["status"] == "not covered"


def test_uq_zero_width_box(tmp_path, monkeypatch):
    cfg = write(tmp_path, TINY_UQ)
    monkeypatch.setenv("DISPINN_OUT", str(tmp_path / "env"))
    assert main(["train", "--config", cfg, "--max-iters", "0"]) == 0
    ckpt = tmp_path / "env" / "tiny_uq_seed0.ckpt"
    assert ckpt.is_file()
    assert main(["uq", "--config", cfg, "--checkpoint", str(ckpt), "--samples", "8", "--nx", "11", "--nt", "3"]) == 0
    rows = read_csv(tmp_path / "env" / "tiny_uq_uq.csv")
    assert rows[0] == ["x", "t", "mean_pinn", "std_pinn", "mean_exact", "std_exact"]
    data = np.array(rows[1:], dtype=float)
    assert data.shape == (33, 6)
    assert np.all(data[:, 3] == 0.0) and np.all(data[:, 5] == 0.0)


def test_uq_rejects_two_input_checkpoint(tmp_path, capsys):
    cfg = write(tmp_path, TINY)
    assert main(["train", "--config", cfg, "--out-dir", str(tmp_path), "--max-iters", "0"]) == 0
    uq = write(tmp_path, TINY_UQ, "uq.json")
    assert main(["uq", "--config", uq, "--checkpoint", str(tmp_path / "tiny_seed0.ckpt")]) == 1
    assert "inputs" in capsys.readouterr().err


def test_exact_versus_exact_uq_table():
    x, t = np.linspace(-8, 11, 21), np.linspace(0, 1, 3)
    mean, std, mean_e, std_e = uq_table(exact.kdv_param_exact, exact.kdv_param_exact, UQ_BOX, x, t, 32)
    assert np.allclose(mean, mean_e, atol=1e-12, rtol=0) and np.allclose(std, std_e, atol=1e-12, rtol=0)


def test_bundled_configs_listed():
    assert set(bundled_configs()) == {"kdv_single", "kdv_double", "kdv_uq", "kawahara", "ch_single", "ch_double",
                                      "bo_periodic", "bo_line"}


def test_kdv_single_bundled_smoke(tmp_path):
    assert main(["train", "--config", "kdv_single", "--out-dir", str(tmp_path), "--max-iters", "5"]) == 0
    assert len(list(tmp_path.iterdir())) == 4

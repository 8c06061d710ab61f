import json

import numpy as np
import pytest

from fracmem.cli import main, read_csv
from fracmem.config import ConfigError, config_hash, load_config

SMALL_RUN = [
    "--set", "grid.L=32", "--set", "grid.N=64",
    "--set", "solver.dt=0.05", "--set", "solver.T=20",
]

SMALL_VERIFY = {
    "verify": {
        "lemma21": {"pairs": [[1.0, 2.0]], "j": [0, 1], "k_over_sigma": [0.0], "sigma": 1.0,
                    "L": 32.0, "N": 64, "T": 10.0, "samples": 21, "bound": 10.0},
        "lemma22": {"c": [1.0], "alpha": [1.0], "T": 100.0, "per_decade": 64},
        "lemma23": {"c": [1.0], "beta": [2.0], "gamma": [0.5], "T": 100.0, "per_decade": 64,
                    "inject_wrong_bound": False},
        "gn": {"dims": [1], "q": [4], "sigma": [1.0], "samples": 5, "N": {"1": 64},
               "kmax": {"1": 6}, "refine_tol": 0.01, "scale_tol": 1e-12},
    }
}


def run(args, capsys=None):
    code = main(args)
    err = capsys.readouterr().err if capsys else ""
    return code, err


def test_simulate_outputs(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--out", str(out)] + SMALL_RUN) == 0
    for name in ("trajectory.csv", "decay_report.json", "manifest.json", "decay.png"):
        assert (out / name).exists()
    lines = (out / "trajectory.csv").read_text().split("\n")
    assert lines[0].startswith("# config_sha256=")
    assert lines[1] == "t,l2_u,hsigma_u,l2_ut,weighted_sum"
    assert "\r" not in (out / "trajectory.csv").read_text()
    data = read_csv(out / "trajectory.csv")
    assert data["t"][-1] == 20.0 and data["t"].size == 401
    gamma = 0.75
    ws = (1 + data["t"]) ** gamma * (data["l2_u"] + data["hsigma_u"] + data["l2_ut"])
    assert np.allclose(data["weighted_sum"], ws, rtol=1e-15)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["config_sha256"] == lines[0].split("=")[1]
    assert manifest["config_sha256"] == config_hash(manifest["config"])
    assert "trajectory.csv" in manifest["outputs"]
    report = json.loads((out / "decay_report.json").read_text())
    assert report["verdict"] == "global-looking"
    assert set(report["fits"]) == {"l2_u", "hsigma_u", "l2_ut"}


def test_csv_uses_seventeen_digits(tmp_path):
    out = tmp_path / "run"
    main(["simulate", "--out", str(out), "--set", "output.figures=false"] + SMALL_RUN)
    row = (out / "trajectory.csv").read_text().split("\n")[10].split(",")
    value = float(row[1])
    assert "%.17g" % value == row[1]


def test_zero_epsilon_run(tmp_path):
    out = tmp_path / "zero"
    code = main(["simulate", "--out", str(out), "--set", "solver.epsilon=0",
                 "--set", "output.figures=false"] + SMALL_RUN)
    assert code == 0
    data = read_csv(out / "trajectory.csv")
    for name in ("l2_u", "hsigma_u", "l2_ut", "weighted_sum"):
        assert np.all(data[name] == 0)


def test_growth_exit_code(tmp_path):
    code = main(["simulate", "--out", str(tmp_path), "--set", "output.figures=false",
                 "--set", "params.gamma=0.2", "--set", "params.p=3", "--set", "solver.epsilon=10",
                 "--set", "grid.N=256", "--set", "solver.T=50"])
    assert code == 2
    report = json.loads((tmp_path / "decay_report.json").read_text())
    assert report["verdict"] in ("growth", "overflow")


def test_malformed_config_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "params": {\n    "a": 1.0,\n    "m": ,\n  }\n}\n')
    code, err = run(["simulate", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 1
    assert f"{cfg}:4:" in err


def test_schema_error_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "grid": {\n    "N": "many"\n  }\n}\n')
    code, err = run(["simulate", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 1
    assert f"{cfg}:3:" in err and "grid/N" in err


def test_invalid_parameter_is_config_error(tmp_path, capsys):
    code, err = run(["simulate", "--out", str(tmp_path), "--set", "params.p=1"], capsys)
    assert code == 1
    assert "p must exceed 1" in err


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="solver"):
        load_config(overrides=["solver.stepsize=0.1"])


def test_set_overrides_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": {"gamma": 0.6}, "solver": {"dt": 0.1}}))
    merged = load_config(cfg, ["solver.dt=0.2", "sweep.axes={\"p\": [2, 3]}"])
    assert merged["params"]["gamma"] == 0.6
    assert merged["params"]["a"] == 1.0
    assert merged["solver"]["dt"] == 0.2
    assert merged["sweep"]["axes"] == {"p": [2, 3]}


def test_missing_config_file(tmp_path, capsys):
    code, err = run(["simulate", "--config", str(tmp_path / "none.json")], capsys)
    assert code == 1 and "cannot read" in err


def sweep_args(out, axes):
    return ["sweep", "--out", str(out), "--set", f"sweep.axes={json.dumps(axes)}",
            "--set", "output.figures=false"] + SMALL_RUN


def test_empty_sweep_axis(tmp_path, capsys):
    code, err = run(sweep_args(tmp_path, {"p": []}), capsys)
    assert code == 1 and "empty" in err
    code, _ = run(sweep_args(tmp_path, {}), capsys)
    assert code == 1


def test_sweep_rows_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(sweep_args(a, {"p": [2, 3], "a": [1.0, 2.0]}) + ["--workers", "2"]) == 0
    assert main(sweep_args(b, {"p": [2, 3], "a": [1.0, 2.0]})) == 0
    text = (a / "sweep.csv").read_text()
    assert text == (b / "sweep.csv").read_text()
    rows = text.split("\n")[2:-1]
    assert [r.split(",")[:2] for r in rows] == [["2", "1"], ["2", "2"], ["3", "1"], ["3", "2"]]


def test_sweep_records_failing_rows(tmp_path):
    assert main(sweep_args(tmp_path, {"p": [0.5, 2]})) == 0
    lines = (tmp_path / "sweep.csv").read_text().split("\n")
    header = lines[1].split(",")
    first = dict(zip(header, lines[2].split(",")))
    second = dict(zip(header, lines[3].split(",")))
    assert first["status"].startswith("error") and first["verdict"] == "error"
    assert second["status"] == "ok"


def test_simulate_is_deterministic(tmp_path):
    args = ["--set", "initial_data=\"random\"", "--seed", "7", "--set", "output.figures=false"]
    main(["simulate", "--out", str(tmp_path / "a")] + SMALL_RUN + args)
    main(["simulate", "--out", str(tmp_path / "b")] + SMALL_RUN + args)
    assert (tmp_path / "a/trajectory.csv").read_bytes() == (tmp_path / "b/trajectory.csv").read_bytes()


def test_fit_subcommand(tmp_path):
    main(["simulate", "--out", str(tmp_path), "--set", "output.figures=false"] + SMALL_RUN)
    out = tmp_path / "fit"
    assert main(["fit", "--input", str(tmp_path / "trajectory.csv"), "--out", str(out),
                 "--set", "fit.window=[5, 20]"]) == 0
    report = json.loads((out / "fit_report.json").read_text())
    sim = json.loads((tmp_path / "decay_report.json").read_text())
    assert report["window"] == [5, 20]
    assert report["fits"]["l2_u"]["slope"] < 0
    assert np.isfinite(sim["fits"]["l2_u"]["slope"])


def test_fit_without_input(tmp_path, capsys):
    code, err = run(["fit", "--out", str(tmp_path)], capsys)
    assert code == 1 and "no input" in err


def write_verify_config(path, wrong_bound):
    cfg = json.loads(json.dumps(SMALL_VERIFY))
    cfg["verify"]["lemma23"]["inject_wrong_bound"] = wrong_bound
    path.write_text(json.dumps(cfg, indent=2))
    return path


def test_verify_lemmas_passes_small_grid(tmp_path):
    cfg = write_verify_config(tmp_path / "v.json", False)
    assert main(["verify-lemmas", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "lemma_report.json").read_text())
    assert report["passed"] and report["failures"] == []
    assert len(report["lemma21"]) == 2 and len(report["gn"]) == 1


def test_verify_lemmas_wrong_bound_exit_code(tmp_path, capsys):
    cfg = write_verify_config(tmp_path / "v.json", True)
    code, err = run(["verify-lemmas", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 3
    assert "FAILED lemma23" in err
    report = json.loads((tmp_path / "lemma_report.json").read_text())
    assert report["failures"] == [{"lemma": "lemma23", "params": {"beta": 2.0, "c": 1.0, "gamma": 0.5}}]


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.strip() == "0.1.0"


def test_hash_ignores_execution_settings():
    a = load_config(overrides=["output.dir=\"x\"", "workers=4"])
    b = load_config(overrides=["output.dir=\"y\""])
    c = load_config(overrides=["solver.dt=0.01"])
    assert config_hash(a) == config_hash(b) != config_hash(c)

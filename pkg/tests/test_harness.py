import json

import numpy as np
import pytest

from bergman_lab import harness
from bergman_lab.cli import main

SMALL = ["--k-min", "-3", "--k-max", "2", "--x-extent", "4"]
SPARSE = {"resolutions": [-3, -4], "global": {"k_max": 2, "x_extent": 4.0},
          "params": {"n_functions": 3, "symbols": [{"kind": "holo_log"}]}}


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_calibration_covers_every_experiment():
    cal = harness.load_calibration()
    assert set(harness.EXPERIMENTS) <= set(cal)


def test_config_merging():
    cfg = harness.ExperimentConfig.from_dict(
        {"resolutions": [-4], "thresholds": {"constant_bound": 3.0}}, "sparse")
    assert cfg.resolutions == [-4]
    assert cfg.thresholds["constant_bound"] == 3.0
    assert cfg.thresholds["stability"] == harness.load_calibration()["sparse"]["stability"]
    assert cfg.params["n_functions"] == harness.DEFAULTS["sparse"]["n_functions"]


@pytest.mark.parametrize("bad", [{"global": {"alpha": -2}}, {"resolutions": []}])
def test_config_errors(bad):
    with pytest.raises(harness.ConfigError):
        harness.ExperimentConfig.from_dict(bad, "sparse")
    with pytest.raises(harness.ConfigError):
        harness.ExperimentConfig.from_dict({}, "nope")


def test_report_writes_files(tmp_path):
    rep = harness.ExperimentReport("demo")
    rep.add_row("t", a=1, b=0.5)
    rep.add_row("t", a=2, b=np.inf)
    rep.verdicts["ok"] = True
    rep.write(tmp_path)
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["passed"] and s["experiment"] == "demo"
    lines = (tmp_path / "table_t.csv").read_bytes().split(b"\r\n")
    assert lines[0] == b"a,b" and lines[1] == b"1,0.5"


def test_rel_change():
    assert harness.rel_change(1.0, 1.1) == pytest.approx(0.1 / 1.1, rel=1e-12)
    assert harness.rel_change(0.0, 0.0) == 0.0


def test_cli_mesh(capsys):
    assert main(["mesh"] + SMALL) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["N"] == 126 and out["whitney_radius"] == pytest.approx(0.44191, abs=1e-5)


@pytest.mark.parametrize("argv", [
    ["weights", "--kind", "power", "--s", "0.5"],
    ["norms", "--symbol", "log_im", "--mu-s", "0.5", "--lam-s", "-0.5"],
    ["op", "--kind", "commutator", "--symbol", "holo_log"],
    ["op", "--kind", "hankel", "--symbol", "cauchy", "--positive"],
])
def test_cli_subcommands(argv, capsys):
    assert main(argv + SMALL) == 0
    assert json.loads(capsys.readouterr().out)


def test_cli_weights_values(capsys):
    main(["weights", "--kind", "power", "--s", "0.5"] + SMALL)
    assert json.loads(capsys.readouterr().out)["b2_char"] == pytest.approx(4 / 3)


def test_cli_op_dump(tmp_path, capsys):
    path = str(tmp_path / "P.bin")
    assert main(["op", "--dump", path] + SMALL) == 0
    meta = json.loads((tmp_path / "P.bin.json").read_text())
    assert meta["N"] == 126


def test_cli_config_errors(tmp_path, capsys):
    assert main(["mesh", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["mesh", "--config", _write(tmp_path, "bad.json", "{not json")]) == 2
    assert main(["mesh", "--alpha", "-3"]) == 2
    assert main(["weights", "--kind", "power", "--s", "1.0", "--alpha", "-3"]) == 2
    assert main(["report", "--dir", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as e:
        main(["experiment", "unknown"])
    assert e.value.code == 2


def test_cli_refuses_non_b2_sigma(tmp_path, capsys):
    conf = {"resolutions": [-3], "global": {"k_max": 2, "x_extent": 4.0},
            "params": {"sigmas": [{"kind": "power", "s": 1.0}]}}
    argv = ["experiment", "nonanalytic", "--config", _write(tmp_path, "c.json", conf),
            "--out", str(tmp_path / "out")]
    assert main(argv) == 2
    assert "B2" in capsys.readouterr().err


def test_experiment_exit_code_and_determinism(tmp_path, capsys):
    conf = _write(tmp_path, "sparse.json", SPARSE)
    codes, outs = [], []
    for k in range(2):
        out = tmp_path / f"run{k}"
        codes.append(main(["experiment", "sparse", "--config", conf, "--seed", "7",
                           "--out", str(out)]))
        outs.append(out)
    s = json.loads((outs[0] / "summary.json").read_text())
    assert codes[0] == codes[1] == (0 if s["passed"] else 1)
    tables = sorted(p.name for p in outs[0].glob("*.csv"))
    assert tables and tables == sorted(p.name for p in outs[1].glob("*.csv"))
    for name in tables:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    capsys.readouterr()
    assert main(["report", "--dir", str(tmp_path)]) == codes[0]
    assert "sparse" in capsys.readouterr().out


def test_seed_changes_sampled_functions(tmp_path):
    conf = _write(tmp_path, "sparse.json", SPARSE)
    for seed in (1, 2):
        main(["experiment", "sparse", "--config", conf, "--seed", str(seed),
              "--out", str(tmp_path / f"s{seed}")])
    a = (tmp_path / "s1" / "table_functions.csv").read_bytes()
    b = (tmp_path / "s2" / "table_functions.csv").read_bytes()
    assert a != b


def test_counterexample_small(tmp_path):
    cfg = harness.ExperimentConfig.from_dict({"resolutions": [-3]}, "counterexample")
    rep = harness.run_experiment(cfg)
    assert set(rep.verdicts) and rep.constants

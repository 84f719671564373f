import json
import subprocess

import pytest

from randomlab._rng import stream
from randomlab.cli import main
from randomlab.dataset import write_csv, write_edges
from randomlab.sim import DgpSpec, generate


@pytest.fixture
def files(tmp_path):
    data, _ = generate(DgpSpec("const_cosine", n=60), 1.0, stream(1, "cli"))
    write_csv(data, tmp_path / "d.csv")
    spill, _ = generate(DgpSpec("spill_const"), 1.0, stream(2, "cli"))
    write_csv(spill, tmp_path / "s.csv")
    write_edges(spill.adjacency, tmp_path / "e.csv", index_base=1)
    (tmp_path / "c.json").write_text(json.dumps({"R": 20, "model": {"trees": 10}}))
    return tmp_path


def test_samplesize_prints_reference_value(capsys):
    assert main(["samplesize", "--L", "4.98", "--M0", "9.98", "--k", "10", "--target", "0.2"]) == 0
    assert 7400 <= int(capsys.readouterr().out.strip()) <= 8200


def test_missing_data_is_usage_error(capsys):
    assert main(["test", "global"]) == 2
    assert "usage" in capsys.readouterr().err


def test_spillover_without_edges_is_usage_error(files, capsys):
    assert main(["test", "spillover", "--data", str(files / "s.csv")]) == 2
    assert "adjacency required" in capsys.readouterr().err


def test_unknown_flag_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["test", "global", "--bogus"])
    assert exc.value.code == 2


def test_runtime_error_exits_one(files, capsys):
    bad = files / "bad.csv"
    bad.write_text("y,z,x\n1,2,3\n2,0,1\n")
    assert main(["test", "global", "--data", str(bad)]) == 1
    assert "non-binary" in capsys.readouterr().err


def test_global_result_fields_and_config_precedence(files):
    out = files / "g.json"
    null = files / "null.csv"
    assert main(["test", "global", "--data", str(files / "d.csv"), "--config", str(files / "c.json"),
                 "--R", "15", "--seed", "4", "--out", str(out), "--emit-null-dist", str(null)]) == 0
    res = json.loads(out.read_text())
    for key in ("p_value", "observed_statistic", "sobol_index", "delta_hat", "R", "k", "seed", "config"):
        assert key in res
    assert res["R"] == 15 and res["config"]["model"]["trees"] == 10
    assert len(null.read_text().splitlines()) == 16


def test_het_and_spillover_fields(files):
    het = files / "h.json"
    assert main(["test", "het", "--data", str(files / "d.csv"), "--config", str(files / "c.json"),
                 "--out", str(het)]) == 0
    res = json.loads(het.read_text())
    assert len(res["tau0_grid"]) == len(res["tau0_pvalues"]) == 41
    sp = files / "sp.json"
    assert main(["test", "spillover", "--data", str(files / "s.csv"), "--edges", str(files / "e.csv"),
                 "--index-base", "1", "--config", str(files / "c.json"), "--family", "linear",
                 "--out", str(sp)]) == 0
    res = json.loads(sp.read_text())
    assert res["focal"] and 0 < res["p_value"] <= 1


def test_imbalance_and_power(files):
    imb = files / "i.json"
    assert main(["test", "imbalance", "--data", str(files / "d.csv"), "--config", str(files / "c.json"),
                 "--covariate", "x1", "--out", str(imb)]) == 0
    res = json.loads(imb.read_text())
    assert len(res["covariates"]) == 1
    pw = files / "p.json"
    assert main(["power", "--data", str(files / "d.csv"), "--config", str(files / "c.json"),
                 "--out", str(pw)]) == 0
    res = json.loads(pw.read_text())
    assert res["M0_hat"] >= max(0.0, res["delta_hat"])


def test_simulate_writes_csv_and_config(files):
    out = files / "sim.csv"
    assert main(["simulate", "--study", "const_cosine", "--effects", "0,1", "--reps", "2", "--R", "9",
                 "--trees", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "study,method,effect,rejection_rate,mean_delta_hat,reps,R,seed"
    assert len(lines) == 1 + 2 * 4
    assert json.loads((files / "sim.csv.config.json").read_text())["config"]["study"] == "const_cosine"
    assert main(["simulate", "--study", "nope"]) == 2


def test_console_script_entry_point():
    proc = subprocess.run(["randomlab", "samplesize", "--L", "4.98", "--M0", "9.98", "--k", "10"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and 7400 <= int(proc.stdout) <= 8200

import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from ebsgd.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_simulate_contract(capsys):
    code, out, _ = run(["simulate", "--d", "2", "--n", "600", "--checkpoints", "300,600",
                        "--reps", "3", "--estimators", "EBS,LUGSAIL", "--seed", "4"], capsys)
    assert code == 0
    table = rows(out)
    assert list(table[0]) == ["n", "estimator", "metric", "mean", "se", "count", "note"]
    assert {r["estimator"] for r in table} == {"EBS", "LUGSAIL", "TRUE"}
    assert {r["n"] for r in table} == {"300", "600"}


def test_simulate_files_are_byte_identical(tmp_path, capsys):
    argv = ["simulate", "--d", "2", "--n", "500", "--reps", "3", "--seed", "9"]
    assert run(argv + ["--out", str(tmp_path / "a.csv")], capsys)[0] == 0
    assert run(argv + ["--out", str(tmp_path / "b.csv"), "--workers", "2", "--group-size", "1"], capsys)[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    ma = json.loads((tmp_path / "a.manifest.json").read_text())
    mb = json.loads((tmp_path / "b.manifest.json").read_text())
    assert ma["metrics_sha256"] == mb["metrics_sha256"]


def test_estimate_hand_example(tmp_path, capsys):
    f = tmp_path / "it.csv"
    f.write_text("\n".join(str(v) for v in [1, 3, 2, 4] * 25) + "\n")
    code, out, _ = run(["estimate", "--iterates", str(f), "--estimator", "EBS", "--batch-size", "2"], capsys)
    assert code == 0
    est = json.loads(out)
    assert est["matrix"] == [[0.5]] and est["a_n"] == 50 and est["b_n"] == 2 and est["theta_hat"] == [2.5]


def test_regions_from_estimate(tmp_path, capsys):
    f = tmp_path / "est.json"
    f.write_text(json.dumps({"matrix": [[9.0, 0.0], [0.0, 4.0]], "kind": "TRUE", "b_n": 1,
                             "a_n": 1, "n": 100, "d": 2, "projected": False, "theta_hat": [0.0, 0.0]}))
    code, out, _ = run(["regions", "--estimate", str(f), "--p", "0.1"], capsys)
    assert code == 0
    res = json.loads(out)
    assert res["z_star"] == pytest.approx(1.948822, abs=0.002)
    assert res["bonferroni"]["halfwidths"][0] == pytest.approx(1.959964 * 3 / 10, rel=1e-5)
    assert res["volume_ratio"]["simultaneous"] > 0


def test_exit_codes(tmp_path, capsys):
    assert run(["simulate", "--bogus"], capsys)[0] == 2
    assert run(["simulate", "--alpha", "0.4", "--n", "100"], capsys)[0] == 2
    assert run(["estimate", "--iterates", str(tmp_path / "nope.csv")], capsys)[0] == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("a,y\n1,0\n2,7\n")
    code, _, err = run(["classify", "--data", str(bad)], capsys)
    assert code == 3 and "'y'" in err


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("d = 2\nn = 400\nreps = 2\nestimators = EBS\n")
    code, out, _ = run(["simulate", "--config", str(cfg)], capsys)
    assert code == 0 and {r["estimator"] for r in rows(out)} == {"EBS", "TRUE"}
    js = tmp_path / "run.json"
    js.write_text(json.dumps({"d": 2, "n": 400, "reps": 2, "estimators": ["IBS"], "no_true": True}))
    code, out, _ = run(["simulate", "--config", str(js)], capsys)
    assert code == 0 and {r["estimator"] for r in rows(out)} == {"IBS"}
    cfg.write_text("dimension = 2\n")
    assert run(["simulate", "--config", str(cfg)], capsys)[0] == 2
    cfg.write_text("model = probit\n")
    assert run(["simulate", "--config", str(cfg)], capsys)[0] == 2


def test_estimate_predict_and_classify_on_data(tmp_path, capsys):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3000, 2))
    y = (rng.random(3000) < 1 / (1 + np.exp(-(x @ [1.0, -1.0])))).astype(int)
    data = tmp_path / "d.csv"
    with open(data, "w") as fh:
        fh.write("u,v,y\n")
        for (u, v), t in zip(x, y):
            fh.write(f"{u},{v},{t}\n")
    est = tmp_path / "est.json"
    code, _, _ = run(["estimate", "--data", str(data), "--model", "logistic", "--intercept",
                      "--warm-start", "500", "--eta0", "0.1", "--out", str(est)], capsys)
    assert code == 0
    obj = json.loads(est.read_text())
    assert len(obj["theta_hat"]) == 3
    code, out, _ = run(["predict", "--estimate", str(est), "--data", str(data), "--response", "y",
                        "--intercept"], capsys)
    assert code == 0
    table = rows(out)
    assert len(table) == 3000
    assert all(float(r["lower"]) <= float(r["p_hat"]) <= float(r["upper"]) for r in table[:50])
    assert all(int(r["conservative"]) <= int(r["plain"]) for r in table)
    code, out, _ = run(["classify", "--data", str(data), "--cutoffs", "0.3,0.5", "--warm-start", "300",
                        "--burn-in", "100"], capsys)
    assert code == 0 and len(rows(out)) == 2


def test_classify_synthetic(capsys):
    code, out, _ = run(["classify", "--synthetic", "--d", "3", "--n-train", "4000", "--n-test", "1000",
                        "--warm-start", "1000", "--burn-in", "500", "--cutoffs", "0.2"], capsys)
    assert code == 0
    (r,) = rows(out)
    assert 0 <= float(r["plain"]) <= 1 and 0 <= float(r["conservative"]) <= 1


def test_bias_oracle_and_qq(tmp_path, capsys):
    code, out, _ = run(["bias-oracle", "--n", "500,1000", "--C1", "0.5"], capsys)
    assert code == 0
    table = rows(out)
    assert [r["n"] for r in table] == ["500", "1000"] and all(float(r["ebs_bias"]) < 0 for r in table)
    f = tmp_path / "it.csv"
    np.savetxt(f, np.random.default_rng(1).normal(size=(400, 2)), delimiter=",")
    code, out, _ = run(["qq", "--iterates", str(f), "--batch-size", "4", "--theta-star", "0,0"], capsys)
    assert code == 0 and len(rows(out)) == 200


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ebsgd", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "ebsgd" in res.stdout

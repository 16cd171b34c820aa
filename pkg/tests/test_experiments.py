import json
import math

import numpy as np
import pytest

from ebsgd.batching import BatchMeans, ebs_batch_size
from ebsgd.experiments import (
    ClassificationConfig,
    ConfigError,
    ExperimentConfig,
    METRICS,
    classification_experiment,
    mean_model_bias_oracle,
    naive_bias_sum,
    qq_data,
    rel_frobenius,
    rows_to_csv,
    run_replications,
    synthetic_classification_data,
    write_outputs,
)
from ebsgd.experiments import _cross_sum


def test_rel_frobenius_examples():
    s = np.diag([1.0, 3.0])
    assert rel_frobenius(s, s) == 0
    assert rel_frobenius(2 * np.eye(3), np.eye(3)) == pytest.approx(1.0)
    assert rel_frobenius(np.diag([1.0, 2.0]), np.diag([2.0, 2.0])) == pytest.approx(1 / math.sqrt(8))
    with pytest.raises(ValueError):
        rel_frobenius(np.eye(2), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        rel_frobenius(np.eye(2), np.eye(3))


@pytest.mark.parametrize("kw", [
    {"alpha": 0.5}, {"alpha": 1.0}, {"beta": 0.4}, {"beta": 1.0},
    {"checkpoints": (200, 100), "n_max": 300}, {"checkpoints": (500,), "n_max": 300},
    {"estimators": ("BOOT",)}, {"model": "probit"}, {"model": "mean", "d": 3}, {"p": 0.0},
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)


def test_config_defaults_and_round_trip():
    cfg = ExperimentConfig(alpha=0.6, n_max=1000)
    assert cfg.beta == pytest.approx(0.8) and cfg.checkpoints == (1000,)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_smoke_mean_model():
    cfg = ExperimentConfig(model="mean", d=1, eta0=1.0, n_max=1000, replications=2, seed=3,
                           estimators=("EBS", "LUGSAIL"), include_true=False)
    rows = run_replications(cfg)
    assert [(r.n, r.estimator) for r in rows] == [(1000, "EBS"), (1000, "LUGSAIL")]
    for r in rows:
        assert all(np.isfinite(s.mean) and s.count == 2 for s in r.stats.values())
        for m in ("ellipsoid_coverage", "rect_coverage"):
            assert 0 <= r[m].mean <= 1


def test_coverage_standard_error_is_binomial():
    cfg = ExperimentConfig(d=2, n_max=2000, replications=30, seed=1, estimators=("EBS",))
    rows, raw = run_replications(cfg, raw=True)
    ebs = rows[0]["ellipsoid_coverage"]
    assert ebs.se == pytest.approx(math.sqrt(ebs.mean * (1 - ebs.mean) / 30), rel=1e-12)
    assert set(rows[0].stats) == set(METRICS)


def test_absent_cells_are_marked():
    cfg = ExperimentConfig(d=2, n_max=30, checkpoints=(3, 30), replications=2, estimators=("LUGSAIL", "IBS"))
    rows = run_replications(cfg)
    early = [r for r in rows if r.n == 3 and r.estimator == "LUGSAIL"][0]
    assert early.absent and early.note.startswith("ABSENT") and "batches" in early.note
    assert "ABSENT" in rows_to_csv(rows)


def test_logistic_runs_without_known_covariance():
    cfg = ExperimentConfig(model="logistic", d=3, n_max=3000, replications=2, intercept=-1.0, eta0=0.5)
    rows = run_replications(cfg)
    assert {r.estimator for r in rows} == {"EBS", "LUGSAIL", "IBS"}
    assert all("rel_frobenius" not in r.stats for r in rows)


def test_outputs_are_deterministic(tmp_path):
    cfg = ExperimentConfig(d=3, n_max=3000, checkpoints=(1000, 3000), replications=4, seed=11, group_size=3)
    a = write_outputs(run_replications(cfg), cfg, tmp_path / "a.csv")
    b = write_outputs(run_replications(cfg), cfg, tmp_path / "b.csv")
    assert open(a[0], "rb").read() == open(b[0], "rb").read()
    ma, mb = json.load(open(a[1])), json.load(open(b[1]))
    assert ma["config_sha256"] == mb["config_sha256"] and ma["metrics_sha256"] == mb["metrics_sha256"]


def test_serial_and_parallel_agree():
    cfg = ExperimentConfig(d=2, n_max=2000, checkpoints=(800, 2000), replications=6, seed=5, group_size=2)
    serial = rows_to_csv(run_replications(cfg, workers=1))
    parallel = rows_to_csv(run_replications(cfg, workers=3))
    assert serial == parallel


def test_replication_independent_of_grouping():
    base = dict(d=2, n_max=1500, replications=4, seed=8)
    _, a = run_replications(ExperimentConfig(group_size=1, **base), raw=True)
    _, b = run_replications(ExperimentConfig(group_size=4, **base), raw=True)
    for key in a:
        np.testing.assert_array_equal(a[key], b[key])


def test_bias_oracle_collapsed_matches_triple_loop():
    b = ebs_batch_size(500, 0.1, 0.755)
    a = 500 // b
    fast, slow = _cross_sum(b, a, 0.51), naive_bias_sum(b, a, 0.51)
    assert fast == pytest.approx(slow, rel=1e-10)
    assert _cross_sum(3, 5, 0.7) == pytest.approx(naive_bias_sum(3, 5, 0.7), rel=1e-12)


def test_bias_oracle_sign_and_degenerate_case():
    assert mean_model_bias_oracle(20, 0.6, c=1.0, beta=0.99).ebs == 0.0
    for n in (200, 1000, 5000):
        r = mean_model_bias_oracle(n, 0.51, C1=0.5)
        assert r.n_batches >= 2 and r.ebs < 0
    with pytest.raises(ValueError):
        mean_model_bias_oracle(100, 0.4)


def test_mean_model_bias_matches_oracle_shape():
    """Monte Carlo bias (2000 reps) against the oracle with C1 fitted by weighted least squares."""
    cps = (500, 1000, 2000)
    cfg = ExperimentConfig(model="mean", d=1, eta0=1.0, alpha=0.51, n_max=2000, checkpoints=cps,
                           replications=2000, seed=2024, estimators=("EBS", "LUGSAIL"),
                           include_true=False, group_size=2000)
    rows = run_replications(cfg)
    ebs = {r.n: r["bias_trace"] for r in rows if r.estimator == "EBS"}
    lug = {r.n: r["bias_trace"] for r in rows if r.estimator == "LUGSAIL"}
    mc = np.array([ebs[n].mean for n in cps])
    se = np.array([ebs[n].se for n in cps])
    shape = np.array([mean_model_bias_oracle(n, 0.51, C1=1.0).ebs for n in cps])
    centering = np.array([mean_model_bias_oracle(n, 0.51, C1=0.0, sigma=1.0).ebs for n in cps])
    w = 1 / se**2
    y = mc - centering
    c1 = np.sum(w * shape * y) / np.sum(w * shape**2)
    assert np.all(mc < 0)
    assert np.all(np.abs(y - c1 * shape) <= 3 * se)
    assert c1 == pytest.approx(0.5, abs=0.05)
    for n in cps:
        assert abs(lug[n].mean) < abs(ebs[n].mean)


def test_qq_data_examples():
    rng = np.random.default_rng(0)
    a, d, b = 200, 3, 4
    bm = BatchMeans(rng.normal(size=(a, d)) / math.sqrt(b), b, a * b)
    table = qq_data(bm, theta_star=np.zeros(d))
    assert table.shape == (a * d, 2)
    assert np.all(np.diff(table[:, 0]) >= 0)
    from scipy.stats import kstest
    assert kstest(table[:, 0], "norm").statistic < 1.63 / math.sqrt(a * d)
    with pytest.raises(ValueError):
        qq_data(BatchMeans(np.ones((5, 2)), 2, 10))
    with pytest.raises(ValueError):
        qq_data(BatchMeans(np.ones((1, 2)), 2, 2))


def test_classification_contracts():
    train, test, beta = synthetic_classification_data(0, d=4, n_train=8000, n_test=2000, intercept=0.0)
    cfg = ClassificationConfig(warm_start=2000, burn_in=500)
    zero = classification_experiment(train, test, cfg, cutoffs=(0.0, 0.3, 0.5),
                                     sigma_override=np.zeros((4, 4)))
    np.testing.assert_array_equal(zero.plain, zero.conservative)
    assert zero.plain[0] == pytest.approx(np.mean(test[1] == 0))
    res = classification_experiment(train, test, cfg, cutoffs=(0.5,))
    assert np.all(res.plain >= 0) and res.n == 8000 - 2500
    with pytest.raises(ValueError, match="single class"):
        classification_experiment((train[0], np.zeros(8000)), test, cfg)
    with pytest.raises(ValueError, match="binary"):
        classification_experiment((train[0], train[1] * 2), test, cfg)

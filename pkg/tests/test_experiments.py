import json

import pytest

from udocrp.experiments import (ACCEPTANCE, DEFAULTS, EXPERIMENTS, ConfigError, chunks, resolve_config,
                                run_criterion, run_experiment)

SMALL = {
    "skewer-equivalence": {"samples": 2000, "mu_draws": 2000, "plot_replicates": 5, "power": False},
    "zeta-laplace": {"alpha_grid": "0.5,1", "samples": 20_000, "chunk": 5000},
    "stationarity": {"n_grid": "3", "samples": 20_000},
    "besq-absorption-scaling": {"n": 50, "samples": 2000, "h": 1e-3, "check_samples": 1000},
    "besq-total-mass": {"n": 50, "samples": 2000, "h": 1e-3, "check_samples": 1000},
    "stable-exponent": {"alpha_grid": "0.5", "n": 20, "samples": 4000, "chunk": 1000, "points": 500},
    "levy-tail": {"alpha_grid": "0.5", "n": 20, "samples": "20000", "chunk": 5000},
    "oracle-calibration": {"repeats": 10, "calibration_size": 500, "chain_samples": 5000,
                           "equivalence_size": 1000, "besq_samples": 2000},
}


def _strip(rep):
    d = rep.to_dict()
    return json.dumps({"checks": d["checks"], "tables": d["tables"]}, sort_keys=True)


def test_registry_is_consistent():
    assert set(EXPERIMENTS) == set(DEFAULTS) == set(SMALL)
    assert [n for n, _, _ in ACCEPTANCE] == list(range(1, 11))
    for _, _, runs in ACCEPTANCE:
        for name, ov in runs:
            resolve_config(name, ov)
    assert chunks(10, 4) == [4, 4, 2] and chunks(0, 3) == []


@pytest.mark.parametrize("name,overrides", [
    ("no-such-experiment", {}),
    ("zeta-laplace", {"bogus": 1}),
    ("zeta-laplace", {"alpha_grid": "0.5,1.5"}),
    ("skewer-equivalence", {"theta": -0.1}),
    ("skewer-equivalence", {"samples": 0}),
    ("stationarity", {"samples": -5}),
    ("besq-total-mass", {"theta_grid": "-1"}),
])
def test_bad_config(name, overrides):
    with pytest.raises(ConfigError):
        resolve_config(name, overrides)


def test_hyphenated_keys():
    assert resolve_config("zeta-laplace", {"lambda-grid": "1"})["lambda_grid"] == "1"


@pytest.mark.parametrize("name", sorted(SMALL))
def test_small_runs_are_deterministic(name):
    a = run_experiment(name, SMALL[name])
    b = run_experiment(name, SMALL[name])
    assert a.name == name and a.checks
    assert _strip(a) == _strip(b)
    for row in a.checks:
        assert set(row) >= {"check", "statistic", "p_value", "threshold", "passed"}
    json.dumps(a.to_dict())


def test_seed_changes_results():
    a = run_experiment("zeta-laplace", SMALL["zeta-laplace"])
    b = run_experiment("zeta-laplace", {**SMALL["zeta-laplace"], "seed": 7})
    assert _strip(a) != _strip(b)


@pytest.mark.parametrize("name", ["zeta-laplace", "stable-exponent"])
def test_worker_count_does_not_matter(name, monkeypatch):
    monkeypatch.setenv("UDOCRP_WORKERS", "1")
    one = run_experiment(name, SMALL[name])
    monkeypatch.setenv("UDOCRP_WORKERS", "3")
    three = run_experiment(name, SMALL[name])
    assert _strip(one) == _strip(three)


def test_unknown_criterion():
    with pytest.raises(ConfigError):
        run_criterion(11)

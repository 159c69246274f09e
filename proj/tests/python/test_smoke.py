import numpy as np
import pytest

import jointmix as jm


def test_default_design_round_trips_through_simulate():
    design = jm.default_design()
    assert design["n"] == 500
    assert design["groups"] == 2
    design["n"] = 80
    data, labels, censored = jm.simulate(design)
    assert len(data) == 80
    assert labels.shape == (80,)
    assert set(np.unique(labels)) <= {0, 1}
    assert 0.0 <= censored <= 1.0
    assert data.levels == 3 and data.items == 2
    assert data.times.shape == (80,)
    assert set(np.unique(data.events)) <= {0, 1}


def test_simulate_is_deterministic():
    a, _, _ = jm.simulate({"n": 50, "seed": 4})
    b, _, _ = jm.simulate({"n": 50, "seed": 4})
    c, _, _ = jm.simulate({"n": 50, "seed": 5})
    assert np.array_equal(a.times, b.times)
    assert not np.array_equal(a.times, c.times)


def test_fit_returns_consistent_result():
    data, _, _ = jm.simulate({"n": 200, "seed": 3})
    result = jm.fit(data, 2, {"max_iter": 20000, "n_restarts": 1})
    assert result["converged"]
    assert result["score_norm"] <= 1e-6
    assert result["posterior"].shape == (200, 2)
    np.testing.assert_allclose(result["posterior"].sum(axis=1), 1.0, atol=1e-12)
    names = [e["name"] for e in result["estimates"]]
    assert names[0] == "theta2" and names[-1] == "delta1"
    trace = np.asarray(result["loglik_trace"])
    assert np.all(np.diff(trace) >= -1e-10)
    assert jm.loglik(data, result["params"], result["hazard"]) == pytest.approx(result["loglik"], rel=1e-12)


def test_category_probs_closed_form():
    params = {"a": [0.0, 0.5, 0.0], "phi": [0.0, 0.5, 1.0], "b": [0.0, -0.5]}
    probs = jm.category_probs(0.5, params)
    assert probs.shape == (2, 3)
    eta = np.array([0.0, 0.5 + 0.5 * 0.5, 0.5])
    expected = np.exp(eta) / np.exp(eta).sum()
    np.testing.assert_allclose(probs[0], expected, rtol=1e-12)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=1e-12)


def test_mc_zero_replications():
    report = jm.mc({"n": 50}, replications=0)
    assert report["replications"] == 0
    assert report["failures"] == 0
    assert report["parameters"] == []


def test_input_errors_raise_value_error(tmp_path):
    with pytest.raises(ValueError):
        jm.Dataset.read_csv(str(tmp_path / "missing.csv"), str(tmp_path / "missing2.csv"))
    with pytest.raises(ValueError):
        jm.category_probs(0.0, {"a": [0.1, 0.5], "phi": [0.0, 1.0], "b": [0.0]})
    data, _, _ = jm.simulate({"n": 30})
    with pytest.raises(ValueError):
        jm.fit(data, 2, {"max_iter": 0})


def test_csv_round_trip(tmp_path):
    data, _, _ = jm.simulate({"n": 40, "seed": 8})
    data.write_csv(str(tmp_path / "o.csv"), str(tmp_path / "s.csv"))
    back = jm.Dataset.read_csv(str(tmp_path / "o.csv"), str(tmp_path / "s.csv"))
    assert back.ids == data.ids
    assert np.array_equal(back.times, data.times)
    assert np.array_equal(back.covariates, data.covariates)

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import jdsn.mcstudy as mcstudy
from jdsn.errors import ConfigError, SimulationDivergedError, SingularInformationError, StudyError
from jdsn.estimate import classify_increments, maximize_contrast
from jdsn.fisher import FisherInformation, fisher_information
from jdsn.mcstudy import (
    McTable,
    consistency_ladder,
    normality_diagnostics,
    rmse_verdict,
    run_replications,
    standardization_scales,
    standardize,
    unstandardize,
)
from jdsn.model import ParameterPoint, RegimeConfig, get_model
from jdsn.simulate import replication_seed, simulate_path

OU = get_model("ou-gamma")
SMALL = RegimeConfig(600, 0.04, 10.0, 0.2)


def test_single_replication_matches_manual_pipeline():
    tab = run_replications(OU, OU.theta0, SMALL, 1, master_seed=42)
    reg = SMALL.with_seed(replication_seed(42, 0))
    obs, _ = simulate_path(OU, OU.theta0, reg)
    res = maximize_contrast(obs, OU, reg, labels=classify_increments(obs, reg, OU.density.support))
    assert int(tab.seeds[0]) == reg.seed
    np.testing.assert_array_equal(tab.theta_hat[0], res.theta_hat.as_vector())
    scales = standardization_scales(SMALL, OU.dims)
    np.testing.assert_array_equal(tab.errors[0], (res.theta_hat.as_vector() - OU.theta0.as_vector()) * scales)
    assert tab.lambda_hat[0] == res.lambda_hat


def test_tables_are_reproducible_and_schedule_independent():
    a = run_replications(OU, OU.theta0, SMALL, 6, master_seed=3, workers=1)
    b = run_replications(OU, OU.theta0, SMALL, 6, master_seed=3, workers=1)
    c = run_replications(OU, OU.theta0, SMALL, 6, master_seed=3, workers=3)
    assert a.to_csv() == b.to_csv() == c.to_csv()
    assert a.reps == 6


def test_csv_round_trip():
    a = run_replications(OU, OU.theta0, SMALL, 3, master_seed=8)
    assert McTable.from_csv(a.to_csv()).to_csv() == a.to_csv()


@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4), st.floats(1e-4, 1.0), st.integers(2, 10**6), st.floats(0.5, 1e4))
def test_standardization_round_trip(raw, eps, n, lam):
    scales = standardization_scales(RegimeConfig(n, eps, lam, 0.2), (1, 1, 2))
    back = unstandardize(standardize(raw, scales), scales)
    np.testing.assert_allclose(back, raw, rtol=1e-15, atol=0)


def test_scales_follow_parameter_rates():
    s = standardization_scales(RegimeConfig(400, 0.01, 25.0, 0.2), (1, 1, 2))
    np.testing.assert_allclose(s, [100.0, 20.0, 5.0, 5.0])


def test_reps_must_be_positive():
    with pytest.raises(ConfigError):
        run_replications(OU, OU.theta0, SMALL, 0, 1)


def test_inadmissible_rho_refused():
    with pytest.raises(ConfigError):
        run_replications(OU, OU.theta0, RegimeConfig(600, 0.04, 10.0, 0.3), 2, 1)


def _flaky(fail_every):
    real = mcstudy.simulate_path
    calls = {"k": 0}

    def sim(*args, **kwargs):
        calls["k"] += 1
        if calls["k"] % fail_every == 0:
            raise SimulationDivergedError("forced")
        return real(*args, **kwargs)

    return sim


def test_some_failures_are_recorded(monkeypatch):
    monkeypatch.setattr(mcstudy, "simulate_path", _flaky(5))
    tab = run_replications(OU, OU.theta0, SMALL, 10, 1)
    assert tab.failed.sum() == 2
    assert "SimulationDivergedError" in tab.messages[4]
    assert np.all(np.isnan(tab.errors[4]))
    assert not tab.usable[4]


def test_too_many_failures_is_a_study_error(monkeypatch):
    monkeypatch.setattr(mcstudy, "simulate_path", _flaky(3))
    with pytest.raises(StudyError):
        run_replications(OU, OU.theta0, SMALL, 10, 1)


# --- ladders ---------------------------------------------------------------


def test_single_rung_has_no_verdict():
    res = consistency_ladder(OU, OU.theta0, [SMALL], 3, 1)
    assert res.verdict is None
    assert res.rmse.shape == (1, 4)


def test_bad_ladder_refused_before_simulation(monkeypatch):
    def boom(*a, **k):
        raise AssertionError("simulated despite a refused ladder")

    monkeypatch.setattr(mcstudy, "simulate_path", boom)
    ladder = [RegimeConfig(100, 0.1, 10.0, 0.2), RegimeConfig(200, 0.05, 100.0, 0.2)]  # lambda^2/n grows
    with pytest.raises(ConfigError, match="lambda\\^2/n"):
        consistency_ladder(OU, OU.theta0, ladder, 3, 1)


def test_rmse_verdict_tolerates_one_small_rise():
    names = ["a", "b", "c", "d"]
    rmse = np.array([[1.0, 1.0, 1.0, 1.0], [0.8, 0.85, 1.2, 0.9], [0.5, 0.9, 0.5, 0.95], [0.4, 0.8, 0.4, 1.0]])
    v = rmse_verdict(rmse, names)
    assert v == {"a": True, "b": True, "c": False, "d": False}


# --- normality -------------------------------------------------------------


def _synthetic_table(errors, regime=RegimeConfig(1000, 0.01, 40.0, 0.2)):
    n = errors.shape[0]
    return McTable(
        model="synthetic",
        dims=(1, 1, 2),
        theta0=ParameterPoint([1.0], [1.0], [1.0, 2.0]),
        regime=regime,
        master_seed=0,
        seeds=np.arange(n, dtype=np.uint64),
        theta_hat=np.zeros_like(errors),
        lambda_hat=np.full(n, 40.0),
        converged=np.ones(n, dtype=bool),
        errors=errors,
        messages=[""] * n,
    )


@pytest.fixture(scope="module")
def info():
    return fisher_information(OU, OU.theta0, time_steps=201)


def test_exact_normal_draws_pass(info):
    rng = np.random.default_rng(5)
    e = rng.multivariate_normal(np.zeros(4), info.inverse(), size=10_000)
    rep = normality_diagnostics(_synthetic_table(e), info)
    assert rep.relative_error < 0.05
    assert np.all(rep.ks_pvalue > 0.01)
    assert rep.ks_passed == 4
    np.testing.assert_allclose(rep.whitened, e @ info.sqrt())


def test_constant_column_flagged(info):
    rng = np.random.default_rng(6)
    e = rng.multivariate_normal(np.zeros(4), info.inverse(), size=500)
    e[:, 1] = 0.3
    rep = normality_diagnostics(_synthetic_table(e), info)
    assert rep.ks_pvalue[1] < 1e-10
    assert "sigma1" in rep.constant


def test_non_converged_rows_excluded_but_counted(info):
    rng = np.random.default_rng(7)
    tab = _synthetic_table(rng.multivariate_normal(np.zeros(4), info.inverse(), size=150))
    tab.converged[:20] = False
    rep = normality_diagnostics(tab, info)
    assert rep.n_used == 130 and rep.n_not_converged == 20 and rep.n_rows == 150


def test_too_few_rows_refused(info):
    with pytest.raises(StudyError):
        normality_diagnostics(_synthetic_table(np.zeros((50, 4))), info)


def test_singular_information_refused():
    singular = FisherInformation(np.eye(1), np.eye(1), np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularInformationError):
        normality_diagnostics(_synthetic_table(np.random.default_rng(0).normal(size=(200, 4))), singular)


def test_report_outputs(info):
    e = np.random.default_rng(8).multivariate_normal(np.zeros(4), info.inverse(), size=200)
    rep = normality_diagnostics(_synthetic_table(e), info)
    import json

    d = json.loads(rep.to_json())
    assert d["used"] == 200 and len(d["ks_pvalue"]) == 4
    qq = rep.qq_csv().splitlines()
    assert qq[0] == "normal_quantile,mu1,sigma1,alpha1,alpha2" and len(qq) == 201


@pytest.mark.slow
def test_soak_deep_regime_converges():
    tab = run_replications(OU, OU.theta0, RegimeConfig(4000, 1 / 200, 30.0, 0.2), 500, master_seed=2024, substeps=4)
    assert tab.reps == 500
    assert tab.converged.mean() >= 0.95

import math

import numpy as np
import pytest

from swpm.config import ExperimentConfig
from swpm.ensemble import (
    EnsembleFailure,
    EnsembleSeries,
    confidence_half_width,
    ensemble_seed,
    oracle_reference,
    reference_for,
    relative_error,
    run_ensembles,
    run_experiment,
    run_oracle,
    run_single_ensemble,
    table_errors,
    z_score,
)
from swpm.errors import ParameterError
from swpm.moments import K, SCALAR_INDEX
from swpm.reduction import ReductionScheme
from swpm.reference import ReferenceSource

SMALL = ExperimentConfig(m0=32, N=6, t_end=0.5, time_grid_points=6, seed=11, workers=1)


def test_relative_error_examples():
    assert relative_error(5.0, 5.0) == 0.0
    assert relative_error(105.0, 104.58) == pytest.approx(0.004, rel=1e-12)
    assert relative_error([3.0, 4.0], [3.0, 4.5]) == pytest.approx(0.1)
    assert math.isnan(relative_error(0.0, 1.0))


def erfc_quantile(alpha):
    """Bisection on P(|Z| > z) = erfc(z / sqrt 2)."""
    lo, hi = 0.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if math.erfc(mid / math.sqrt(2)) > alpha else (lo, mid)
    return lo


def test_z_score():
    assert z_score(1e-3) == pytest.approx(3.2905, abs=5e-4)
    for a in (0.5, 0.05, 1e-3, 1e-6):
        assert z_score(a) == pytest.approx(erfc_quantile(a), rel=1e-9)
    with pytest.raises(ParameterError):
        z_score(0.0)


def test_half_width():
    assert confidence_half_width(np.full(10, 2.0), 2.0) == 0.0
    x = np.random.default_rng(0).normal(1.0, 1.0, 500)
    # z * sigma / sqrt(N) / |ref| = 3.2905 / sqrt(500)
    assert confidence_half_width(x, 1.0) == pytest.approx(0.1472, rel=0.1)
    assert confidence_half_width(x, -2.0) == pytest.approx(confidence_half_width(x, 1.0) / 2)
    assert confidence_half_width([1.0, 3.0], 1.0, alpha=0.05) == pytest.approx(1.959964 * 1.0, rel=1e-6)
    with pytest.raises(ParameterError):
        confidence_half_width([1.0], 1.0)
    with pytest.raises(ParameterError):
        confidence_half_width([1.0, 2.0], 0.0)


def test_half_width_shrinks_as_inverse_sqrt_n():
    rng = np.random.default_rng(1)
    a = np.mean([confidence_half_width(rng.normal(size=100), 1.0) for _ in range(200)])
    b = np.mean([confidence_half_width(rng.normal(size=1600), 1.0) for _ in range(200)])
    assert a / b == pytest.approx(4.0, rel=0.05)


def test_ensemble_seeds_are_distinct_and_stable():
    seeds = {ensemble_seed(1, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert ensemble_seed(1, 7) == ensemble_seed(1, 7)
    assert ensemble_seed(1, 7) != ensemble_seed(2, 7)


def test_single_ensemble_records_the_grid():
    r = run_single_ensemble(SMALL, 3)
    assert r.samples.shape == (6, K)
    assert r.index == 3 and r.seed == ensemble_seed(11, 3)
    # conserved quantities are exact on every record
    np.testing.assert_allclose(r.samples[:, SCALAR_INDEX["rho"]], 1.0, atol=1e-13)
    e = r.samples[:, SCALAR_INDEX["E"]]
    np.testing.assert_allclose(e, e[0], rtol=1e-12)


def test_results_do_not_depend_on_worker_count():
    one = run_ensembles(SMALL)
    two = run_ensembles(SMALL.replace(workers=2))
    assert [r.index for r in two] == list(range(6))
    for a, b in zip(one, two):
        np.testing.assert_array_equal(a.samples, b.samples)
    # a subset reproduces the same ensembles
    part = run_ensembles(SMALL, indices=[4, 1])
    np.testing.assert_array_equal(part[1].samples, one[4].samples)


def test_series_statistics():
    series = run_experiment(SMALL)
    assert isinstance(series, EnsembleSeries) and series.n_ensembles == 6
    ref = reference_for(SMALL)
    assert ref.source is ReferenceSource.HIERARCHY_ANALYTIC
    s = series.values("s")
    np.testing.assert_allclose(series.mean("s"), s.mean(0))
    np.testing.assert_allclose(series.variance("s"), s.var(0, ddof=1))
    err = series.relative_error("s", ref)
    np.testing.assert_allclose(err, np.abs(s.mean(0) - ref.series("s")) / ref.series("s"), rtol=1e-12)
    rows = series.statistics(["Pi11", "s"], ref)
    assert len(rows) == 6 * 2 * 5
    assert {r[2] for r in rows} == {"mean", "variance", "reference", "relative_error", "half_width"}
    eq = reference_for(SMALL.replace(reference="equilibrium"))
    assert series.half_width("s", eq).shape == (6,)


def test_oracle_reference_is_an_ensemble_mean():
    series = run_oracle(SMALL)
    ref = oracle_reference(series)
    assert ref.source is ReferenceSource.ORACLE_RUN
    np.testing.assert_allclose(ref.series("s"), series.mean("s"))


def test_failure_carries_index_and_seed(monkeypatch):
    import swpm.ensemble as ens

    def boom(*a, **k):
        raise FloatingPointError("overflow")

    monkeypatch.setattr(ens, "sample_initial_state", boom)
    with pytest.raises(EnsembleFailure) as info:
        run_single_ensemble(SMALL, 2)
    assert info.value.index == 2 and info.value.seed == ensemble_seed(11, 2)
    assert "FloatingPointError" in str(info.value)


def test_table_errors_small():
    errs = table_errors(3, m0=256, n_reductions=2)
    assert errs[ReductionScheme.PTHF]["raw_heat_flux"] < 1e-12
    assert errs[ReductionScheme.PTHF]["central_heat_flux"] < 1e-12
    assert errs[ReductionScheme.ENERGY]["central_heat_flux"] == pytest.approx(1.0, abs=1e-12)
    assert errs[ReductionScheme.ENERGY_HF]["central_heat_flux"] < 1e-12
    assert errs[ReductionScheme.ENERGY_HF]["raw_heat_flux"] > 1e-3
    with pytest.raises(ParameterError):
        table_errors(3, n_reductions=0)

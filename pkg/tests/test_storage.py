import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgplan.objectives import DgUnit
from dgplan.stochastic import sample_outputs
from dgplan.storage import (ChanceConstrainedStorage, StorageSpec, read_storage_csv,
                            reserve_output, shortfall_samples, size_storage, write_storage_csv)

from conftest import REFERENCE_PORTFOLIO
from oracles import quantile_oracle

PORTFOLIO = [DgUnit(k, b, kw) for k, b, kw in REFERENCE_PORTFOLIO]


def test_shortfall_examples():
    assert np.all(shortfall_samples([100.0], [np.full(5, 100.0)])[0] == 0)
    assert np.all(shortfall_samples([183.0], [np.zeros(5)])[0] == 183)
    s = np.array([0.0, 50.0, 183.0, 12.5])
    assert shortfall_samples([183.0], [s])[0].tolist() == [183.0 - x for x in s]
    with pytest.raises(ValueError):
        shortfall_samples([1.0, 2.0], [np.zeros(3), np.zeros(4)])
    with pytest.raises(ValueError):
        shortfall_samples([1.0], [np.zeros(3), np.zeros(3)])


def test_reserve_examples():
    assert reserve_output([-3.0, -1.0, -2.0], 0.6) == 0.0
    assert reserve_output(np.arange(1, 101), 0.60) == 60
    for w in (0.01, 0.5, 0.99):
        assert reserve_output([5, 5, 5], w) == 5
    with pytest.raises(ValueError):
        reserve_output([], 0.5)
    with pytest.raises(ValueError):
        reserve_output([1.0], 1.0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-100, 1000, allow_nan=False), min_size=1, max_size=60),
       st.floats(0.001, 0.999))
def test_reserve_matches_oracle(samples, omega):
    assert reserve_output(samples, omega) == quantile_oracle(samples, omega)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1000), min_size=1, max_size=40), st.floats(0.01, 0.98),
       st.floats(0.0, 0.01), st.floats(0, 50))
def test_reserve_monotone(samples, omega, step, bump):
    assert reserve_output(samples, omega) <= reserve_output(samples, min(omega + step, 0.999))
    assert reserve_output(samples, omega) <= reserve_output(np.asarray(samples) + bump, omega)


def test_mt_only_needs_no_storage():
    assert size_storage([DgUnit("MT", 49, 185)], 0.6, 100, 0) == []


def test_size_storage_reference_portfolio_sweep():
    levels = np.round(np.arange(0.60, 0.951, 0.05), 2)
    sizes = np.array([[s.p_reest for s in size_storage(PORTFOLIO, w, 20_000, 3)] for w in levels])
    assert sizes.shape == (len(levels), 2)
    assert np.all(np.diff(sizes, axis=0) >= 0)
    assert np.all(sizes[:, 0] <= 1556) and np.all(sizes[:, 1] <= 183)


def test_coverage_on_sizing_and_fresh_samples():
    n, omega = 100_000, 0.6
    specs = size_storage(PORTFOLIO, omega, n, 21)
    stochastic = [u for u in PORTFOLIO if u.kind in ("WT", "PV")]
    for seed, slack in ((21, 0.0), (22, 0.02)):
        sets = sample_outputs(stochastic, n, seed)
        for u, ss, spec in zip(stochastic, sets, specs):
            cover = np.mean(u.s_rated - ss.samples <= spec.p_reest)
            assert cover >= omega - slack


def test_spec_validation_and_csv(tmp_path):
    with pytest.raises(ValueError):
        StorageSpec(61, -1.0, 0.6, 10, 0)
    with pytest.raises(ValueError):
        StorageSpec(61, 1.0, 1.2, 10, 0)
    specs = size_storage(PORTFOLIO, 0.75, 2000, 4)
    path = tmp_path / "storage.csv"
    write_storage_csv(path, specs)
    assert path.read_text().splitlines()[0] == "bus,omega,p_reest_kw,n"
    back = read_storage_csv(path, seed=4)
    assert [s.bus for s in back] == [61, 50]
    assert [s.p_reest for s in back] == pytest.approx([s.p_reest for s in specs], abs=1e-6)


def test_estimator():
    est = ChanceConstrainedStorage(omega=0.6, n_samples=5000, seed=1).fit(PORTFOLIO)
    assert set(est.p_reest_) == {61, 50}

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from dgplan.objectives import DgUnit
from dgplan.stochastic import (CHUNK, PvModel, SiteModel, WtCurve, load_models, pv_power,
                               sample_outputs, sample_site, wt_power)


def test_wt_curve_points():
    c = WtCurve(4, 16, 28, 1556)
    assert wt_power(2, c) == 0
    assert wt_power(16, c) == 1556
    assert wt_power(10, WtCurve(4, 16, 28, 100)) == pytest.approx(50)
    assert wt_power(28, c) == 0 and wt_power(27.99, c) == 1556


def test_pv_points():
    assert pv_power(0, PvModel(s_rated=183)) == 0
    assert pv_power(1000, PvModel(s_rated=183)) == 183
    assert pv_power(250, PvModel(s_rated=100)) == pytest.approx(25)
    assert pv_power(1000, PvModel(eta=0.2, s_rated=50, area=100)) == pytest.approx(20)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 40), min_size=2, max_size=30))
def test_wt_monotone_below_cutout(vs):
    c = WtCurve(4, 16, 28, 100)
    v = np.sort(np.asarray(vs))
    v = v[v < 28]
    p = wt_power(v, c)
    assert np.all(np.diff(p) >= 0) and np.all((p >= 0) & (p <= 100))


def test_model_validation():
    with pytest.raises(ValueError):
        WtCurve(10, 5, 28)
    with pytest.raises(ValueError):
        PvModel(eta=0)
    with pytest.raises(ValueError):
        SiteModel("weibull", {"k": -1, "c": 8})
    with pytest.raises(ValueError):
        SiteModel("gamma", {})


def test_mt_constant_and_bounds():
    mt, wt, pv = DgUnit("MT", 49, 185), DgUnit("WT", 61, 1556), DgUnit("PV", 50, 183)
    sets = sample_outputs([mt, wt, pv], 5000, 1)
    assert np.all(sets[0].samples == 185)
    assert np.all((sets[1].samples >= 0) & (sets[1].samples <= 1556))
    assert np.all((sets[2].samples >= 0) & (sets[2].samples <= 183))
    assert all(s.n == 5000 for s in sets)


def test_degenerate_weibull_below_cut_in():
    models = load_models({"WT": {"dist": "weibull", "params": {"k": 50, "c": 1.0}}})
    out = sample_site(DgUnit("WT", 61, 100), 1000, 2, models)
    assert np.all(out == 0)


def test_wt_mean_matches_quadrature():
    n = 100_000
    out = sample_site(DgUnit("WT", 61, 1.0), n, 11)
    c = WtCurve(4, 16, 28, 1.0)
    dens = stats.weibull_min(2, scale=8).pdf
    mean, _ = integrate.quad(lambda v: wt_power(v, c) * dens(v), 0, 60, points=[4, 16, 28], limit=200)
    second, _ = integrate.quad(lambda v: wt_power(v, c) ** 2 * dens(v), 0, 60, points=[4, 16, 28], limit=200)
    sigma = np.sqrt((second - mean ** 2) / n)
    assert abs(out.mean() - mean) < 3 * sigma


def test_seeds_reproducible_and_prefix_stable():
    site = DgUnit("PV", 50, 183)
    a = sample_site(site, 2500, 5)
    assert np.array_equal(a, sample_site(site, 2500, 5))
    assert np.array_equal(a[:1200], sample_site(site, 1200, 5))
    assert np.array_equal(a[CHUNK + 10:CHUNK + 60], sample_site(site, 50, 5, start=CHUNK + 10))


def test_different_seeds_same_distribution():
    site = DgUnit("PV", 50, 183)
    a = sample_site(site, 10_000, 1)
    b = sample_site(site, 10_000, 2)
    assert not np.array_equal(a, b)
    ks = stats.ks_2samp(a, b).statistic
    crit = 1.628 * np.sqrt(2 / 10_000)    # 1% two-sample critical value
    assert ks < crit


def test_models_keyed_by_bus_override_kind():
    models = load_models({"WT": {"dist": "weibull", "params": {"k": 2, "c": 8}},
                          "61": {"dist": "constant"}})
    assert np.all(sample_site(DgUnit("WT", 61, 10), 10, 0, models) == 10)
    assert not np.all(sample_site(DgUnit("WT", 62, 10), 100, 0, models) == 10)


def test_invalid_n():
    with pytest.raises(ValueError):
        sample_site(DgUnit("WT", 61, 10), 0, 0)

import numpy as np
import pytest

from dgplan.objectives import DgUnit
from dgplan.ppf import (CdfSeries, PpfFailure, dominates_left, effective_output,
                        min_voltage_bus, run_ppf, voltage_band)
from dgplan.storage import size_storage

from conftest import REFERENCE_PORTFOLIO, make_case

PORTFOLIO = [DgUnit(k, b, kw) for k, b, kw in REFERENCE_PORTFOLIO]


def test_effective_output_examples():
    assert effective_output(1556, 1556, 360) == 1556
    assert effective_output(0, 1556, 360) == 360
    assert effective_output(1400, 1556, 360) == 1556
    out = effective_output(np.array([0.0, 100.0, 1500.0]), 1556.0, 360.0)
    assert out.tolist() == [360.0, 460.0, 1556.0]
    with pytest.raises(ValueError):
        effective_output(-1, 10, 1)


def test_cdf_series_is_a_distribution():
    s = CdfSeries("x", "kw", [3.0, 1.0, 2.0, 2.0])
    assert s.values.tolist() == [1, 2, 2, 3]
    assert s.probs[-1] == 1.0 and np.all(np.diff(s.probs) > 0)
    assert s.cdf(2.0) == 0.75 and s.cdf(0.5) == 0.0 and s.cdf(3.0) == 1.0
    assert s.quantile(0.5) == 2.0 and s.quantile(1.0) == 3.0
    assert s.prob_at_least(2.0) == 0.75
    with pytest.raises(ValueError):
        CdfSeries("x", "kw", [])


def test_two_bus_min_voltage():
    case = make_case([(1, "swing", 0, 0), (2, "load", 100, 50)], [(1, 1, 2, 0.5, 0.3)])
    rep = run_ppf(case, [DgUnit("MT", 2, 10)], n=10, seed=0)
    assert min_voltage_bus(rep) == 2


def test_mt_only_gives_single_atoms(case69):
    rep = run_ppf(case69, [DgUnit("MT", 49, 185), DgUnit("MT", 64, 30)], n=200, seed=1)
    for s in rep.series().values():
        assert np.all(s.values == s.values[0])
    assert rep.excluded == 0 and rep.n == 200


def test_base_like_case_min_voltage_bus(case69):
    # negligible DG keeps the base-case profile, whose weakest bus is 65 in the vendored data
    rep = run_ppf(case69, [DgUnit("MT", 49, 0.0)], n=20, seed=0)
    assert min_voltage_bus(rep) == 65


@pytest.fixture(scope="module")
def reports(case69):
    specs = size_storage(PORTFOLIO, 0.6, 4000, 8)
    without = run_ppf(case69, PORTFOLIO, None, 4000, 8)
    with_ = run_ppf(case69, PORTFOLIO, specs, 4000, 8)
    return without, with_, specs


def test_storage_raises_outputs_pointwise(reports):
    without, with_, _ = reports
    assert without.scenario == "without_storage" and with_.scenario == "with_storage"
    for bus in (61, 50):
        assert np.all(with_.outputs[bus].values >= without.outputs[bus].values)
        assert with_.outputs[bus].prob_at_least(with_.rated[bus]) >= 0.6
    assert dominates_left(with_.p_loss, without.p_loss)


def test_reference_portfolio_storage_voltage_band(reports):
    _, with_, _ = reports
    assert min_voltage_bus(with_) == 27
    lo, hi = voltage_band(with_, 27, 0.6, 1.0)
    assert hi - lo < 0.005
    assert 0.962 <= lo <= hi <= 0.973


def test_cdf_converges_with_more_samples(case69):
    ref = run_ppf(case69, PORTFOLIO, n=16_000, seed=30).p_loss
    d = []
    for n in (500, 1000, 4000):
        s = run_ppf(case69, PORTFOLIO, n=n, seed=30).p_loss
        grid = ref.values
        d.append(np.max(np.abs(s.cdf(grid) - ref.cdf(grid))))
    assert d[0] > d[2]


def test_exclusions_fail_the_run():
    case = make_case([(1, "swing", 0, 0), (2, "load", 1, 0)], [(1, 1, 2, 0.9, 0.9)],
                     base_kv=1.0, base_mva=1.0)
    with pytest.raises(PpfFailure):
        run_ppf(case, [DgUnit("MT", 2, 4000)], n=50, seed=0)


def test_write_csvs(reports, tmp_path):
    without, _, _ = reports
    paths = without.write(tmp_path)
    assert len(paths) == 2 + 68 + 4 - 0
    head = (tmp_path / "without_storage_p_loss.csv").read_text().splitlines()[0]
    assert head == "value_kw,cum_prob"
    assert (tmp_path / "without_storage_voltage_bus27.csv").read_text().startswith("value_pu,cum_prob")

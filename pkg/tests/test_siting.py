import numpy as np
import pytest

from dgplan.powerflow import solve, solve_demand
from dgplan.siting import (LossSensitivitySiting, golden_section, loss_sensitivity,
                           optimal_size_at, size_bound, stage1_place)

from conftest import make_case


def fd_gradient(case, h=1.0):
    out = np.zeros(case.n_bus)
    for i in range(1, case.n_bus):
        p = case.p_load.copy()
        p[i] += h
        a = solve_demand(case, p, case.q_load, tol=1e-12).p_loss
        p[i] -= 2 * h
        b = solve_demand(case, p, case.q_load, tol=1e-12).p_loss
        out[i] = (a - b) / (2 * h)
    return out


def test_lsf_zero_without_load():
    case = make_case([(1, "swing", 0, 0), (2, "load", 0, 0), (3, "load", 0, 0)],
                     [(1, 1, 2, 0.2, 0.1), (2, 2, 3, 0.2, 0.1)])
    assert np.all(loss_sensitivity(case, solve(case)) == 0)


def test_lsf_two_bus_closed_form(two_bus):
    # with the coefficients frozen at the operating point, dL/dP = 2 r P / U^2
    sol = solve(two_bus, tol=1e-12)
    lsf = loss_sensitivity(two_bus, sol)
    assert lsf[0] == 0.0
    assert lsf[1] == pytest.approx(2 * 0.1 * 0.1 / sol.u[1] ** 2, rel=1e-9)


@pytest.mark.xfail(strict=True, reason="sensitivity omits dU/dP; off by 1.02% at 1% voltage drop")
def test_lsf_two_bus_within_one_percent_of_finite_difference(two_bus):
    lsf = loss_sensitivity(two_bus, solve(two_bus, tol=1e-12))
    assert lsf[1] == pytest.approx(fd_gradient(two_bus)[1], rel=0.01)


def test_lsf_converges_to_finite_difference_at_light_load():
    case = make_case([(1, "swing", 0, 0), (2, "load", 10.0, 0.0)], [(1, 1, 2, 0.1, 0.0)],
                     base_kv=1.0, base_mva=1.0)
    lsf = loss_sensitivity(case, solve(case, tol=1e-12))
    assert lsf[1] == pytest.approx(fd_gradient(case, h=0.1)[1], rel=0.002)


def test_lsf_69_ranking_agrees_with_finite_difference(case69):
    lsf = loss_sensitivity(case69, solve(case69))
    fd = fd_gradient(case69, h=0.5)
    # the formula omits the voltage dependence of its coefficients, so values
    # differ by a few percent on this loaded feeder, but the top bus agrees
    assert int(np.argmax(lsf)) == int(np.argmax(fd))
    assert case69.bus_ids[int(np.argmax(lsf))] == 65
    assert np.corrcoef(lsf, fd)[0, 1] > 0.99


def test_golden_section_on_parabola():
    assert golden_section(lambda x: (x - 3.3) ** 2, 0, 10, tol=1e-6) == pytest.approx(3.3, abs=1e-5)


def test_two_bus_optimum_is_local_load(two_bus):
    assert optimal_size_at(two_bus, 2) == pytest.approx(100.0, abs=0.1 + 1e-9)


def test_unloaded_bus_gets_nothing():
    case = make_case([(1, "swing", 0, 0), (2, "load", 0, 0)], [(1, 1, 2, 0.2, 0.1)])
    assert optimal_size_at(case, 2) == 0.0


def test_size_bounds(case69):
    pen = size_bound(case69, 61)
    assert pen == pytest.approx(case69.p_load.sum() + solve(case69).p_loss)
    assert size_bound(case69, 61, bound="downstream") == pytest.approx(1562.0)
    with pytest.raises(ValueError):
        size_bound(case69, 61, bound="nope")
    with pytest.raises(ValueError):
        optimal_size_at(case69, 1)


def test_stage1_two_bus(two_bus):
    res = stage1_place(two_bus, 1)
    assert res.buses == [2]


def test_stage1_69_invariants(case69):
    res = stage1_place(case69, 4)
    assert len(set(res.buses)) == len(res.buses) == 4
    assert all(c > 0 for c in res.capacities)
    losses = [res.base_loss] + res.loss_after_each
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))
    assert sum(res.capacities) <= case69.p_load.sum() + res.base_loss
    assert res.buses[0] == 65
    d = res.to_dict()
    assert d["placements"][0]["bus"] == 65


def test_stage1_range_errors(case69):
    with pytest.raises(ValueError):
        stage1_place(case69, 0)
    with pytest.raises(ValueError):
        stage1_place(case69, 69)


def test_estimator_wrapper(case69):
    est = LossSensitivitySiting(n_dg=2).fit(case69)
    assert est.buses_.tolist() == stage1_place(case69, 2).buses
    assert est.get_params() == {"n_dg": 2, "bound": "penetration"}

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from dgplan.network import Branch, Bus, NetworkCase, bundled_case  # noqa: E402


def make_case(buses, branches, base_kv=12.66, base_mva=10.0):
    """Build a case from ``(id, kind, p, q)`` and ``(id, from, to, r, x[, rating])`` tuples."""
    bs = [Bus(i, k, p, q, 1.0, 1.0) if k == "swing" else Bus(i, k, p, q, 0.9, 1.1)
          for i, k, p, q in buses]
    brs = [Branch(*row) for row in branches]
    return NetworkCase(base_kv, base_mva, bs, brs)


@pytest.fixture(scope="session")
def case69():
    return bundled_case("pge69")


@pytest.fixture
def two_bus():
    # base 1 kV / 1 MVA gives z_base = 1 ohm, so ohms equal pu
    return make_case([(1, "swing", 0, 0), (2, "load", 100.0, 0.0)],
                     [(1, 1, 2, 0.1, 0.0)], base_kv=1.0, base_mva=1.0)


REFERENCE_PORTFOLIO = (("WT", 61, 1556.0), ("PV", 50, 183.0), ("MT", 49, 185.0), ("MT", 64, 30.0))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)

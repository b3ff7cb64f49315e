from __future__ import annotations

import numpy as np
import pytest

from idslab.geometry import LatticeGroup
from idslab.percolation import PercolationModel
from idslab.profiles import Geometric, PowerLaw, Table


@pytest.fixture(scope="session")
def z1():
    return LatticeGroup(1)


@pytest.fixture(scope="session")
def z2():
    return LatticeGroup(2)


@pytest.fixture(scope="session")
def geo(z1):
    """Z^1 with p(k) = (1/4) 2^-k."""
    return PercolationModel(z1, Geometric(0.25, 0.5))


@pytest.fixture(scope="session")
def empty(z1):
    return PercolationModel(z1, Table(()))


@pytest.fixture(scope="session")
def sure_nn(z1):
    return PercolationModel(z1, Table((1.0,)))


@pytest.fixture(scope="session")
def power2(z2):
    return PercolationModel(z2, PowerLaw(0.1, 4.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion; echoed in the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        lines.append(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from rcasim import DipoleSpec, LoadConfig, ula_layout

LAM = 0.04


@pytest.fixture
def lam():
    return LAM


@pytest.fixture
def spec():
    return DipoleSpec(LAM)


@pytest.fixture
def canonical_layout():
    """M=3 RCAs with N=2 couplers each at the 0.4-wavelength fixed positions."""
    return ula_layout(3, 2, LAM, d_min=0.2 * LAM)


@pytest.fixture
def short6():
    return LoadConfig.short(6)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail)`` for the acceptance summary."""

    def record(number, passed, detail):
        _ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")

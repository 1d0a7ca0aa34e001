import numpy as np
import pytest

from cptsense.bath import BathParams
from cptsense.cpt import CptParams

ACCEPTANCE_LINES = []


@pytest.fixture
def ref_cpt():
    """CPT parameters of the reference scenario, eta = 1.6 %."""
    return CptParams.from_mhz(rabi_mhz=2.8, gamma_mhz=13.0, bias_mhz=0.25, eta=0.016)


@pytest.fixture
def bath():
    return BathParams.from_mhz(tau_n_s=1e-3, sigma_mhz=0.13)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

"""Shared fixtures: prototype filters and channel profiles reused across files."""

import numpy as np
import pytest

from fbmclink import PdpProfile, design_prototype, load_pdp

RATE = 7.68e6


@pytest.fixture(scope="session")
def pf8():
    return design_prototype(4, 8)


@pytest.fixture(scope="session")
def pf16():
    return design_prototype(4, 16)


@pytest.fixture(scope="session")
def pf32():
    return design_prototype(4, 32)


@pytest.fixture(scope="session")
def pf64():
    return design_prototype(4, 64)


@pytest.fixture(scope="session")
def eva():
    return load_pdp("EVA", RATE)


@pytest.fixture(scope="session")
def peda():
    return load_pdp("PedA", RATE)


@pytest.fixture(scope="session")
def uni4():
    return PdpProfile("uni4", np.ones(4) / 4, RATE)

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("qrex", max_examples=50, deadline=None)
settings.load_profile("qrex")

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_addoption(parser):
    parser.addoption("--update-golden", action="store_true", default=False, help="Rewrite golden files under tests/fixtures")


@pytest.fixture
def update_golden(request):
    return request.config.getoption("--update-golden")


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("QREX_DIM_CAP", "QREX_ATOM_CAP", "QREX_ENUMERATION_CAP", "QREX_DEFAULT_TOL", "QREX_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def spoiling_fixture():
    with open(FIXTURES / "spoiling_witness.json", encoding="utf-8") as handle:
        return json.load(handle)


def random_psd(rng: np.random.Generator, dim: int, rank: int = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    return g @ g.conj().T


def random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    rho = random_psd(rng, dim)
    return rho / np.real(np.trace(rho))

# Standard library imports
from pathlib import Path

# Third-party imports
import numpy as np
import pytest

# Local imports
from src.settings import settings
from src.mfunc import Const, Entrywise, Var, constant, sub
from src.region import Disk, Rectangle

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(autouse=True)
def fresh_settings():
    settings.reset_to_defaults()
    yield
    settings.reset_to_defaults()


@pytest.fixture
def toy():
    """[[1, z], [0, z - 1]]"""
    z = Var()
    return Entrywise(((Const(1), z), (Const(0), sub(z, Const(1)))))


@pytest.fixture
def diag_one_z():
    """diag(1, z): constant operator norm on the unit disk, nonconstant function."""
    return Entrywise(((Const(1), Const(0)), (Const(0), Var())))


@pytest.fixture
def small_disk():
    return Disk(0j, 0.95, 21, 32)


@pytest.fixture
def square():
    return Rectangle(-2.0, 2.0, -2.0, 2.0, 41, 41)


@pytest.fixture
def const_identity():
    return constant(np.eye(2))


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


@pytest.fixture
def unitary():
    return random_unitary

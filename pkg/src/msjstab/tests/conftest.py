import numpy as np
import pytest

from msjstab.model import MsjParams

TINY = MsjParams(n1=1, n2=2, n=2, mu1=1.0, mu2=1.0, p1=0.5)
SYS_3_10_30 = MsjParams(n1=3, n2=10, n=30, mu1=2.0, mu2=1.0, p1=0.5)


def random_params(rng: np.random.Generator, n_max: int = 60, equal_rates: bool = False) -> MsjParams:
    n = int(rng.integers(2, n_max + 1))
    n2 = int(rng.integers(2, n + 1))
    n1 = int(rng.integers(1, n2))
    mu1 = float(10 ** rng.uniform(-1, 1))
    mu2 = mu1 if equal_rates else float(10 ** rng.uniform(-1, 1))
    p1 = float(rng.uniform(0.05, 0.95))
    return MsjParams(n1=n1, n2=n2, n=n, mu1=mu1, mu2=mu2, p1=p1)


@pytest.fixture
def tiny() -> MsjParams:
    return TINY


@pytest.fixture
def sys_3_10_30() -> MsjParams:
    return SYS_3_10_30


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def make_params():
    return random_params

import numpy as np
import pytest
from click.testing import CliRunner

from app.geom import Manifold
from app.opalg import BosonOperator, SpinOperator, TensorOperator
from app.symcore import PhaseSymbol


@pytest.fixture(scope="module")
def plane():
    return Manifold.plane()


@pytest.fixture(params=["1/2", "1", "3/2"])
def sphere(request):
    """
    Sphere of each small spin label.

    Returns:
        Manifold: The spin-``s`` sphere.
    """
    return Manifold.sphere(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20241018)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def oscillator():
    # N + 1/2 on one bosonic mode
    return TensorOperator.single(BosonOperator.number() + BosonOperator.identity("1/2"))


@pytest.fixture
def spin_one_sz():
    return TensorOperator.single(SpinOperator.sz(1))


@pytest.fixture
def random_symbol(rng):
    """
    Factory of random symbols with small Gaussian-integer coefficients.

    Returns:
        Callable[[int, int], PhaseSymbol]: ``make(degree, denom_power)``.
    """
    def make(degree=2, denom_power=0):
        terms = {}
        for p in range(degree + 1):
            for q in range(degree + 1 - p):
                re, im = (int(v) for v in rng.integers(-3, 4, size=2))
                terms[(p, q)] = f"{re} + {im}*I"
        return PhaseSymbol.from_terms(terms, denom_power)

    return make

import random

import pytest
import sympy as sp

from geomech.geometry import Chart

SEED = 20240917


@pytest.fixture
def rng():
    return random.Random(SEED)


@pytest.fixture(scope="session")
def plane():
    Q = Chart.from_names(["x", "y"])
    return Q, Q.tangent()


def random_poly(rng, variables, degree=2, terms=4, coeff=5):
    """Sparse random polynomial with small integer coefficients."""
    out = sp.S.Zero
    for _ in range(terms):
        m = sp.Integer(rng.randint(-coeff, coeff))
        for _ in range(rng.randint(0, degree)):
            m *= rng.choice(variables)
        out += m
    return out


# Outcomes of the property suites, reused by the acceptance summary so the
# expensive suites run once per session.
PROPERTY_OUTCOMES = {}


def pytest_collection_modifyitems(items):
    items.sort(key=lambda it: "test_acceptance.py" in it.nodeid)


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_properties.py" in report.nodeid:
        PROPERTY_OUTCOMES[report.nodeid.split("::")[-1]] = report.passed

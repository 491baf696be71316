import hypothesis
import numpy as np
import pytest

from gstdesign.builtins import make_xyi_gateset, standard_xyi_fiducials

hypothesis.settings.register_profile(
    "default", max_examples=25, deadline=None, derandomize=True
)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def xyi():
    return make_xyi_gateset()


@pytest.fixture(scope="session")
def xyi_fiducials():
    return standard_xyi_fiducials()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260809)


def random_circuit(rng, labels=("Gi", "Gx", "Gy"), max_depth=20):
    from gstdesign.model import Circuit

    depth = int(rng.integers(0, max_depth + 1))
    return Circuit(tuple(rng.choice(labels, size=depth)))

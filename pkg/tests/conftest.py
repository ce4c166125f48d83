import numpy as np
import pytest

from nslab.fieldkit import build_graded_grid


@pytest.fixture(scope="session")
def grid384():
    return build_graded_grid(30.0, 384, 0.02)


@pytest.fixture(scope="session")
def grid256():
    return build_graded_grid(25.0, 256, 0.04)


def refinement_levels():
    """(n_nodes, delta_ref) pairs refining everything simultaneously."""
    return [(128, 0.08), (256, 0.04), (512, 0.02)]


def observed_orders(errors):
    errors = np.asarray(errors, dtype=float)
    return np.log2(errors[:-1] / errors[1:])

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment


def multiset_distance(a, b) -> float:
    """Max matched distance between two complex multisets (optimal assignment)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    assert a.shape == b.shape
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


@pytest.fixture(scope="session")
def theoretical_build():
    from excepta.models import theoretical_builder

    return theoretical_builder(m0=1.0, kbar=1.0, dchi=-0.05)

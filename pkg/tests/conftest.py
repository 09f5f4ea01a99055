from fractions import Fraction as F

import pytest

from spherefield import space_from_sq


@pytest.fixture
def equilateral():
    """Three points pairwise at squared distance 1 (certified)."""
    return space_from_sq([[0, 1, 1], [1, 0, 1], [1, 1, 0]])


@pytest.fixture
def isoceles():
    """d^2(1,2) = 2, d^2(1,3) = d^2(2,3) = 1: swapping the first two points
    is a self-isometry, but the order distribution is not uniform."""
    return space_from_sq([[0, 2, 1], [2, 0, 1], [1, 1, 0]])


@pytest.fixture
def scalene():
    """All three squared distances different (certified)."""
    return space_from_sq(
        [[0, 1, F(3, 2)], [1, 0, F(1, 2)], [F(3, 2), F(1, 2), 0]]
    )


@pytest.fixture
def orthogonal_pair():
    return space_from_sq([[0, 2], [2, 0]])

import numpy as np
import pytest

from helmskel import build_problem
from helmskel.traces import SkeletonField


@pytest.fixture(scope="session")
def ref_problem():
    """Reference configuration: unit square, 8x8 mesh, 2x2 partition, robin."""
    return build_problem(8, 8, 2, 2, k=5.0, bc_kind="robin")


@pytest.fixture(scope="session")
def small_problem():
    """Desk-scale problem for dense oracles."""
    return build_problem(4, 4, 2, 2, k=3.0, bc_kind="robin")


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def rand_field():
    def make(problem, rng, kind):
        return SkeletonField(
            [rng.standard_normal(n) + 1j * rng.standard_normal(n)
             for n in problem.block_sizes], kind)
    return make

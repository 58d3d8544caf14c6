import pytest

from mfdeform.deform import second_order_data
from mfdeform.groups import GroupElement, default_context, sample_feasible_pairs
from mfdeform.modforms import default_cusp_form

T = GroupElement(1, 1, 0, 1)
U = GroupElement(2, -1, 5, -2)


@pytest.fixture(scope="session")
def h():
    return default_cusp_form()


@pytest.fixture(scope="session")
def ctx():
    return default_context()


@pytest.fixture(scope="session")
def pairs5(ctx):
    return sample_feasible_pairs(ctx, 5, 6, 101)


@pytest.fixture(scope="session")
def pkg(h, pairs5):
    return second_order_data(h, pairs=pairs5)

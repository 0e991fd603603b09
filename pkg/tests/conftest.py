import numpy as np
import pytest

from fracsurf import assemble, coefficient_field, gen_sphere, gen_unit_square


@pytest.fixture(scope="session")
def sphere2():
    return gen_sphere(2)


@pytest.fixture(scope="session")
def sphere2_op(sphere2):
    return assemble(sphere2, coefficient_field(sphere2), "zero-mean")


@pytest.fixture(scope="session")
def sphere3():
    return gen_sphere(3)


@pytest.fixture(scope="session")
def sphere3_op(sphere3):
    return assemble(sphere3, coefficient_field(sphere3), "zero-mean")


@pytest.fixture(scope="session")
def square16():
    return gen_unit_square(16)


@pytest.fixture(scope="session")
def square16_op(square16):
    return assemble(square16, coefficient_field(square16), "dirichlet")


@pytest.fixture(scope="session")
def sphere2_sign_rhs(sphere2, sphere2_op):
    from fracsurf import build_rhs

    return build_rhs(sphere2, lambda x: np.sign(x[:, 2]), sphere2_op, method="l2_project")

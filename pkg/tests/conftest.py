import os

# Settings are resolved at import time; tests always run strict.
os.environ["ENV"] = "testing"

import numpy as np
import pytest

from multifield.models.body import BodyGrid, PlacementField, OrderField
from multifield.repositories.manifold import manifold_repository
from multifield.repositories.preset import model_presets


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def line_grid():
    return BodyGrid.box([0.0], [1.0], 11)


@pytest.fixture
def square_grid():
    return BodyGrid.box([0.0, 0.0], [1.0, 1.0], 9)


@pytest.fixture
def cube_grid():
    return BodyGrid.box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 5)


@pytest.fixture
def circle():
    return manifold_repository.get("S1")


@pytest.fixture
def sphere():
    return manifold_repository.get("S2")


@pytest.fixture
def director_sphere():
    return manifold_repository.get("S2:embedded")


@pytest.fixture
def quadratic():
    return model_presets.build("quadratic", {"mu": 1.0, "kappa": 1.0, "alpha": 0.0, "iota": 1.0})


@pytest.fixture
def random_director_state(rng):
    """Random jet on a 3D body with unit-vector order parameter."""
    from multifield.models.body import MotionState

    def build(grid):
        shape = grid.shape
        nu = rng.normal(size=shape + (3,))
        nu /= np.linalg.norm(nu, axis=-1, keepdims=True)
        grad_nu = rng.normal(scale=0.3, size=shape + (3, 3))
        grad_nu -= np.einsum("...a,...b,...bA->...aA", nu, nu, grad_nu)
        return MotionState(
            grid=grid,
            manifold=manifold_repository.get("S2:embedded"),
            t=0.0,
            x=grid.coordinates(),
            xdot=rng.normal(size=shape + (3,)),
            F=np.eye(3) + rng.normal(scale=0.1, size=shape + (3, 3)),
            nu=nu,
            nudot=np.cross(rng.normal(size=shape + (3,)), nu),
            grad_nu=grad_nu,
        )

    return build


@pytest.fixture
def rest_state():
    """Rest state with identity placement and the given order values."""
    from multifield.services.kinematics import kinematics_service

    def build(grid, manifold, values):
        return kinematics_service.state_from_fields(PlacementField.identity(grid), OrderField(grid, manifold, values))

    return build

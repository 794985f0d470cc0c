import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from multifield.core.exceptions import InputError, OrientationError, UnsupportedActionError
from multifield.core.validators import ensure_positive_definite, ensure_symmetric
from multifield.models.body import BodyGrid, MotionState, OrderField, PlacementField
from multifield.models.manifolds import ManifoldModel
from multifield.services.calculus import central_derivative
from multifield.services.manifold import manifold_service

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class StrainMeasures:
    C: np.ndarray
    E: np.ndarray


@dataclass(frozen=True, eq=False)
class GeneralizedMetric:
    G: np.ndarray
    E_bar: np.ndarray


@dataclass(frozen=True, eq=False)
class MicrocrackDecomposition:
    F: np.ndarray
    F_tot: np.ndarray
    F_micro: np.ndarray
    displacement: np.ndarray
    residual: np.ndarray

    @property
    def linf(self) -> float:
        return float(np.max(self.residual))


class KinematicsService:
    """
    Service layer for nodal fields on a BodyGrid: gradients, rates and strains.
    """

    # ------------------------------
    # STENCILS
    # ------------------------------

    def gradient_of(
        self,
        values: np.ndarray,
        grid: BodyGrid,
        manifold: Optional[ManifoldModel] = None,
        kinks: Sequence[Tuple[int, float]] = (),
    ) -> np.ndarray:
        """
        Second-order gradient of nodal values.

        Central differences inside, one-sided second-order differences on the
        boundary. Periodic chart coordinates are unwrapped along each axis
        first. Declared kink planes ``(axis, coordinate)`` split the stencil;
        nodes on a kink receive the mean of the two one-sided derivatives.

        Args:
            values: Shape ``grid.shape + comps``

        Returns:
            np.ndarray: Shape ``grid.shape + comps + (d,)``
        """
        values = np.asarray(values, dtype=float)
        if values.shape[:grid.dim] != grid.shape:
            raise InputError(f"values of shape {values.shape} do not live on grid {grid.shape}")
        columns = []
        for axis, h in enumerate(grid.spacing):
            data = manifold.unwrap(values, axis) if manifold is not None and manifold.is_periodic else values
            planes = [c for a, c in kinks if a == axis]
            if planes:
                columns.append(self._piecewise_derivative(data, grid.axes[axis], axis, h, planes))
            else:
                columns.append(self._axis_derivative(data, axis, h))
        return np.stack(columns, axis=-1)

    @staticmethod
    def _axis_derivative(data: np.ndarray, axis: int, h: float) -> np.ndarray:
        if data.shape[axis] < 2:
            return np.zeros_like(data)
        edge = 2 if data.shape[axis] >= 3 else 1
        return np.gradient(data, h, axis=axis, edge_order=edge)

    def _piecewise_derivative(self, data, coords, axis, h, planes) -> np.ndarray:
        tol = 1e-9 * h
        cuts = sorted({int(np.argmin(np.abs(coords - c))) for c in planes
                       if coords[0] + tol < c < coords[-1] - tol and np.min(np.abs(coords - c)) < tol})
        if len(cuts) < len(planes):
            logger.debug("kink plane not on a node; using the plain stencil across it")
        bounds = [0] + cuts + [len(coords) - 1]
        out = np.zeros_like(data)
        hits = np.zeros(len(coords))
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            index = [slice(None)] * data.ndim
            index[axis] = slice(lo, hi + 1)
            piece = self._axis_derivative(data[tuple(index)], axis, h)
            out[tuple(index)] += piece
            hits[lo:hi + 1] += 1.0
        shape = [1] * data.ndim
        shape[axis] = len(coords)
        return out / hits.reshape(shape)

    def divergence(self, tensor: np.ndarray, grid: BodyGrid) -> np.ndarray:
        """Div of a field whose last axis is the material index: sum_A d T[..., A] / d X_A."""
        tensor = np.asarray(tensor, dtype=float)
        if tensor.shape[-1] != grid.dim:
            raise InputError(f"last axis of the tensor must have length {grid.dim}")
        result = np.zeros(tensor.shape[:-1])
        for axis, h in enumerate(grid.spacing):
            result += self._axis_derivative(tensor[..., axis], axis, h)
        return result

    # ------------------------------
    # DEFORMATION
    # ------------------------------

    def check_orientation(self, F: np.ndarray) -> np.ndarray:
        det = np.linalg.det(F)
        bad = np.argwhere(det <= 0.0)
        if bad.size:
            node = tuple(int(i) for i in bad[0])
            raise OrientationError(node, float(det[node]))
        return det

    def deformation_gradient(self, placement: PlacementField) -> np.ndarray:
        """
        Deformation gradient F[..., i, A] = d x_i / d X_A.

        Raises:
            InputError: If an axis has fewer than 3 nodes
            OrientationError: If det F <= 0 at some node
        """
        grid = placement.grid
        if any(n < 3 for n in grid.shape):
            raise InputError(f"deformation_gradient needs 3 nodes per axis, got {grid.shape}", field="grid")
        F = self.gradient_of(placement.values, grid)
        self.check_orientation(F)
        return F

    def order_gradient(self, order: OrderField) -> np.ndarray:
        """Chart gradient of an order field, shape ``grid.shape + (m, d)``."""
        return self.gradient_of(order.values, order.grid, order.manifold, order.kinks)

    def pullback_metric(self, F: np.ndarray, g: Optional[np.ndarray] = None) -> np.ndarray:
        """C_AB = F_iA g_ij F_jB."""
        F = np.asarray(F, dtype=float)
        if g is None:
            return np.einsum("...iA,...iB->...AB", F, F)
        g = np.broadcast_to(np.asarray(g, dtype=float), F.shape[:-2] + (F.shape[-2],) * 2)
        return np.einsum("...iA,...ij,...jB->...AB", F, g, F)

    def strain_measures(self, F, g=None, gamma=None) -> StrainMeasures:
        """
        Right Cauchy-Green tensor and Green strain.

        Raises:
            NumericalConsistencyError: If C is not symmetric
        """
        F = np.asarray(F, dtype=float)
        if g is not None:
            ensure_positive_definite(np.broadcast_to(g, F.shape), "spatial metric g")
        C = ensure_symmetric(self.pullback_metric(F, g), "C")
        gamma = np.eye(F.shape[-1]) if gamma is None else np.asarray(gamma, dtype=float)
        return StrainMeasures(C=C, E=0.5 * (C - gamma))

    def generalized_metric(
        self,
        F,
        g,
        nu,
        grad_nu,
        hook: Callable[..., np.ndarray],
        gamma=None,
    ) -> GeneralizedMetric:
        """
        Model-dependent metric G(F, g, nu, grad nu) and E_bar = (G - gamma) / 2.

        Raises:
            ModelError: If the hook output is not symmetric positive-definite
        """
        G = ensure_positive_definite(np.asarray(hook(F, g, nu, grad_nu), dtype=float), "generalized metric G")
        gamma = np.eye(G.shape[-1]) if gamma is None else np.asarray(gamma, dtype=float)
        return GeneralizedMetric(G=G, E_bar=0.5 * (G - gamma))

    # ------------------------------
    # RATES AND OBSERVERS
    # ------------------------------

    def spatial_rates(self, state: MotionState) -> Tuple[np.ndarray, np.ndarray]:
        """
        Spatial velocity v = xdot and upsilon = nudot + grad_nu F^-1 v.

        Raises:
            OrientationError: If F is singular or inverts orientation
        """
        self.check_orientation(state.F)
        v = state.xdot
        w = np.linalg.solve(state.F, v[..., None])[..., 0]
        upsilon = state.nudot + np.einsum("...aA,...A->...a", state.grad_nu, w)
        return v, upsilon

    def observer_change(
        self,
        state: MotionState,
        c=None,
        qdot=None,
        x0=None,
        manifold: Optional[ManifoldModel] = None,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Rates seen by an observer in relative translation c and rotation qdot about x0.

        Raises:
            UnsupportedActionError: If qdot != 0 and the manifold has no SO3 action
        """
        manifold = manifold or state.manifold
        d = state.grid.dim
        c = np.zeros(d) if c is None else np.asarray(c, dtype=float)
        xdot = state.xdot + c
        nudot = state.nudot.copy()
        if qdot is not None and np.any(np.asarray(qdot) != 0.0):
            qdot = np.asarray(qdot, dtype=float)
            if "SO3" not in manifold.action_generators:
                raise UnsupportedActionError("SO3", manifold.tag)
            if d != 3:
                raise InputError("spatial rotations need a three-dimensional body", field="qdot")
            x0 = np.zeros(3) if x0 is None else np.asarray(x0, dtype=float)
            xdot = xdot + np.cross(qdot, state.x - x0)
            nudot = nudot + manifold_service.action_generator(manifold, "SO3", qdot, state.nu).components
        return xdot, nudot

    # ------------------------------
    # MICROCRACKS
    # ------------------------------

    def microcrack_decomposition(
        self,
        placement: PlacementField,
        crack_map: Callable[[np.ndarray], np.ndarray],
        crack_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ) -> MicrocrackDecomposition:
        """
        Additive and multiplicative splits of the gradient of crack_map o x.

        F_tot is the stencil gradient of the composed placement, F_micro the
        Jacobian of crack_map at x; the residual |F_tot - F_micro F| is O(h^2).
        """
        F = self.deformation_gradient(placement)
        x = placement.values
        y = np.asarray(crack_map(x), dtype=float)
        F_tot = self.gradient_of(y, placement.grid)
        if crack_jacobian is not None:
            F_micro = np.asarray(crack_jacobian(x), dtype=float)
        else:
            F_micro = central_derivative(crack_map, [x], 0, 1)
        residual = np.linalg.norm(F_tot - F_micro @ F, axis=(-2, -1))
        logger.debug(f"microcrack residual max {float(np.max(residual)):.3e} on grid {placement.grid.shape}")
        return MicrocrackDecomposition(F=F, F_tot=F_tot, F_micro=F_micro, displacement=y - x, residual=residual)

    # ------------------------------
    # STATE ASSEMBLY
    # ------------------------------

    def state_from_fields(
        self,
        placement: PlacementField,
        order: OrderField,
        xdot=None,
        nudot=None,
        t: float = 0.0,
    ) -> MotionState:
        """MotionState whose F and grad nu come from the nodal fields."""
        grid = placement.grid
        if not grid.same_as(order.grid):
            raise InputError("placement and order fields live on different grids")
        return MotionState(
            grid=grid,
            manifold=order.manifold,
            t=t,
            x=placement.values,
            xdot=np.zeros_like(placement.values) if xdot is None else xdot,
            F=self.deformation_gradient(placement),
            nu=order.values,
            nudot=np.zeros_like(order.values) if nudot is None else nudot,
            grad_nu=self.order_gradient(order),
        )

    def rotate_state(self, state: MotionState, rotation: np.ndarray) -> MotionState:
        """
        Superpose a rigid spatial rotation Q on a state: x, xdot, F by Q and the
        order parameter through the matching linear SO3 action.

        Raises:
            UnsupportedActionError: If the order parameter has no linear SO3 action
        """
        Q = np.asarray(rotation, dtype=float)
        manifold = state.manifold
        if state.grid.dim != 3 or Q.shape != (3, 3):
            raise InputError("rigid rotations need a three-dimensional body and a 3x3 matrix", field="rotation")
        if "SO3" not in manifold.action_generators or not manifold.linear_ambient or manifold.dim != 3:
            raise UnsupportedActionError("SO3", manifold.tag)
        return state.replace(
            x=state.x @ Q.T,
            xdot=state.xdot @ Q.T,
            F=np.einsum("ij,...jA->...iA", Q, state.F),
            nu=state.nu @ Q.T,
            nudot=state.nudot @ Q.T,
            grad_nu=np.einsum("ab,...bA->...aA", Q, state.grad_nu),
        )


# Create singleton instance
kinematics_service = KinematicsService()

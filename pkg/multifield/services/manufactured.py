import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from multifield.core.exceptions import InputError, NumericalConsistencyError, UnknownCaseError
from multifield.models.body import BodyGrid, MotionState
from multifield.models.interface import InterfaceModel, PointJet, StatePair, SurfaceEnergyModel
from multifield.models.lagrangian import LagrangianModel, Sources
from multifield.models.manifolds import ManifoldModel
from multifield.models.trajectory import Trajectory
from multifield.repositories.manifold import manifold_repository
from multifield.repositories.preset import model_presets, surface_presets
from multifield.services.calculus import central_derivative
from multifield.services.interface import interface_service
from multifield.services.kinematics import kinematics_service

logger = logging.getLogger(__name__)

CASES = ("bulk-smooth", "two-phase-bar", "structured-sphere", "rigid-rotation")

# Outer step of the nested differences in verify(); inner partials use PARTIALS_STEP
VERIFY_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    """
    Analytic motion with the sources that make it an exact solution.

    Bulk cases carry closures ``x``, ``xdot``, ``nu``, ``nudot`` of (X, t) and a
    sampled trajectory; interfacial cases carry a ``pairs`` closure over surface
    points and the surface data.
    """
    tag: str
    model: LagrangianModel
    manifold: ManifoldModel
    closures: Dict[str, Callable] = field(default_factory=dict)
    sources: Sources = field(default_factory=Sources)
    trajectory: Optional[Trajectory] = None
    surface: Optional[InterfaceModel] = None
    phi: Optional[SurfaceEnergyModel] = None
    pairs: Optional[Callable[[np.ndarray], StatePair]] = None
    U: float = 0.0
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_interfacial(self) -> bool:
        return self.surface is not None


def _cosine_profile(X: np.ndarray) -> np.ndarray:
    return np.prod(np.cos(np.pi * np.asarray(X, dtype=float)), axis=-1)


def _cross_matrix(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


class ManufacturedService:
    """
    Factory of manufactured solutions for the residual checks.
    """

    def __init__(self):
        self.models = model_presets
        self.surfaces = surface_presets
        self.manifolds = manifold_repository

    def case(self, tag: str, **parameters) -> ManufacturedCase:
        """
        Build a registered case.

        Raises:
            UnknownCaseError: If the tag is not registered
        """
        builders = {
            "bulk-smooth": self.bulk_smooth,
            "two-phase-bar": self.two_phase_bar,
            "structured-sphere": self.structured_sphere,
            "rigid-rotation": self.rigid_rotation,
        }
        if tag not in builders:
            raise UnknownCaseError("manufactured case", tag, list(CASES))
        case = builders[tag](**parameters)
        logger.info(f"Built manufactured case '{tag}' with parameters {case.parameters}")
        return case

    # ------------------------------
    # SAMPLING
    # ------------------------------

    def sample_trajectory(self, grid: BodyGrid, manifold: ManifoldModel, closures: Dict[str, Callable],
                          dt: float, levels: int, t0: float = 0.0) -> Trajectory:
        """
        Trajectory with analytic x, xdot, nu, nudot and stencil F, grad nu.
        """
        if levels < 3:
            raise InputError(f"a manufactured trajectory needs at least 3 levels, got {levels}", field="levels")
        X = grid.coordinates()
        states = []
        for k in range(levels):
            t = t0 + k * dt
            x = closures["x"](X, t)
            nu = closures["nu"](X, t)
            states.append(MotionState(
                grid=grid,
                manifold=manifold,
                t=t,
                x=x,
                xdot=closures["xdot"](X, t),
                F=kinematics_service.gradient_of(x, grid),
                nu=nu,
                nudot=closures["nudot"](X, t),
                grad_nu=kinematics_service.gradient_of(nu, grid, manifold),
            ))
        return Trajectory(states=tuple(states), dt=dt)

    # ------------------------------
    # BULK CASES
    # ------------------------------

    def bulk_smooth(
        self,
        dim: int = 2,
        nodes: int = 17,
        dt: Optional[float] = None,
        levels: int = 3,
        amplitude: float = 0.05,
        order_amplitude: float = 0.1,
        omega: float = 2.0,
        mu: float = 1.0,
        kappa: float = 1.0,
        alpha: float = 0.5,
        iota: float = 1.0,
    ) -> ManufacturedCase:
        """
        Standing waves in x and nu on the unit box for the quadratic model.

        x = X + a phi(X) cos(omega t) (1, ..., 1), nu = b phi(X) sin(omega t) with
        phi = prod cos(pi X_k). Substitution gives
        b_ext = (-omega^2 + d pi^2 mu) a phi cos(omega t) per component and
        beta_ext = (-iota omega^2 + alpha + d pi^2 kappa) b phi sin(omega t).
        """
        model = self.models.build("quadratic", {"mu": mu, "kappa": kappa, "alpha": alpha, "iota": iota})
        manifold = self.manifolds.get("R1")
        grid = BodyGrid.box([0.0] * dim, [1.0] * dim, nodes)
        dt = 0.5 * grid.h if dt is None else dt
        ones = np.ones(dim)
        lap = dim * np.pi ** 2

        closures = {
            "x": lambda X, t: X + (amplitude * _cosine_profile(X) * np.cos(omega * t))[..., None] * ones,
            "xdot": lambda X, t: (-amplitude * omega * _cosine_profile(X) * np.sin(omega * t))[..., None] * ones,
            "nu": lambda X, t: (order_amplitude * _cosine_profile(X) * np.sin(omega * t))[..., None],
            "nudot": lambda X, t: (order_amplitude * omega * _cosine_profile(X) * np.cos(omega * t))[..., None],
        }
        sources = Sources(
            b=lambda X, t: ((-omega ** 2 + lap * mu) * amplitude * _cosine_profile(X) * np.cos(omega * t))[..., None] * ones,
            beta=lambda X, t: ((-iota * omega ** 2 + alpha + lap * kappa) * order_amplitude
                               * _cosine_profile(X) * np.sin(omega * t))[..., None],
        )
        return ManufacturedCase(
            tag="bulk-smooth",
            model=model,
            manifold=manifold,
            closures=closures,
            sources=sources,
            trajectory=self.sample_trajectory(grid, manifold, closures, dt, levels),
            parameters={"dim": dim, "nodes": nodes, "dt": dt, "levels": levels, "amplitude": amplitude,
                        "order_amplitude": order_amplitude, "omega": omega, "mu": mu, "kappa": kappa,
                        "alpha": alpha, "iota": iota},
        )

    def rigid_rotation(
        self,
        nodes: int = 5,
        dt: float = 0.05,
        levels: int = 5,
        spin=(0.0, 0.0, 1.0),
        center=(0.5, 0.5, 0.5),
        c: float = 1.0,
        kappa: float = 1.0,
        iota: float = 1.0,
    ) -> ManufacturedCase:
        """
        Rigid rotation x = x0 + Q(t)(X - x0) carrying the director nu = Q(t) tau.

        F = Q and grad nu = 0, so the director energy is stress-free; the
        sources reduce to the inertial terms b = xddot and beta = iota nuddot.
        """
        model = self.models.build("director", {"c": c, "kappa": kappa, "iota": iota})
        manifold = self.manifolds.get("S2:embedded")
        tau = np.asarray(model.parameters["tau"], dtype=float)
        spin = np.asarray(spin, dtype=float)
        x0 = np.asarray(center, dtype=float)
        W = _cross_matrix(spin)
        grid = BodyGrid.box([0.0] * 3, [1.0] * 3, nodes)

        def Q(t):
            return Rotation.from_rotvec(t * spin).as_matrix()

        def director(X, t):
            return np.broadcast_to(Q(t) @ tau, np.shape(X)[:-1] + (3,)).copy()

        closures = {
            "x": lambda X, t: x0 + (np.asarray(X) - x0) @ Q(t).T,
            "xdot": lambda X, t: (np.asarray(X) - x0) @ (W @ Q(t)).T,
            "nu": director,
            "nudot": lambda X, t: director(X, t) @ W.T,
        }
        sources = Sources(
            b=lambda X, t: (np.asarray(X) - x0) @ (W @ W @ Q(t)).T,
            beta=lambda X, t: iota * director(X, t) @ (W @ W).T,
        )
        return ManufacturedCase(
            tag="rigid-rotation",
            model=model,
            manifold=manifold,
            closures=closures,
            sources=sources,
            trajectory=self.sample_trajectory(grid, manifold, closures, dt, levels),
            parameters={"nodes": nodes, "dt": dt, "levels": levels, "spin": spin.tolist(),
                        "center": x0.tolist(), "c": c, "kappa": kappa, "iota": iota},
        )

    # ------------------------------
    # INTERFACIAL CASES
    # ------------------------------

    def two_phase_bar(
        self,
        strain: float = 0.2,
        delta: float = 0.1,
        a: float = 1.0,
        mu: float = 1.0,
        kappa: float = 1.0,
        iota: float = 1.0,
        velocity=(0.1, 0.0, 0.0),
        order: float = 0.3,
        order_gradient: float = 0.5,
        order_rate: float = 0.2,
    ) -> ManufacturedCase:
        """
        Phase boundary X1 = 0 between the stretches -strain (inside) and +strain.

        With F = I + eps e1 (x) e1 on both sides the standard and configurational
        jumps close for U = sqrt(a (strain^2 - delta^2)) and
        xdot+ = xdot- - 2 U strain e1; nu, grad nu and nudot are continuous.
        """
        if abs(strain) <= delta:
            raise InputError(f"strain {strain} must exceed the well offset {delta}", field="strain")
        model = self.models.build("two-well", {"a": a, "delta": delta, "mu": mu, "kappa": kappa, "iota": iota})
        manifold = self.manifolds.get("R1")
        U = float(np.sqrt(a * (strain ** 2 - delta ** 2)))
        e1 = np.array([1.0, 0.0, 0.0])
        surface = InterfaceModel.plane(point=(0.0, 0.0, 0.0), normal=e1, speed=U)
        minus_velocity = np.asarray(velocity, dtype=float)
        plus_velocity = minus_velocity - 2.0 * U * strain * e1

        def jet(X, side: int) -> PointJet:
            X = np.asarray(X, dtype=float)
            eps = side * strain
            return PointJet(
                x=X + eps * X[0] * e1,
                xdot=plus_velocity if side > 0 else minus_velocity,
                F=np.eye(3) + eps * np.outer(e1, e1),
                nu=np.array([order + order_gradient * X[0]]),
                nudot=np.array([order_rate]),
                grad_nu=np.array([order_gradient * e1]),
            )

        def jets(X):
            return jet(X, 1 if float(np.asarray(X)[0]) > 0.0 else -1)

        def pairs(X):
            X = np.asarray(X, dtype=float)
            return StatePair(X, jet(X, 1), jet(X, -1))

        return ManufacturedCase(
            tag="two-phase-bar",
            model=model,
            manifold=manifold,
            closures={"jets": jets},
            surface=surface,
            phi=self.surfaces.build("zero"),
            pairs=pairs,
            U=U,
            parameters={"strain": strain, "delta": delta, "a": a, "mu": mu, "kappa": kappa, "iota": iota,
                        "velocity": minus_velocity.tolist(), "order": order,
                        "order_gradient": order_gradient, "order_rate": order_rate},
        )

    def structured_sphere(
        self,
        radius: float = 1.0,
        sigma: float = 1.0,
        surface_mu: float = 0.0,
        eta: float = 0.0,
        zeta: float = 0.0,
        mu: float = 1.0,
        kappa: float = 1.0,
        alpha: float = 1.0,
    ) -> ManufacturedCase:
        """
        Static sphere with the quadratic surface energy between an unstrained core and a shell.

        Inside: F = I, grad nu = 0, nu = 0. Outside: F = I + c m (x) m with
        c = -2 surface_mu / (mu R), grad nu = (zeta / kappa) m and nu+ the positive
        root of alpha/2 nu^2 - (zeta / R) nu - K = 0, where
        K = 2 (sigma + 2 surface_mu) / R - (mu c^2 / 2 - mu c (1 + c) - kappa g^2 / 2).
        For pure tension this is alpha/2 nu+^2 = 2 sigma / R.
        """
        if alpha <= 0.0:
            raise InputError("the structured sphere needs alpha > 0", field="alpha")
        model = self.models.build("quadratic", {"mu": mu, "kappa": kappa, "alpha": alpha, "iota": 1.0})
        phi = self.surfaces.build("quadratic", {"sigma": sigma, "mu": surface_mu, "eta": eta, "zeta": zeta})
        manifold = self.manifolds.get("R1")
        surface = InterfaceModel.sphere(radius=radius)

        c = -2.0 * surface_mu / (mu * radius)
        g = zeta / kappa
        K = 2.0 * (sigma + 2.0 * surface_mu) / radius - (0.5 * mu * c ** 2 - mu * c * (1.0 + c) - 0.5 * kappa * g ** 2)
        linear = zeta / radius
        discriminant = linear ** 2 + 2.0 * alpha * K
        if discriminant < 0.0:
            raise InputError("surface parameters admit no outer order parameter", field="sigma")
        nu_plus = (linear + np.sqrt(discriminant)) / alpha

        def pairs(X):
            X = np.asarray(X, dtype=float)
            m = surface.normal(X)
            zero3 = np.zeros(3)
            plus = PointJet(x=X + c * (X @ m) * m, xdot=zero3, F=np.eye(3) + c * np.outer(m, m),
                            nu=np.array([nu_plus]), nudot=np.zeros(1), grad_nu=(g * m)[None])
            minus = PointJet(x=X, xdot=zero3, F=np.eye(3), nu=np.zeros(1), nudot=np.zeros(1),
                             grad_nu=np.zeros((1, 3)))
            return StatePair(X, plus, minus)

        return ManufacturedCase(
            tag="structured-sphere",
            model=model,
            manifold=manifold,
            surface=surface,
            phi=phi,
            pairs=pairs,
            U=0.0,
            parameters={"radius": radius, "sigma": sigma, "surface_mu": surface_mu, "eta": eta, "zeta": zeta,
                        "mu": mu, "kappa": kappa, "alpha": alpha, "c": c, "g": g, "nu_plus": float(nu_plus)},
        )

    # ------------------------------
    # VERIFICATION
    # ------------------------------

    def analytic_residuals(self, case: ManufacturedCase, X: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        Bulk balances of the analytic closures by nested central differences.

        Returns (r_x, r_nu) at the points X, independent of the grid stencils.
        """
        if case.is_interfacial:
            raise InputError(f"case '{case.tag}' has no bulk closures", field="case")
        model, closures = case.model, case.closures
        X = np.asarray(X, dtype=float)
        d, m = X.shape[-1], case.manifold.dim
        tau = VERIFY_STEP

        def jet(Y):
            x = lambda Z: closures["x"](Z, t)
            nu = lambda Z: closures["nu"](Z, t)
            return central_derivative(x, [Y], 0, 1), nu(Y), central_derivative(nu, [Y], 0, 1)

        def stress(Y):
            F, nu, gnu = jet(Y)
            return model.partial("dF_e", Y, F, nu, gnu)

        def microstress(Y):
            F, nu, gnu = jet(Y)
            return model.partial("dgradnu_e", Y, F, nu, gnu)

        div_P = np.trace(central_derivative(stress, [X], 0, 1, step=tau), axis1=-2, axis2=-1)
        div_S = np.trace(central_derivative(microstress, [X], 0, 1, step=tau), axis1=-2, axis2=-1)

        F, nu, gnu = jet(X)
        x = closures["x"](X, t)
        xddot = (closures["xdot"](X, t + tau) - closures["xdot"](X, t - tau)) / (2.0 * tau)

        def momentum(s):
            return model.partial("dnudot_chi", closures["nu"](X, s), closures["nudot"](X, s))

        mudot = (momentum(t + tau) - momentum(t - tau)) / (2.0 * tau)
        nudot = closures["nudot"](X, t)
        b = -model.partial("dx_w", x, nu)
        beta = -model.partial("dnu_w", x, nu)
        z = model.partial("dnu_e", X, F, nu, gnu)

        r_x = xddot - b - case.sources.body_force(X, t, d) - div_P
        r_nu = mudot - model.partial("dnu_chi", nu, nudot) + z - beta - case.sources.order_force(X, t, m) - div_S
        return r_x, r_nu

    def verify(self, case: ManufacturedCase, tolerance: float = 1e-4, points: Optional[np.ndarray] = None) -> float:
        """
        Re-check that the case solves its balances before it is used as an oracle.

        Bulk cases are substituted at interior nodes of the trajectory midpoint;
        interfacial cases are checked through the jump balances at surface points.

        Raises:
            NumericalConsistencyError: If the largest residual exceeds tolerance
        """
        if case.is_interfacial:
            size = self._interfacial_size(case, points)
        else:
            trajectory = case.trajectory
            state = trajectory[len(trajectory) // 2]
            X = state.X[~state.grid.boundary_mask()] if points is None else np.asarray(points, dtype=float)
            r_x, r_nu = self.analytic_residuals(case, X, state.t)
            size = float(max(np.max(np.abs(r_x), initial=0.0), np.max(np.abs(r_nu), initial=0.0)))
        logger.debug(f"manufactured case '{case.tag}' verified with residual {size:.3e}")
        if size > tolerance:
            raise NumericalConsistencyError(
                f"manufactured case '{case.tag}' does not solve its balances (residual {size:.3e})"
            )
        return size

    def _interfacial_size(self, case: ManufacturedCase, points: Optional[np.ndarray]) -> float:
        if points is None:
            if case.surface.shape == "sphere":
                R = case.surface.parameters["radius"]
                points = R * np.array([[0.6, 0.0, 0.8], [0.0, 0.8, -0.6], [0.48, 0.6, 0.64]])
            else:
                points = np.array([[0.0, 0.0, 0.0], [0.0, 0.5, -0.25]])
        size = 0.0
        for X in np.asarray(points, dtype=float):
            if case.phi is not None and case.surface.shape != "plane":
                result = interface_service.structured_balance_residuals(
                    case.pairs, case.surface, X, case.model, case.phi, case.U, case.manifold)
            else:
                result = interface_service.unstructured_balance_residuals(
                    case.pairs(X), case.surface, case.model, case.U, case.manifold)
            size = max(size, *result.norms().values())
        return size


# Create singleton instance
manufactured_service = ManufacturedService()

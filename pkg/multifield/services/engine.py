import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from multifield.core.decorators import validation_aware
from multifield.core.exceptions import (
    InputError,
    InstabilityError,
    ModelError,
    NumericalConsistencyError,
    StagnationError,
)
from multifield.core.settings import settings
from multifield.models.body import BodyGrid, MotionState, OrderField, PlacementField
from multifield.models.interface import InterfaceModel
from multifield.models.lagrangian import GeneratorSet, LagrangianModel, Sources
from multifield.models.manifolds import ManifoldModel
from multifield.models.trajectory import Trajectory
from multifield.repositories.base import BaseRegistry
from multifield.repositories.manifold import manifold_repository
from multifield.repositories.preset import model_presets
from multifield.schemas.options import (
    BoundaryCondition,
    IntegrateOptions,
    RefinementLevel,
    SolveOptions,
    StepRule,
)
from multifield.services.calculus import fitted_order
from multifield.services.interface import interface_service
from multifield.services.kinematics import kinematics_service
from multifield.services.manifold import manifold_service
from multifield.services.manufactured import manufactured_service
from multifield.services.mechanics import mechanics_service, residual_norms

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SolveResult:
    placement: PlacementField
    order: OrderField
    iterations: int
    converged: bool
    energy_history: List[float] = field(default_factory=list)
    residual_history: List[float] = field(default_factory=list)
    step_history: List[float] = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]

    @property
    def final_energy(self) -> float:
        return self.energy_history[-1]


@dataclass(frozen=True, eq=False)
class RefinementResult:
    target: str
    steps: List[float]
    time_steps: List[Optional[float]]
    norms: List[float]
    order: Optional[float]
    flags: List[str] = field(default_factory=list)

    def table(self) -> List[Dict[str, Optional[float]]]:
        return [{"h": h, "dt": dt, "residual": r} for h, dt, r in zip(self.steps, self.time_steps, self.norms)]


class CellOperator:
    """
    One-point (cell-centred) Q1 operators of a BodyGrid.

    A nodal field u maps to cell values (corner average) and cell gradients
    (corner-averaged forward differences). ``transpose`` applies the adjoint,
    turning cell derivatives of the discrete energy into nodal gradients.
    """

    def __init__(self, grid: BodyGrid):
        self.grid = grid
        self.corners = list(product((0, 1), repeat=grid.dim))
        self.scale = 1.0 / len(self.corners)
        self.cell_volume = float(np.prod(grid.spacing)) * grid.transverse_measure
        self.rho = self.cell_values(grid.rho0[..., None])[..., 0]
        self.X = self.cell_values(grid.coordinates())
        self.lumped = self.transpose((self.cell_volume * self.rho)[..., None], None)[..., 0]

    def _slice(self, corner) -> tuple:
        return tuple(slice(s, n - 1 + s) for s, n in zip(corner, self.grid.shape))

    def cell_values(self, u: np.ndarray) -> np.ndarray:
        return self.scale * sum(u[self._slice(c)] for c in self.corners)

    def evaluate(self, u: np.ndarray, manifold: Optional[ManifoldModel] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Cell values and gradients, with shortest chart increments on periodic charts."""
        reference = u[self._slice(self.corners[0])]
        if manifold is not None and manifold.is_periodic:
            increments = [manifold.chart_difference(reference, u[self._slice(c)]) for c in self.corners]
        else:
            increments = [u[self._slice(c)] - reference for c in self.corners]
        values = reference + self.scale * sum(increments)
        columns = []
        for axis, h in enumerate(self.grid.spacing):
            weight = 2.0 * self.scale / h
            columns.append(weight * sum((1.0 if c[axis] else -1.0) * inc
                                        for c, inc in zip(self.corners, increments)))
        return values, np.stack(columns, axis=-1)

    def transpose(self, d_values: np.ndarray, d_gradients: Optional[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.grid.shape + d_values.shape[self.grid.dim:])
        for c in self.corners:
            contribution = self.scale * d_values
            if d_gradients is not None:
                for axis, h in enumerate(self.grid.spacing):
                    sign = 1.0 if c[axis] else -1.0
                    contribution = contribution + sign * (2.0 * self.scale / h) * d_gradients[..., axis]
            out[self._slice(c)] += contribution
        return out


@validation_aware("numerical")
def _check_descent(energy: float, previous: float, iteration: int):
    if energy > previous + settings.ROUNDING_FLOOR * (1.0 + abs(previous)):
        raise NumericalConsistencyError(
            f"energy increased from {previous:.12e} to {energy:.12e} at iteration {iteration}"
        )


class EngineService:
    """
    Service layer for static solves, time integration and refinement studies.
    """

    def __init__(self):
        self.targets = BaseRegistry[Callable[[float, Optional[float]], float]]("refinement target")
        for tag, target, description in (
            ("bulk-smooth-el", self._bulk_smooth_target, "manufactured bulk EL residual"),
            ("noether-wave", self._noether_wave_target, "Noether residual of an integrated S1 wave"),
            ("lemma1-sphere", self._lemma1_target, "trace identity of an isochoric field on the unit sphere"),
            ("lemma2-sphere", self._lemma2_target, "normal part of a surface divergence on the unit sphere"),
            ("microcrack", self._microcrack_target, "microcrack gradient decomposition"),
            ("gradient", self._gradient_target, "stencil gradient of a smooth field"),
            ("affine-gradient", self._affine_target, "stencil gradient of an affine field"),
        ):
            self.targets.register(tag, target, description=description)

    # ------------------------------
    # DISCRETE ENERGY
    # ------------------------------

    def discrete_energy(self, ops: CellOperator, model: LagrangianModel, manifold: ManifoldModel,
                        x: np.ndarray, nu: np.ndarray, gradient: bool = True):
        """
        Cell-centred total energy sum |cell| rho0 (e + w) and its nodal gradients.

        Returns:
            (energy, grad_x, grad_nu); the gradients are None when not requested
        """
        xc, Fc = ops.evaluate(x)
        nuc, Gc = ops.evaluate(nu, manifold)
        weight = ops.cell_volume * ops.rho
        density = model.elastic(ops.X, Fc, nuc, Gc) + model.potential(xc, nuc)
        energy = float(np.sum(weight * density))
        if not gradient:
            return energy, None, None
        dF = weight[..., None, None] * model.partial("dF_e", ops.X, Fc, nuc, Gc)
        dG = weight[..., None, None] * model.partial("dgradnu_e", ops.X, Fc, nuc, Gc)
        dnu = weight[..., None] * (model.partial("dnu_e", ops.X, Fc, nuc, Gc) + model.partial("dnu_w", xc, nuc))
        dx = weight[..., None] * model.partial("dx_w", xc, nuc)
        return energy, ops.transpose(dx, dF), ops.transpose(dnu, dG)

    # ------------------------------
    # BOUNDARY CONDITIONS
    # ------------------------------

    def _face_mask(self, grid: BodyGrid, bc: BoundaryCondition) -> np.ndarray:
        if bc.axis >= grid.dim:
            raise InputError(f"boundary axis {bc.axis} does not exist on a {grid.dim}D body", field="axis")
        mask = np.zeros(grid.shape, dtype=bool)
        index = [slice(None)] * grid.dim
        index[bc.axis] = 0 if bc.side.value == "lower" else -1
        mask[tuple(index)] = True
        return mask

    def apply_boundary_conditions(self, grid: BodyGrid, manifold: ManifoldModel, x: np.ndarray, nu: np.ndarray,
                                  conditions: Sequence[BoundaryCondition]):
        """
        Impose fixed face values and return the masks of fixed nodes.

        Raises:
            InputError: If a face value has the wrong length or leaves the manifold
        """
        x, nu = x.copy(), nu.copy()
        fixed = {"x": np.zeros(grid.shape, dtype=bool), "nu": np.zeros(grid.shape, dtype=bool)}
        for bc in conditions:
            mask = self._face_mask(grid, bc)
            name = bc.field.value
            fixed[name] |= mask
            if bc.value is None:
                continue
            target = x if name == "x" else nu
            value = np.asarray(bc.value, dtype=float)
            if value.shape != target.shape[-1:]:
                raise InputError(f"boundary value for {name} needs {target.shape[-1]} components", field="value")
            if name == "nu":
                value = manifold.validate(value)
            target[mask] = value
        return x, nu, fixed

    # ------------------------------
    # MINIMIZATION
    # ------------------------------

    def _direction(self, ops: CellOperator, manifold: ManifoldModel, nu: np.ndarray,
                   grad_x: np.ndarray, grad_nu: np.ndarray, fixed: Dict[str, np.ndarray]):
        Dx = -grad_x / ops.lumped[..., None]
        g_inv = manifold_service.inverse_metric(manifold, nu)
        Dnu = -np.einsum("...ab,...b->...a", g_inv, grad_nu) / ops.lumped[..., None]
        Dnu = manifold.project_tangent(nu, Dnu)
        Dx[fixed["x"]] = 0.0
        Dnu[fixed["nu"]] = 0.0
        return Dx, Dnu

    def _residual(self, Dx: np.ndarray, Dnu: np.ndarray, fixed: Dict[str, np.ndarray]) -> float:
        rx = np.linalg.norm(Dx, axis=-1)[~fixed["x"]]
        rnu = np.linalg.norm(Dnu, axis=-1)[~fixed["nu"]]
        return float(max(np.max(rx, initial=0.0), np.max(rnu, initial=0.0)))

    def _metric_norm(self, ops: CellOperator, manifold: ManifoldModel, nu, Dx, Dnu) -> float:
        return float(np.sum(ops.lumped * (np.sum(Dx * Dx, axis=-1) + manifold.inner(nu, Dnu, Dnu))))

    def minimize_energy(
        self,
        model: LagrangianModel,
        placement: PlacementField,
        order: OrderField,
        options: Optional[SolveOptions] = None,
    ) -> SolveResult:
        """
        Riemannian gradient descent on the static energy int rho0 (e + w).

        The nodal gradient of the cell-centred energy is scaled by the lumped
        mass and the inverse chart metric, projected onto the tangent space and
        applied through the manifold retraction. The discrete EL residual is the
        sup norm of this direction over free nodes.

        Raises:
            InputError: If the fields live on different grids
            StagnationError: If no trial step decreases the energy
        """
        options = options or SolveOptions()
        grid, manifold = placement.grid, order.manifold
        if not grid.same_as(order.grid):
            raise InputError("placement and order fields live on different grids", field="order")
        ops = CellOperator(grid)
        x, nu, fixed = self.apply_boundary_conditions(grid, manifold, placement.values, order.values,
                                                      options.boundary_conditions)
        max_backtracks = options.max_backtracks or settings.MAX_BACKTRACKS
        step = options.step_size * min(grid.spacing) ** 2

        energy, grad_x, grad_nu = self.discrete_energy(ops, model, manifold, x, nu)
        Dx, Dnu = self._direction(ops, manifold, nu, grad_x, grad_nu, fixed)
        residual = self._residual(Dx, Dnu, fixed)
        energies, residuals, steps = [energy], [residual], []
        logger.info(f"minimize {model.name} on {manifold.tag}: grid {grid.shape}, E0={energy:.6e}, "
                    f"residual {residual:.3e}")

        iteration = 0
        while residual >= options.tolerance and iteration < options.max_iterations:
            iteration += 1
            slope = self._metric_norm(ops, manifold, nu, Dx, Dnu)
            trial = step
            for attempt in range(max_backtracks + 1):
                x_new = x + trial * Dx
                nu_new = manifold.retract(nu, trial * Dnu)
                energy_new, _, _ = self.discrete_energy(ops, model, manifold, x_new, nu_new, gradient=False)
                if options.step_rule == StepRule.FIXED:
                    _check_descent(energy_new, energy, iteration)
                    break
                if energy_new <= energy - options.sufficient_decrease * trial * slope:
                    break
                trial *= options.shrink
            else:
                raise StagnationError(
                    f"no sufficient decrease after {max_backtracks} backtracks at iteration {iteration}",
                    diagnostics={"iteration": iteration, "energy": energy, "residual": residual, "step": trial},
                )

            _, grad_x, grad_nu = self.discrete_energy(ops, model, manifold, x_new, nu_new)
            Dx_new, Dnu_new = self._direction(ops, manifold, nu_new, grad_x, grad_nu, fixed)
            if options.step_rule == StepRule.BACKTRACKING and options.spectral_step:
                s = np.concatenate([(x_new - x).ravel(), manifold.chart_difference(nu, nu_new).ravel()])
                y = np.concatenate([(Dx_new - Dx).ravel(), (Dnu_new - Dnu).ravel()])
                curvature = -float(s @ y)
                step = float(s @ s) / curvature if curvature > 0.0 else trial
            elif options.step_rule == StepRule.BACKTRACKING:
                step = trial

            x, nu, Dx, Dnu, energy = x_new, nu_new, Dx_new, Dnu_new, energy_new
            residual = self._residual(Dx, Dnu, fixed)
            energies.append(energy)
            residuals.append(residual)
            steps.append(trial)
            logger.debug(f"iteration {iteration}: E={energy:.12e} residual={residual:.3e} step={trial:.3e}")

        converged = residual < options.tolerance
        if converged:
            logger.info(f"minimize converged after {iteration} iterations, residual {residual:.3e}")
        else:
            logger.warning(f"minimize stopped at max_iterations={options.max_iterations}, residual {residual:.3e}")
        return SolveResult(
            placement=PlacementField(grid, x),
            order=OrderField(grid, manifold, manifold.validate(nu), order.kinks),
            iterations=iteration,
            converged=converged,
            energy_history=energies,
            residual_history=residuals,
            step_history=steps,
        )

    # ------------------------------
    # TIME INTEGRATION
    # ------------------------------

    def _order_velocity(self, model: LagrangianModel, rho: np.ndarray, nu: np.ndarray, mu: np.ndarray,
                        guess: np.ndarray, options: IntegrateOptions) -> np.ndarray:
        """
        Solve rho0 dnudot chi(nu, v) = mu for v by Newton steps.

        Raises:
            ModelError: If the substructural mass d2 chi / d nudot^2 is singular
        """
        v = guess.copy()
        for _ in range(options.newton_iterations):
            gap = rho[..., None] * model.partial("dnudot_chi", nu, v) - mu
            if np.max(np.abs(gap), initial=0.0) <= options.newton_tolerance * (1.0 + np.max(np.abs(mu), initial=0.0)):
                break
            mass = rho[..., None, None] * model.partial("d2nudot_chi", nu, v)
            if not np.all(np.linalg.cond(mass) <= 1e12):
                raise ModelError(f"{model.name}: substructural mass is singular; order inertia cannot be integrated")
            v = v - np.linalg.solve(mass, gap[..., None])[..., 0]
        return v

    def _hamiltonian(self, ops: CellOperator, model: LagrangianModel, manifold: ManifoldModel,
                     x, xdot, nu, nudot) -> float:
        """Lumped kinetic part rho0 (|xdot|^2 / 2 + mu . nudot - chi) plus the discrete energy."""
        potential, _, _ = self.discrete_energy(ops, model, manifold, x, nu, gradient=False)
        mu = model.partial("dnudot_chi", nu, nudot)
        kinetic = 0.5 * np.sum(xdot * xdot, axis=-1) + np.sum(mu * nudot, axis=-1) - model.coenergy(nu, nudot)
        return float(np.sum(ops.lumped * kinetic)) + potential

    def integrate_motion(
        self,
        model: LagrangianModel,
        init: MotionState,
        options: IntegrateOptions,
        sources: Optional[Sources] = None,
    ) -> Trajectory:
        """
        Stormer-Verlet stepping of the discrete EL system on the momenta p = rho0 xdot
        and mu = rho0 dnudot chi.

        Each step is a half kick with the cell-centred forces, Newton recovery of
        the order velocity, a drift through the manifold retraction and a second
        half kick. Fixed boundary nodes keep their values with zero rates.

        Raises:
            ModelError: If the substructural mass is singular
            InstabilityError: If the energy exceeds INSTABILITY_FACTOR times its initial size
        """
        sources = sources or Sources()
        grid, manifold = init.grid, init.manifold
        ops = CellOperator(grid)
        rho = grid.rho0
        X = grid.coordinates()
        d, m = grid.dim, manifold.dim
        dt = options.dt
        x, nu, fixed = self.apply_boundary_conditions(grid, manifold, init.x, init.nu, options.boundary_conditions)
        xdot = init.xdot.copy()
        nudot = manifold.project_tangent(nu, init.nudot.copy())
        xdot[fixed["x"]] = 0.0
        nudot[fixed["nu"]] = 0.0

        def forces(t, x, nu, nudot):
            _, grad_x, grad_nu = self.discrete_energy(ops, model, manifold, x, nu)
            fx = -grad_x / ops.lumped[..., None] + rho[..., None] * sources.body_force(X, t, d)
            fnu = (-grad_nu / ops.lumped[..., None]
                   + rho[..., None] * (model.partial("dnu_chi", nu, nudot) + sources.order_force(X, t, m)))
            fx[fixed["x"]] = 0.0
            fnu[fixed["nu"]] = 0.0
            return fx, fnu

        def state(t, x, xdot, nu, nudot):
            return MotionState(grid=grid, manifold=manifold, t=t, x=x, xdot=xdot,
                               F=kinematics_service.gradient_of(x, grid), nu=nu, nudot=nudot,
                               grad_nu=kinematics_service.gradient_of(nu, grid, manifold))

        t = init.t
        H0 = self._hamiltonian(ops, model, manifold, x, xdot, nu, nudot)
        ceiling = settings.INSTABILITY_FACTOR * max(abs(H0), 1e-8)
        states, energies = [state(t, x, xdot, nu, nudot)], [H0]
        p = rho[..., None] * xdot
        mu = rho[..., None] * model.partial("dnudot_chi", nu, nudot)
        fx, fnu = forces(t, x, nu, nudot)
        logger.info(f"integrate {model.name} on {manifold.tag}: {options.steps} steps of {dt:.3e}, H0={H0:.6e}")

        for step in range(1, options.steps + 1):
            p = p + 0.5 * dt * fx
            mu = mu + 0.5 * dt * fnu
            xdot = p / rho[..., None]
            nudot = manifold.project_tangent(nu, self._order_velocity(model, rho, nu, mu, nudot, options))
            xdot[fixed["x"]] = 0.0
            nudot[fixed["nu"]] = 0.0

            x = x + dt * xdot
            nu = manifold.retract(nu, dt * nudot)
            t = init.t + step * dt

            fx, fnu = forces(t, x, nu, nudot)
            p = p + 0.5 * dt * fx
            mu = mu + 0.5 * dt * fnu
            xdot = p / rho[..., None]
            nudot = manifold.project_tangent(nu, self._order_velocity(model, rho, nu, mu, nudot, options))
            xdot[fixed["x"]] = 0.0
            nudot[fixed["nu"]] = 0.0
            mu = rho[..., None] * model.partial("dnudot_chi", nu, nudot)

            H = self._hamiltonian(ops, model, manifold, x, xdot, nu, nudot)
            if not np.isfinite(H) or abs(H) > ceiling:
                raise InstabilityError(f"energy grew from {H0:.3e} to {H:.3e}; reduce the time step", step=step)
            states.append(state(t, x, xdot, nu, nudot))
            energies.append(H)
            logger.debug(f"step {step}: t={t:.6f} H={H:.12e}")

        return Trajectory(states=tuple(states), dt=dt, energy_history=tuple(energies))

    def energy_drift(self, trajectory: Trajectory) -> Dict[str, float]:
        """Largest relative energy change and the drift constant C = drift / dt."""
        history = np.asarray(trajectory.energy_history, dtype=float)
        if history.size == 0:
            raise InputError("trajectory carries no energy history", field="trajectory")
        scale = max(abs(float(history[0])), settings.ROUNDING_FLOOR)
        relative = float(np.max(np.abs(history - history[0]))) / scale
        return {"relative": relative, "final": abs(float(history[-1] - history[0])) / scale,
                "C": relative / trajectory.dt}

    # ------------------------------
    # REFINEMENT
    # ------------------------------

    def refinement_study(
        self,
        target: str,
        levels: Sequence[Union[RefinementLevel, float, Tuple[float, Optional[float]]]],
    ) -> RefinementResult:
        """
        Run a registered residual target on each level and fit the log-log slope.

        Raises:
            UnknownCaseError: If the target is not registered
            InputError: With fewer than 3 levels or a non-decreasing spacing
        """
        runner = self.targets.get(target)
        parsed = [self._level(level) for level in levels]
        if len(parsed) < 3:
            raise InputError(f"a refinement study needs at least 3 levels, got {len(parsed)}", field="levels")
        steps = [level.h for level in parsed]
        if any(b >= a for a, b in zip(steps, steps[1:])):
            raise InputError(f"grid spacings must decrease strictly, got {steps}", field="levels")

        norms = []
        for level in parsed:
            norm = float(runner(level.h, level.dt))
            logger.info(f"refinement {target}: h={level.h:.4e} dt={level.dt} residual={norm:.6e}")
            norms.append(norm)

        flags = []
        floor = settings.ROUNDING_FLOOR
        at_floor = any(n <= floor for n in norms)
        monotone = all(b < a for a, b in zip(norms, norms[1:]))
        order = None
        if at_floor or not monotone:
            flags.append("order-indeterminate")
            logger.warning(f"refinement {target}: residuals {norms} give no convergence order")
        if not at_floor:
            order = fitted_order(steps, norms)
        return RefinementResult(target=target, steps=steps, time_steps=[level.dt for level in parsed],
                                norms=norms, order=order, flags=flags)

    @staticmethod
    def _level(level) -> RefinementLevel:
        if isinstance(level, RefinementLevel):
            return level
        if isinstance(level, dict):
            return RefinementLevel(**level)
        if isinstance(level, (tuple, list)):
            return RefinementLevel(h=level[0], dt=level[1] if len(level) > 1 else None)
        return RefinementLevel(h=float(level))

    @staticmethod
    def _nodes(h: float) -> int:
        return int(round(1.0 / h)) + 1

    def _bulk_smooth_target(self, h: float, dt: Optional[float]) -> float:
        case = manufactured_service.case("bulk-smooth", nodes=self._nodes(h), dt=dt or 0.5 * h)
        residuals = mechanics_service.el_residuals(case.trajectory, case.model, case.sources)
        grid = case.trajectory.grid
        return max(residual_norms(residuals.r_x, grid)["linf"], residual_norms(residuals.r_nu, grid)["linf"])

    def noether_wave(self, h: float, dt: Optional[float] = None, T: float = 0.5, amplitude: float = 0.05):
        """
        Small S1 wave with pinned ends under the quadratic model (kappa = iota = 1).

        Returns the trajectory, the model and the order-shift generator.
        """
        manifold = manifold_repository.get("S1")
        model = model_presets.build("quadratic", {"mu": 1.0, "kappa": 1.0, "alpha": 0.0, "iota": 1.0})
        grid = BodyGrid.box([0.0], [1.0], self._nodes(h))
        X = grid.coordinates()
        placement = PlacementField.identity(grid)
        order = OrderField(grid, manifold, amplitude * np.sin(np.pi * X[..., 0]))
        init = kinematics_service.state_from_fields(placement, order)
        options = IntegrateOptions(
            dt=dt or 0.5 * h,
            T=T,
            boundary_conditions=[BoundaryCondition(field=name, axis=0, side=side)
                                 for name in ("x", "nu") for side in ("lower", "upper")],
        )
        trajectory = self.integrate_motion(model, init, options)
        return trajectory, model, GeneratorSet.order_shift("SO2", [1.0])

    def _noether_wave_target(self, h: float, dt: Optional[float]) -> float:
        trajectory, model, gens = self.noether_wave(h, dt)
        return mechanics_service.noether_residual(trajectory, model, gens, check_preconditions=False).linf

    @staticmethod
    def sphere_points() -> np.ndarray:
        points = np.array([[0.6, 0.0, 0.8], [0.0, 0.8, -0.6], [0.48, 0.6, 0.64], [-0.36, 0.48, 0.8]])
        return points / np.linalg.norm(points, axis=-1, keepdims=True)

    @staticmethod
    def isochoric_field(X):
        X = np.asarray(X, dtype=float)
        return np.stack([np.sin(X[..., 1]) + X[..., 1] * X[..., 2],
                         np.sin(X[..., 2]) + X[..., 0] * X[..., 2],
                         np.sin(X[..., 0]) + X[..., 0] * X[..., 1]], axis=-1)

    @staticmethod
    def superficial_field(surface: InterfaceModel) -> Callable[[np.ndarray], np.ndarray]:
        b = np.array([1.0, 2.0, 3.0])

        def A(X):
            X = np.asarray(X, dtype=float)
            a = np.stack([np.ones_like(X[..., 0]), X[..., 0], X[..., 1] ** 2], axis=-1)
            return a[..., :, None] * (surface.projector(X) @ b)[..., None, :]

        return A

    def _lemma_target(self, h: float, which: str) -> float:
        surface = InterfaceModel.sphere()
        report = interface_service.lemma_checks(surface, self.isochoric_field, self.superficial_field(surface),
                                                self.sphere_points(), step=h, extrapolate=False)
        return getattr(report, which)

    def _lemma1_target(self, h: float, dt: Optional[float]) -> float:
        return self._lemma_target(h, "lemma1")

    def _lemma2_target(self, h: float, dt: Optional[float]) -> float:
        return self._lemma_target(h, "lemma2")

    def _microcrack_target(self, h: float, dt: Optional[float]) -> float:
        grid = BodyGrid.box([0.0, 0.0], [1.0, 1.0], self._nodes(h))
        placement = PlacementField.from_closure(
            grid, lambda X: X + 0.1 * np.stack([np.sin(np.pi * X[..., 1]), np.sin(np.pi * X[..., 0])], axis=-1))
        crack_map = lambda y: y + 0.05 * np.stack([np.sin(2.0 * y[..., 1]), np.cos(y[..., 0])], axis=-1)
        return kinematics_service.microcrack_decomposition(placement, crack_map).linf

    def _gradient_target(self, h: float, dt: Optional[float]) -> float:
        grid = BodyGrid.box([0.0, 0.0], [1.0, 1.0], self._nodes(h))
        X = grid.coordinates()
        values = np.sin(X[..., 0]) * np.exp(X[..., 1])
        exact = np.stack([np.cos(X[..., 0]) * np.exp(X[..., 1]), values], axis=-1)
        return float(np.max(np.abs(kinematics_service.gradient_of(values, grid) - exact)))

    def _affine_target(self, h: float, dt: Optional[float]) -> float:
        grid = BodyGrid.box([0.0, 0.0], [1.0, 1.0], self._nodes(h))
        A = np.array([[1.0, 0.5], [-0.25, 2.0]])
        values = grid.coordinates() @ A.T + np.array([0.125, -0.5])
        return float(np.max(np.abs(kinematics_service.gradient_of(values, grid) - A)))


# Create singleton instance
engine_service = EngineService()

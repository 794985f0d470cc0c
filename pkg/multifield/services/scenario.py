import dataclasses
import logging
import math
import platform
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import scipy
from scipy.spatial.transform import Rotation

from multifield.core.exceptions import AppException, InputError, ModelError, TaskError
from multifield.core.settings import settings
from multifield.models.body import BodyGrid, MotionState, OrderField, PlacementField
from multifield.models.interface import InterfaceModel, StatePair, SurfaceEnergyModel
from multifield.models.lagrangian import GeneratorSet, LagrangianModel, Sources
from multifield.models.manifolds import ManifoldModel
from multifield.models.trajectory import Trajectory
from multifield.repositories.field_store import field_store
from multifield.repositories.manifold import manifold_repository
from multifield.repositories.preset import model_presets, surface_presets
from multifield.repositories.report_store import report_store
from multifield.schemas.reports import ErrorInfo, RunMetadata, ScenarioSummary, Series, TaskReport, TaskStatus
from multifield.schemas.scenario import (
    Acceptance,
    DistanceDemoTask,
    GeneratorConfig,
    InitialFields,
    InterfaceConfig,
    IntegrateTask,
    MinimizeTask,
    RefinementTask,
    ResidualCheck,
    ResidualSuiteTask,
    Scenario,
)
from multifield.services.engine import engine_service
from multifield.services.interface import interface_service
from multifield.services.kinematics import kinematics_service
from multifield.services.manufactured import manufactured_service
from multifield.services.mechanics import mechanics_service, residual_norms
from multifield.services.metrics import metrics_service

logger = logging.getLogger(__name__)

# Bulk manufactured cases usable by el-routes and manufactured checks
BULK_CASES = ("bulk-smooth", "rigid-rotation")
PLANE_POINTS = np.array([[0.0, 0.0, 0.0], [0.0, 0.5, -0.25], [0.0, -0.3, 0.7]])


def _finite(value) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _relative_change(before: float, after: float) -> float:
    scale = max(abs(before), abs(after))
    # two norms at the rounding floor carry no direction to compare
    if scale <= settings.ROUNDING_FLOOR:
        return 0.0
    return abs(after - before) / scale


@dataclasses.dataclass
class TaskOutcome:
    """Mutable collector a handler fills while its task runs."""
    metrics: Dict[str, Optional[float]] = dataclasses.field(default_factory=dict)
    series: Dict[str, Series] = dataclasses.field(default_factory=dict)
    flags: List[str] = dataclasses.field(default_factory=list)

    def metric(self, name: str, value) -> None:
        self.metrics[name] = _finite(value)

    def table(self, name: str, columns: List[str], rows) -> None:
        self.series[name] = Series(columns=columns, rows=[[_finite(v) for v in row] for row in rows])


@contextmanager
def _strictness(strict: Optional[bool]):
    if strict is None:
        yield
        return
    previous = settings.STRICT_VALIDATION
    settings.STRICT_VALIDATION = strict
    try:
        yield
    finally:
        settings.STRICT_VALIDATION = previous


class ScenarioService:
    """
    Service layer that binds scenario files to library operations and collects reports.
    """

    def __init__(self):
        self.models = model_presets
        self.surfaces = surface_presets
        self.manifolds = manifold_repository
        self.handlers: Dict[str, Callable[..., None]] = {
            "distance-demo": self._distance_demo,
            "minimize": self._minimize,
            "integrate": self._integrate,
            "residual-suite": self._residual_suite,
            "refinement-study": self._refinement_study,
        }
        self.checks: Dict[ResidualCheck, Callable[..., None]] = {
            ResidualCheck.EL_ROUTES: self._check_el_routes,
            ResidualCheck.ROTATIONAL_INVARIANCE: self._check_rotational_invariance,
            ResidualCheck.MANUFACTURED: self._check_manufactured,
            ResidualCheck.PHASE_BOUNDARY: self._check_phase_boundary,
            ResidualCheck.SPHERE_TENSION: self._check_sphere_tension,
            ResidualCheck.SURFACE_INVARIANCE: self._check_surface_invariance,
            ResidualCheck.LEMMAS: self._check_lemmas,
            ResidualCheck.COVARIANCE: self._check_covariance,
        }

    # ------------------------------
    # SCENARIO BLOCKS
    # ------------------------------

    def build_grid(self, scenario: Scenario) -> BodyGrid:
        body = scenario.body
        return BodyGrid.box(
            body.lower,
            body.upper,
            body.nodes,
            rho0=body.rho0,
            gamma=None if body.gamma is None else np.asarray(body.gamma, dtype=float),
            transverse_measure=body.transverse_measure,
            quadrature_rule=body.quadrature_rule,
        )

    def build_model(self, scenario: Scenario) -> LagrangianModel:
        return self.models.build(scenario.model.preset, scenario.model.parameters)

    def build_interface(self, config: InterfaceConfig) -> Tuple[InterfaceModel, SurfaceEnergyModel]:
        if config.shape.value == "plane":
            surface = InterfaceModel.plane(point=config.point, normal=config.normal, speed=config.U)
        else:
            surface = InterfaceModel.sphere(center=config.center, radius=config.radius, speed=config.U)
        return surface, self.surfaces.build(config.phi.preset, config.phi.parameters)

    def initial_fields(
        self,
        grid: BodyGrid,
        manifold: ManifoldModel,
        initial: InitialFields,
        rng: np.random.Generator,
    ) -> Tuple[PlacementField, OrderField]:
        """
        Placement x = A X + c and an order field of the requested kind.

        Interpolated values on embedded manifolds are pushed back onto the manifold;
        the optional perturbation moves interior nodes along random tangent vectors.

        Raises:
            InputError: If a block has the wrong number of components
        """
        d, m = grid.dim, manifold.dim
        X = grid.coordinates()
        A = np.eye(d) if initial.placement.matrix is None else np.asarray(initial.placement.matrix, dtype=float)
        c = np.zeros(d) if initial.placement.shift is None else np.asarray(initial.placement.shift, dtype=float)
        if A.shape != (d, d) or c.shape != (d,):
            raise InputError(f"placement needs a {d}x{d} matrix and a {d}-vector shift", field="placement")
        placement = PlacementField(grid, X @ A.T + c)

        order_init = initial.order
        if order_init.axis >= d:
            raise InputError(f"order axis {order_init.axis} does not exist on a {d}D body", field="axis")
        base = np.zeros(m) if order_init.value is None else np.asarray(order_init.value, dtype=float)
        if base.shape != (m,):
            raise InputError(f"order values on {manifold.tag} need {m} components", field="value")
        s = (X[..., order_init.axis] - grid.lower[order_init.axis]) / (grid.upper[order_init.axis] - grid.lower[order_init.axis])

        if order_init.kind == "constant":
            values = np.broadcast_to(base, grid.shape + (m,)).copy()
        elif order_init.kind == "interpolate":
            lower, upper = np.asarray(order_init.lower, dtype=float), np.asarray(order_init.upper, dtype=float)
            if lower.shape != (m,) or upper.shape != (m,):
                raise InputError(f"interpolation endpoints on {manifold.tag} need {m} components", field="lower")
            values = lower + s[..., None] * (upper - lower)
            if manifold.linear_ambient and manifold.from_embedded is not None:
                values = manifold.from_embedded(values)
        elif order_init.kind == "wave":
            values = base + order_init.amplitude * np.sin(order_init.wavenumber * np.pi * s)[..., None]
        else:
            start = np.broadcast_to(base, grid.shape + (m,)).copy()
            if manifold.linear_ambient and manifold.from_embedded is not None and not np.any(base):
                start = manifold.from_embedded(rng.normal(size=grid.shape + (m,)))
            values = manifold.retract(start, manifold.project_tangent(
                start, order_init.amplitude * rng.normal(size=grid.shape + (m,))))

        if order_init.perturbation > 0.0:
            kick = manifold.project_tangent(values, order_init.perturbation * rng.normal(size=values.shape))
            kick[grid.boundary_mask()] = 0.0
            values = manifold.retract(values, kick)
        return placement, OrderField(grid, manifold, manifold.validate(values))

    @staticmethod
    def generator_set(config: GeneratorConfig, dim: int) -> GeneratorSet:
        if config.translation is None and config.group is None:
            raise InputError("a generator needs a translation or a group", field="generators")
        if config.translation is not None and len(config.translation) != dim:
            raise InputError(f"translation needs {dim} components", field="translation")
        return GeneratorSet(c=config.translation, group=config.group,
                            xi=None if config.group is None else (config.xi or [1.0]))

    @staticmethod
    def task_name(task, index: int) -> str:
        return task.name or f"{index + 1:02d}-{task.kind}"

    # ------------------------------
    # RUN
    # ------------------------------

    def run(
        self,
        scenario: Scenario,
        out_dir: Optional[Union[str, Path]] = None,
        strict: Optional[bool] = None,
        seed: Optional[int] = None,
    ) -> ScenarioSummary:
        """
        Execute the tasks of a scenario in order.

        Downstream errors become task reports with status "error"; the summary
        records every task. With ``out_dir`` the summary, metadata and CSV tables
        are written there.

        Args:
            strict: Override STRICT_VALIDATION for this run
            seed: Override the scenario seed
        """
        seed = next(s for s in (seed, scenario.seed, settings.RANDOM_SEED) if s is not None)
        out_dir = None if out_dir is None else Path(out_dir)
        started = datetime.now(timezone.utc).isoformat()
        logger.info(f"Running scenario '{scenario.name}' with {len(scenario.tasks)} tasks (seed {seed})")

        reports = []
        with _strictness(strict):
            context = None
            for index, task in enumerate(scenario.tasks):
                name = self.task_name(task, index)
                rng = np.random.default_rng([seed, index])
                try:
                    if context is None:
                        context = self._context(scenario)
                    reports.append(self._run_task(name, task, context, rng, out_dir))
                except AppException as e:
                    reports.append(self._error_report(name, task.kind, TaskError(name, e)))

        summary = ScenarioSummary(scenario=scenario.name, seed=seed, tasks=reports)
        if out_dir is not None:
            metadata = self.metadata(scenario.name, started)
            report_store.write(out_dir, summary, metadata)
        logger.info(f"Scenario '{scenario.name}' finished with exit code {summary.exit_code}")
        return summary

    def metadata(self, scenario: str, started_at: str) -> RunMetadata:
        from multifield import __version__

        return RunMetadata(
            scenario=scenario,
            started_at=started_at,
            finished_at=datetime.now(timezone.utc).isoformat(),
            version=__version__,
            environment=settings.ENV,
            python=platform.python_version(),
            numpy=np.__version__,
            scipy=scipy.__version__,
        )

    def _context(self, scenario: Scenario) -> Dict[str, Any]:
        manifold = self.manifolds.get(scenario.manifold)
        context = {
            "scenario": scenario,
            "grid": self.build_grid(scenario),
            "manifold": manifold,
            "model": self.build_model(scenario),
        }
        if scenario.interface is not None:
            context["surface"], context["phi"] = self.build_interface(scenario.interface)
        return context

    def _run_task(self, name: str, task, context: Dict[str, Any], rng: np.random.Generator,
                  out_dir: Optional[Path]) -> TaskReport:
        logger.info(f"Task '{name}' ({task.kind}) started")
        outcome = TaskOutcome()
        try:
            self.handlers[task.kind](task, context, outcome, rng, out_dir, name)
        except (np.linalg.LinAlgError, FloatingPointError) as e:
            raise ModelError(f"linear algebra failure: {e}")

        acceptance = self.evaluate_acceptance(task.acceptance, outcome.metrics)
        status = TaskStatus.OK if all(acceptance.values()) else TaskStatus.FAILED
        if status == TaskStatus.FAILED:
            failed = sorted(k for k, ok in acceptance.items() if not ok)
            logger.warning(f"Task '{name}' failed acceptance: {failed}")
        else:
            logger.info(f"Task '{name}' passed")
        return TaskReport(name=name, kind=task.kind, status=status, metrics=outcome.metrics,
                          series=outcome.series, flags=sorted(set(outcome.flags)), acceptance=acceptance)

    def _error_report(self, name: str, kind: str, error: TaskError) -> TaskReport:
        logger.error(f"{error.message} [{error.code}]")
        return TaskReport(
            name=name,
            kind=kind,
            status=TaskStatus.ERROR,
            error=ErrorInfo(code=error.code, message=error.message, exit_code=error.exit_code),
        )

    @staticmethod
    def evaluate_acceptance(acceptance: Acceptance, metrics: Dict[str, Optional[float]]) -> Dict[str, bool]:
        """Threshold results keyed ``max.<metric>`` / ``min.<metric>``; missing metrics fail."""
        results = {}
        for key, bound in acceptance.max.items():
            value = metrics.get(key)
            results[f"max.{key}"] = value is not None and value <= bound
        for key, bound in acceptance.min.items():
            value = metrics.get(key)
            results[f"min.{key}"] = value is not None and value >= bound
        return results

    # ------------------------------
    # DISTANCE DEMOS
    # ------------------------------

    def _distance_demo(self, task: DistanceDemoTask, context, outcome: TaskOutcome, rng, out_dir, name):
        if task.demo == "beam":
            result = metrics_service.beam_divergence_demo(task.lengths)
            outcome.table("beam", ["L", "integral", "sup"],
                          [[r["L"], r["integral"], r["sup"]] for r in result["rows"]])
            for key in ("slope", "intercept", "r_squared", "sup_spread"):
                outcome.metric(key, result[key])
            return

        case = "real-line" if task.demo == "cauchy-real-line" else "circle"
        result = metrics_service.cauchy_separation_demo(case, task.n_max, task.h, task.mode)
        rows = result["rows"]
        columns = ["n", "m", "distance", "analytic_bound"] + (["oracle"] if case == "circle" else [])
        outcome.table("cauchy", columns, [[r[c] for c in columns] for r in rows])
        outcome.metric("pairs", len(rows))
        outcome.metric("limit_jump", result["limit_jump"])
        outcome.metric("max_bound_gap", max(abs(r["distance"] - r["analytic_bound"]) for r in rows))
        outcome.metric("max_bound_excess", max(r["distance"] - r["analytic_bound"] for r in rows))
        if case == "circle":
            outcome.metric("max_oracle_gap", max(abs(r["distance"] - r["oracle"]) for r in rows))

    # ------------------------------
    # MINIMIZE
    # ------------------------------

    def _minimize(self, task: MinimizeTask, context, outcome: TaskOutcome, rng, out_dir, name):
        grid, manifold, model = context["grid"], context["manifold"], context["model"]
        placement, order = self.initial_fields(grid, manifold, task.initial, rng)
        result = engine_service.minimize_energy(model, placement, order, task.options)

        energies = np.asarray(result.energy_history)
        outcome.metric("iterations", result.iterations)
        outcome.metric("converged", 1.0 if result.converged else 0.0)
        outcome.metric("initial_energy", energies[0])
        outcome.metric("final_energy", result.final_energy)
        outcome.metric("final_residual", result.final_residual)
        outcome.metric("max_energy_increase", max(0.0, float(np.max(np.diff(energies), initial=0.0))))
        outcome.table("energy_history", ["iteration", "energy"], list(enumerate(result.energy_history)))
        outcome.table("residual_history", ["iteration", "residual"], list(enumerate(result.residual_history)))
        if not result.converged:
            outcome.flags.append("not-converged")

        if task.compare == "great-circle":
            error = self.great_circle_error(result.order)
            outcome.metric("great_circle_error", float(np.max(error)))
            outcome.table("great_circle", ["X1", "error"], zip(grid.axes[0], error))

        if out_dir is not None:
            field_store.save(out_dir / f"{name}__order", grid, result.order.values, name="nu", manifold=manifold.tag)
            field_store.save(out_dir / f"{name}__placement", grid, result.placement.values, name="x")

    @staticmethod
    def great_circle_error(order: OrderField) -> np.ndarray:
        """
        Pointwise distance to the constant-speed great circle through the end values of a 1D field.

        Raises:
            InputError: If the body is not 1D or the manifold is not a two-sphere
        """
        grid, manifold = order.grid, order.manifold
        if grid.dim != 1 or manifold.to_embedded is None:
            raise InputError("great-circle comparison needs a 1D body and a two-sphere", field="compare")
        n = np.asarray(manifold.to_embedded(order.values), dtype=float)
        a, b = n[0], n[-1]
        angle = float(np.arctan2(np.linalg.norm(np.cross(a, b)), a @ b))
        if angle < 1e-12:
            return np.linalg.norm(n - a, axis=-1)
        s = (grid.axes[0] - grid.lower[0]) / (grid.upper[0] - grid.lower[0])
        slerp = (np.sin((1.0 - s) * angle)[:, None] * a + np.sin(s * angle)[:, None] * b) / np.sin(angle)
        return np.linalg.norm(n - slerp, axis=-1)

    # ------------------------------
    # INTEGRATE
    # ------------------------------

    def _integrate(self, task: IntegrateTask, context, outcome: TaskOutcome, rng, out_dir, name):
        grid, manifold, model = context["grid"], context["manifold"], context["model"]
        placement, order = self.initial_fields(grid, manifold, task.initial, rng)
        init = kinematics_service.state_from_fields(placement, order)
        trajectory = engine_service.integrate_motion(model, init, task.options)

        drift = engine_service.energy_drift(trajectory)
        outcome.metric("steps", len(trajectory) - 1)
        outcome.metric("energy_drift", drift["relative"])
        outcome.metric("energy_drift_final", drift["final"])
        outcome.metric("drift_constant", drift["C"])
        outcome.table("energy_history", ["t", "energy"], zip(trajectory.times, trajectory.energy_history))

        for k, config in enumerate(task.generators):
            gens = self.generator_set(config, grid.dim)
            report = mechanics_service.noether_residual(trajectory, model, gens)
            outcome.metric(f"noether_{k}.linf", report.linf)
            outcome.metric(f"noether_{k}.l2", report.l2)
            outcome.flags.extend(f"noether_{k}:{flag}" for flag in report.flags)
            per_level = [residual_norms(level, grid, stacked=False)["linf"] for level in report.residual]
            outcome.table(f"noether_{k}", ["t", "residual"], zip(report.times, per_level))

    # ------------------------------
    # RESIDUAL SUITE
    # ------------------------------

    def _residual_suite(self, task: ResidualSuiteTask, context, outcome: TaskOutcome, rng, out_dir, name):
        for check in task.checks:
            logger.debug(f"Task '{name}': residual check {check.value}")
            self.checks[check](task, context, outcome, rng)

    def _case(self, task: ResidualSuiteTask, tag: str):
        return manufactured_service.case(tag, **task.case_parameters.get(tag, {}))

    def _check_el_routes(self, task: ResidualSuiteTask, context, outcome: TaskOutcome, rng):
        for tag in task.cases:
            if tag not in BULK_CASES:
                raise InputError(f"EL route comparison needs a bulk case, got '{tag}'", field="cases")
            case = self._case(task, tag)
            grid = case.trajectory.grid
            balance = mechanics_service.el_residuals(case.trajectory, case.model, case.sources, "balance")
            lagrangian = mechanics_service.el_residuals(case.trajectory, case.model, case.sources, "lagrangian")
            gap = max(float(np.max(np.abs(balance.r_x - lagrangian.r_x))),
                      float(np.max(np.abs(balance.r_nu - lagrangian.r_nu))))
            outcome.metric(f"{tag}.route_gap", gap)
            outcome.metric(f"{tag}.el_linf", max(residual_norms(balance.r_x, grid)["linf"],
                                                 residual_norms(balance.r_nu, grid)["linf"]))

    def _random_states(self, count: int, manifold: ManifoldModel, rng: np.random.Generator) -> MotionState:
        """``count`` random jets with near-identity F and tangent grad nu, one per node."""
        grid = BodyGrid.box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], (count, 2, 2))
        lead = grid.shape
        F = np.eye(3) + 0.2 * rng.normal(size=lead + (3, 3))
        nu = manifold.from_embedded(rng.normal(size=lead + (3,)))
        G = rng.normal(size=lead + (3, 3))
        grad_nu = G - nu[..., :, None] * np.einsum("...a,...aA->...A", nu, G)[..., None, :]
        return MotionState(grid=grid, manifold=manifold, t=0.0, x=grid.coordinates(),
                           xdot=np.zeros(lead + (3,)), F=F, nu=nu,
                           nudot=manifold.project_tangent(nu, rng.normal(size=lead + (3,))), grad_nu=grad_nu)

    def _check_rotational_invariance(self, task: ResidualSuiteTask, context, outcome: TaskOutcome, rng):
        manifold = self.manifolds.get("S2:embedded")
        state = self._random_states(task.samples, manifold, rng)
        invariant = self.models.build("director", task.case_parameters.get("director", {}))
        control = self.models.build("shear", task.case_parameters.get("shear", {}))
        for label, model in (("invariant", invariant), ("control", control)):
            residual = mechanics_service.rotational_invariance_residual(state, model)
            outcome.metric(f"rotational_invariance.{label}", float(np.max(np.abs(residual))))

    def _check_manufactured(self, task: ResidualSuiteTask, context, outcome: TaskOutcome, rng):
        for tag in task.cases:
            outcome.metric(f"{tag}.manufactured_residual", manufactured_service.verify(self._case(task, tag)))

    def _check_phase_boundary(self, task: ResidualSuiteTask, context, outcome: TaskOutcome, rng):
        case = self._case(task, "two-phase-bar")
        surface, model, manifold = case.surface, case.model, case.manifold
        delta = task.perturbation
        norms = {"standard": 0.0, "substructural": 0.0, "configurational": 0.0}
        coherency = kinematic = shift_error = 0.0
        for X in PLANE_POINTS:
            pair = case.pairs(X)
            base = interface_service.unstructured_balance_residuals(pair, surface, model, case.U, manifold)
            for key, value in base.norms().items():
                norms[key] = max(norms[key], value)
            report = interface_service.compatibility_checks(pair, surface, case.U)
            coherency, kinematic = max(coherency, report.coherency), max(kinematic, report.kinematic)

            # rho0 [xdot] U enters r_std linearly, so this kick shifts it by delta m
            m = surface.normal(X)
            kicked = dataclasses.replace(pair.plus, xdot=pair.plus.xdot + delta / (pair.plus.rho0 * case.U) * m)
            shifted = interface_service.unstructured_balance_residuals(
                StatePair(pair.X, kicked, pair.minus), surface, model, case.U, manifold)
            shift_error = max(shift_error, float(np.linalg.norm(shifted.standard - base.standard - delta * m)))

        outcome.metric("r_std", norms["standard"])
        outcome.metric("r_sub", norms["substructural"])
        outcome.metric("r_cfg", norms["configurational"])
        outcome.metric("coherency", coherency)
        outcome.metric("kinematic", kinematic)
        outcome.metric("traction_shift_error", shift_error)
        outcome.metric("U", case.U)
        cloud = interface_service.sample_cloud(case.pairs, surface, PLANE_POINTS, model, None, manifold)
        columns = list(cloud[0])
        outcome.table("phase_boundary", columns, [[record[c] for c in columns] for record in cloud])

    def _check_sphere_tension(self, task: ResidualSuiteTask, context, outcome: TaskOutcome, rng):
        case = self._case(task, "structured-sphere")
        surface, model, manifold = case.surface, case.model, case.manifold
        radius, sigma = case.parameters["radius"], case.parameters["sigma"]
        target = 2.0 * sigma / radius
        rows = []
        center = np.asarray(surface.parameters["center"], dtype=float)
        for X in center + radius * engine_service.sphere_points():
            pair = case.pairs(X)
            bare = interface_service.unstructured_balance_residuals(pair, surface, model, 0.0, manifold)
            structured = interface_service.structured_balance_residuals(
                case.pairs, surface, X, model, case.phi, 0.0, manifold)
            norms = structured.norms()
            rows.append([*X, bare.configurational, target,
                         norms["standard"], norms["substructural"], norms["configurational"]])
        table = np.asarray(rows)
        outcome.table("sphere_tension", ["X1", "X2", "X3", "m_P_m", "two_sigma_over_R", "R_std", "R_sub", "R_cfg"],
                      rows)
        outcome.metric("tension_gap", float(np.max(np.abs(table[:, 3] - target))))
        outcome.metric("R_std", float(np.max(table[:, 5])))
        outcome.metric("R_sub", float(np.max(table[:, 6])))
        outcome.metric("R_cfg", float(np.max(table[:, 7])))

    def _check_surface_invariance(self, task: ResidualSuiteTask, context, outcome: TaskOutcome, rng):
        manifold = self.manifolds.get("S2:embedded")
        phi = self.surfaces.build("invariant", task.case_parameters.get("invariant", {}))
        samples = interface_service.random_surface_samples(task.samples, manifold, rng)
        generators = [interface_service.random_surface_generators(sample, rng) for sample in samples]
        residuals = interface_service.surface_invariance_residuals(phi, samples, generators, manifold)
        for key in ("nr1", "nr2", "nr3"):
            outcome.metric(key, residuals[key])

    def _check_lemmas(self, task: ResidualSuiteTask, context, outcome: TaskOutcome, rng):
        surface = InterfaceModel.sphere()
        report = interface_service.lemma_checks(surface, engine_service.isochoric_field,
                                                engine_service.superficial_field(surface),
                                                engine_service.sphere_points())
        outcome.metric("lemma1", report.lemma1)
        outcome.metric("lemma1_printed", report.lemma1_printed)
        outcome.metric("lemma2", report.lemma2)
        outcome.flags.extend(report.flags)

    def _check_covariance(self, task: ResidualSuiteTask, context, outcome: TaskOutcome, rng):
        case = self._case(task, "rigid-rotation")
        Q = Rotation.from_rotvec(rng.normal(size=3)).as_matrix()
        rotated = Trajectory(
            states=tuple(kinematics_service.rotate_state(state, Q) for state in case.trajectory.as_list()),
            dt=case.trajectory.dt,
        )
        sources = Sources(
            b=lambda X, t: case.sources.body_force(X, t, 3) @ Q.T,
            beta=lambda X, t: case.sources.order_force(X, t, 3) @ Q.T,
        )
        grid = case.trajectory.grid

        def sizes(trajectory, forcing):
            el = mechanics_service.el_residuals(trajectory, case.model, forcing)
            config = mechanics_service.config_balance_residual(trajectory, case.model, forcing)
            return {
                "standard": residual_norms(el.r_x, grid)["l2"],
                "substructural": residual_norms(el.r_nu, grid)["l2"],
                "configurational": residual_norms(config.consistent, grid)["l2"],
            }

        before, after = sizes(case.trajectory, case.sources), sizes(rotated, sources)
        changes = {key: _relative_change(before[key], after[key]) for key in before}
        for key, value in changes.items():
            outcome.metric(f"covariance.{key}", value)
        outcome.metric("covariance.max", max(changes.values()))

    # ------------------------------
    # REFINEMENT
    # ------------------------------

    def _refinement_study(self, task: RefinementTask, context, outcome: TaskOutcome, rng, out_dir, name):
        result = engine_service.refinement_study(task.target, task.levels)
        outcome.metric("order", result.order)
        outcome.metric("finest_residual", result.norms[-1])
        outcome.flags.extend(result.flags)
        outcome.table("convergence", ["h", "dt", "residual"],
                      [[row["h"], row["dt"], row["residual"]] for row in result.table()])


# Create singleton instance
scenario_service = ScenarioService()

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from multifield.core.decorators import validation_aware
from multifield.core.exceptions import (
    GeometryError,
    InputError,
    ModelError,
    NumericalConsistencyError,
    TraceDivergenceError,
)
from multifield.core.settings import settings
from multifield.models.interface import (
    InterfaceModel,
    JumpRecord,
    PointJet,
    StatePair,
    SurfaceEnergyModel,
)
from multifield.models.lagrangian import GeneratorSet, LagrangianModel
from multifield.models.manifolds import ManifoldModel
from multifield.services.calculus import central_derivative, extrapolate_to_zero
from multifield.services.manifold import manifold_service
from multifield.services.mechanics import mechanics_service

logger = logging.getLogger(__name__)

JET_FIELDS = ("x", "xdot", "F", "nu", "nudot", "grad_nu", "rho0")

# X -> StatePair on a neighbourhood of the surface
PairField = Callable[[np.ndarray], StatePair]


@dataclass(frozen=True, eq=False)
class SurfaceCalculus:
    grad_e: Optional[np.ndarray]
    div_A: Optional[np.ndarray]
    L: np.ndarray
    # -grad_S m by surface differences
    L_difference: np.ndarray

    @property
    def curvature_gap(self) -> float:
        return float(np.max(np.abs(self.L - self.L_difference)))


@dataclass(frozen=True, eq=False)
class CompatibilityReport:
    coherency: float
    kinematic: float
    tolerance: float

    @property
    def coherent(self) -> bool:
        return self.coherency <= self.tolerance

    @property
    def compatible(self) -> bool:
        return self.kinematic <= self.tolerance


@dataclass(frozen=True, eq=False)
class SurfaceKinematics:
    """FF = <F> Pi, NN = <grad nu> Pi and the normal parts <F> m, <grad nu> m."""
    m: np.ndarray
    Pi: np.ndarray
    FF: np.ndarray
    NN: np.ndarray
    F_m: np.ndarray
    grad_nu_m: np.ndarray
    nu: np.ndarray
    residual: float


@dataclass(frozen=True, eq=False)
class SurfaceResponses:
    phi: float
    T: np.ndarray
    S: np.ndarray
    z: np.ndarray
    dm_phi: np.ndarray
    C_tan: np.ndarray
    c: np.ndarray


@dataclass(frozen=True, eq=False)
class BalanceResiduals:
    standard: np.ndarray
    substructural: np.ndarray
    configurational: float
    U: float

    def norms(self) -> Dict[str, float]:
        return {
            "standard": float(np.linalg.norm(self.standard)),
            "substructural": float(np.linalg.norm(self.substructural)),
            "configurational": abs(float(self.configurational)),
        }


@dataclass(frozen=True, eq=False)
class StructuredBalance(BalanceResiduals):
    unstructured: Optional[BalanceResiduals] = None
    # rho0 [chi] / 2: gap between the two configurational forms at phi = 0
    chi_coefficient_gap: float = 0.0


@dataclass(frozen=True, eq=False)
class SurfaceSample:
    """Arguments (m, FF, nu, NN) of a surface energy at one surface point."""
    m: np.ndarray
    FF: np.ndarray
    nu: np.ndarray
    NN: np.ndarray


@dataclass(frozen=True, eq=False)
class SurfaceGenerators:
    """
    Pointwise generator data: tangential relabeling gradient grad_w,
    spin W of a rigid spatial velocity and an algebra element xi.
    """
    grad_w: np.ndarray
    W: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True, eq=False)
class LemmaReport:
    lemma1: float
    lemma1_printed: float
    lemma2: float
    flags: List[str] = field(default_factory=list)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


@validation_aware("numerical", fallback=None)
def _verify_decomposition(residual: float, scale: float):
    if residual > 1e-12 * (1.0 + scale):
        raise NumericalConsistencyError(f"surface decomposition of <F>, <grad nu> off by {residual:.3e}")


class InterfaceService:
    """
    Service layer for discontinuity surfaces: traces, surface calculus and interfacial balances.
    """

    # ------------------------------
    # TRACES
    # ------------------------------

    def _sampler(self, field_or_closure) -> Callable[[np.ndarray], np.ndarray]:
        if callable(field_or_closure):
            return lambda Y: np.asarray(field_or_closure(Y), dtype=float)
        grid = getattr(field_or_closure, "grid", None)
        values = getattr(field_or_closure, "values", None)
        if grid is None or values is None:
            raise InputError("traces need a closure or a nodal field with grid and values", field="field")
        if grid.dim != 3:
            raise InputError("nodal traces need a three-dimensional grid", field="field")
        interpolator = RegularGridInterpolator(grid.axes, np.asarray(values, dtype=float), method="linear")

        def sample(Y):
            try:
                return interpolator(np.asarray(Y, dtype=float)[None])[0]
            except ValueError as e:
                raise InputError(f"trace sample point {Y} leaves the grid ({e})", field="field")

        return sample

    def default_schedule(self, field_or_closure=None) -> tuple:
        grid = getattr(field_or_closure, "grid", None)
        h = grid.h if grid is not None and not callable(field_or_closure) else settings.TRACE_STEP
        return (4.0 * h, 2.0 * h, h)

    def traces(
        self,
        field_or_closure: Union[Callable[[np.ndarray], np.ndarray], Any],
        surface: InterfaceModel,
        X,
        schedule: Optional[Sequence[float]] = None,
    ) -> JumpRecord:
        """
        Outer and inner traces a(X +- eps m) extrapolated to eps -> 0.

        Args:
            field_or_closure: Closure X -> a(X) or a nodal field (``grid``, ``values``)
            schedule: Decreasing offsets; defaults to (4h, 2h, h)

        Raises:
            InputError: If X is off the surface or the schedule is malformed
            TraceDivergenceError: If the extrapolation error exceeds TRACE_TOLERANCE
        """
        X = surface.ensure_on_surface(X, settings.ON_SURFACE_TOLERANCE)
        schedule = tuple(self.default_schedule(field_or_closure) if schedule is None else schedule)
        if len(schedule) < 2 or any(e <= 0 for e in schedule) or any(a <= b for a, b in zip(schedule, schedule[1:])):
            raise InputError(f"trace schedule must be positive and decreasing, got {schedule}", field="schedule")
        sample = self._sampler(field_or_closure)
        m = surface.normal(X)

        plus, plus_error = extrapolate_to_zero(schedule, [sample(X + eps * m) for eps in schedule])
        minus, minus_error = extrapolate_to_zero(schedule, [sample(X - eps * m) for eps in schedule])
        error = float(max(np.max(plus_error, initial=0.0), np.max(minus_error, initial=0.0)))
        scale = float(max(np.max(np.abs(plus), initial=0.0), np.max(np.abs(minus), initial=0.0)))
        if error > settings.TRACE_TOLERANCE * (1.0 + scale):
            raise TraceDivergenceError(
                f"one-sided limits at {X.tolist()} do not settle (error {error:.3e} over schedule {schedule})"
            )
        return JumpRecord(plus, minus, error)

    def pair_from_field(
        self,
        jets: Callable[[np.ndarray], PointJet],
        surface: InterfaceModel,
        X,
        schedule: Optional[Sequence[float]] = None,
    ) -> StatePair:
        """StatePair whose sides are the traces of a piecewise jet closure."""
        X = np.asarray(X, dtype=float)
        records = {
            name: self.traces(lambda Y, name=name: np.asarray(getattr(jets(Y), name), dtype=float),
                              surface, X, schedule)
            for name in JET_FIELDS
        }
        side = {}
        for label in ("plus", "minus"):
            values = {name: getattr(record, label) for name, record in records.items()}
            values["rho0"] = float(values["rho0"])
            side[label] = PointJet(**values)
        return StatePair(X, side["plus"], side["minus"])

    # ------------------------------
    # SURFACE CALCULUS
    # ------------------------------

    def _along_surface(self, func, surface: InterfaceModel, X, step=None, extrapolate=None) -> List[np.ndarray]:
        """
        Derivatives of ``func`` along the two tangent directions at X.

        Samples func on surface curves s -> project(X + s t) through the cross
        stencil X +- s t1, X +- s t2; optionally Richardson-extrapolated.

        Raises:
            GeometryError: If a stencil point cannot be projected onto the surface
        """
        step = settings.SURFACE_STEP if step is None else step
        extrapolate = settings.SURFACE_EXTRAPOLATE if extrapolate is None else extrapolate
        t1, t2 = surface.tangent_frame(X)

        def on_surface(Y):
            Y = surface.project(Y)
            if abs(float(surface.value(Y))) > 1e3 * settings.ON_SURFACE_TOLERANCE:
                raise GeometryError(f"{surface.shape}: stencil point {Y.tolist()} is off the surface patch")
            return np.asarray(func(Y), dtype=float)

        def difference(t, s):
            return (on_surface(X + s * t) - on_surface(X - s * t)) / (2.0 * s)

        derivatives = []
        for t in (t1, t2):
            d = difference(t, step)
            if extrapolate:
                d = (4.0 * difference(t, 0.5 * step) - d) / 3.0
            derivatives.append(d)
        return derivatives

    def surface_gradient(self, func, surface: InterfaceModel, X, step=None, extrapolate=None) -> np.ndarray:
        """grad_S e with a trailing material index."""
        t1, t2 = surface.tangent_frame(X)
        d1, d2 = self._along_surface(func, surface, X, step, extrapolate)
        return np.multiply.outer(d1, t1) + np.multiply.outer(d2, t2)

    def surface_divergence(self, func, surface: InterfaceModel, X, step=None, extrapolate=None) -> np.ndarray:
        """Div_S A, contracting the last (material) index of A."""
        t1, t2 = surface.tangent_frame(X)
        d1, d2 = self._along_surface(func, surface, X, step, extrapolate)
        return d1 @ t1 + d2 @ t2

    def surface_calculus(
        self,
        surface: InterfaceModel,
        X,
        e: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        A: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        step: Optional[float] = None,
        extrapolate: Optional[bool] = None,
    ) -> SurfaceCalculus:
        """
        Surface gradient of e, surface divergence of A and the curvature tensor at X.

        The curvature comes from the analytic closure when the shape has one and is
        cross-checked against -grad_S m by surface differences.
        """
        X = surface.ensure_on_surface(X, settings.ON_SURFACE_TOLERANCE)
        L_difference = -self.surface_gradient(surface.normal, surface, X, step, extrapolate)
        calculus = SurfaceCalculus(
            grad_e=None if e is None else self.surface_gradient(e, surface, X, step, extrapolate),
            div_A=None if A is None else self.surface_divergence(A, surface, X, step, extrapolate),
            L=surface.curvature(X),
            L_difference=L_difference,
        )
        logger.debug(f"{surface.shape}: curvature gap {calculus.curvature_gap:.3e} at {X.tolist()}")
        return calculus

    # ------------------------------
    # KINEMATICS AND RESPONSES
    # ------------------------------

    def _normal_speed(self, surface: InterfaceModel, X, U) -> float:
        return float(surface.normal_speed(X)) if U is None else float(U)

    def compatibility_checks(self, pair: StatePair, surface: InterfaceModel, U: Optional[float] = None,
                             tolerance: Optional[float] = None) -> CompatibilityReport:
        """Coherency |[F] Pi| and kinematic compatibility |[xdot] + U [F] m|."""
        tolerance = settings.COMPATIBILITY_TOLERANCE if tolerance is None else tolerance
        X = pair.X
        m = surface.normal(X)
        U = self._normal_speed(surface, X, U)
        F_jump = pair.record("F").jump
        report = CompatibilityReport(
            coherency=float(np.linalg.norm(F_jump @ surface.projector(X))),
            kinematic=float(np.linalg.norm(pair.record("xdot").jump + U * F_jump @ m)),
            tolerance=tolerance,
        )
        if not (report.coherent and report.compatible):
            logger.warning(f"incompatible surface state at {X.tolist()}: coherency {report.coherency:.3e}, "
                           f"kinematic {report.kinematic:.3e}")
        return report

    def surface_kinematics(self, pair: StatePair, surface: InterfaceModel) -> SurfaceKinematics:
        X = pair.X
        m = surface.normal(X)
        Pi = surface.projector(X)
        F = pair.record("F").average
        grad_nu = pair.record("grad_nu").average
        FF, NN = F @ Pi, grad_nu @ Pi
        F_m, grad_nu_m = F @ m, grad_nu @ m
        residual = max(
            float(np.max(np.abs(F - FF - np.outer(F_m, m)))),
            float(np.max(np.abs(grad_nu - NN - np.outer(grad_nu_m, m)), initial=0.0)),
        )
        _verify_decomposition(residual, float(np.max(np.abs(F))))
        return SurfaceKinematics(m=m, Pi=Pi, FF=FF, NN=NN, F_m=F_m, grad_nu_m=grad_nu_m,
                                 nu=pair.record("nu").average, residual=residual)

    def surface_responses(self, phi: SurfaceEnergyModel, m, FF, nu, NN,
                          F_m=None, grad_nu_m=None) -> SurfaceResponses:
        """
        Surface stress T = -dFF phi, microstress S = -dNN phi, self-force z = dnu phi,
        tangential Eshelby stress C_tan = phi Pi - FF^T T - NN^T S and
        surface shear c = -dm phi - T^T <F> m - S^T <grad nu> m.
        """
        m = np.asarray(m, dtype=float)
        FF, NN, nu = (np.asarray(a, dtype=float) for a in (FF, NN, nu))
        Pi = np.eye(3) - np.outer(m, m)
        value = float(phi.energy(m, FF, nu, NN))
        T = -phi.partial("dFF_phi", m, FF, nu, NN)
        S = -phi.partial("dNN_phi", m, FF, nu, NN)
        z = phi.partial("dnu_phi", m, FF, nu, NN)
        dm = phi.partial("dm_phi", m, FF, nu, NN)
        F_m = np.zeros(3) if F_m is None else np.asarray(F_m, dtype=float)
        grad_nu_m = np.zeros(nu.shape) if grad_nu_m is None else np.asarray(grad_nu_m, dtype=float)
        return SurfaceResponses(
            phi=value, T=T, S=S, z=z, dm_phi=dm,
            C_tan=value * Pi - FF.T @ T - NN.T @ S,
            c=-dm - T.T @ F_m - S.T @ grad_nu_m,
        )

    def responses_at(self, pairs: PairField, surface: InterfaceModel, phi: SurfaceEnergyModel, Y) -> SurfaceResponses:
        kinematics = self.surface_kinematics(pairs(Y), surface)
        return self.surface_responses(phi, kinematics.m, kinematics.FF, kinematics.nu, kinematics.NN,
                                      kinematics.F_m, kinematics.grad_nu_m)

    # ------------------------------
    # BALANCES
    # ------------------------------

    def _check_continuity(self, pair: StatePair, manifold: Optional[ManifoldModel]):
        if manifold is not None and manifold.linear_ambient:
            return
        if manifold is not None:
            gap = float(np.linalg.norm(manifold.chart_difference(pair.minus.nu, pair.plus.nu)))
        else:
            gap = float(np.linalg.norm(pair.record("nu").jump))
        if gap > settings.CONTINUITY_TOLERANCE:
            raise ModelError(f"order parameter jumps by {gap:.3e} across the surface on a nonlinear manifold")

    def _side(self, jet: PointJet, X, model: LagrangianModel) -> Dict[str, Any]:
        rho = jet.rho0
        P = rho * model.partial("dF_e", X, jet.F, jet.nu, jet.grad_nu)
        S = rho * model.partial("dgradnu_e", X, jet.F, jet.nu, jet.grad_nu)
        e = float(model.elastic(X, jet.F, jet.nu, jet.grad_nu))
        return {
            "P": P,
            "S": S,
            "eshelby": rho * e * np.eye(3) - jet.F.T @ P - jet.grad_nu.T @ S,
            "p": rho * jet.xdot,
            "mu": rho * model.partial("dnudot_chi", jet.nu, jet.nudot),
            "chi": rho * float(model.coenergy(jet.nu, jet.nudot)),
        }

    def _jumps(self, pair: StatePair, model: LagrangianModel) -> Dict[str, Any]:
        plus = self._side(pair.plus, pair.X, model)
        minus = self._side(pair.minus, pair.X, model)
        return {"plus": plus, "minus": minus,
                **{name: plus[name] - minus[name] for name in plus}}

    def unstructured_balance_residuals(
        self,
        pair: StatePair,
        surface: InterfaceModel,
        model: LagrangianModel,
        U: Optional[float] = None,
        manifold: Optional[ManifoldModel] = None,
    ) -> BalanceResiduals:
        """
        Interfacial balances of a surface without own energy.

        standard        = [P] m + rho0 [xdot] U
        substructural   = [S] m + rho0 [dnudot chi] U
        configurational = m . [Esh] m - U [rho0 grad_nu^T dnudot chi] . m
                          - rho0 [chi] / 2 + U^2 [rho0 |F m|^2] / 2

        Raises:
            ModelError: If nu jumps across the surface on a nonlinear manifold
        """
        self._check_continuity(pair, manifold)
        X = pair.X
        m = surface.normal(X)
        U = self._normal_speed(surface, X, U)
        jumps = self._jumps(pair, model)
        plus, minus = jumps["plus"], jumps["minus"]
        config_momentum = pair.plus.grad_nu.T @ plus["mu"] - pair.minus.grad_nu.T @ minus["mu"]
        stretch = (pair.plus.rho0 * np.sum((pair.plus.F @ m) ** 2)
                   - pair.minus.rho0 * np.sum((pair.minus.F @ m) ** 2))
        return BalanceResiduals(
            standard=jumps["P"] @ m + jumps["p"] * U,
            substructural=jumps["S"] @ m + jumps["mu"] * U,
            configurational=float(m @ jumps["eshelby"] @ m - U * config_momentum @ m
                                  - 0.5 * jumps["chi"] + 0.5 * U ** 2 * stretch),
            U=U,
        )

    def structured_balance_residuals(
        self,
        pairs: PairField,
        surface: InterfaceModel,
        X,
        model: LagrangianModel,
        phi: SurfaceEnergyModel,
        U: Optional[float] = None,
        manifold: Optional[ManifoldModel] = None,
        step: Optional[float] = None,
        extrapolate: Optional[bool] = None,
    ) -> StructuredBalance:
        """
        Interfacial balances of a surface with energy phi.

        standard        = [P] m + Div_S T + rho0 [xdot] U
        substructural   = [S] m + Div_S S - z + rho0 [dnudot chi] U
        configurational = m . [Esh] m + C_tan . L + Div_S c - U [rho0 grad_nu^T dnudot chi] . m
                          - rho0 [chi] + U^2 [rho0 |F m|^2] / 2

        ``pairs`` supplies the two-sided state at neighbouring surface points for
        the surface divergences.
        """
        X = surface.ensure_on_surface(X, settings.ON_SURFACE_TOLERANCE)
        pair = pairs(X)
        bare = self.unstructured_balance_residuals(pair, surface, model, U, manifold)
        here = self.responses_at(pairs, surface, phi, X)

        div_T = self.surface_divergence(lambda Y: self.responses_at(pairs, surface, phi, Y).T,
                                        surface, X, step, extrapolate)
        div_S = self.surface_divergence(lambda Y: self.responses_at(pairs, surface, phi, Y).S,
                                        surface, X, step, extrapolate)
        div_c = self.surface_divergence(lambda Y: self.responses_at(pairs, surface, phi, Y).c,
                                        surface, X, step, extrapolate)
        L = surface.curvature(X)
        chi_jump = pair.plus.rho0 * float(model.coenergy(pair.plus.nu, pair.plus.nudot)) \
            - pair.minus.rho0 * float(model.coenergy(pair.minus.nu, pair.minus.nudot))

        return StructuredBalance(
            standard=bare.standard + div_T,
            substructural=bare.substructural + div_S - here.z,
            configurational=float(bare.configurational + np.sum(here.C_tan * L) + div_c - 0.5 * chi_jump),
            U=bare.U,
            unstructured=bare,
            chi_coefficient_gap=0.5 * chi_jump,
        )

    def surface_flux(self, pairs: PairField, surface: InterfaceModel, phi: SurfaceEnergyModel,
                     gens: GeneratorSet, manifold: ManifoldModel, Y) -> np.ndarray:
        """
        Surface Noether flux at Y:
        -phi Pi w + dFF phi^T (v - <F> w) + dNN phi^T (xi_M - <grad nu> w) - dm phi (m . w).
        """
        pair = pairs(Y)
        kinematics = self.surface_kinematics(pair, surface)
        responses = self.surface_responses(phi, kinematics.m, kinematics.FF, kinematics.nu, kinematics.NN,
                                           kinematics.F_m, kinematics.grad_nu_m)
        F = pair.record("F").average
        grad_nu = pair.record("grad_nu").average
        w = gens.relabeling_velocity(pair.X)
        v = gens.spatial_velocity(pair.record("x").average)
        xi = mechanics_service.order_generator(manifold, gens, kinematics.nu)
        return (-responses.phi * kinematics.Pi @ w
                - responses.T.T @ (v - F @ w)
                - responses.S.T @ (xi - grad_nu @ w)
                - responses.dm_phi * float(kinematics.m @ w))

    def interfacial_noether_residual(
        self,
        pairs: Union[PairField, StatePair],
        surface: InterfaceModel,
        model: LagrangianModel,
        gens: GeneratorSet,
        manifold: ManifoldModel,
        phi: Optional[SurfaceEnergyModel] = None,
        X=None,
        U: Optional[float] = None,
        step: Optional[float] = None,
        extrapolate: Optional[bool] = None,
    ) -> Dict[str, float]:
        """
        Pointwise interfacial Noether balance -[Q] U + [Flux] . m (+ Div_S of the surface flux).

        Raises:
            InputError: If a surface energy is given without a pair field
        """
        if isinstance(pairs, StatePair):
            pair = pairs
            if phi is not None:
                raise InputError("a surface energy needs a pair field for the surface divergence", field="pairs")
        else:
            if X is None:
                raise InputError("a pair field needs the surface point X", field="X")
            pair = pairs(surface.ensure_on_surface(X, settings.ON_SURFACE_TOLERANCE))
        X = pair.X
        m = surface.normal(X)
        U = self._normal_speed(surface, X, U)

        sides = []
        for jet in (pair.plus, pair.minus):
            sides.append(mechanics_service.jet_noether(model, manifold, gens, jet.rho0, X, jet.x, jet.xdot,
                                                       jet.F, jet.nu, jet.nudot, jet.grad_nu))
        Q_jump = float(sides[0][0] - sides[1][0])
        flux_jump = sides[0][1] - sides[1][1]
        bulk = -Q_jump * U + float(flux_jump @ m)
        surface_term = 0.0
        if phi is not None:
            surface_term = float(self.surface_divergence(
                lambda Y: self.surface_flux(pairs, surface, phi, gens, manifold, Y), surface, X, step, extrapolate
            ))
        return {"residual": bulk + surface_term, "bulk": bulk, "surface": surface_term, "U": U}

    # ------------------------------
    # SURFACE INVARIANCE
    # ------------------------------

    def random_surface_samples(self, count: int, manifold: ManifoldModel, rng: np.random.Generator) -> List[SurfaceSample]:
        """Random unit normals, tangential FF and NN of full rank, and points of the manifold."""
        samples = []
        for _ in range(count):
            m = rng.normal(size=3)
            m /= np.linalg.norm(m)
            Pi = np.eye(3) - np.outer(m, m)
            FF = (np.eye(3) + 0.3 * rng.normal(size=(3, 3))) @ Pi
            if manifold.from_embedded is not None and manifold.dim == 3:
                nu = manifold.from_embedded(rng.normal(size=3))
            else:
                nu = manifold.validate(0.5 * rng.normal(size=manifold.dim))
            NN = rng.normal(size=(manifold.dim, 3)) @ Pi
            samples.append(SurfaceSample(m=m, FF=FF, nu=np.asarray(nu, dtype=float), NN=NN))
        return samples

    def random_surface_generators(self, sample: SurfaceSample, rng: np.random.Generator) -> SurfaceGenerators:
        """Tangential traceless relabeling gradient, random spin and algebra element."""
        Pi = np.eye(3) - np.outer(sample.m, sample.m)
        G = Pi @ rng.normal(size=(3, 3)) @ Pi
        G -= 0.5 * np.trace(G) * Pi
        return SurfaceGenerators(grad_w=G, W=_skew(rng.normal(size=3)), xi=rng.normal(size=3))

    def _check_generators(self, sample: SurfaceSample, gens: SurfaceGenerators):
        G = np.asarray(gens.grad_w, dtype=float)
        m = sample.m
        tolerance = 1e-10 * (1.0 + float(np.max(np.abs(G))))
        if np.linalg.norm(G @ m) > tolerance:
            raise InputError("relabeling gradient must annihilate the normal ((grad w) m = 0)", field="grad_w")
        if np.linalg.norm(G.T @ m) > tolerance:
            raise InputError("normal component of the relabeling field must be constant on the surface",
                             field="grad_w")
        if abs(np.trace(G)) > tolerance:
            raise InputError("relabeling must preserve surface area (tr grad_S w = 0)", field="grad_w")
        W = np.asarray(gens.W, dtype=float)
        if np.max(np.abs(W + W.T)) > tolerance:
            raise InputError("spatial velocity gradient must be skew", field="W")

    def surface_invariance_residuals(
        self,
        phi: SurfaceEnergyModel,
        samples: Sequence[SurfaceSample],
        generators: Sequence[SurfaceGenerators],
        manifold: ManifoldModel,
        group: str = "SO3",
    ) -> Dict[str, float]:
        """
        Identities implied by an invariant surface energy, maximised over samples.

        nr1 = FF^T T . grad_S w + NN^T S . grad_S w + dm phi . (grad w) m
        nr2 = T . grad_S v
        nr3 = z . xi_M(nu) + S . grad_S xi_M(nu)

        Raises:
            InputError: If a generator violates the relabeling properties
        """
        if len(generators) not in (1, len(samples)):
            raise InputError("give one generator set or one per sample", field="generators")
        if not phi.invariant:
            logger.warning(f"{phi.name} is not declared invariant; identities may fail")
        nr1 = nr2 = nr3 = 0.0
        for k, sample in enumerate(samples):
            gens = generators[0] if len(generators) == 1 else generators[k]
            self._check_generators(sample, gens)
            responses = self.surface_responses(phi, sample.m, sample.FF, sample.nu, sample.NN)
            Pi = np.eye(3) - np.outer(sample.m, sample.m)
            grad_w = gens.grad_w @ Pi
            nr1 = max(nr1, abs(float(np.sum((sample.FF.T @ responses.T) * grad_w)
                                     + np.sum((sample.NN.T @ responses.S) * grad_w)
                                     + responses.dm_phi @ (gens.grad_w @ sample.m))))
            nr2 = max(nr2, abs(float(np.sum(responses.T * (gens.W @ sample.FF)))))
            xi_M = manifold_service.action_generator(manifold, group, gens.xi, sample.nu).components
            D_xi = manifold_service.action_jacobian(manifold, group, gens.xi, sample.nu)
            nr3 = max(nr3, abs(float(responses.z @ xi_M + np.sum(responses.S * (D_xi @ sample.NN)))))
        logger.info(f"{phi.name}: surface invariance nr1={nr1:.3e} nr2={nr2:.3e} nr3={nr3:.3e} "
                    f"over {len(samples)} samples")
        return {"nr1": nr1, "nr2": nr2, "nr3": nr3, "samples": len(samples)}

    # ------------------------------
    # LEMMAS
    # ------------------------------

    def lemma_checks(
        self,
        surface: InterfaceModel,
        w: Callable[[np.ndarray], np.ndarray],
        A: Callable[[np.ndarray], np.ndarray],
        points: np.ndarray,
        step: Optional[float] = None,
        extrapolate: Optional[bool] = None,
    ) -> LemmaReport:
        """
        Residuals of the trace identity for isochoric w and of the normal part of Div_S A.

        lemma1         = |Pi . grad_S w + ((grad w) m) . m|
        lemma1_printed = |Pi . grad_S w - ((grad w) m) . m|
        lemma2         = |m . Div_S A - A . L|

        Both vanish at O(step^2) with the plain stencil. Precondition failures
        (Div w != 0, A m != 0) are recorded as flags.
        """
        step = settings.SURFACE_STEP if step is None else step
        extrapolate = settings.SURFACE_EXTRAPOLATE if extrapolate is None else extrapolate
        points = np.atleast_2d(np.asarray(points, dtype=float))
        flags = set()
        lemma1 = lemma1_printed = lemma2 = 0.0
        for X in points:
            X = surface.ensure_on_surface(X, settings.ON_SURFACE_TOLERANCE)
            m = surface.normal(X)
            Pi = surface.projector(X)

            grad_w = central_derivative(w, [X], 0, 1)
            if abs(np.trace(grad_w)) > settings.ISOCHORIC_TOLERANCE * (1.0 + float(np.max(np.abs(grad_w)))):
                flags.add("isochoric-precondition")
            A_here = np.asarray(A(X), dtype=float)
            if np.linalg.norm(A_here @ m) > 1e-10 * (1.0 + float(np.max(np.abs(A_here)))):
                flags.add("superficial-precondition")

            surface_trace = float(np.sum(Pi * self.surface_gradient(w, surface, X, step, extrapolate)))
            normal_derivative = (np.asarray(w(X + step * m)) - np.asarray(w(X - step * m))) / (2.0 * step)
            if extrapolate:
                half = 0.5 * step
                finer = (np.asarray(w(X + half * m)) - np.asarray(w(X - half * m))) / (2.0 * half)
                normal_derivative = (4.0 * finer - normal_derivative) / 3.0
            normal_part = float(normal_derivative @ m)
            lemma1 = max(lemma1, abs(surface_trace + normal_part))
            lemma1_printed = max(lemma1_printed, abs(surface_trace - normal_part))

            div_A = self.surface_divergence(A, surface, X, step, extrapolate)
            lemma2 = max(lemma2, abs(float(m @ div_A - np.sum(A_here * surface.curvature(X)))))

        for flag in sorted(flags):
            logger.warning(f"lemma check precondition failed: {flag}")
        return LemmaReport(lemma1=lemma1, lemma1_printed=lemma1_printed, lemma2=lemma2, flags=sorted(flags))

    # ------------------------------
    # SAMPLE CLOUDS
    # ------------------------------

    def sample_cloud(
        self,
        pairs: PairField,
        surface: InterfaceModel,
        points: np.ndarray,
        model: LagrangianModel,
        phi: Optional[SurfaceEnergyModel] = None,
        manifold: Optional[ManifoldModel] = None,
    ) -> List[Dict[str, float]]:
        """Per-point residual records (X, m, residual norms) for tabular export."""
        records = []
        for X in np.atleast_2d(np.asarray(points, dtype=float)):
            if phi is None:
                balance = self.unstructured_balance_residuals(pairs(X), surface, model, manifold=manifold)
            else:
                balance = self.structured_balance_residuals(pairs, surface, X, model, phi, manifold=manifold)
            m = surface.normal(X)
            record = {f"X{i + 1}": float(X[i]) for i in range(3)}
            record.update({f"m{i + 1}": float(m[i]) for i in range(3)})
            record.update(balance.norms())
            records.append(record)
        return records


# Create singleton instance
interface_service = InterfaceService()

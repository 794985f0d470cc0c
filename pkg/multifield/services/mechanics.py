import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from multifield.core.exceptions import InputError, ModelError, UnsupportedActionError
from multifield.core.settings import settings
from multifield.models.body import BodyGrid, MotionState, quadrature_weights
from multifield.models.lagrangian import GeneratorSet, LagrangianModel, Sources
from multifield.models.manifolds import ManifoldModel
from multifield.models.trajectory import Trajectory
from multifield.services.calculus import central_derivative
from multifield.services.kinematics import kinematics_service
from multifield.services.manifold import manifold_service

logger = logging.getLogger(__name__)

INVARIANCE_PARAMETERS = (1e-3, 1e-2, 1e-1)
FAMILIES = ("identity", "relabel", "spatial", "group", "rotation")

# Levi-Civita symbol
ALTERNATOR = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    ALTERNATOR[_i, _j, _k] = 1.0
    ALTERNATOR[_i, _k, _j] = -1.0


@dataclass(frozen=True, eq=False)
class BulkResponses:
    """P = rho0 dF e, S = rho0 dgradnu e, z = -rho0 dnu e, b = dx L = -rho0 dx w, beta = -rho0 dnu w."""
    P: np.ndarray
    S: np.ndarray
    z: np.ndarray
    b: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True, eq=False)
class ELResiduals:
    """Residuals at the interior time levels, time on axis 0."""
    r_x: np.ndarray
    r_nu: np.ndarray
    times: np.ndarray
    route: str


@dataclass(frozen=True, eq=False)
class NoetherReport:
    residual: np.ndarray
    times: np.ndarray
    linf: float
    l2: float
    flags: List[str] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class InvarianceReport:
    family: str
    passed: bool
    max_deviation: float
    deviations: Dict[float, float]
    thresholds: Dict[float, float]


@dataclass(frozen=True, eq=False)
class ConfigBalanceResidual:
    """
    Configurational balance residuals at interior time levels.

    ``consistent`` vanishes on solutions of the bulk balances (it equals
    F^T r_x + grad_nu^T r_nu up to stencil error); ``printed`` keeps the sign
    pattern d/dt(...) - Div(Eshelby - kinetic I) - dX L.
    """
    consistent: np.ndarray
    printed: np.ndarray
    times: np.ndarray


def residual_norms(values: np.ndarray, grid: BodyGrid, exclude_boundary: bool = True,
                   stacked: bool = True) -> Dict[str, float]:
    """
    Sup norm and spatial L2 norm of a nodal residual.

    ``values`` has shape ``(levels,) + grid.shape + comps`` when ``stacked``,
    else ``grid.shape + comps``; the L2 norm is the largest spatial L2 norm over levels.
    """
    values = np.asarray(values, dtype=float)
    if not stacked:
        values = values[None]
    if values.shape[0] == 0:
        return {"linf": 0.0, "l2": 0.0}
    size = np.linalg.norm(values.reshape(values.shape[:grid.dim + 1] + (-1,)), axis=-1)
    if exclude_boundary:
        size = np.where(grid.boundary_mask()[None], 0.0, size)
    l2 = max(np.sqrt(grid.integrate(level ** 2)) for level in size)
    return {"linf": float(np.max(size)), "l2": float(l2)}


def _time_derivative(levels: np.ndarray, dt: float) -> np.ndarray:
    return (levels[2:] - levels[:-2]) / (2.0 * dt)


class MechanicsService:
    """
    Service layer for the Lagrangian, bulk responses, balance residuals and symmetries.
    """

    # ------------------------------
    # LAGRANGIAN
    # ------------------------------

    def density(self, model: LagrangianModel, rho0, X, x, xdot, F, nu, nudot, grad_nu) -> np.ndarray:
        """rho0 (|xdot|^2 / 2 + chi - e - w) at arbitrary jet values."""
        kinetic = 0.5 * np.sum(np.asarray(xdot) ** 2, axis=-1)
        return rho0 * (kinetic + model.coenergy(nu, nudot) - model.elastic(X, F, nu, grad_nu) - model.potential(x, nu))

    def lagrangian_density(self, state: MotionState, model: LagrangianModel) -> np.ndarray:
        """Nodal Lagrangian density, shape ``grid.shape``."""
        return self.density(model, state.grid.rho0, state.X, state.x, state.xdot, state.F,
                            state.nu, state.nudot, state.grad_nu)

    def total_lagrangian(self, state: MotionState, model: LagrangianModel) -> float:
        return state.grid.integrate(self.lagrangian_density(state, model))

    def total_energy(self, state: MotionState, model: LagrangianModel) -> float:
        """Integral of kinetic + substructural kinetic (mu . nudot - chi) + elastic + potential energy."""
        rho = state.grid.rho0
        mu = model.partial("dnudot_chi", state.nu, state.nudot)
        density = rho * (
            0.5 * np.sum(state.xdot ** 2, axis=-1)
            + np.sum(mu * state.nudot, axis=-1) - model.coenergy(state.nu, state.nudot)
            + model.elastic(state.X, state.F, state.nu, state.grad_nu)
            + model.potential(state.x, state.nu)
        )
        return state.grid.integrate(density)

    def jet_partials(self, model: LagrangianModel, rho0, X, x, xdot, F, nu, nudot, grad_nu) -> Dict[str, np.ndarray]:
        """Partials of the density with respect to every jet slot."""
        rho = np.asarray(rho0, dtype=float)
        return {
            "xdot": rho[..., None] * np.asarray(xdot, dtype=float),
            "F": -rho[..., None, None] * model.partial("dF_e", X, F, nu, grad_nu),
            "x": -rho[..., None] * model.partial("dx_w", x, nu),
            "nudot": rho[..., None] * model.partial("dnudot_chi", nu, nudot),
            "nu": rho[..., None] * (
                model.partial("dnu_chi", nu, nudot)
                - model.partial("dnu_e", X, F, nu, grad_nu)
                - model.partial("dnu_w", x, nu)
            ),
            "grad_nu": -rho[..., None, None] * model.partial("dgradnu_e", X, F, nu, grad_nu),
        }

    def lagrangian_partials(self, state: MotionState, model: LagrangianModel) -> Dict[str, np.ndarray]:
        return self.jet_partials(model, state.grid.rho0, state.X, state.x, state.xdot, state.F,
                                 state.nu, state.nudot, state.grad_nu)

    # ------------------------------
    # BULK RESPONSES
    # ------------------------------

    def bulk_responses(self, state: MotionState, model: LagrangianModel) -> BulkResponses:
        rho = state.grid.rho0
        X, F, nu, gnu = state.X, state.F, state.nu, state.grad_nu
        return BulkResponses(
            P=rho[..., None, None] * model.partial("dF_e", X, F, nu, gnu),
            S=rho[..., None, None] * model.partial("dgradnu_e", X, F, nu, gnu),
            z=-rho[..., None] * model.partial("dnu_e", X, F, nu, gnu),
            b=-rho[..., None] * model.partial("dx_w", state.x, nu),
            beta=-rho[..., None] * model.partial("dnu_w", state.x, nu),
        )

    def eshelby_tensor(self, state: MotionState, model: LagrangianModel,
                       responses: Optional[BulkResponses] = None) -> np.ndarray:
        """P_esh = rho0 e I - F^T P - grad_nu^T S."""
        responses = responses or self.bulk_responses(state, model)
        rho_e = state.grid.rho0 * model.elastic(state.X, state.F, state.nu, state.grad_nu)
        identity = np.eye(state.grid.dim)
        return (
            rho_e[..., None, None] * identity
            - np.einsum("...iA,...iB->...AB", state.F, responses.P)
            - np.einsum("...aA,...aB->...AB", state.grad_nu, responses.S)
        )

    def eshelby_skew_check(self, states: Sequence[MotionState], model: LagrangianModel,
                           tolerance: float = 1e-8) -> Dict[str, float]:
        """Largest skew part of the Eshelby tensor over sampled states."""
        skew = 0.0
        scale = 0.0
        for state in states:
            P = self.eshelby_tensor(state, model)
            skew = max(skew, float(np.max(np.abs(0.5 * (P - np.swapaxes(P, -1, -2))))))
            scale = max(scale, float(np.max(np.abs(P))))
        return {"linf": skew, "scale": scale, "passed": skew <= tolerance * (1.0 + scale)}

    # ------------------------------
    # EULER-LAGRANGE RESIDUALS
    # ------------------------------

    def _require_levels(self, trajectory: Trajectory):
        if len(trajectory) < 3:
            raise InputError(f"residuals need at least 3 time levels, got {len(trajectory)}", field="trajectory")

    def el_residuals(
        self,
        trajectory: Trajectory,
        model: LagrangianModel,
        sources: Optional[Sources] = None,
        route: str = "balance",
    ) -> ELResiduals:
        """
        Bulk balance residuals at interior time levels.

        route="balance":    r_x  = rho0 xddot - b - rho0 b_ext - Div P
                            r_nu = rho0 (d/dt dnudot chi - dnu chi) - z - beta - rho0 beta_ext - Div S
        route="lagrangian": the same balances assembled from the partials of the
                            density, d/dt dxdot L + Div dF L - dx L, and likewise for nu.

        Time derivatives are central differences of the stored levels.

        Raises:
            InputError: With fewer than 3 time levels or an unknown route
        """
        self._require_levels(trajectory)
        if route not in ("balance", "lagrangian"):
            raise InputError(f"unknown route '{route}'", field="route")
        sources = sources or Sources()
        grid = trajectory.grid
        d, m = grid.dim, trajectory.manifold.dim
        rho = grid.rho0
        dt = trajectory.dt
        states = trajectory.as_list()
        inner = states[1:-1]

        b_ext = np.stack([sources.body_force(s.X, s.t, d) for s in inner])
        beta_ext = np.stack([sources.order_force(s.X, s.t, m) for s in inner])

        if route == "balance":
            xdot = trajectory.stack("xdot")
            mu = np.stack([model.partial("dnudot_chi", s.nu, s.nudot) for s in states])
            responses = [self.bulk_responses(s, model) for s in inner]
            div_P = np.stack([kinematics_service.divergence(r.P, grid) for r in responses])
            div_S = np.stack([kinematics_service.divergence(r.S, grid) for r in responses])
            b = np.stack([r.b for r in responses])
            beta = np.stack([r.beta for r in responses])
            z = np.stack([r.z for r in responses])
            dnu_chi = np.stack([model.partial("dnu_chi", s.nu, s.nudot) for s in inner])
            r_x = rho[None, ..., None] * (_time_derivative(xdot, dt) - b_ext) - b - div_P
            r_nu = (rho[None, ..., None] * (_time_derivative(mu, dt) - dnu_chi)
                    - z - beta - rho[None, ..., None] * beta_ext - div_S)
        else:
            partials = [self.lagrangian_partials(s, model) for s in states]
            p = np.stack([q["xdot"] for q in partials])
            mu = np.stack([q["nudot"] for q in partials])
            r_x = (_time_derivative(p, dt)
                   + np.stack([kinematics_service.divergence(q["F"], grid) for q in partials[1:-1]])
                   - np.stack([q["x"] for q in partials[1:-1]])
                   - rho[None, ..., None] * b_ext)
            r_nu = (_time_derivative(mu, dt)
                    + np.stack([kinematics_service.divergence(q["grad_nu"], grid) for q in partials[1:-1]])
                    - np.stack([q["nu"] for q in partials[1:-1]])
                    - rho[None, ..., None] * beta_ext)

        return ELResiduals(r_x=r_x, r_nu=r_nu, times=trajectory.times[1:-1], route=route)

    # ------------------------------
    # NOETHER
    # ------------------------------

    def relabeling_gradient(self, gens: GeneratorSet, X: np.ndarray) -> np.ndarray:
        """
        Gradient of the relabeling field with an isochoric check.

        Raises:
            InputError: If Div w exceeds ISOCHORIC_TOLERANCE
        """
        grad_w = central_derivative(gens.relabeling_velocity, [X], 0, 1)
        div = np.trace(grad_w, axis1=-2, axis2=-1)
        gap = float(np.max(np.abs(div))) if div.size else 0.0
        if gap > settings.ISOCHORIC_TOLERANCE * (1.0 + float(np.max(np.abs(grad_w)))):
            raise InputError(f"relabeling field is not isochoric (max |Div w| = {gap:.3e})", field="w")
        return grad_w

    def order_generator(self, manifold: ManifoldModel, gens: GeneratorSet, nu) -> np.ndarray:
        if gens.group is None:
            return np.zeros_like(np.asarray(nu, dtype=float))
        return manifold_service.action_generator(manifold, gens.group, gens.xi, nu).components

    def jet_noether(self, model: LagrangianModel, manifold: ManifoldModel, gens: GeneratorSet,
                    rho0, X, x, xdot, F, nu, nudot, grad_nu) -> Tuple[np.ndarray, np.ndarray]:
        """
        Noether density Q and flux of a generator set at jet values.

        Q    = dxdot L . (v - F w) + dnudot L . (xi_M - grad_nu w)
        Flux = L w + dF L^T (v - F w) + dgradnu L^T (xi_M - grad_nu w)
        """
        w = gens.relabeling_velocity(X)
        dx = gens.spatial_velocity(x) - np.einsum("...iA,...A->...i", F, w)
        dnu = self.order_generator(manifold, gens, nu) - np.einsum("...aA,...A->...a", grad_nu, w)
        partials = self.jet_partials(model, rho0, X, x, xdot, F, nu, nudot, grad_nu)
        L = self.density(model, rho0, X, x, xdot, F, nu, nudot, grad_nu)
        Q = np.sum(partials["xdot"] * dx, axis=-1) + np.sum(partials["nudot"] * dnu, axis=-1)
        flux = (np.asarray(L)[..., None] * w
                + np.einsum("...iA,...i->...A", partials["F"], dx)
                + np.einsum("...aA,...a->...A", partials["grad_nu"], dnu))
        return Q, flux

    def noether_fields(self, state: MotionState, model: LagrangianModel,
                       gens: GeneratorSet) -> Tuple[np.ndarray, np.ndarray]:
        """Nodal Noether density and flux, the flux with shape ``grid.shape + (d,)``."""
        if gens.w is not None:
            self.relabeling_gradient(gens, state.X)
        return self.jet_noether(model, state.manifold, gens, state.grid.rho0, state.X, state.x,
                                state.xdot, state.F, state.nu, state.nudot, state.grad_nu)

    def family_of(self, gens: GeneratorSet) -> str:
        if gens.is_zero:
            return "identity"
        if gens.w is not None:
            return "relabel"
        if gens.qdot is not None and gens.group is not None:
            return "rotation"
        if gens.c is not None or gens.qdot is not None:
            return "spatial"
        return "group"

    def noether_residual(
        self,
        trajectory: Trajectory,
        model: LagrangianModel,
        gens: GeneratorSet,
        check_preconditions: bool = True,
        el_tolerance: float = 1e-2,
    ) -> NoetherReport:
        """
        Residual Qdot + Div Flux of the Noether pair at interior time levels.

        Norms skip boundary nodes, where fixed data need not satisfy the bulk
        balances. Failed preconditions are recorded as flags.
        """
        self._require_levels(trajectory)
        grid = trajectory.grid
        fields = [self.noether_fields(s, model, gens) for s in trajectory.as_list()]
        Q = np.stack([f[0] for f in fields])
        div_flux = np.stack([kinematics_service.divergence(f[1], grid) for f in fields[1:-1]])
        residual = _time_derivative(Q, trajectory.dt) + div_flux
        norms = residual_norms(residual, grid)

        flags = []
        if check_preconditions and not gens.is_zero:
            el = self.el_residuals(trajectory, model)
            el_size = max(residual_norms(el.r_x, grid)["linf"], residual_norms(el.r_nu, grid)["linf"])
            if el_size > el_tolerance:
                flags.append("el-precondition")
                logger.warning(f"Noether check on a trajectory with EL residual {el_size:.3e}")
            samples = [trajectory[0], trajectory[len(trajectory) // 2], trajectory[-1]]
            invariance = self.invariance_check(model, self.family_of(gens), gens, samples)
            if not invariance.passed:
                flags.append("invariance-precondition")
                logger.warning(f"Lagrangian is not invariant under the {invariance.family} family "
                               f"(deviation {invariance.max_deviation:.3e})")

        logger.info(f"Noether residual linf={norms['linf']:.3e} l2={norms['l2']:.3e} flags={flags}")
        return NoetherReport(residual=residual, times=trajectory.times[1:-1],
                             linf=norms["linf"], l2=norms["l2"], flags=flags)

    # ------------------------------
    # SYMMETRIES
    # ------------------------------

    def rotational_invariance_residual(self, state: MotionState, model: LagrangianModel) -> np.ndarray:
        """
        Frame-indifference identity of the elastic energy.

        residual = skw(dF e F^T) - (1/2) alt v with (alt v)_ij = eps_ijk v_k and
        v_k = dnu e . xi_k(nu) + dgradnu e . (D xi_k grad_nu), xi_k the SO3 action of e_k.

        Raises:
            UnsupportedActionError: If the body is not 3D or the manifold has no SO3 action
        """
        if state.grid.dim != 3:
            raise UnsupportedActionError("SO3", f"a {state.grid.dim}D body")
        manifold = state.manifold
        X, F, nu, gnu = state.X, state.F, state.nu, state.grad_nu
        dF = model.partial("dF_e", X, F, nu, gnu)
        dnu = model.partial("dnu_e", X, F, nu, gnu)
        dgnu = model.partial("dgradnu_e", X, F, nu, gnu)
        push = dF @ np.swapaxes(F, -1, -2)
        skew = 0.5 * (push - np.swapaxes(push, -1, -2))

        v = np.zeros(nu.shape[:-1] + (3,))
        for k in range(3):
            basis = np.eye(3)[k]
            xi = manifold_service.action_generator(manifold, "SO3", basis, nu).components
            jacobian = manifold_service.action_jacobian(manifold, "SO3", basis, nu)
            v[..., k] = np.sum(dnu * xi, axis=-1) + np.einsum("...aA,...ab,...bA->...", dgnu, jacobian, gnu)
        return skew - 0.5 * np.einsum("ijk,...k->...ij", ALTERNATOR, v)

    def _transformed_density(self, model, state: MotionState, family: str, gens: GeneratorSet, s: float):
        X, x, xdot, F = state.X, state.x, state.xdot, state.F
        nu, nudot, gnu = state.nu, state.nudot, state.grad_nu

        if family == "relabel":
            grad_w = self.relabeling_gradient(gens, X)
            inverse = np.linalg.inv(np.eye(state.grid.dim) + s * grad_w)
            X = X + s * gens.relabeling_velocity(X)
            F = F @ inverse
            gnu = gnu @ inverse

        if family in ("spatial", "rotation"):
            if gens.c is not None:
                x = x + s * gens.c
            if gens.qdot is not None:
                Q = Rotation.from_rotvec(s * gens.qdot).as_matrix()
                x0 = np.zeros(3) if gens.x0 is None else gens.x0
                x = x0 + (x - x0) @ Q.T
                xdot = xdot @ Q.T
                F = Q @ F

        if family in ("group", "rotation") and gens.group is not None:
            manifold = state.manifold

            def flow(p):
                return manifold_service.flow(manifold, gens.group, gens.xi, p, s)

            jacobian = central_derivative(flow, [nu], 0, 1)
            nudot = np.einsum("...ab,...b->...a", jacobian, nudot)
            gnu = jacobian @ gnu
            nu = flow(nu)

        return self.density(model, state.grid.rho0, X, x, xdot, F, nu, nudot, gnu)

    def invariance_check(
        self,
        model: LagrangianModel,
        family: str,
        gens: GeneratorSet,
        states: Sequence[MotionState],
        parameters: Sequence[float] = INVARIANCE_PARAMETERS,
    ) -> InvarianceReport:
        """
        Compare the density before and after a finite transformation of each sampled state.

        Families: identity, relabel (X -> X + s w), spatial (translation s c and
        rotation exp(s qdot) about x0), group (flow of xi_M for s) and rotation
        (spatial and group together). Passes when the deviation at every s is
        within INVARIANCE_TOLERANCE * s^2 * (1 + max |L|).

        Raises:
            InputError: Unknown family or a non-isochoric relabeling field
        """
        if family not in FAMILIES:
            raise InputError(f"unknown transform family '{family}'; expected one of {FAMILIES}", field="family")
        if family == "relabel" and gens.w is None:
            raise InputError("relabel family needs a relabeling field w", field="w")
        if family in ("group", "rotation") and gens.group is None:
            raise InputError(f"{family} family needs a group action", field="group")

        deviations, thresholds = {}, {}
        scale = max(float(np.max(np.abs(self.lagrangian_density(st, model)))) for st in states)
        for s in parameters:
            worst = 0.0
            if family != "identity":
                for state in states:
                    base = self.lagrangian_density(state, model)
                    moved = self._transformed_density(model, state, family, gens, s)
                    worst = max(worst, float(np.max(np.abs(moved - base))))
            deviations[s] = worst
            thresholds[s] = settings.INVARIANCE_TOLERANCE * s ** 2 * (1.0 + scale)

        passed = all(deviations[s] <= thresholds[s] for s in parameters)
        logger.debug(f"invariance check {family}: deviations {deviations}")
        return InvarianceReport(family=family, passed=passed, max_deviation=max(deviations.values()),
                                deviations=deviations, thresholds=thresholds)

    # ------------------------------
    # CONFIGURATIONAL BALANCE
    # ------------------------------

    def _rho0_gradient(self, grid: BodyGrid) -> np.ndarray:
        if grid.rho0_gradient is not None:
            return grid.rho0_gradient
        return kinematics_service.gradient_of(grid.rho0, grid)

    def explicit_dX(self, state: MotionState, model: LagrangianModel) -> np.ndarray:
        """Explicit material gradient dX L = grad rho0 (|xdot|^2/2 + chi - e - w) - rho0 dX e."""
        grid = state.grid
        per_mass = (0.5 * np.sum(state.xdot ** 2, axis=-1) + model.coenergy(state.nu, state.nudot)
                    - model.elastic(state.X, state.F, state.nu, state.grad_nu) - model.potential(state.x, state.nu))
        dX_e = model.partial("dX_e", state.X, state.F, state.nu, state.grad_nu)
        return self._rho0_gradient(grid) * per_mass[..., None] - grid.rho0[..., None] * dX_e

    def config_balance_residual(
        self,
        trajectory: Trajectory,
        model: LagrangianModel,
        sources: Optional[Sources] = None,
    ) -> ConfigBalanceResidual:
        """
        Balance of configurational forces at interior time levels.

        consistent = d/dt(F^T p + grad_nu^T mu) + Div(Esh - (L + rho0 e) I) + dX L
                     - F^T rho0 b_ext - grad_nu^T rho0 beta_ext
        printed    = d/dt(F^T p + grad_nu^T mu) - Div(Esh - (rho0 |xdot|^2/2 + rho0 chi) I) - dX L
        """
        self._require_levels(trajectory)
        sources = sources or Sources()
        grid = trajectory.grid
        rho = grid.rho0
        identity = np.eye(grid.dim)
        states = trajectory.as_list()

        momentum = []
        for s in states:
            mu = rho[..., None] * model.partial("dnudot_chi", s.nu, s.nudot)
            momentum.append(np.einsum("...iA,...i->...A", s.F, rho[..., None] * s.xdot)
                            + np.einsum("...aA,...a->...A", s.grad_nu, mu))
        rate = _time_derivative(np.stack(momentum), trajectory.dt)

        consistent, printed = [], []
        for s in states[1:-1]:
            esh = self.eshelby_tensor(s, model)
            L = self.lagrangian_density(s, model)
            rho_e = rho * model.elastic(s.X, s.F, s.nu, s.grad_nu)
            kinetic = rho * (0.5 * np.sum(s.xdot ** 2, axis=-1) + model.coenergy(s.nu, s.nudot))
            dX = self.explicit_dX(s, model)
            b_ext = rho[..., None] * sources.body_force(s.X, s.t, grid.dim)
            beta_ext = rho[..., None] * sources.order_force(s.X, s.t, s.manifold.dim)
            consistent.append(
                kinematics_service.divergence(esh - (L + rho_e)[..., None, None] * identity, grid) + dX
                - np.einsum("...iA,...i->...A", s.F, b_ext)
                - np.einsum("...aA,...a->...A", s.grad_nu, beta_ext)
            )
            printed.append(-kinematics_service.divergence(esh - kinetic[..., None, None] * identity, grid) - dX)

        return ConfigBalanceResidual(
            consistent=rate + np.stack(consistent),
            printed=rate + np.stack(printed),
            times=trajectory.times[1:-1],
        )

    # ------------------------------
    # INTEGRAL BALANCES
    # ------------------------------

    def integral_substructural_balance(
        self,
        trajectory: Trajectory,
        model: LagrangianModel,
        part: Sequence[Tuple[int, int]],
        sources: Optional[Sources] = None,
    ) -> Dict[str, np.ndarray]:
        """
        Integral substructural balance over a box part given by node index ranges.

        volume = int_part rho0 (d/dt dnudot chi - dnu chi) + z - rho0 (beta + beta_ext)
        flux   = int_boundary S n
        residual = volume - flux, one entry per interior time level.

        Raises:
            ModelError: If the manifold is not a linear space (or linearly embedded)
        """
        manifold = trajectory.manifold
        if not manifold.linear_ambient:
            raise ModelError(f"integral substructural balances need a linear manifold; {manifold.tag} is not")
        self._require_levels(trajectory)
        grid = trajectory.grid
        if len(part) != grid.dim or any(not 0 <= lo < hi < n for (lo, hi), n in zip(part, grid.shape)):
            raise InputError(f"part {part} is not a box of node ranges inside {grid.shape}", field="part")
        sources = sources or Sources()
        rho = grid.rho0
        states = trajectory.as_list()
        mu = np.stack([model.partial("dnudot_chi", s.nu, s.nudot) for s in states])
        rate = _time_derivative(mu, trajectory.dt)

        box = tuple(slice(lo, hi + 1) for lo, hi in part)
        axis_weights = [quadrature_weights(hi - lo + 1, h, grid.quadrature_rule)
                        for (lo, hi), h in zip(part, grid.spacing)]

        def volume_integral(values):
            w = axis_weights[0]
            for extra in axis_weights[1:]:
                w = np.multiply.outer(w, extra)
            return np.tensordot(w, values[box], axes=grid.dim) * grid.transverse_measure

        volume, flux = [], []
        for k, s in enumerate(states[1:-1]):
            responses = self.bulk_responses(s, model)
            beta_ext = sources.order_force(s.X, s.t, manifold.dim)
            density = (rho[..., None] * (rate[k] - model.partial("dnu_chi", s.nu, s.nudot))
                       - responses.z - responses.beta - rho[..., None] * beta_ext)
            volume.append(volume_integral(density))

            total = np.zeros(manifold.dim)
            for axis, (lo, hi) in enumerate(part):
                others = [w for a, w in enumerate(axis_weights) if a != axis]
                for index, sign in ((hi, 1.0), (lo, -1.0)):
                    face = list(box)
                    face[axis] = index
                    traction = sign * responses.S[tuple(face)][..., axis]
                    if others:
                        w = others[0]
                        for extra in others[1:]:
                            w = np.multiply.outer(w, extra)
                        total += np.tensordot(w, traction, axes=grid.dim - 1)
                    else:
                        total += traction
            flux.append(total * grid.transverse_measure)

        volume = np.stack(volume)
        flux = np.stack(flux)
        return {"volume": volume, "flux": flux, "residual": volume - flux, "times": trajectory.times[1:-1]}


# Create singleton instance
mechanics_service = MechanicsService()

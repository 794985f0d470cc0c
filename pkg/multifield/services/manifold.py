import logging
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from multifield.core.settings import settings
from multifield.core.exceptions import (
    InputError,
    MetricDegenerateError,
    ChartSingularityError,
    DistanceUnavailableError,
    UnsupportedActionError,
)
from multifield.models.manifolds import ManifoldModel, TangentVector, bounded_distance
from multifield.services.calculus import central_derivative

logger = logging.getLogger(__name__)

ALGEBRA_DIMENSION = {"SO3": 3, "SO2": 1}


class ManifoldService:
    """
    Service layer for Riemannian operations on chart-based manifolds.
    """

    # ------------------------------
    # METRIC AND CONNECTION
    # ------------------------------

    def inverse_metric(self, manifold: ManifoldModel, nu: np.ndarray) -> np.ndarray:
        """
        Inverse chart metric with a positive-definiteness check.

        Raises:
            MetricDegenerateError: If g_M is singular or not positive-definite
        """
        g = manifold.metric(nu)
        eigenvalues = np.linalg.eigvalsh(0.5 * (g + np.swapaxes(g, -1, -2)))
        smallest = np.min(eigenvalues, axis=-1)
        largest = np.max(eigenvalues, axis=-1)
        if np.any(smallest <= 1e-14 * np.maximum(1.0, largest)):
            raise MetricDegenerateError(
                f"{manifold.tag}: metric is degenerate (min eigenvalue {float(np.min(smallest)):.3e})"
            )
        return np.linalg.inv(g)

    def christoffel(self, manifold: ManifoldModel, nu, method: str = "auto") -> np.ndarray:
        """
        Christoffel symbols of the chart metric.

        Args:
            manifold: Manifold model
            nu: Chart point(s), shape (..., dim)
            method: "auto" (analytic when registered), "analytic" or "finite-difference"

        Returns:
            np.ndarray: Gamma[..., a, b, c] = Gamma^a_{bc}

        Raises:
            ChartSingularityError: If nu is too close to a singular chart locus
            MetricDegenerateError: If the metric cannot be inverted
        """
        nu = manifold.validate(nu)

        if method not in ("auto", "analytic", "finite-difference"):
            raise InputError(f"unknown Christoffel method '{method}'", field="method")
        if method == "analytic" and manifold.analytic_christoffel is None:
            raise InputError(f"{manifold.tag} has no analytic Christoffel closure", field="method")
        if method != "finite-difference" and manifold.analytic_christoffel is not None:
            return np.asarray(manifold.analytic_christoffel(nu), dtype=float)

        g_inv = self.inverse_metric(manifold, nu)
        # dg[..., i, j, k] = d g_ij / d nu^k
        dg = central_derivative(manifold.metric, [nu], 0, 1, step=settings.CHRISTOFFEL_STEP)
        combination = (
            np.einsum("...dcb->...dbc", dg)
            + np.einsum("...dbc->...dbc", dg)
            - np.einsum("...bcd->...dbc", dg)
        )
        return 0.5 * np.einsum("...ad,...dbc->...abc", g_inv, combination)

    def covariant_acceleration(self, manifold: ManifoldModel, nu, nudot, dt_nudot) -> TangentVector:
        """
        Covariant acceleration of a motion on the manifold.

        Args:
            nu: Chart point
            nudot: Chart velocity (array or TangentVector at nu)
            dt_nudot: Partial time derivative of the chart velocity

        Returns:
            TangentVector: dt_nudot + Gamma(nudot, nudot), projected on the tangent space
        """
        nu = manifold.as_points(nu)
        if isinstance(nudot, TangentVector):
            if not np.allclose(nudot.base_point, nu, rtol=0.0, atol=1e-14):
                raise InputError("velocity and point do not share the base point", field="nudot")
            nudot = nudot.components
        nudot = np.asarray(nudot, dtype=float)
        gamma = self.christoffel(manifold, nu)
        acceleration = np.asarray(dt_nudot, dtype=float) + np.einsum("...abc,...b,...c->...a", gamma, nudot, nudot)
        return TangentVector(nu, manifold.project_tangent(nu, acceleration))

    # ------------------------------
    # DISTANCES AND LENGTHS
    # ------------------------------

    def geodesic_distance(self, manifold: ManifoldModel, a, b, mode: str = "raw"):
        """
        Distance between chart points, raw (d_M) or bounded (d_M / (1 + d_M)).

        Raises:
            DistanceUnavailableError: If no analytic distance exists and shooting fails
        """
        if mode not in ("raw", "bounded"):
            raise InputError(f"unknown distance mode '{mode}'", field="mode")
        a = manifold.validate(a)
        b = manifold.validate(b)

        if manifold.analytic_distance is not None:
            d = np.asarray(manifold.analytic_distance(a, b), dtype=float)
        else:
            a_b, b_b = np.broadcast_arrays(a, b)
            flat_a = a_b.reshape(-1, manifold.dim)
            flat_b = b_b.reshape(-1, manifold.dim)
            d = np.array([self.shooting_distance(manifold, p, q) for p, q in zip(flat_a, flat_b)])
            d = d.reshape(a_b.shape[:-1])

        d = np.maximum(d, 0.0)
        if mode == "bounded":
            d = bounded_distance(d)
        return float(d) if np.ndim(d) == 0 else d

    def _shoot(self, manifold: ManifoldModel, start: np.ndarray, velocity: np.ndarray) -> np.ndarray:
        dim = manifold.dim

        def rhs(_t, y):
            gamma = self.christoffel(manifold, y[:dim])
            return np.concatenate([y[dim:], -np.einsum("abc,b,c->a", gamma, y[dim:], y[dim:])])

        solution = solve_ivp(rhs, (0.0, 1.0), np.concatenate([start, velocity]), method="DOP853", rtol=1e-11, atol=1e-12)
        if not solution.success:
            raise DistanceUnavailableError(f"{manifold.tag}: geodesic integration failed ({solution.message})")
        return solution.y[:dim, -1]

    def shooting_distance(self, manifold: ManifoldModel, start: np.ndarray, end: np.ndarray) -> float:
        """
        Geodesic distance by shooting on the initial velocity.

        Damped Newton iteration on the endpoint mismatch with a finite-difference
        Jacobian of the shooting map.

        Raises:
            DistanceUnavailableError: If the iteration does not converge
        """
        velocity = manifold.chart_difference(start, end)
        if np.linalg.norm(velocity) == 0.0:
            return 0.0

        def mismatch(v):
            return manifold.chart_difference(end, self._shoot(manifold, start, v))

        try:
            residual = mismatch(velocity)
            for iteration in range(settings.GEODESIC_MAX_ITERATIONS):
                size = np.linalg.norm(residual)
                if size < settings.GEODESIC_TOLERANCE * (1.0 + np.linalg.norm(velocity)):
                    logger.debug(f"{manifold.tag}: shooting converged after {iteration} iterations")
                    g = manifold.metric(start)
                    return float(np.sqrt(velocity @ g @ velocity))

                jacobian = np.empty((manifold.dim, manifold.dim))
                for k in range(manifold.dim):
                    h = 1e-7 * max(1.0, abs(velocity[k]))
                    bumped = velocity.copy()
                    bumped[k] += h
                    jacobian[:, k] = (mismatch(bumped) - residual) / h
                correction = np.linalg.lstsq(jacobian, -residual, rcond=None)[0]

                damping = 1.0
                while damping > 1e-6:
                    trial = velocity + damping * correction
                    try:
                        trial_residual = mismatch(trial)
                    except ChartSingularityError:
                        damping *= 0.5
                        continue
                    if np.linalg.norm(trial_residual) < size:
                        velocity, residual = trial, trial_residual
                        break
                    damping *= 0.5
                else:
                    break
        except ChartSingularityError as e:
            raise DistanceUnavailableError(f"{manifold.tag}: shooting left the chart ({e.message})")

        raise DistanceUnavailableError(
            f"{manifold.tag}: geodesic shooting did not converge in {settings.GEODESIC_MAX_ITERATIONS} iterations"
        )

    def curve_length(self, manifold: ManifoldModel, samples: Sequence) -> float:
        """
        Trapezoidal length of a sampled curve.

        Raises:
            InputError: If fewer than two samples are given
        """
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1 and manifold.dim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] < 2:
            raise InputError("curve_length needs at least 2 samples", field="samples")
        samples = manifold.validate(samples)

        increments = manifold.chart_difference(samples[:-1], samples[1:])
        left = np.sqrt(np.maximum(manifold.inner(samples[:-1], increments, increments), 0.0))
        right = np.sqrt(np.maximum(manifold.inner(samples[1:], increments, increments), 0.0))
        return float(np.sum(0.5 * (left + right)))

    # ------------------------------
    # GROUP ACTIONS
    # ------------------------------

    def _generator(self, manifold: ManifoldModel, group: str):
        generator = manifold.action_generators.get(group)
        if generator is None:
            raise UnsupportedActionError(group, manifold.tag)
        return generator

    def action_generator(self, manifold: ManifoldModel, group: str, xi, nu) -> TangentVector:
        """
        Infinitesimal generator xi_M(nu) of a group action.

        Raises:
            UnsupportedActionError: If the group has no registered action on the manifold
        """
        generator = self._generator(manifold, group)
        nu = manifold.validate(nu)
        return TangentVector(nu, generator(np.asarray(xi, dtype=float), nu))

    def algebra_dimension(self, manifold: ManifoldModel, group: str) -> int:
        self._generator(manifold, group)
        return ALGEBRA_DIMENSION.get(group, manifold.dim)

    def action_matrix(self, manifold: ManifoldModel, group: str, nu) -> np.ndarray:
        """Matrix of the (linear) map xi -> xi_M(nu), shape (..., dim, k)."""
        generator = self._generator(manifold, group)
        nu = manifold.as_points(nu)
        k = self.algebra_dimension(manifold, group)
        columns = [generator(np.eye(k)[j], nu) for j in range(k)]
        return np.stack(columns, axis=-1)

    def action_jacobian(self, manifold: ManifoldModel, group: str, xi, nu) -> np.ndarray:
        """Derivative of nu -> xi_M(nu), shape (..., dim, dim)."""
        generator = self._generator(manifold, group)
        xi = np.asarray(xi, dtype=float)
        return central_derivative(lambda p: generator(xi, p), [manifold.as_points(nu)], 0, 1)

    def flow(self, manifold: ManifoldModel, group: str, xi, nu, s: float, substeps: int = 8) -> np.ndarray:
        """
        Point reached after flowing along xi_M for parameter s.

        Classical RK4 substeps, each followed by a retraction onto the manifold.
        """
        generator = self._generator(manifold, group)
        xi = np.asarray(xi, dtype=float)
        point = manifold.as_points(np.array(nu, dtype=float))
        if s == 0.0:
            return point
        tau = s / substeps
        for _ in range(substeps):
            k1 = generator(xi, point)
            k2 = generator(xi, point + 0.5 * tau * k1)
            k3 = generator(xi, point + 0.5 * tau * k2)
            k4 = generator(xi, point + tau * k3)
            point = manifold.retract(point + tau * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0, np.zeros_like(point))
        return point

    # ------------------------------
    # CONVENIENCE
    # ------------------------------

    def bounded(self, d):
        return bounded_distance(d)


# Create singleton instance
manifold_service = ManifoldService()

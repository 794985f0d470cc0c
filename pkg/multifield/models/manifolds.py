from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from multifield.core.exceptions import InputError, ChartSingularityError
from multifield.core.settings import settings


@dataclass(frozen=True, eq=False)
class ManifoldModel:
    """
    Chart-based description of a manifold of substructural states.

    All closures are batched: chart points have shape ``(..., dim)`` and the
    metric returns ``(..., dim, dim)``.
    """
    tag: str
    dim: int
    chart_metric: Callable[[np.ndarray], np.ndarray]
    analytic_distance: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    # group tag -> (xi, nu) -> tangent components at nu
    action_generators: Dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = field(default_factory=dict)
    # (lo, hi) per chart coordinate; +-inf when unbounded
    chart_bounds: Tuple[Tuple[float, float], ...] = ()
    # nu -> distance to the nearest singular chart locus
    singular_distance: Optional[Callable[[np.ndarray], np.ndarray]] = None
    analytic_christoffel: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # period of each coordinate, None when not periodic
    periods: Tuple[Optional[float], ...] = ()
    retraction: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    tangent_projection: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    to_embedded: Optional[Callable[[np.ndarray], np.ndarray]] = None
    from_embedded: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # constraint that chart values must satisfy, e.g. |nu| = 1 for embedded spheres
    constraint: Optional[Callable[[np.ndarray], np.ndarray]] = None
    linear_ambient: bool = False
    description: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise InputError(f"manifold dimension must be positive, got {self.dim}", field="dim")
        if self.chart_bounds and len(self.chart_bounds) != self.dim:
            raise InputError(f"{self.tag}: chart_bounds must list {self.dim} ranges", field="chart_bounds")
        if self.periods and len(self.periods) != self.dim:
            raise InputError(f"{self.tag}: periods must list {self.dim} entries", field="periods")

    # ------------------------------
    # SHAPES AND VALIDITY
    # ------------------------------

    def as_points(self, nu) -> np.ndarray:
        nu = np.asarray(nu, dtype=float)
        if nu.ndim == 0 and self.dim == 1:
            nu = nu.reshape(1)
        if nu.shape[-1] != self.dim:
            raise InputError(f"{self.tag}: chart points need trailing dimension {self.dim}, got shape {nu.shape}")
        return nu

    def validate(self, nu, margin: float = None) -> np.ndarray:
        """
        Check chart points against bounds, constraints and singular loci.

        Raises:
            InputError: If a value is non-finite or outside the chart bounds
            ChartSingularityError: If a value is within ``margin`` of a singular locus
        """
        nu = self.as_points(nu)
        if not np.all(np.isfinite(nu)):
            raise InputError(f"{self.tag}: chart points must be finite")

        if self.chart_bounds:
            lo = np.array([b[0] for b in self.chart_bounds])
            hi = np.array([b[1] for b in self.chart_bounds])
            slack = 1e-12 * (1.0 + np.abs(nu))
            if np.any(nu < lo - slack) or np.any(nu > hi + slack):
                raise InputError(f"{self.tag}: chart point outside bounds {self.chart_bounds}")

        if self.constraint is not None:
            gap = np.max(np.abs(self.constraint(nu))) if nu.size else 0.0
            if gap > 1e-8:
                raise InputError(f"{self.tag}: chart point violates the manifold constraint by {gap:.3e}")

        if self.singular_distance is not None:
            margin = settings.CHART_MARGIN if margin is None else margin
            distance = self.singular_distance(nu)
            if np.any(distance < margin):
                raise ChartSingularityError(
                    f"{self.tag}: point within {margin:g} of a singular chart locus"
                )
        return nu

    @property
    def is_periodic(self) -> bool:
        return any(p is not None for p in self.periods)

    # ------------------------------
    # CHART ARITHMETIC
    # ------------------------------

    def metric(self, nu) -> np.ndarray:
        nu = self.as_points(nu)
        return np.asarray(self.chart_metric(nu), dtype=float)

    def chart_difference(self, a, b) -> np.ndarray:
        """Shortest chart increment from ``a`` to ``b``."""
        delta = self.as_points(b) - self.as_points(a)
        for axis, period in enumerate(self.periods):
            if period is not None:
                delta[..., axis] = wrap(delta[..., axis], period)
        return delta

    def unwrap(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Remove period jumps along a grid or time axis."""
        values = np.array(values, dtype=float)
        for k, period in enumerate(self.periods):
            if period is not None:
                values[..., k] = np.unwrap(values[..., k], axis=axis, period=period)
        return values

    def project_tangent(self, nu, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.tangent_projection is None:
            return v
        return self.tangent_projection(self.as_points(nu), v)

    def retract(self, nu, v) -> np.ndarray:
        nu = self.as_points(nu)
        if self.retraction is None:
            return nu + v
        return self.retraction(nu, np.asarray(v, dtype=float))

    def inner(self, nu, u, v) -> np.ndarray:
        return np.einsum("...a,...ab,...b->...", u, self.metric(nu), v)


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Tangent vector given by chart components at a base point."""
    base_point: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base_point, dtype=float)
        comps = np.asarray(self.components, dtype=float)
        if base.shape != comps.shape:
            raise InputError(f"tangent vector components {comps.shape} do not match base point {base.shape}")
        if not np.all(np.isfinite(comps)):
            raise InputError("tangent vector components must be finite")
        object.__setattr__(self, "base_point", base)
        object.__setattr__(self, "components", comps)


def wrap(delta, period: float = 2.0 * np.pi):
    """Map increments into [-period/2, period/2)."""
    return (np.asarray(delta) + 0.5 * period) % period - 0.5 * period


def bounded_distance(d):
    """Bounded companion d / (1 + d) of a distance."""
    d = np.asarray(d, dtype=float)
    return d / (1.0 + d)

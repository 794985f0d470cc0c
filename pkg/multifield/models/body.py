from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from multifield.core.exceptions import InputError
from multifield.core.settings import settings
from multifield.models.manifolds import ManifoldModel


def quadrature_weights(nodes: int, spacing: float, rule: str = None) -> np.ndarray:
    """
    Nodal weights of a composite rule on a uniform axis.

    Simpson needs an odd node count; even counts fall back to trapezoid.
    """
    rule = settings.QUADRATURE_RULE if rule is None else rule
    if nodes < 2:
        raise InputError(f"an axis needs at least 2 nodes for quadrature, got {nodes}")
    if rule == "simpson" and nodes % 2 == 1 and nodes >= 3:
        weights = np.ones(nodes)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        return weights * spacing / 3.0
    weights = np.full(nodes, spacing)
    weights[0] = weights[-1] = 0.5 * spacing
    return weights


@dataclass(frozen=True, eq=False)
class BodyGrid:
    """
    Uniform Cartesian discretization of the reference body.

    Attributes:
        lower, upper: Box extents per active axis
        shape: Node count per axis
        rho0: Nodal referential mass density, shape ``shape``
        gamma: Material metric per node, shape ``shape + (d, d)``
        transverse_measure: Measure of the suppressed directions of a reduced body
            (e.g. 9 for a 1D reduction of a (-1, 2)^3 cube)
        rho0_gradient: Optional analytic gradient of rho0, shape ``shape + (d,)``
    """
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    shape: Tuple[int, ...]
    rho0: np.ndarray
    gamma: np.ndarray
    transverse_measure: float = 1.0
    rho0_gradient: Optional[np.ndarray] = None
    quadrature_rule: Optional[str] = None

    def __post_init__(self):
        if not (len(self.lower) == len(self.upper) == len(self.shape)) or not self.shape:
            raise InputError("grid lower, upper and shape must have the same positive length")
        if any(n < 2 for n in self.shape):
            raise InputError(f"every axis needs at least 2 nodes, got {self.shape}", field="shape")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise InputError("grid spacing must be positive on every axis", field="upper")
        rho0 = np.broadcast_to(np.asarray(self.rho0, dtype=float), self.shape).copy()
        if not np.all(np.isfinite(rho0)) or np.any(rho0 <= 0.0):
            raise InputError("rho0 must be positive at every node", field="rho0")
        gamma = np.broadcast_to(np.asarray(self.gamma, dtype=float), self.shape + (self.dim, self.dim)).copy()
        if np.max(np.abs(gamma - np.swapaxes(gamma, -1, -2))) > 1e-12 or np.any(np.linalg.eigvalsh(gamma) <= 0.0):
            raise InputError("material metric gamma must be symmetric positive-definite", field="gamma")
        if self.transverse_measure <= 0:
            raise InputError("transverse_measure must be positive", field="transverse_measure")
        object.__setattr__(self, "rho0", rho0)
        object.__setattr__(self, "gamma", gamma)
        if self.rho0_gradient is not None:
            object.__setattr__(
                self, "rho0_gradient",
                np.broadcast_to(np.asarray(self.rho0_gradient, dtype=float), self.shape + (self.dim,)).copy(),
            )

    @classmethod
    def box(
        cls,
        lower: Sequence[float],
        upper: Sequence[float],
        nodes: Union[int, Sequence[int]],
        rho0: Union[float, Callable[[np.ndarray], np.ndarray]] = 1.0,
        gamma: Optional[np.ndarray] = None,
        transverse_measure: float = 1.0,
        rho0_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        quadrature_rule: Optional[str] = None,
    ) -> "BodyGrid":
        """Build a grid from extents, density value or closure X -> rho0."""
        lower = tuple(float(v) for v in lower)
        upper = tuple(float(v) for v in upper)
        if isinstance(nodes, int):
            nodes = (nodes,) * len(lower)
        shape = tuple(int(n) for n in nodes)
        d = len(lower)
        axes = [np.linspace(lo, hi, n) for lo, hi, n in zip(lower, upper, shape)]
        X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1) if d else None
        density = rho0(X) if callable(rho0) else rho0
        density_gradient = rho0_gradient(X) if callable(rho0_gradient) else rho0_gradient
        return cls(
            lower=lower,
            upper=upper,
            shape=shape,
            rho0=density,
            gamma=np.eye(d) if gamma is None else gamma,
            transverse_measure=float(transverse_measure),
            rho0_gradient=density_gradient,
            quadrature_rule=quadrature_rule,
        )

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for lo, hi, n in zip(self.lower, self.upper, self.shape))

    @property
    def h(self) -> float:
        return max(self.spacing)

    @property
    def axes(self) -> List[np.ndarray]:
        return [np.linspace(lo, hi, n) for lo, hi, n in zip(self.lower, self.upper, self.shape)]

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    def coordinates(self) -> np.ndarray:
        """Reference coordinates X of every node, shape ``shape + (d,)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def weights(self, rule: str = None) -> np.ndarray:
        """Quadrature weights per node including the transverse measure."""
        rule = rule or self.quadrature_rule
        per_axis = [quadrature_weights(n, h, rule) for n, h in zip(self.shape, self.spacing)]
        weights = per_axis[0]
        for w in per_axis[1:]:
            weights = np.multiply.outer(weights, w)
        return weights * self.transverse_measure

    def integrate(self, values: np.ndarray, rule: str = None) -> float:
        values = np.asarray(values, dtype=float)
        if values.shape[:self.dim] != self.shape:
            raise InputError(f"nodal values of shape {values.shape} do not match grid {self.shape}")
        w = self.weights(rule)
        return float(np.sum(w.reshape(w.shape + (1,) * (values.ndim - self.dim)) * values))

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in zip(self.lower, self.upper)]) * self.transverse_measure)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.dim):
            index = [slice(None)] * self.dim
            index[axis] = 0
            mask[tuple(index)] = True
            index[axis] = -1
            mask[tuple(index)] = True
        return mask

    def same_as(self, other: "BodyGrid") -> bool:
        return (
            self.shape == other.shape
            and np.allclose(self.lower, other.lower, rtol=0, atol=1e-14)
            and np.allclose(self.upper, other.upper, rtol=0, atol=1e-14)
        )

    def refine(self, factor: int = 2) -> "BodyGrid":
        """Grid with every interval split ``factor`` times; rho0 is kept only when uniform."""
        rho = self.rho0.flat[0]
        if not np.allclose(self.rho0, rho):
            raise InputError("refine() needs a uniform rho0; rebuild inhomogeneous grids with BodyGrid.box")
        return BodyGrid.box(
            self.lower,
            self.upper,
            tuple((n - 1) * factor + 1 for n in self.shape),
            rho0=rho,
            gamma=self.gamma.reshape(-1, self.dim, self.dim)[0],
            transverse_measure=self.transverse_measure,
            quadrature_rule=self.quadrature_rule,
        )


@dataclass(frozen=True, eq=False)
class PlacementField:
    """Nodal placement x over the grid, shape ``grid.shape + (d,)``."""
    grid: BodyGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape + (self.grid.dim,):
            raise InputError(
                f"placement values must have shape {self.grid.shape + (self.grid.dim,)}, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InputError("placement values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def identity(cls, grid: BodyGrid) -> "PlacementField":
        return cls(grid, grid.coordinates())

    @classmethod
    def from_closure(cls, grid: BodyGrid, closure: Callable[[np.ndarray], np.ndarray]) -> "PlacementField":
        return cls(grid, closure(grid.coordinates()))


@dataclass(frozen=True, eq=False)
class OrderField:
    """Nodal chart coordinates of the order parameter, shape ``grid.shape + (dim M,)``."""
    grid: BodyGrid
    manifold: ManifoldModel
    values: np.ndarray
    # declared kink planes as (axis, coordinate) pairs
    kinks: Tuple[Tuple[int, float], ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape == self.grid.shape and self.manifold.dim == 1:
            values = values[..., None]
        if values.shape != self.grid.shape + (self.manifold.dim,):
            raise InputError(
                f"order values must have shape {self.grid.shape + (self.manifold.dim,)}, got {values.shape}"
            )
        self.manifold.validate(values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kinks", tuple((int(a), float(c)) for a, c in self.kinks))

    @classmethod
    def from_closure(
        cls,
        grid: BodyGrid,
        manifold: ManifoldModel,
        closure: Callable[[np.ndarray], np.ndarray],
        kinks: Sequence[Tuple[int, float]] = (),
    ) -> "OrderField":
        return cls(grid, manifold, closure(grid.coordinates()), tuple(kinks))

    def compatible_with(self, other: "OrderField") -> bool:
        return self.grid.same_as(other.grid) and self.manifold.tag == other.manifold.tag


@dataclass(frozen=True, eq=False)
class MotionState:
    """
    Nodal jet (x, xdot, F, nu, nudot, grad nu) at time t.

    Shapes: x, xdot ``(..., d)``; F ``(..., d, d)``; nu, nudot ``(..., m)``;
    grad_nu ``(..., m, d)`` with column A the derivative along X_A.
    """
    grid: BodyGrid
    manifold: ManifoldModel
    t: float
    x: np.ndarray
    xdot: np.ndarray
    F: np.ndarray
    nu: np.ndarray
    nudot: np.ndarray
    grad_nu: np.ndarray

    def __post_init__(self):
        d, m = self.grid.dim, self.manifold.dim
        lead = self.grid.shape
        expected = {
            "x": lead + (d,),
            "xdot": lead + (d,),
            "F": lead + (d, d),
            "nu": lead + (m,),
            "nudot": lead + (m,),
            "grad_nu": lead + (m, d),
        }
        for name, shape in expected.items():
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != shape:
                raise InputError(f"MotionState.{name} must have shape {shape}, got {value.shape}", field=name)
            object.__setattr__(self, name, value)

    @property
    def X(self) -> np.ndarray:
        return self.grid.coordinates()

    def replace(self, **changes) -> "MotionState":
        values = {name: getattr(self, name) for name in
                  ("grid", "manifold", "t", "x", "xdot", "F", "nu", "nudot", "grad_nu")}
        values.update(changes)
        return MotionState(**values)


@dataclass(frozen=True, eq=False)
class Exhaustion:
    """
    Nested node sets K_0 within K_1 within ... of the body, each strictly inside the next.

    Attributes:
        levels: Boolean masks over the grid nodes
        weights: Positive summable level weights
    """
    grid: BodyGrid
    levels: Tuple[np.ndarray, ...]
    weights: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        levels = tuple(np.asarray(mask, dtype=bool) for mask in self.levels)
        if not levels:
            raise InputError("an exhaustion needs at least one level", field="levels")
        weights = self.weights or tuple(2.0 ** (-n) for n in range(len(levels)))
        if len(weights) != len(levels):
            raise InputError("exhaustion weights and levels differ in length", field="weights")
        if any(w <= 0 for w in weights):
            raise InputError("exhaustion weights must be positive", field="weights")
        for n, mask in enumerate(levels):
            if mask.shape != self.grid.shape:
                raise InputError(f"exhaustion level {n} does not match the grid shape", field="levels")
            if not mask.any():
                raise InputError(f"exhaustion level {n} is empty", field="levels")
        for n in range(len(levels) - 1):
            interior = ndimage.binary_erosion(levels[n + 1])
            if np.any(levels[n] & ~interior) or np.array_equal(levels[n], levels[n + 1]):
                raise InputError(f"exhaustion level {n} is not strictly inside level {n + 1}", field="levels")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "weights", tuple(float(w) for w in weights))


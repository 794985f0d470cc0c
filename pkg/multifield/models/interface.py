from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from multifield.core.exceptions import GeometryError, InputError, ModelError
from multifield.services.calculus import central_derivative


@dataclass(frozen=True, eq=False)
class InterfaceModel:
    """
    Discontinuity surface given as the zero set of a level-set function.

    Closures are batched over leading axes: ``level_set(X)`` returns ``(...)``,
    ``gradient(X)`` ``(..., 3)`` and ``hessian(X)`` ``(..., 3, 3)``. A missing
    gradient or Hessian is differenced. ``curvature_closure`` overrides the
    level-set formula L = -Pi H Pi / |grad f|.
    """
    shape: str
    level_set: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    curvature_closure: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # X -> virtual velocity u of the surface
    virtual_velocity: Optional[Callable[[np.ndarray], np.ndarray]] = None
    parameters: Dict[str, Any] = field(default_factory=dict)

    # ------------------------------
    # BUILT-IN SHAPES
    # ------------------------------

    @classmethod
    def plane(cls, point=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0), speed: float = 0.0) -> "InterfaceModel":
        point = np.asarray(point, dtype=float)
        normal = np.asarray(normal, dtype=float)
        if np.linalg.norm(normal) == 0.0:
            raise GeometryError("plane normal must be nonzero")
        normal = normal / np.linalg.norm(normal)
        return cls(
            shape="plane",
            level_set=lambda X: np.sum((np.asarray(X) - point) * normal, axis=-1),
            gradient=lambda X: np.broadcast_to(normal, np.shape(X)).copy(),
            hessian=lambda X: np.zeros(np.shape(X) + (3,)),
            curvature_closure=lambda X: np.zeros(np.shape(X) + (3,)),
            virtual_velocity=lambda X: speed * np.broadcast_to(normal, np.shape(X)).copy(),
            parameters={"point": point.tolist(), "normal": normal.tolist(), "speed": speed},
        )

    @classmethod
    def sphere(cls, center=(0.0, 0.0, 0.0), radius: float = 1.0, speed: float = 0.0) -> "InterfaceModel":
        """Sphere with outward normal; ``speed`` is the normal virtual velocity U."""
        center = np.asarray(center, dtype=float)
        if radius <= 0:
            raise GeometryError(f"sphere radius must be positive, got {radius}")

        def radial(X):
            r = np.asarray(X, dtype=float) - center
            return r, np.linalg.norm(r, axis=-1)[..., None]

        def gradient(X):
            r, n = radial(X)
            return r / n

        def hessian(X):
            r, n = radial(X)
            m = r / n
            return (np.eye(3) - m[..., :, None] * m[..., None, :]) / n[..., None]

        def curvature(X):
            m = gradient(X)
            return -(np.eye(3) - m[..., :, None] * m[..., None, :]) / radius

        return cls(
            shape="sphere",
            level_set=lambda X: radial(X)[1][..., 0] - radius,
            gradient=gradient,
            hessian=hessian,
            curvature_closure=curvature,
            virtual_velocity=lambda X: speed * gradient(X),
            parameters={"center": center.tolist(), "radius": radius, "speed": speed},
        )

    @classmethod
    def graph(
        cls,
        height: Callable[[np.ndarray, np.ndarray], np.ndarray],
        height_gradient: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
        height_hessian: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
        speed: float = 0.0,
    ) -> "InterfaceModel":
        """Graph surface X3 = g(X1, X2), oriented by f = X3 - g."""
        def level_set(X):
            X = np.asarray(X, dtype=float)
            return X[..., 2] - height(X[..., 0], X[..., 1])

        gradient = hessian = None
        if height_gradient is not None:
            def gradient(X):
                X = np.asarray(X, dtype=float)
                gx, gy = np.moveaxis(np.asarray(height_gradient(X[..., 0], X[..., 1]), dtype=float), -1, 0)
                return np.stack([-gx, -gy, np.ones_like(gx)], axis=-1)
        if height_hessian is not None:
            def hessian(X):
                X = np.asarray(X, dtype=float)
                h2 = np.asarray(height_hessian(X[..., 0], X[..., 1]), dtype=float)
                H = np.zeros(X.shape[:-1] + (3, 3))
                H[..., :2, :2] = -h2
                return H

        model = cls(shape="graph", level_set=level_set, gradient=gradient, hessian=hessian,
                    parameters={"speed": speed})
        object.__setattr__(model, "virtual_velocity", lambda X: speed * model.normal(X))
        return model

    # ------------------------------
    # GEOMETRY
    # ------------------------------

    def value(self, X) -> np.ndarray:
        return np.asarray(self.level_set(np.asarray(X, dtype=float)), dtype=float)

    def grad(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(X), dtype=float)
        return central_derivative(self.value, [X], 0, 1)

    def hess(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.hessian is not None:
            return np.asarray(self.hessian(X), dtype=float)
        H = central_derivative(self.grad, [X], 0, 1, step=1e-5)
        return 0.5 * (H + np.swapaxes(H, -1, -2))

    def normal(self, X) -> np.ndarray:
        """
        Unit normal m = grad f / |grad f|.

        Raises:
            GeometryError: If the level-set gradient vanishes
        """
        g = self.grad(X)
        size = np.linalg.norm(g, axis=-1, keepdims=True)
        if np.any(size < 1e-12):
            raise GeometryError(f"{self.shape}: level-set gradient vanishes")
        return g / size

    def projector(self, X) -> np.ndarray:
        m = self.normal(X)
        return np.eye(3) - m[..., :, None] * m[..., None, :]

    def curvature(self, X, method: str = "auto") -> np.ndarray:
        """Curvature tensor L = -grad_S m, analytic when registered."""
        X = np.asarray(X, dtype=float)
        if method == "auto" and self.curvature_closure is not None:
            return np.asarray(self.curvature_closure(X), dtype=float)
        P = self.projector(X)
        size = np.linalg.norm(self.grad(X), axis=-1)[..., None, None]
        return -(P @ self.hess(X) @ P) / size

    def normal_speed(self, X) -> np.ndarray:
        """U = u . m of the virtual velocity."""
        if self.virtual_velocity is None:
            return np.zeros(np.shape(X)[:-1])
        return np.sum(np.asarray(self.virtual_velocity(X), dtype=float) * self.normal(X), axis=-1)

    def ensure_on_surface(self, X, tolerance: float) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        gap = np.max(np.abs(self.value(X))) if X.size else 0.0
        if gap > tolerance:
            raise InputError(f"point is off the {self.shape} surface by {gap:.3e}", field="X")
        return X

    def project(self, X, iterations: int = 20) -> np.ndarray:
        """Closest-point style projection onto the surface by Newton steps along grad f."""
        X = np.array(X, dtype=float)
        for _ in range(iterations):
            f = self.value(X)
            if np.max(np.abs(f)) < 1e-14:
                break
            g = self.grad(X)
            X = X - (f / np.sum(g * g, axis=-1))[..., None] * g
        return X

    def tangent_frame(self, X) -> Tuple[np.ndarray, np.ndarray]:
        """Orthonormal tangent pair (t1, t2) with t1 x t2 = m."""
        m = self.normal(X)
        seed = np.zeros_like(m)
        index = np.argmin(np.abs(m), axis=-1)
        np.put_along_axis(seed, index[..., None], 1.0, axis=-1)
        t1 = seed - np.sum(seed * m, axis=-1, keepdims=True) * m
        size = np.linalg.norm(t1, axis=-1, keepdims=True)
        if np.any(size < 1e-8):
            raise GeometryError(f"{self.shape}: degenerate tangent frame")
        t1 = t1 / size
        return t1, np.cross(m, t1)


@dataclass(frozen=True, eq=False)
class SurfaceEnergyModel:
    """
    Surface energy phi(m, FF, nu, NN) with FF = <F> Pi and NN = <grad nu> Pi.

    Partials ``dm_phi`` (..., 3), ``dFF_phi`` (..., 3, 3), ``dnu_phi`` (..., k)
    and ``dNN_phi`` (..., k, 3) fall back to central differences.
    """
    name: str
    phi: Callable[..., np.ndarray]
    partials: Dict[str, Callable[..., np.ndarray]] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)
    invariant: bool = False

    _ARGUMENTS = {"dm_phi": (0, 1), "dFF_phi": (1, 2), "dnu_phi": (2, 1), "dNN_phi": (3, 2)}

    def energy(self, m, FF, nu, NN) -> np.ndarray:
        try:
            value = np.asarray(self.phi(m, FF, nu, NN), dtype=float)
        except (ArithmeticError, ValueError, TypeError) as e:
            raise ModelError(f"{self.name}: surface energy closure failed ({e})")
        if not np.all(np.isfinite(value)):
            raise ModelError(f"{self.name}: surface energy returned non-finite values")
        return value

    def partial(self, name: str, m, FF, nu, NN) -> np.ndarray:
        if name not in self._ARGUMENTS:
            raise InputError(f"unknown surface partial '{name}'", field="name")
        args = [np.asarray(a, dtype=float) for a in (m, FF, nu, NN)]
        if name in self.partials:
            return np.asarray(self.partials[name](*args), dtype=float)
        index, tail = self._ARGUMENTS[name]
        return central_derivative(self.energy, args, index, tail)


@dataclass(frozen=True, eq=False)
class JumpRecord:
    """Outer and inner traces of a field at a surface point."""
    plus: np.ndarray
    minus: np.ndarray
    error: float = 0.0

    def __post_init__(self):
        plus = np.asarray(self.plus, dtype=float)
        minus = np.asarray(self.minus, dtype=float)
        if plus.shape != minus.shape:
            raise InputError(f"trace shapes differ: {plus.shape} vs {minus.shape}")
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)

    @property
    def jump(self) -> np.ndarray:
        return self.plus - self.minus

    @property
    def average(self) -> np.ndarray:
        return 0.5 * (self.plus + self.minus)

    def product(self, other: "JumpRecord", op: Callable = np.multiply) -> "JumpRecord":
        return JumpRecord(op(self.plus, other.plus), op(self.minus, other.minus), self.error + other.error)

    def product_rule_gap(self, other: "JumpRecord", op: Callable = np.multiply) -> float:
        """|[a b] - ([a]<b> + <a>[b])| for a bilinear product ``op``."""
        lhs = self.product(other, op).jump
        rhs = op(self.jump, other.average) + op(self.average, other.jump)
        return float(np.max(np.abs(lhs - rhs))) if np.size(lhs) else 0.0


@dataclass(frozen=True, eq=False)
class PointJet:
    """One-sided jet of the motion at a surface point."""
    x: np.ndarray
    xdot: np.ndarray
    F: np.ndarray
    nu: np.ndarray
    nudot: np.ndarray
    grad_nu: np.ndarray
    rho0: float = 1.0

    def __post_init__(self):
        for name in ("x", "xdot", "F", "nu", "nudot", "grad_nu"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.F.shape != (3, 3) or self.x.shape != (3,) or self.xdot.shape != (3,):
            raise InputError("surface jets live in three dimensions (x, xdot: 3; F: 3x3)")
        if self.grad_nu.shape != self.nu.shape + (3,) or self.nudot.shape != self.nu.shape:
            raise InputError("nu, nudot and grad_nu shapes are inconsistent", field="grad_nu")
        if self.rho0 <= 0:
            raise InputError("rho0 must be positive", field="rho0")


@dataclass(frozen=True, eq=False)
class StatePair:
    """Outer (+) and inner (-) jets at a surface point X."""
    X: np.ndarray
    plus: PointJet
    minus: PointJet

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))
        if self.plus.nu.shape != self.minus.nu.shape:
            raise InputError("both sides must carry order parameters of the same dimension")

    def record(self, name: str) -> JumpRecord:
        return JumpRecord(getattr(self.plus, name), getattr(self.minus, name))

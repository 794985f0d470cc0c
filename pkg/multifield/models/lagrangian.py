from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from multifield.core.exceptions import InputError, ModelError
from multifield.services.calculus import central_derivative

# partial name -> (closure attribute, argument index, tail ndim)
PARTIALS = {
    "dX_e": ("e", 0, 1),
    "dF_e": ("e", 1, 2),
    "dnu_e": ("e", 2, 1),
    "dgradnu_e": ("e", 3, 2),
    "dnu_chi": ("chi", 0, 1),
    "dnudot_chi": ("chi", 1, 1),
    "dx_w": ("w", 0, 1),
    "dnu_w": ("w", 1, 1),
}


def _zero_chi(nu, nudot):
    return np.zeros(np.shape(nu)[:-1])


def _zero_w(x, nu):
    return np.zeros(np.shape(x)[:-1])


@dataclass(frozen=True, eq=False)
class LagrangianModel:
    """
    Closures of a multifield Lagrangian density per unit mass.

    The density is rho0 * (|xdot|^2 / 2 + chi - e - w). All closures are batched
    over leading node axes:

        chi(nu, nudot)          kinetic co-energy of the substructure
        e(X, F, nu, grad_nu)    elastic energy
        w(x, nu)                external potential

    ``partials`` maps names of ``PARTIALS`` (plus ``d2nudot_chi``) to analytic
    closures taking the same arguments as the parent closure. Missing partials
    are evaluated by central differences with ``settings.PARTIALS_STEP``.
    """
    name: str
    e: Callable[..., np.ndarray]
    chi: Callable[..., np.ndarray] = _zero_chi
    w: Callable[..., np.ndarray] = _zero_w
    partials: Dict[str, Callable[..., np.ndarray]] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)
    homogeneous: bool = True
    description: str = ""

    def __post_init__(self):
        unknown = set(self.partials) - set(PARTIALS) - {"d2nudot_chi"}
        if unknown:
            raise InputError(f"{self.name}: unknown partials {sorted(unknown)}", field="partials")

    # ------------------------------
    # CLOSURE EVALUATION
    # ------------------------------

    def _call(self, what: str, closure: Callable, *args) -> np.ndarray:
        try:
            value = np.asarray(closure(*args), dtype=float)
        except (ArithmeticError, ValueError, TypeError) as e:
            raise ModelError(f"{self.name}: {what} closure failed ({e})")
        if not np.all(np.isfinite(value)):
            raise ModelError(f"{self.name}: {what} returned non-finite values")
        return value

    def elastic(self, X, F, nu, grad_nu) -> np.ndarray:
        return self._call("e", self.e, X, F, nu, grad_nu)

    def coenergy(self, nu, nudot) -> np.ndarray:
        return self._call("chi", self.chi, nu, nudot)

    def potential(self, x, nu) -> np.ndarray:
        return self._call("w", self.w, x, nu)

    def partial(self, name: str, *args) -> np.ndarray:
        """
        Partial derivative of a closure, analytic when registered.

        Args:
            name: One of ``PARTIALS`` or ``d2nudot_chi``
            *args: Arguments of the parent closure

        Returns:
            np.ndarray: Shape ``lead + tail`` of the differentiated argument
                (``lead + (m, m)`` for ``d2nudot_chi``)
        """
        if name in self.partials:
            return self._call(name, self.partials[name], *args)
        return self.finite_difference(name, *args)

    def finite_difference(self, name: str, *args) -> np.ndarray:
        """Central-difference evaluation of a partial, ignoring analytic closures."""
        if name == "d2nudot_chi":
            nu, nudot = args
            return central_derivative(lambda q: self.partial("dnudot_chi", nu, q), [nudot], 0, 1)
        if name not in PARTIALS:
            raise InputError(f"unknown partial '{name}'", field="name")
        owner, index, tail = PARTIALS[name]
        closure = {"e": self.elastic, "chi": self.coenergy, "w": self.potential}[owner]
        return central_derivative(closure, args, index, tail)

    def partial_mismatch(self, name: str, *args) -> float:
        """Largest gap between the analytic and the difference partial."""
        if name not in self.partials:
            return 0.0
        return float(np.max(np.abs(self.partial(name, *args) - self.finite_difference(name, *args))))


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    """
    Generators of a one-parameter family of transformations.

    Attributes:
        w: Relabeling velocity X -> w(X), or None
        c: Spatial translation velocity
        qdot: Spatial angular velocity about ``x0``
        group: Tag of the group acting on the manifold
        xi: Algebra element of ``group``
    """
    w: Optional[Callable[[np.ndarray], np.ndarray]] = None
    c: Optional[np.ndarray] = None
    qdot: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None
    group: Optional[str] = None
    xi: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("c", "qdot", "x0", "xi"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, np.atleast_1d(np.asarray(value, dtype=float)))
        if (self.group is None) != (self.xi is None):
            raise InputError("group and xi must be given together", field="xi")
        if self.qdot is not None and self.qdot.shape != (3,):
            raise InputError("angular velocity qdot must be a 3-vector", field="qdot")

    @classmethod
    def zero(cls) -> "GeneratorSet":
        return cls()

    @classmethod
    def translation(cls, c) -> "GeneratorSet":
        return cls(c=c)

    @classmethod
    def rotation(cls, qdot, x0=None, group: Optional[str] = "SO3") -> "GeneratorSet":
        """Spatial rotation with the matching action on the manifold."""
        qdot = np.asarray(qdot, dtype=float)
        return cls(qdot=qdot, x0=np.zeros(3) if x0 is None else x0,
                   group=group, xi=None if group is None else qdot)

    @classmethod
    def relabeling(cls, w: Callable[[np.ndarray], np.ndarray]) -> "GeneratorSet":
        return cls(w=w)

    @classmethod
    def order_shift(cls, group: str, xi) -> "GeneratorSet":
        return cls(group=group, xi=xi)

    @property
    def is_zero(self) -> bool:
        return self.w is None and self.c is None and self.qdot is None and self.xi is None

    def spatial_velocity(self, x: np.ndarray) -> np.ndarray:
        """v(x) = c + qdot x (x - x0)."""
        x = np.asarray(x, dtype=float)
        v = np.zeros_like(x)
        if self.c is not None:
            v = v + self.c
        if self.qdot is not None:
            if x.shape[-1] != 3:
                raise InputError("spatial rotations need a three-dimensional body", field="qdot")
            x0 = np.zeros(3) if self.x0 is None else self.x0
            v = v + np.cross(self.qdot, x - x0)
        return v

    def relabeling_velocity(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.w is None:
            return np.zeros_like(X)
        return np.asarray(self.w(X), dtype=float)


@dataclass(frozen=True, eq=False)
class Sources:
    """
    External compensating sources per unit mass.

    ``b(X, t)`` has shape ``(..., d)`` and ``beta(X, t)`` shape ``(..., m)``.
    """
    b: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    beta: Optional[Callable[[np.ndarray, float], np.ndarray]] = None

    def body_force(self, X: np.ndarray, t: float, d: int) -> np.ndarray:
        if self.b is None:
            return np.zeros(np.shape(X)[:-1] + (d,))
        return np.asarray(self.b(X, t), dtype=float)

    def order_force(self, X: np.ndarray, t: float, m: int) -> np.ndarray:
        if self.beta is None:
            return np.zeros(np.shape(X)[:-1] + (m,))
        return np.asarray(self.beta(X, t), dtype=float)

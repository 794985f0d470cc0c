import re
import logging

import numpy as np
from scipy.spatial.transform import Rotation

from multifield.models.manifolds import ManifoldModel, wrap
from multifield.repositories.base import BaseRegistry

logger = logging.getLogger(__name__)

_EUCLIDEAN_TAG = re.compile(r"^R\^?(\d+)$")
TWO_PI = 2.0 * np.pi


def _identity_metric(n):
    def metric(nu):
        return np.broadcast_to(np.eye(n), nu.shape[:-1] + (n, n)).copy()
    return metric


def _zero_christoffel(n):
    def christoffel(nu):
        return np.zeros(nu.shape[:-1] + (n, n, n))
    return christoffel


def _broadcast_action(xi, nu):
    return np.broadcast_to(np.asarray(xi, dtype=float), nu.shape).copy()


def _rotation_action(xi, nu):
    return np.cross(np.broadcast_to(np.asarray(xi, dtype=float), nu.shape), nu)


def _sphere_angle(a, b):
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.arctan2(cross, np.sum(a * b, axis=-1))


# ------------------------------
# EUCLIDEAN SPACES
# ------------------------------

def euclidean(n: int) -> ManifoldModel:
    actions = {"translation": _broadcast_action}
    if n == 3:
        actions["SO3"] = _rotation_action
    return ManifoldModel(
        tag=f"R{n}",
        dim=n,
        chart_metric=_identity_metric(n),
        analytic_distance=lambda a, b: np.linalg.norm(b - a, axis=-1),
        action_generators=actions,
        chart_bounds=tuple((-np.inf, np.inf) for _ in range(n)),
        analytic_christoffel=_zero_christoffel(n),
        periods=tuple(None for _ in range(n)),
        linear_ambient=True,
        description=f"Euclidean space R^{n}",
    )


# ------------------------------
# CIRCLE
# ------------------------------

def circle(distance: str = "arc") -> ManifoldModel:
    if distance == "arc":
        metric_fn = lambda a, b: np.abs(wrap(b[..., 0] - a[..., 0]))
        tag = "S1"
    else:
        metric_fn = lambda a, b: 2.0 * np.abs(np.sin(0.5 * (b[..., 0] - a[..., 0])))
        tag = "S1:chord"
    return ManifoldModel(
        tag=tag,
        dim=1,
        chart_metric=_identity_metric(1),
        analytic_distance=metric_fn,
        action_generators={"SO2": _broadcast_action, "translation": _broadcast_action},
        chart_bounds=((-np.inf, np.inf),),
        analytic_christoffel=_zero_christoffel(1),
        periods=(TWO_PI,),
        retraction=lambda nu, v: wrap(nu + v, TWO_PI),
        description=f"circle, angle chart, {distance} distance",
    )


# ------------------------------
# TWO-SPHERE, SPHERICAL CHART
# ------------------------------

def _sphere_to_embedded(nu):
    theta, phi = nu[..., 0], nu[..., 1]
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)


def _sphere_from_embedded(n):
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n, axis=-1, keepdims=True)
    theta = np.arctan2(np.hypot(n[..., 0], n[..., 1]), n[..., 2])
    phi = np.arctan2(n[..., 1], n[..., 0])
    return np.stack([theta, phi], axis=-1)


def _sphere_frame(nu):
    theta, phi = nu[..., 0], nu[..., 1]
    e_theta = np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)], axis=-1)
    e_phi = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], axis=-1)
    return e_theta, e_phi


def _sphere_metric(nu):
    g = np.zeros(nu.shape[:-1] + (2, 2))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = np.sin(nu[..., 0]) ** 2
    return g


def _sphere_christoffel(nu):
    theta = nu[..., 0]
    gamma = np.zeros(nu.shape[:-1] + (2, 2, 2))
    gamma[..., 0, 1, 1] = -np.sin(theta) * np.cos(theta)
    gamma[..., 1, 0, 1] = np.cos(theta) / np.sin(theta)
    gamma[..., 1, 1, 0] = gamma[..., 1, 0, 1]
    return gamma


def _sphere_chart_action(xi, nu):
    u = _rotation_action(xi, _sphere_to_embedded(nu))
    e_theta, e_phi = _sphere_frame(nu)
    return np.stack(
        [np.sum(u * e_theta, axis=-1), np.sum(u * e_phi, axis=-1) / np.sin(nu[..., 0])],
        axis=-1,
    )


def _sphere_chart_retraction(nu, v):
    e_theta, e_phi = _sphere_frame(nu)
    step = e_theta * v[..., 0:1] + e_phi * (np.sin(nu[..., 0]) * v[..., 1])[..., None]
    return _sphere_from_embedded(_sphere_to_embedded(nu) + step)


def sphere_chart() -> ManifoldModel:
    return ManifoldModel(
        tag="S2",
        dim=2,
        chart_metric=_sphere_metric,
        analytic_distance=lambda a, b: _sphere_angle(_sphere_to_embedded(a), _sphere_to_embedded(b)),
        action_generators={"SO3": _sphere_chart_action},
        chart_bounds=((0.0, np.pi), (-np.inf, np.inf)),
        singular_distance=lambda nu: np.minimum(nu[..., 0], np.pi - nu[..., 0]),
        analytic_christoffel=_sphere_christoffel,
        periods=(None, TWO_PI),
        retraction=_sphere_chart_retraction,
        to_embedded=_sphere_to_embedded,
        from_embedded=_sphere_from_embedded,
        description="two-sphere, spherical chart (theta, phi), g = diag(1, sin^2 theta)",
    )


# ------------------------------
# TWO-SPHERE, EMBEDDED
# ------------------------------

def _normalize(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def sphere_embedded() -> ManifoldModel:
    return ManifoldModel(
        tag="S2:embedded",
        dim=3,
        chart_metric=_identity_metric(3),
        analytic_distance=lambda a, b: _sphere_angle(a, b),
        action_generators={"SO3": _rotation_action},
        chart_bounds=((-1.0, 1.0),) * 3,
        analytic_christoffel=_zero_christoffel(3),
        periods=(None, None, None),
        retraction=lambda nu, v: _normalize(nu + v),
        tangent_projection=lambda nu, v: v - np.sum(nu * v, axis=-1, keepdims=True) * nu,
        to_embedded=lambda nu: np.asarray(nu, dtype=float),
        from_embedded=_normalize,
        constraint=lambda nu: np.linalg.norm(nu, axis=-1) - 1.0,
        linear_ambient=True,
        description="two-sphere as unit vectors of R^3 (ambient chart)",
    )


# ------------------------------
# ROTATION GROUP, ROTATION VECTORS
# ------------------------------

def _hat(v):
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def so3_jacobian(theta, side: str = "right"):
    """Right (or left) Jacobian of the exponential map in rotation-vector coordinates."""
    theta = np.asarray(theta, dtype=float)
    t = np.linalg.norm(theta, axis=-1)[..., None, None]
    small = t < 1e-4
    t_safe = np.where(small, 1.0, t)
    a = np.where(small, 0.5 - t ** 2 / 24.0, (1.0 - np.cos(t_safe)) / t_safe ** 2)
    b = np.where(small, 1.0 / 6.0 - t ** 2 / 120.0, (t_safe - np.sin(t_safe)) / t_safe ** 3)
    K = _hat(theta)
    sign = -1.0 if side == "right" else 1.0
    return np.eye(3) + sign * a * K + b * (K @ K)


def _so3_metric(theta):
    J = so3_jacobian(theta)
    return np.swapaxes(J, -1, -2) @ J


def _so3_distance(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    relative = Rotation.from_rotvec(a.reshape(-1, 3)).inv() * Rotation.from_rotvec(b.reshape(-1, 3))
    return relative.magnitude().reshape(a.shape[:-1])


def _so3_action(xi, theta):
    xi = np.broadcast_to(np.asarray(xi, dtype=float), theta.shape)
    return np.linalg.solve(so3_jacobian(theta, side="left"), xi[..., None])[..., 0]


def _so3_retraction(theta, v):
    flat = (theta + v).reshape(-1, 3)
    return Rotation.from_rotvec(flat).as_rotvec().reshape(theta.shape)


def rotations() -> ManifoldModel:
    return ManifoldModel(
        tag="SO3",
        dim=3,
        chart_metric=_so3_metric,
        analytic_distance=_so3_distance,
        action_generators={"SO3": _so3_action},
        chart_bounds=((-np.pi, np.pi),) * 3,
        singular_distance=lambda theta: np.pi - np.linalg.norm(theta, axis=-1),
        periods=(None, None, None),
        retraction=_so3_retraction,
        description="rotation group, rotation-vector chart, bi-invariant metric",
    )


# ------------------------------
# INTERVAL OF VOLUME FRACTIONS
# ------------------------------

def interval() -> ManifoldModel:
    return ManifoldModel(
        tag="I",
        dim=1,
        chart_metric=_identity_metric(1),
        analytic_distance=lambda a, b: np.abs(b[..., 0] - a[..., 0]),
        chart_bounds=((0.0, 1.0),),
        analytic_christoffel=_zero_christoffel(1),
        periods=(None,),
        retraction=lambda nu, v: np.clip(nu + v, 0.0, 1.0),
        linear_ambient=True,
        description="closed interval [0, 1] of volume fractions",
    )


class ManifoldRepository(BaseRegistry[ManifoldModel]):
    """
    Registry of manifolds by tag, seeded with the built-in models.

    Euclidean spaces are created on first use for any tag ``Rn`` or ``R^n``.
    """

    def __init__(self):
        super().__init__("manifold")
        for model in (euclidean(1), euclidean(2), euclidean(3), circle("arc"), circle("chord"),
                      sphere_chart(), sphere_embedded(), rotations(), interval()):
            self.register(model.tag, model, description=model.description)

    def get(self, tag: str) -> ManifoldModel:
        match = _EUCLIDEAN_TAG.match(tag)
        if match:
            canonical = f"R{int(match.group(1))}"
            if not self.exists(canonical) and int(match.group(1)) > 0:
                model = euclidean(int(match.group(1)))
                self.register(canonical, model, description=model.description)
            tag = canonical
        return super().get(tag)


# Create singleton instance
manifold_repository = ManifoldRepository()

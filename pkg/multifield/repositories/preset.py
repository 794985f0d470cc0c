import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from multifield.core.exceptions import InputError
from multifield.models.interface import SurfaceEnergyModel
from multifield.models.lagrangian import LagrangianModel
from multifield.repositories.base import BaseRegistry

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Preset:
    """Named factory with default parameters."""
    name: str
    factory: Callable[..., Any]
    defaults: Dict[str, Any] = field(default_factory=dict)
    description: str = ""

    def build(self, parameters: Optional[Dict[str, Any]] = None):
        parameters = dict(parameters or {})
        unknown = set(parameters) - set(self.defaults)
        if unknown:
            raise InputError(f"preset '{self.name}' has no parameters {sorted(unknown)}; "
                             f"known: {sorted(self.defaults)}", field="parameters")
        return self.factory(**{**self.defaults, **parameters})


def _sq(a: np.ndarray, axes) -> np.ndarray:
    return np.sum(np.asarray(a, dtype=float) ** 2, axis=axes)


def _eye_like(F: np.ndarray) -> np.ndarray:
    return np.eye(F.shape[-1])


def _inertia(iota: float) -> Dict[str, Callable]:
    return {
        "chi": lambda nu, nudot: 0.5 * iota * _sq(nudot, -1),
        "dnu_chi": lambda nu, nudot: np.zeros(np.shape(nu)),
        "dnudot_chi": lambda nu, nudot: iota * np.asarray(nudot, dtype=float),
        "d2nudot_chi": lambda nu, nudot: iota * np.broadcast_to(np.eye(np.shape(nu)[-1]),
                                                                np.shape(nu) + np.shape(nu)[-1:]).copy(),
    }


# ------------------------------
# BULK MODELS
# ------------------------------

def quadratic_model(mu: float = 1.0, kappa: float = 1.0, alpha: float = 0.0, iota: float = 1.0) -> LagrangianModel:
    """e = mu/2 |F - I|^2 + kappa/2 |grad nu|^2 + alpha/2 |nu|^2, chi = iota/2 |nudot|^2."""
    inertia = _inertia(iota)

    def e(X, F, nu, grad_nu):
        F = np.asarray(F, dtype=float)
        return 0.5 * mu * _sq(F - _eye_like(F), (-2, -1)) + 0.5 * kappa * _sq(grad_nu, (-2, -1)) \
            + 0.5 * alpha * _sq(nu, -1)

    return LagrangianModel(
        name="quadratic",
        e=e,
        chi=inertia["chi"],
        partials={
            "dX_e": lambda X, F, nu, grad_nu: np.zeros(np.shape(X)),
            "dF_e": lambda X, F, nu, grad_nu: mu * (np.asarray(F, dtype=float) - _eye_like(np.asarray(F))),
            "dnu_e": lambda X, F, nu, grad_nu: alpha * np.asarray(nu, dtype=float),
            "dgradnu_e": lambda X, F, nu, grad_nu: kappa * np.asarray(grad_nu, dtype=float),
            "dnu_chi": inertia["dnu_chi"],
            "dnudot_chi": inertia["dnudot_chi"],
            "d2nudot_chi": inertia["d2nudot_chi"],
        },
        parameters={"mu": mu, "kappa": kappa, "alpha": alpha, "iota": iota},
        description="isotropic quadratic energy with quadratic substructural inertia",
    )


def director_model(c: float = 1.0, kappa: float = 1.0, mu: float = 0.0, iota: float = 1.0,
                   tau=(0.0, 0.0, 1.0)) -> LagrangianModel:
    """
    Frame-indifferent director energy on S2.

    e = c/2 |F tau - nu|^2 + kappa/2 |grad nu|^2 + mu/4 |F^T F - I|^2 with a fixed
    unit material direction tau.
    """
    tau = np.asarray(tau, dtype=float)
    tau = tau / np.linalg.norm(tau)
    inertia = _inertia(iota)

    def mismatch(F, nu):
        return np.einsum("...iA,A->...i", np.asarray(F, dtype=float), tau) - np.asarray(nu, dtype=float)

    def green(F):
        F = np.asarray(F, dtype=float)
        return np.einsum("...iA,...iB->...AB", F, F) - _eye_like(F)

    def e(X, F, nu, grad_nu):
        return (0.5 * c * _sq(mismatch(F, nu), -1) + 0.5 * kappa * _sq(grad_nu, (-2, -1))
                + 0.25 * mu * _sq(green(F), (-2, -1)))

    def dF_e(X, F, nu, grad_nu):
        return (c * mismatch(F, nu)[..., :, None] * tau
                + mu * np.einsum("...iA,...AB->...iB", np.asarray(F, dtype=float), green(F)))

    return LagrangianModel(
        name="director",
        e=e,
        chi=inertia["chi"],
        partials={
            "dX_e": lambda X, F, nu, grad_nu: np.zeros(np.shape(X)),
            "dF_e": dF_e,
            "dnu_e": lambda X, F, nu, grad_nu: -c * mismatch(F, nu),
            "dgradnu_e": lambda X, F, nu, grad_nu: kappa * np.asarray(grad_nu, dtype=float),
            "dnu_chi": inertia["dnu_chi"],
            "dnudot_chi": inertia["dnudot_chi"],
            "d2nudot_chi": inertia["d2nudot_chi"],
        },
        parameters={"c": c, "kappa": kappa, "mu": mu, "iota": iota, "tau": tau.tolist()},
        description="director coupled to the deformed material direction F tau",
    )


def shear_model(scale: float = 1.0) -> LagrangianModel:
    """e = scale * F_12; not frame-indifferent."""
    def dF_e(X, F, nu, grad_nu):
        out = np.zeros(np.shape(F))
        out[..., 0, 1] = scale
        return out

    return LagrangianModel(
        name="shear",
        e=lambda X, F, nu, grad_nu: scale * np.asarray(F, dtype=float)[..., 0, 1],
        partials={"dF_e": dF_e},
        parameters={"scale": scale},
        description="linear shear energy, a frame-dependent control",
    )


def double_well_model(a: float = 1.0, kappa: float = 0.01, iota: float = 1.0) -> LagrangianModel:
    """e = a nu^2 (1 - nu)^2 + kappa |grad nu|^2 for volume fractions."""
    inertia = _inertia(iota)

    def e(X, F, nu, grad_nu):
        phase = np.asarray(nu, dtype=float)[..., 0]
        return a * phase ** 2 * (1.0 - phase) ** 2 + kappa * _sq(grad_nu, (-2, -1))

    return LagrangianModel(
        name="double-well",
        e=e,
        chi=inertia["chi"],
        partials={
            "dF_e": lambda X, F, nu, grad_nu: np.zeros(np.shape(F)),
            "dnu_e": lambda X, F, nu, grad_nu: 2.0 * a * np.asarray(nu) * (1.0 - np.asarray(nu)) * (1.0 - 2.0 * np.asarray(nu)),
            "dgradnu_e": lambda X, F, nu, grad_nu: 2.0 * kappa * np.asarray(grad_nu, dtype=float),
            "dnudot_chi": inertia["dnudot_chi"],
            "d2nudot_chi": inertia["d2nudot_chi"],
        },
        parameters={"a": a, "kappa": kappa, "iota": iota},
        description="double-well phase energy with gradient penalty",
    )


def two_well_model(a: float = 1.0, delta: float = 0.1, mu: float = 1.0, kappa: float = 1.0,
                   alpha: float = 0.0, iota: float = 1.0) -> LagrangianModel:
    """
    Two-well stretch energy along X1 plus quadratic remainder.

    e = a/4 ((F11 - 1)^2 - delta^2)^2 + mu/2 (|F - I|^2 - (F11 - 1)^2)
        + kappa/2 |grad nu|^2 + alpha/2 |nu|^2
    """
    inertia = _inertia(iota)

    def stretch(F):
        return np.asarray(F, dtype=float)[..., 0, 0] - 1.0

    def e(X, F, nu, grad_nu):
        F = np.asarray(F, dtype=float)
        eps = stretch(F)
        return (0.25 * a * (eps ** 2 - delta ** 2) ** 2
                + 0.5 * mu * (_sq(F - _eye_like(F), (-2, -1)) - eps ** 2)
                + 0.5 * kappa * _sq(grad_nu, (-2, -1)) + 0.5 * alpha * _sq(nu, -1))

    def dF_e(X, F, nu, grad_nu):
        F = np.asarray(F, dtype=float)
        eps = stretch(F)
        out = mu * (F - _eye_like(F))
        out[..., 0, 0] = a * eps * (eps ** 2 - delta ** 2)
        return out

    return LagrangianModel(
        name="two-well",
        e=e,
        chi=inertia["chi"],
        partials={
            "dX_e": lambda X, F, nu, grad_nu: np.zeros(np.shape(X)),
            "dF_e": dF_e,
            "dnu_e": lambda X, F, nu, grad_nu: alpha * np.asarray(nu, dtype=float),
            "dgradnu_e": lambda X, F, nu, grad_nu: kappa * np.asarray(grad_nu, dtype=float),
            "dnu_chi": inertia["dnu_chi"],
            "dnudot_chi": inertia["dnudot_chi"],
            "d2nudot_chi": inertia["d2nudot_chi"],
        },
        parameters={"a": a, "delta": delta, "mu": mu, "kappa": kappa, "alpha": alpha, "iota": iota},
        description="non-convex stretch energy admitting two phases",
    )


# ------------------------------
# SURFACE ENERGIES
# ------------------------------

def constant_surface_energy(sigma: float = 1.0) -> SurfaceEnergyModel:
    def zeros_like_arg(index):
        return lambda m, FF, nu, NN: np.zeros(np.shape((m, FF, nu, NN)[index]))

    return SurfaceEnergyModel(
        name="constant",
        phi=lambda m, FF, nu, NN: np.full(np.shape(m)[:-1], float(sigma)),
        partials={"dm_phi": zeros_like_arg(0), "dFF_phi": zeros_like_arg(1),
                  "dnu_phi": zeros_like_arg(2), "dNN_phi": zeros_like_arg(3)},
        parameters={"sigma": sigma},
        invariant=True,
    )


def quadratic_surface_energy(sigma: float = 1.0, mu: float = 1.0, eta: float = 1.0, zeta=0.0) -> SurfaceEnergyModel:
    """phi = sigma + mu/2 |FF|^2 + eta/2 |NN|^2 + zeta . nu."""
    def zeta_like(nu):
        return np.broadcast_to(np.asarray(zeta, dtype=float), np.shape(nu)).copy()

    return SurfaceEnergyModel(
        name="quadratic",
        phi=lambda m, FF, nu, NN: (sigma + 0.5 * mu * _sq(FF, (-2, -1)) + 0.5 * eta * _sq(NN, (-2, -1))
                                   + np.sum(zeta_like(nu) * np.asarray(nu, dtype=float), axis=-1)),
        partials={
            "dm_phi": lambda m, FF, nu, NN: np.zeros(np.shape(m)),
            "dFF_phi": lambda m, FF, nu, NN: mu * np.asarray(FF, dtype=float),
            "dnu_phi": lambda m, FF, nu, NN: zeta_like(nu),
            "dNN_phi": lambda m, FF, nu, NN: eta * np.asarray(NN, dtype=float),
        },
        parameters={"sigma": sigma, "mu": mu, "eta": eta, "zeta": zeta},
        invariant=False,
    )


def _surface_metric(m, FF):
    m = np.asarray(m, dtype=float)
    FF = np.asarray(FF, dtype=float)
    return np.einsum("...iA,...iB->...AB", FF, FF) + m[..., :, None] * m[..., None, :]


def invariant_surface_energy(sigma: float = 1.0, eta: float = 1.0, zeta: float = 0.0) -> SurfaceEnergyModel:
    """
    phi = sigma j + eta/2 j |NN FF^+|^2 + zeta |nu|^2.

    j = sqrt(det(FF^T FF + m (x) m)) is the area stretch and NN FF^+ the spatial
    surface gradient, with FF^+ = (FF^T FF + m (x) m)^-1 FF^T.
    """
    def phi(m, FF, nu, NN):
        C = _surface_metric(m, FF)
        j = np.sqrt(np.linalg.det(C))
        spatial = np.asarray(NN, dtype=float) @ np.linalg.solve(C, np.swapaxes(np.asarray(FF, dtype=float), -1, -2))
        return sigma * j + 0.5 * eta * j * _sq(spatial, (-2, -1)) + zeta * _sq(nu, -1)

    return SurfaceEnergyModel(
        name="invariant",
        phi=phi,
        partials={"dnu_phi": lambda m, FF, nu, NN: 2.0 * zeta * np.asarray(nu, dtype=float)},
        parameters={"sigma": sigma, "eta": eta, "zeta": zeta},
        invariant=True,
    )


def zero_surface_energy() -> SurfaceEnergyModel:
    return constant_surface_energy(0.0)


class PresetRepository(BaseRegistry[Preset]):
    """
    Registry of named model factories.
    """

    def build(self, tag: str, parameters: Optional[Dict[str, Any]] = None):
        return self.get(tag).build(parameters)

    def add(self, factory: Callable[..., Any], tag: str, defaults: Dict[str, Any], description: str):
        return self.register(tag, Preset(tag, factory, defaults, description), description=description)


def _model_presets() -> PresetRepository:
    presets = PresetRepository("model preset")
    presets.add(quadratic_model, "quadratic", {"mu": 1.0, "kappa": 1.0, "alpha": 0.0, "iota": 1.0},
                "isotropic quadratic energy, quadratic inertia")
    presets.add(director_model, "director", {"c": 1.0, "kappa": 1.0, "mu": 0.0, "iota": 1.0, "tau": [0.0, 0.0, 1.0]},
                "frame-indifferent S2 director coupled to F tau")
    presets.add(shear_model, "shear", {"scale": 1.0}, "frame-dependent linear shear energy")
    presets.add(double_well_model, "double-well", {"a": 1.0, "kappa": 0.01, "iota": 1.0},
                "double-well volume-fraction energy")
    presets.add(two_well_model, "two-well",
                {"a": 1.0, "delta": 0.1, "mu": 1.0, "kappa": 1.0, "alpha": 0.0, "iota": 1.0},
                "two-phase stretch energy")
    return presets


def _surface_presets() -> PresetRepository:
    presets = PresetRepository("surface energy preset")
    presets.add(zero_surface_energy, "zero", {}, "no surface energy")
    presets.add(constant_surface_energy, "constant", {"sigma": 1.0}, "pure surface tension")
    presets.add(quadratic_surface_energy, "quadratic", {"sigma": 1.0, "mu": 1.0, "eta": 1.0, "zeta": 0.0},
                "quadratic test energy in FF, NN and nu")
    presets.add(invariant_surface_energy, "invariant", {"sigma": 1.0, "eta": 1.0, "zeta": 0.0},
                "area-stretch energy invariant under relabeling and rotations")
    return presets


# Create singleton instances
model_presets = _model_presets()
surface_presets = _surface_presets()

import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate, ndimage

from multifield.core.exceptions import InputError
from multifield.models.body import BodyGrid, Exhaustion, OrderField
from multifield.repositories.manifold import manifold_repository
from multifield.services.kinematics import kinematics_service
from multifield.services.manifold import manifold_service

logger = logging.getLogger(__name__)

KINDS = ("integral", "compact", "sup")

# Remark-4 families live on (-1, 2)^3 and only vary with X1
FAMILY_LOWER = -1.0
FAMILY_UPPER = 2.0
FAMILY_TRANSVERSE = 9.0


def cauchy_bound(n: int, m: int) -> float:
    """9 (1/(n+1) - 1/(m+1)), the closed-form real-line separation."""
    return FAMILY_TRANSVERSE * (1.0 / (n + 1) - 1.0 / (m + 1))


def family_profile(X1: np.ndarray, n: int) -> np.ndarray:
    """0 for X1 <= 0, X1^n on [0, 1], 1 for X1 >= 1; n = inf gives the pointwise limit."""
    s = np.clip(np.asarray(X1, dtype=float), 0.0, 1.0)
    if np.isinf(n):
        # nodes may land a rounding error short of X1 = 1
        return (s >= 1.0 - 1e-12).astype(float)
    return s ** n


class MetricsService:
    """
    Service layer for distances between order-parameter fields and their gradients.
    """

    # ------------------------------
    # AGGREGATION
    # ------------------------------

    def _check_pair(self, f1: OrderField, f2: OrderField, kind: str, exhaustion: Optional[Exhaustion]):
        if kind not in KINDS:
            raise InputError(f"unknown distance kind '{kind}'; expected one of {KINDS}", field="kind")
        if not f1.compatible_with(f2):
            raise InputError("order fields do not share grid and manifold")
        if kind == "compact":
            if exhaustion is None:
                raise InputError("kind=compact needs an exhaustion", field="exhaustion")
            if not exhaustion.grid.same_as(f1.grid):
                raise InputError("exhaustion lives on a different grid", field="exhaustion")

    def aggregate(self, values: np.ndarray, grid: BodyGrid, kind: str, exhaustion: Optional[Exhaustion] = None) -> float:
        """Integral, exhaustion-weighted or supremum aggregate of nodal values."""
        if kind == "integral":
            return grid.integrate(values)
        if kind == "sup":
            return float(np.max(values))
        if kind == "compact":
            return float(sum(w * np.max(values[mask]) for w, mask in zip(exhaustion.weights, exhaustion.levels)))
        raise InputError(f"unknown distance kind '{kind}'", field="kind")

    def pointwise_distance(self, f1: OrderField, f2: OrderField, mode: str = "raw") -> np.ndarray:
        d = manifold_service.geodesic_distance(f1.manifold, f1.values, f2.values, mode=mode)
        return np.broadcast_to(np.asarray(d, dtype=float), f1.grid.shape)

    # ------------------------------
    # FIELD DISTANCES
    # ------------------------------

    def field_distance(
        self,
        kind: str,
        f1: OrderField,
        f2: OrderField,
        mode: str = "raw",
        exhaustion: Optional[Exhaustion] = None,
    ) -> float:
        """
        Distance between two order fields.

        Args:
            kind: "integral" (quadrature over the body), "compact" (weighted maxima
                over an exhaustion) or "sup" (maximum over all nodes)
            mode: "raw" for d_M, "bounded" for d_M / (1 + d_M) pointwise

        Raises:
            InputError: On mismatched fields or a compact distance without exhaustion
        """
        self._check_pair(f1, f2, kind, exhaustion)
        return self.aggregate(self.pointwise_distance(f1, f2, mode), f1.grid, kind, exhaustion)

    def gradient_pullback(self, f: OrderField) -> np.ndarray:
        """(grad nu* grad nu)_AB = grad_nu[a, A] g_ab grad_nu[b, B], shape ``grid.shape + (d, d)``."""
        grad_nu = kinematics_service.order_gradient(f)
        g = f.manifold.metric(f.values)
        return np.einsum("...aA,...ab,...bB->...AB", grad_nu, g, grad_nu)

    def gradient_distance(
        self,
        kind: str,
        f1: OrderField,
        f2: OrderField,
        exhaustion: Optional[Exhaustion] = None,
    ) -> float:
        """Aggregated Frobenius distance between the gradient pull-backs; never bounded."""
        self._check_pair(f1, f2, kind, exhaustion)
        gap = np.linalg.norm(self.gradient_pullback(f1) - self.gradient_pullback(f2), axis=(-2, -1))
        return self.aggregate(gap, f1.grid, kind, exhaustion)

    def combined_distance(
        self,
        kind: str,
        f1: OrderField,
        f2: OrderField,
        exhaustion: Optional[Exhaustion] = None,
    ) -> float:
        return (self.field_distance(kind, f1, f2, mode="bounded", exhaustion=exhaustion)
                + self.gradient_distance(kind, f1, f2, exhaustion=exhaustion))

    # ------------------------------
    # EXHAUSTIONS
    # ------------------------------

    def default_exhaustion(self, grid: BodyGrid, levels: int = 4) -> Exhaustion:
        """
        Nested sets K_n of nodes at distance >= diam / 2^(n+2) from the boundary.

        Levels that are empty or not strictly inside the next one on this grid
        are dropped.
        """
        if levels < 1:
            raise InputError("an exhaustion needs at least one level", field="levels")
        X = grid.coordinates()
        lower = np.asarray(grid.lower)
        upper = np.asarray(grid.upper)
        depth = np.min(np.minimum(X - lower, upper - X), axis=-1)
        diam = float(np.linalg.norm(upper - lower))

        accepted: List[np.ndarray] = []
        for n in range(levels):
            mask = depth >= diam / 2.0 ** (n + 2) - 1e-12
            if not mask.any():
                continue
            if accepted and (np.array_equal(accepted[-1], mask)
                             or np.any(accepted[-1] & ~ndimage.binary_erosion(mask))):
                continue
            accepted.append(mask)
        if not accepted:
            raise InputError(f"grid {grid.shape} is too coarse for an exhaustion", field="grid")
        if len(accepted) < levels:
            logger.debug(f"default exhaustion kept {len(accepted)} of {levels} levels on grid {grid.shape}")
        return Exhaustion(grid, tuple(accepted))

    # ------------------------------
    # NON-COMPLETENESS DEMOS
    # ------------------------------

    def family_grid(self, h: float = 1.0 / 200.0) -> BodyGrid:
        """1D reduction of (-1, 2)^3 along X1 with the transverse square as measure."""
        nodes = int(round((FAMILY_UPPER - FAMILY_LOWER) / h)) + 1
        return BodyGrid.box([FAMILY_LOWER], [FAMILY_UPPER], nodes, transverse_measure=FAMILY_TRANSVERSE)

    def family_member(self, case: str, n: int, grid: BodyGrid) -> OrderField:
        """n-th member of the real-line (nu in R) or circle (angle chart) family."""
        if case == "real-line":
            manifold = manifold_repository.get("R1")
        elif case == "circle":
            manifold = manifold_repository.get("S1:chord")
        else:
            raise InputError(f"unknown family '{case}'; expected real-line or circle", field="case")
        return OrderField.from_closure(
            grid, manifold, lambda X: family_profile(X[..., 0], n)[..., None], kinks=((0, 0.0), (0, 1.0))
        )

    def circle_oracle(self, n: int, m: int) -> float:
        """Adaptive quadrature of 9 int_0^1 sqrt(2 (1 - cos(X^n - X^m))) dX."""
        value, _ = integrate.quad(
            lambda s: np.sqrt(2.0 * (1.0 - np.cos(s ** n - s ** m))), 0.0, 1.0, epsabs=1e-13, epsrel=1e-12
        )
        return FAMILY_TRANSVERSE * value

    def cauchy_separation_demo(self, case: str, n_max: int, h: float = 1.0 / 200.0, mode: str = "raw") -> Dict[str, Any]:
        """
        Table of integral distances between family members n < m <= n_max.

        Rows carry the closed-form bound 9 (1/(n+1) - 1/(m+1)) and, for the
        circle, the quadrature oracle. The summary records the jump of the
        pointwise limit at X1 = 1.
        """
        if n_max < 2:
            raise InputError("n_max must be at least 2", field="n_max")
        grid = self.family_grid(h)
        members = {n: self.family_member(case, n, grid) for n in range(1, n_max + 1)}
        rows = []
        for n in range(1, n_max + 1):
            for m in range(n + 1, n_max + 1):
                row = {
                    "n": n,
                    "m": m,
                    "distance": self.field_distance("integral", members[n], members[m], mode=mode),
                    "analytic_bound": cauchy_bound(n, m),
                }
                if case == "circle":
                    row["oracle"] = self.circle_oracle(n, m)
                rows.append(row)

        X1 = grid.axes[0]
        left = X1 < 1.0 - 1e-12
        # n = inf is the pointwise limit: 0 left of X1 = 1, 1 from there on
        limit = self.family_member(case, np.inf, grid).values[..., 0]
        below = family_profile(X1, n_max)[left]
        logger.info(f"Cauchy table for {case}: {len(rows)} pairs up to n={n_max}")
        return {
            "case": case,
            "mode": mode,
            "h": h,
            "rows": rows,
            "limit_jump": float(limit[~left][0] - limit[left][-1]),
            "limit_left_value_at_n_max": float(below[-1]) if below.size else 0.0,
        }

    def beam_divergence_demo(
        self,
        lengths: Sequence[float] = (10.0, 20.0, 40.0),
        spacing: float = 1.0,
        cross_nodes: int = 21,
    ) -> Dict[str, Any]:
        """
        Integral and sup distances between nu and 1 - nu on truncated beams (-1, 1)^2 x [0, L].

        nu(X) = (X1^2 + X2^2) / 2 is homogeneous along the beam axis, so the
        integral distance grows linearly in L while the sup distance is fixed.
        """
        manifold = manifold_repository.get("I")
        rows = []
        for L in lengths:
            axial = int(round(L / spacing)) + 1
            grid = BodyGrid.box([-1.0, -1.0, 0.0], [1.0, 1.0, float(L)], (cross_nodes, cross_nodes, axial))
            first = OrderField.from_closure(
                grid, manifold, lambda X: (0.5 * (X[..., 0] ** 2 + X[..., 1] ** 2))[..., None]
            )
            second = OrderField(grid, manifold, 1.0 - first.values)
            rows.append({
                "L": float(L),
                "integral": self.field_distance("integral", first, second),
                "sup": self.field_distance("sup", first, second),
            })

        L = np.array([r["L"] for r in rows])
        integral = np.array([r["integral"] for r in rows])
        slope, intercept = np.polyfit(L, integral, 1)
        fitted = slope * L + intercept
        total = np.sum((integral - integral.mean()) ** 2)
        r_squared = 1.0 - float(np.sum((integral - fitted) ** 2)) / total if total > 0 else 1.0
        sups = [r["sup"] for r in rows]
        return {
            "rows": rows,
            "slope": float(slope),
            "intercept": float(intercept),
            "r_squared": r_squared,
            "sup_spread": float(max(sups) - min(sups)),
        }


# Create singleton instance
metrics_service = MetricsService()

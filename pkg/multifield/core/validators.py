import logging
from typing import Type

import numpy as np

from multifield.core.settings import settings
from multifield.core.exceptions import (
    AppException,
    NumericalConsistencyError,
    ModelError,
)

# Initialize logger
logger = logging.getLogger(__name__)

# ------------------------------
# MATRIX VALIDATORS
# ------------------------------

def asymmetry(matrices: np.ndarray) -> float:
    """Largest |A - A^T| entry over a batch of square matrices."""
    matrices = np.asarray(matrices, dtype=float)
    if matrices.size == 0:
        return 0.0
    return float(np.max(np.abs(matrices - np.swapaxes(matrices, -1, -2))))

def ensure_symmetric(
    matrices: np.ndarray,
    what: str,
    tolerance: float = None,
    error: Type[AppException] = NumericalConsistencyError,
) -> np.ndarray:
    """
    Check that every matrix of a batch is symmetric.

    The tolerance is relative to the largest entry of the batch.

    Raises:
        error: If the asymmetry exceeds the tolerance
    """
    tolerance = settings.SYMMETRY_TOLERANCE if tolerance is None else tolerance
    matrices = np.asarray(matrices, dtype=float)
    scale = max(1.0, float(np.max(np.abs(matrices)))) if matrices.size else 1.0
    gap = asymmetry(matrices)
    if gap > tolerance * scale:
        raise error(f"{what} is not symmetric (max |A - A^T| = {gap:.3e})")
    return matrices

def ensure_positive_definite(
    matrices: np.ndarray,
    what: str,
    error: Type[AppException] = ModelError,
) -> np.ndarray:
    """Check symmetric positive-definiteness of a batch of matrices."""
    matrices = ensure_symmetric(matrices, what, error=error)
    eigenvalues = np.linalg.eigvalsh(0.5 * (matrices + np.swapaxes(matrices, -1, -2)))
    if np.any(eigenvalues <= 0.0):
        raise error(f"{what} is not positive-definite (min eigenvalue {float(np.min(eigenvalues)):.3e})")
    return matrices

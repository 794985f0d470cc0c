"""Finite-difference and extrapolation helpers shared by the services."""
import logging
from typing import Callable, Sequence

import numpy as np

from multifield.core.settings import settings

logger = logging.getLogger(__name__)


def central_derivative(
    func: Callable[..., np.ndarray],
    args: Sequence[np.ndarray],
    index: int,
    tail_ndim: int,
    step: float = None,
) -> np.ndarray:
    """
    Central-difference derivative of a batched closure with respect to one argument.

    ``args[index]`` has shape ``lead + tail`` where ``tail`` spans its last
    ``tail_ndim`` axes; ``func`` returns ``lead + out``. The result has shape
    ``lead + out + tail``. The step is relative: ``step * max(1, |a|)``.
    """
    step = settings.PARTIALS_STEP if step is None else step
    args = [np.asarray(a, dtype=float) for a in args]
    base = args[index]
    tail = base.shape[base.ndim - tail_ndim:] if tail_ndim else ()

    columns = []
    for k in np.ndindex(*tail):
        sel = (Ellipsis,) + k
        h = step * np.maximum(1.0, np.abs(base[sel]))
        plus = base.copy()
        plus[sel] += h
        minus = base.copy()
        minus[sel] -= h
        f_plus = np.asarray(func(*args[:index], plus, *args[index + 1:]), dtype=float)
        f_minus = np.asarray(func(*args[:index], minus, *args[index + 1:]), dtype=float)
        h = np.reshape(h, np.shape(h) + (1,) * (f_plus.ndim - np.ndim(h)))
        columns.append((f_plus - f_minus) / (2.0 * h))

    stacked = np.stack(columns, axis=-1)
    return stacked.reshape(stacked.shape[:-1] + tail)


def fitted_order(steps: Sequence[float], norms: Sequence[float]) -> float:
    """Least-squares slope of log(norm) against log(step)."""
    steps = np.asarray(steps, dtype=float)
    norms = np.asarray(norms, dtype=float)
    slope, _ = np.polyfit(np.log(steps), np.log(norms), 1)
    return float(slope)


def extrapolate_to_zero(steps: Sequence[float], values: Sequence[np.ndarray]):
    """
    Polynomial extrapolation of samples a(eps_k) to eps = 0 (Neville).

    Returns the limit from all samples and an error estimate given by its
    distance to the linear extrapolation through the two finest samples.
    """
    steps = np.asarray(steps, dtype=float)
    table = [np.asarray(v, dtype=float) for v in values]
    if len(table) < 2:
        raise ValueError("extrapolation needs at least two samples")
    columns = [table]
    for level in range(1, len(table)):
        previous = columns[-1]
        columns.append([
            (steps[k] * previous[k + 1] - steps[k + level] * previous[k]) / (steps[k] - steps[k + level])
            for k in range(len(previous) - 1)
        ])
    limit = columns[-1][0]
    linear = columns[1][-1]
    return limit, np.abs(limit - linear)

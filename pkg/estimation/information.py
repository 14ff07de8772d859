"""Finite-difference derivatives and plug-in covariance with a small-eigenvalue guard."""
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np

from config import config

logger = logging.getLogger(__name__)

# Second differences need a wider step than gradients to stay above inner-solve noise.
HESSIAN_STEP = np.sqrt(config.FD_STEP)


def fd_steps(x: np.ndarray, step: float) -> np.ndarray:
    return step * (1.0 + np.abs(x))


def fd_gradient(f: Callable[[np.ndarray], float], x, step: float = config.FD_STEP) -> np.ndarray:
    """Central differences with per-coordinate step step * (1 + |x_i|)."""
    x = np.asarray(x, dtype=float)
    h = fd_steps(x, step)
    grad = np.empty(x.size)
    for i in range(x.size):
        up = x.copy()
        down = x.copy()
        up[i] += h[i]
        down[i] -= h[i]
        grad[i] = (f(up) - f(down)) / (2.0 * h[i])
    return grad


def fd_hessian(f: Callable[[np.ndarray], float], x, step: float = HESSIAN_STEP) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    k = x.size
    h = fd_steps(x, step)
    f0 = f(x)
    hess = np.empty((k, k))

    def shifted(i, si, j=None, sj=0.0):
        z = x.copy()
        z[i] += si * h[i]
        if j is not None:
            z[j] += sj * h[j]
        return f(z)

    for i in range(k):
        hess[i, i] = (shifted(i, 1.0) - 2.0 * f0 + shifted(i, -1.0)) / (h[i] * h[i])
        for j in range(i):
            value = (
                shifted(i, 1.0, j, 1.0)
                - shifted(i, 1.0, j, -1.0)
                - shifted(i, -1.0, j, 1.0)
                + shifted(i, -1.0, j, -1.0)
            ) / (4.0 * h[i] * h[j])
            hess[i, j] = hess[j, i] = value
    return hess


def guarded_inverse(
    information: np.ndarray, guard: float = config.EIGENVALUE_GUARD, names: Optional[Tuple[str, ...]] = None
) -> Tuple[np.ndarray, List[List[float]]]:
    """
    Pseudo-inverse of a symmetric information matrix. Eigen-directions with eigenvalues
    below guard * max eigenvalue are held fixed (zero variance) and returned.
    """
    information = 0.5 * (information + information.T)
    if information.size == 0:
        return np.zeros((0, 0)), []
    eigval, eigvec = np.linalg.eigh(information)
    scale = max(np.abs(eigval).max(), 1e-300)
    keep = eigval > guard * scale
    pinned = [eigvec[:, i].tolist() for i in np.flatnonzero(~keep)]
    if pinned:
        label = "" if names is None else f" over {list(names)}"
        logger.warning(f"Information matrix has {len(pinned)} near-null directions{label}; holding them fixed")
    inv = (eigvec[:, keep] / eigval[keep]) @ eigvec[:, keep].T
    return inv, pinned


def standard_errors(
    loglik: Callable[[np.ndarray], float], params, names: Optional[Tuple[str, ...]] = None
) -> Tuple[np.ndarray, List[List[float]]]:
    """Standard errors from the observed information -d2 loglik at params."""
    params = np.asarray(params, dtype=float)
    if params.size == 0:
        return np.zeros(0), []
    information = -fd_hessian(loglik, params)
    cov, pinned = guarded_inverse(information, names=names)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return se, pinned

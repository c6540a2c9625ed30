"""Euler residuals and their self-normalized versions.

Interval numbers follow the usual convention: interval j (1 <= j <= n)
spans (t_{j-1}, t_j], and ``eps[j-1]`` is its residual. A *retained set*
can be given as ``None``/``"all"``, a boolean mask of length n, or an
iterable of 1-based interval numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVariance, NonPositiveDiffusion
from .model import ModelSpec, lincomb

VAR_FLOOR = 1e-300


def retained_mask(retained, n: int) -> np.ndarray:
    if retained is None or (isinstance(retained, str) and retained == "all"):
        return np.ones(n, dtype=bool)
    arr = np.asarray(retained)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ValueError(f"boolean retained mask must have length {n}, got {arr.shape}")
        return arr.copy()
    idx = np.asarray(list(retained) if not isinstance(retained, np.ndarray) else retained, dtype=np.int64)
    if idx.size and (idx.min() < 1 or idx.max() > n):
        raise ValueError(f"interval numbers must lie in 1..{n}")
    mask = np.zeros(n, dtype=bool)
    mask[idx - 1] = True
    return mask


def diffusion_sq_on_grid(m: ModelSpec, states: np.ndarray, alpha) -> np.ndarray:
    """A(X_{t_{j-1}})^T alpha for every interval, checked for positivity."""
    a2 = lincomb(m.A(states), np.asarray(alpha, dtype=float).reshape(-1))
    bad = ~(a2 > 0)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise NonPositiveDiffusion(states[j], alpha, index=j + 1)
    return a2


def euler_residuals(m: ModelSpec, x, h: float, alpha, drift_corrected: bool = False, beta=None) -> np.ndarray:
    """eps_j = dX_j / sqrt(A(X_{j-1})^T alpha h), j = 1..n.

    With ``drift_corrected`` the drift h B(X_{j-1})^T beta is subtracted from
    the increment first.
    """
    x = np.asarray(x, dtype=float)
    states = x[:-1]
    dx = np.diff(x)
    a2 = diffusion_sq_on_grid(m, states, alpha)
    if drift_corrected:
        if beta is None:
            raise ValueError("drift_corrected residuals need beta")
        dx = dx - h * lincomb(m.B(states), np.asarray(beta, dtype=float).reshape(-1))
    return dx / np.sqrt(a2 * h)


@dataclass(frozen=True)
class ResidualSet:
    eps: np.ndarray
    retained: np.ndarray  # boolean mask
    mean: float
    var: float
    normalized: np.ndarray  # defined for every j; only retained ones enter the statistics

    @property
    def retained_count(self) -> int:
        return int(self.retained.sum())


def normalize(eps, retained=None) -> ResidualSet:
    """Center and scale residuals by the trimmed mean and variance.

    Both moments use divisor n - k, the number of retained residuals.
    """
    eps = np.asarray(eps, dtype=float)
    mask = retained_mask(retained, len(eps))
    kept = eps[mask]
    if kept.size < 2:
        raise ValueError("need at least two retained residuals")
    mean = float(np.mean(kept))
    var = float(np.mean((kept - mean) ** 2))
    if not var > VAR_FLOOR:
        raise DegenerateVariance(f"trimmed residual variance is {var!r}")
    normalized = (eps - mean) / np.sqrt(var)
    return ResidualSet(eps=eps, retained=mask, mean=mean, var=var, normalized=normalized)

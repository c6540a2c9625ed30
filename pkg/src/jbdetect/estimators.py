"""Closed-form drift and diffusion estimators over a retained interval set.

All estimators take the observed path ``x`` (length n+1), the step ``h``
and a retained set (see :func:`jbdetect.residuals.retained_mask`). The
optional ``dx`` argument replaces the increments while keeping the
states X_{t_{j-1}}; the oracle estimators use it to feed in increments of
the continuous part.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NonPositiveDiffusion, SingularNormalMatrix
from .model import ModelSpec, lincomb
from .residuals import retained_mask

PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class Solution:
    y: np.ndarray
    rcond: float
    method: str


def solve_spd(M, rhs) -> Solution:
    """Solve M y = rhs for a small symmetric matrix.

    Cholesky first; on failure, LU with partial pivoting. Raises
    SingularNormalMatrix when a pivot falls below 1e-12 * max|M|.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rhs = np.asarray(rhs, dtype=float).reshape(-1)
    d = M.shape[0]
    if M.shape != (d, d) or rhs.shape != (d,):
        raise ValueError(f"shape mismatch: M {M.shape}, rhs {rhs.shape}")
    if d > 16:
        raise ValueError(f"solve_spd handles d <= 16, got {d}")
    if not np.all(np.isfinite(M)):
        raise SingularNormalMatrix("matrix has non-finite entries")
    scale = float(np.max(np.abs(M)))
    if scale == 0.0:
        raise SingularNormalMatrix("matrix is identically zero")
    try:
        L = np.linalg.cholesky(M)
        if np.min(np.diag(L) ** 2) < PIVOT_RTOL * scale:
            raise np.linalg.LinAlgError("tiny Cholesky pivot")
        y = scipy.linalg.cho_solve((L, True), rhs)
        method = "cholesky"
    except np.linalg.LinAlgError:
        with warnings.catch_warnings():
            # an exactly zero pivot is reported below as SingularNormalMatrix
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
        if np.min(np.abs(np.diag(lu))) < PIVOT_RTOL * scale:
            raise SingularNormalMatrix(
                "normal matrix is numerically singular (collinear basis functions or too few retained intervals)"
            ) from None
        y = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
        method = "lu"
    rcond = 1.0 / float(np.linalg.cond(M, 1))
    return Solution(np.asarray(y), rcond, method)


class Design:
    """Basis functions evaluated once on the whole grid.

    Interval j pairs the state X_{t_{j-1}} with the increment dX_j; subsets
    are taken with boolean masks, so removed intervals never shift the
    remaining pairs.
    """

    def __init__(self, m: ModelSpec, x, h: float, dx=None):
        x = np.asarray(x, dtype=float)
        self.m = m
        self.h = float(h)
        self.n = len(x) - 1
        self.states = x[:-1]
        self.inc = np.diff(x) if dx is None else np.asarray(dx, dtype=float)
        if self.inc.shape != self.states.shape:
            raise ValueError("increment array does not match the path length")
        self.A = np.asarray(m.A(self.states), dtype=float).reshape(self.n, m.p_alpha)
        self.B = np.asarray(m.B(self.states), dtype=float).reshape(self.n, m.p_beta)
        self._dA = None

    @property
    def dA(self):
        if self._dA is None:
            self._dA = np.asarray(self.m.dA(self.states), dtype=float).reshape(self.n, self.m.p_alpha)
        return self._dA

    def mask(self, retained) -> np.ndarray:
        return retained_mask(retained, self.n)

    def diffusion_sq(self, mask, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float).reshape(-1)
        a2 = lincomb(self.A[mask], alpha)
        bad = ~(a2 > 0)
        if np.any(bad):
            j = int(np.flatnonzero(mask)[np.flatnonzero(bad)[0]])
            raise NonPositiveDiffusion(self.states[j], alpha, index=j + 1)
        return a2

    def alpha_lse(self, mask):
        A, inc = self.A[mask], self.inc[mask]
        sol = solve_spd(A.T @ A, A.T @ (inc * inc))
        return sol.y / self.h, sol.rcond

    def alpha_onestep(self, mask, alpha_init):
        alpha_init = np.asarray(alpha_init, dtype=float).reshape(-1)
        A, inc = self.A[mask], self.inc[mask]
        a2 = self.diffusion_sq(mask, alpha_init)
        W = A / a2[:, None]
        score = W.T @ (1.0 - inc * inc / (self.h * a2))
        sol = solve_spd(W.T @ W, score)
        return alpha_init - sol.y, sol.rcond

    def beta_plugin(self, mask, alpha_hat):
        Bm, inc = self.B[mask], self.inc[mask]
        a2 = self.diffusion_sq(mask, alpha_hat)
        sol = solve_spd((Bm / a2[:, None]).T @ Bm, Bm.T @ (inc / a2))
        return sol.y / self.h, sol.rcond

    def gql_score(self, mask, alpha):
        A, inc = self.A[mask], self.inc[mask]
        a2 = self.diffusion_sq(mask, alpha)
        return -0.5 * (A / a2[:, None]).T @ (1.0 - inc * inc / (self.h * a2))

    def sigma0(self, mask, alpha_hat):
        a2 = self.diffusion_sq(mask, alpha_hat)
        nk = len(a2)
        W = self.A[mask] / a2[:, None]
        Bm = self.B[mask]
        sigma_alpha = 2.0 * _inverse(W.T @ W / nk)
        sigma_beta = _inverse((Bm / a2[:, None]).T @ Bm / nk)
        return sigma_alpha, sigma_beta

    def report(self, mask, alpha_init=None) -> "EstimateReport":
        a_lse, rc_lse = self.alpha_lse(mask)
        start = a_lse if alpha_init is None else alpha_init
        a_os, rc_os = self.alpha_onestep(mask, start)
        b, rc_b = self.beta_plugin(mask, a_os)
        sigma_alpha, sigma_beta = self.sigma0(mask, a_os)
        return EstimateReport(
            alpha_lse=a_lse,
            alpha_onestep=a_os,
            beta=b,
            sigma_alpha=sigma_alpha,
            sigma_beta=sigma_beta,
            retained_count=int(mask.sum()),
            diagnostics={"rcond_lse": rc_lse, "rcond_scoring": rc_os, "rcond_drift": rc_b},
        )


def _inverse(M):
    d = M.shape[0]
    inv = np.column_stack([solve_spd(M, e).y for e in np.eye(d)])
    return 0.5 * (inv + inv.T)


def alpha_lse(m: ModelSpec, x, h: float, retained=None, dx=None) -> np.ndarray:
    """Least-squares diffusion estimate: argmin sum ((dX)^2 - h A^T alpha)^2."""
    d = Design(m, x, h, dx)
    return d.alpha_lse(d.mask(retained))[0]


def alpha_onestep(m: ModelSpec, x, h: float, retained=None, alpha_init=None, dx=None) -> np.ndarray:
    """One scoring step on the Gaussian quasi-likelihood from ``alpha_init``.

    ``alpha_init`` defaults to the least-squares estimate on the same set.
    """
    d = Design(m, x, h, dx)
    mask = d.mask(retained)
    if alpha_init is None:
        alpha_init = d.alpha_lse(mask)[0]
    return d.alpha_onestep(mask, alpha_init)[0]


def beta_plugin(m: ModelSpec, x, h: float, retained=None, alpha_hat=None, dx=None) -> np.ndarray:
    """Weighted least-squares drift estimate with weights 1/(A^T alpha_hat)."""
    d = Design(m, x, h, dx)
    mask = d.mask(retained)
    if alpha_hat is None:
        alpha_hat = d.alpha_onestep(mask, d.alpha_lse(mask)[0])[0]
    return d.beta_plugin(mask, alpha_hat)[0]


def gql_score(m: ModelSpec, x, h: float, alpha, retained=None, dx=None) -> np.ndarray:
    """Gradient in alpha of the stepwise Gaussian quasi-log-likelihood."""
    d = Design(m, x, h, dx)
    return d.gql_score(d.mask(retained), alpha)


def sigma0_plugin(m: ModelSpec, x, h: float, retained=None, alpha_hat=None):
    """Plug-in asymptotic covariance blocks (alpha at rate sqrt(n), beta at sqrt(T))."""
    d = Design(m, x, h)
    mask = d.mask(retained)
    if alpha_hat is None:
        alpha_hat = d.alpha_onestep(mask, d.alpha_lse(mask)[0])[0]
    return d.sigma0(mask, alpha_hat)


@dataclass(frozen=True)
class EstimateReport:
    alpha_lse: np.ndarray
    alpha_onestep: np.ndarray
    beta: np.ndarray
    sigma_alpha: np.ndarray
    sigma_beta: np.ndarray
    retained_count: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "alpha_lse": self.alpha_lse.tolist(),
            "alpha_onestep": self.alpha_onestep.tolist(),
            "beta": self.beta.tolist(),
            "sigma_alpha": self.sigma_alpha.tolist(),
            "sigma_beta": self.sigma_beta.tolist(),
            "retained_count": self.retained_count,
            "diagnostics": self.diagnostics,
        }


def estimate(m: ModelSpec, x, h: float, retained=None, alpha_init=None, dx=None) -> EstimateReport:
    """LSE, one-step and plug-in drift estimates plus plug-in covariances."""
    d = Design(m, x, h, dx)
    return d.report(d.mask(retained), alpha_init)


@dataclass(frozen=True)
class OracleReport:
    cont: EstimateReport  # from continuous-part increments, all intervals
    no_jump: EstimateReport  # observed increments on the true no-jump intervals


def oracle_estimates(m: ModelSpec, path, alpha_init=None) -> OracleReport:
    """Infeasible benchmarks built from simulation ground truth.

    ``alpha_init`` (default: the LSE of the continuous-part increments)
    starts the scoring step for the continuous-part estimator.
    """
    if path.x_cont is None or path.jump_counts is None:
        raise ValueError("oracle estimates need a simulated path with ground truth")
    cont = estimate(m, path.x, path.h, None, alpha_init, dx=path.dx_cont)
    no_jump = estimate(m, path.x, path.h, path.jump_counts == 0)
    return OracleReport(cont, no_jump)


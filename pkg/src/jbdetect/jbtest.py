"""Bias-corrected Jarque-Bera statistic on self-normalized Euler residuals."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .model import ModelSpec, lincomb
from .estimators import Design
from .residuals import normalize
from .rngdist import chisq_upper_quantile

PARTS = ("both", "skew", "kurt")


@dataclass(frozen=True)
class JbResult:
    jb: float
    skew_part: float
    kurt_part: float
    correction: float
    retained_count: int
    parts: str = "both"
    threshold: float | None = None
    reject: bool | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def jb_statistic(m: ModelSpec, x, h: float, alpha_hat, retained=None, parts: str = "both") -> JbResult:
    """JB over the retained intervals.

    skew_part = (sum N^3 - 3 sqrt(h) sum d_x a(X_{j-1}))^2 / (6 (n-k))
    kurt_part = (sum (N^4 - 3))^2 / (24 (n-k))

    All three sums run over the same retained set.
    """
    d = Design(m, x, h)
    return jb_from_design(d, d.mask(retained), alpha_hat, parts)


def jb_from_design(d: Design, mask: np.ndarray, alpha_hat, parts: str = "both") -> JbResult:
    if parts not in PARTS:
        raise ValueError(f"parts must be one of {PARTS}, got {parts!r}")
    nk = int(mask.sum())
    if nk < 5:
        raise ValueError(f"need at least 5 retained intervals, got {nk}")
    alpha_hat = np.asarray(alpha_hat, dtype=float).reshape(-1)
    a2 = d.diffusion_sq(mask, alpha_hat)
    eps = d.inc[mask] / np.sqrt(a2 * d.h)
    N = normalize(eps).normalized

    da = lincomb(d.dA[mask], alpha_hat) / (2.0 * np.sqrt(a2))
    correction = 3.0 * math.sqrt(d.h) * float(np.sum(da))

    N2 = N * N
    skew_part = (float(np.sum(N2 * N)) - correction) ** 2 / (6.0 * nk)
    kurt_part = float(np.sum(N2 * N2 - 3.0)) ** 2 / (24.0 * nk)
    jb = {"both": skew_part + kurt_part, "skew": skew_part, "kurt": kurt_part}[parts]
    return JbResult(jb, skew_part, kurt_part, correction, nk, parts)


def jb_test(result: JbResult, q: float) -> JbResult:
    """Attach the chi-square threshold and the (strict) rejection flag."""
    df = 2 if result.parts == "both" else 1
    threshold = chisq_upper_quantile(q, df)
    return JbResult(
        result.jb, result.skew_part, result.kurt_part, result.correction,
        result.retained_count, result.parts, threshold, bool(result.jb > threshold),
    )

"""Parametric jump-diffusion model class.

Models have the form

    dX = sqrt(A(X)^T alpha) dw + B(X)^T beta dt + c(X-) dJ,

where A and B are known vectors of basis functions and J is a compound
Poisson process. Coefficient functions live in a small registry keyed by
name; each one accepts a scalar or a 1-D array of states and returns an
array whose trailing axis indexes the basis functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonPositiveDiffusion

Basis = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class JumpLaw:
    """Jump-size law plus Poisson intensity.

    ``kind`` is one of ``"gamma"`` (params: shape, rate), ``"big"`` for the
    bilateral inverse Gaussian (params: delta1, gamma1, delta2, gamma2) or
    ``"none"``. Gamma is shape-rate, so Gamma(4, 1) has mean 4. IG(delta,
    gamma) has mean delta/gamma and variance delta/gamma**3.
    """

    kind: str = "none"
    params: tuple[float, ...] = ()
    intensity: float = 0.0

    _ARITY = {"none": 0, "gamma": 2, "big": 4}

    def __post_init__(self):
        if self.kind not in self._ARITY:
            raise ValueError(f"unknown jump law {self.kind!r}; expected one of {sorted(self._ARITY)}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.params) != self._ARITY[self.kind]:
            raise ValueError(
                f"jump law {self.kind!r} takes {self._ARITY[self.kind]} parameters, got {len(self.params)}"
            )
        if any(not (p > 0 and math.isfinite(p)) for p in self.params):
            raise ValueError(f"jump law parameters must be positive and finite: {self.params}")
        if not (self.intensity >= 0 and math.isfinite(self.intensity)):
            raise ValueError(f"intensity must be a finite nonnegative number, got {self.intensity}")

    @classmethod
    def parse(cls, text: str, intensity: float = 0.0) -> "JumpLaw":
        """Parse ``"gamma:4,1"``, ``"big:2,1,4,1"`` or ``"none"``."""
        kind, _, rest = text.strip().partition(":")
        params = tuple(float(v) for v in rest.split(",")) if rest else ()
        return cls(kind.strip().lower(), params, intensity)

    def describe(self) -> str:
        if self.kind == "none":
            return "none"
        return f"{self.kind}:" + ",".join(repr(p) for p in self.params)

    @property
    def mean(self) -> float:
        if self.kind == "gamma":
            shape, rate = self.params
            return shape / rate
        if self.kind == "big":
            d1, g1, d2, g2 = self.params
            return d1 / g1 - d2 / g2
        return 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params), "intensity": self.intensity}


@dataclass(frozen=True)
class ThetaTrue:
    alpha0: tuple[float, ...]
    beta0: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "alpha0", tuple(float(a) for a in np.atleast_1d(self.alpha0)))
        object.__setattr__(self, "beta0", tuple(float(b) for b in np.atleast_1d(self.beta0)))

    def to_dict(self) -> dict:
        return {"alpha0": list(self.alpha0), "beta0": list(self.beta0)}


@dataclass(frozen=True)
class ModelSpec:
    name: str
    p_alpha: int
    p_beta: int
    A: Basis
    dA: Basis
    B: Basis
    c: Callable[[np.ndarray], np.ndarray]
    alpha_domain: tuple[tuple[float, float], ...] = ()
    jump_law: JumpLaw = field(default_factory=JumpLaw)
    description: str = ""

    def with_jump_law(self, law: JumpLaw) -> "ModelSpec":
        return ModelSpec(
            self.name, self.p_alpha, self.p_beta, self.A, self.dA, self.B, self.c,
            self.alpha_domain, law, self.description,
        )

    def check_alpha(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float).reshape(-1)
        if alpha.shape != (self.p_alpha,):
            raise ValueError(f"alpha must have {self.p_alpha} entries, got {alpha.shape[0]}")
        if not np.all(np.isfinite(alpha)):
            raise ValueError(f"alpha must be finite, got {alpha.tolist()}")
        for a, (lo, hi) in zip(alpha, self.alpha_domain):
            if not lo <= a <= hi:
                raise ValueError(f"alpha component {a} outside admissible box [{lo}, {hi}]")
        return alpha

    def check_beta(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float).reshape(-1)
        if beta.shape != (self.p_beta,):
            raise ValueError(f"beta must have {self.p_beta} entries, got {beta.shape[0]}")
        return beta

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "p_alpha": self.p_alpha,
            "p_beta": self.p_beta,
            "description": self.description,
            "jump_law": self.jump_law.to_dict(),
        }


def lincomb(F: np.ndarray, w) -> np.ndarray:
    """Row-wise F @ w with a fixed summation order.

    Avoids BLAS so that each row's value does not depend on how many rows
    are evaluated together.
    """
    F = np.asarray(F, dtype=float)
    out = F[..., 0] * w[0]
    for i in range(1, len(w)):
        out = out + F[..., i] * w[i]
    return out


def eval_diffusion_sq(m: ModelSpec, x, alpha) -> np.ndarray | float:
    """Return A(x)^T alpha, raising NonPositiveDiffusion where it is <= 0."""
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if not np.all(np.isfinite(alpha)):
        raise ValueError(f"alpha must be finite, got {alpha.tolist()}")
    xa = np.asarray(x, dtype=float)
    val = lincomb(m.A(xa), alpha)
    bad = ~(val > 0)
    if np.any(bad):
        idx = int(np.flatnonzero(np.atleast_1d(bad))[0])
        raise NonPositiveDiffusion(np.atleast_1d(xa)[idx], alpha, index=idx if xa.ndim else None)
    return float(val) if xa.ndim == 0 else val


def eval_diffusion_dx(m: ModelSpec, x, alpha) -> np.ndarray:
    """d/dx of a(x, alpha) = sqrt(A(x)^T alpha)."""
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    a2 = eval_diffusion_sq(m, x, alpha)
    return lincomb(m.dA(np.asarray(x, dtype=float)), alpha) / (2.0 * np.sqrt(a2))


def _col(*cols):
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def _sine_vol_ou() -> ModelSpec:
    def A(x):
        x = np.asarray(x, dtype=float)
        return _col(1.0 / (1.0 + np.sin(x) ** 2))

    def dA(x):
        x = np.asarray(x, dtype=float)
        s = np.sin(x)
        return _col(-np.sin(2.0 * x) / (1.0 + s * s) ** 2)

    def B(x):
        return _col(-np.asarray(x, dtype=float))

    def c(x):
        return np.ones_like(np.asarray(x, dtype=float))

    return ModelSpec(
        "sine-vol-ou", 1, 1, A, dA, B, c,
        alpha_domain=((1e-12, math.inf),),
        description="dX = sqrt(alpha/(1+sin^2 X)) dw - beta X dt + dJ",
    )


def _const_ou() -> ModelSpec:
    def A(x):
        return _col(np.ones_like(np.asarray(x, dtype=float)))

    def dA(x):
        return _col(np.zeros_like(np.asarray(x, dtype=float)))

    def B(x):
        return _col(-np.asarray(x, dtype=float))

    def c(x):
        return np.ones_like(np.asarray(x, dtype=float))

    return ModelSpec(
        "const-ou", 1, 1, A, dA, B, c,
        alpha_domain=((1e-12, math.inf),),
        description="dX = sqrt(alpha) dw - beta X dt + dJ",
    )


def _const_drift() -> ModelSpec:
    # Brownian motion with constant drift; handy for checking the drift estimator.
    def A(x):
        return _col(np.ones_like(np.asarray(x, dtype=float)))

    def dA(x):
        return _col(np.zeros_like(np.asarray(x, dtype=float)))

    def B(x):
        return _col(np.ones_like(np.asarray(x, dtype=float)))

    def c(x):
        return np.ones_like(np.asarray(x, dtype=float))

    return ModelSpec(
        "const-drift", 1, 1, A, dA, B, c,
        alpha_domain=((1e-12, math.inf),),
        description="dX = sqrt(alpha) dw + beta dt + dJ",
    )


REGISTRY: dict[str, Callable[[], ModelSpec]] = {
    "sine-vol-ou": _sine_vol_ou,
    "const-ou": _const_ou,
    "const-drift": _const_drift,
}


def builtin_model(name: str, jump_law: JumpLaw | None = None) -> ModelSpec:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown model {name!r}; registered models: {', '.join(sorted(REGISTRY))}"
        ) from None
    m = factory()
    return m.with_jump_law(jump_law) if jump_law is not None else m

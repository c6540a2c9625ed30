"""Seeded random streams, jump-size samplers and chi-square quantiles."""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1


class RngStream:
    """Independent random stream identified by ``(seed, stream_id)``.

    Backed by numpy's counter-based Philox generator. The key is derived
    from a SeedSequence spawned on ``stream_id``, so replication ``r`` of a
    run with master seed ``s`` always sees the same draws, whichever worker
    happens to produce it.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & MASK64
        self.stream_id = int(stream_id) & MASK64
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, size=None):
        return self.generator.random(size)

    def gamma(self, shape, rate, size=None):
        return sample_gamma(self, shape, rate, size)

    def inverse_gaussian(self, delta, gamma, size=None):
        return sample_inverse_gaussian(self, delta, gamma, size)

    def bilateral_ig(self, d1, g1, d2, g2, size=None):
        return sample_bilateral_ig(self, d1, g1, d2, g2, size)

    def poisson(self, mean, size=None):
        return sample_poisson_count(self, mean, size)


def sample_normal(rng: RngStream, size=None):
    return rng.generator.standard_normal(size)


def sample_gamma(rng: RngStream, shape: float, rate: float, size=None):
    """Gamma(shape, rate) draw; mean shape/rate.

    numpy's standard_gamma is the Marsaglia-Tsang squeeze (with the
    U**(1/shape) boost below shape 1); we only rescale.
    """
    if not (shape > 0 and rate > 0):
        raise ValueError(f"gamma parameters must be positive, got shape={shape}, rate={rate}")
    return rng.generator.standard_gamma(shape, size) / rate


def sample_inverse_gaussian(rng: RngStream, delta: float, gamma: float, size=None):
    """IG(delta, gamma) draw via the Michael-Schucany-Haas transform.

    The density is delta e^{delta gamma} / sqrt(2 pi) x^{-3/2}
    exp(-(delta^2/x + gamma^2 x)/2): mean mu = delta/gamma and shape
    lam = delta**2 in the (mu, lam) Wald notation.
    """
    if not (delta > 0 and gamma > 0):
        raise ValueError(f"IG parameters must be positive, got delta={delta}, gamma={gamma}")
    mu = delta / gamma
    lam = delta * delta
    nu = rng.generator.standard_normal(size)
    u = rng.generator.random(size)
    y = nu * nu
    my = mu * y
    # smaller root of the MSH quadratic; the two roots multiply to mu**2
    x = mu * 2.0 * lam / (2.0 * lam + my + np.sqrt(my * (4.0 * lam + my)))
    out = np.where(u <= mu / (mu + x), x, mu * mu / x)
    return float(out) if size is None else out


def sample_bilateral_ig(rng: RngStream, d1, g1, d2, g2, size=None):
    """Difference of two independent IG draws, IG(d1, g1) - IG(d2, g2)."""
    first = sample_inverse_gaussian(rng, d1, g1, size)
    second = sample_inverse_gaussian(rng, d2, g2, size)
    return first - second


def sample_poisson_count(rng: RngStream, mean: float, size=None):
    if not (mean >= 0 and math.isfinite(mean)):
        raise ValueError(f"Poisson mean must be finite and nonnegative, got {mean}")
    out = rng.generator.poisson(mean, size)
    return int(out) if size is None else out


def sample_jump_sizes(rng: RngStream, law, size: int) -> np.ndarray:
    if law.kind == "gamma":
        return np.asarray(sample_gamma(rng, *law.params, size=size), dtype=float)
    if law.kind == "big":
        return np.asarray(sample_bilateral_ig(rng, *law.params, size=size), dtype=float)
    if size:
        raise ValueError("jump law 'none' cannot produce jump sizes")
    return np.zeros(0)


def chisq2_upper_quantile(q: float) -> float:
    """x with P(chi2(2) > x) = q, i.e. -2 log q."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"significance level q must lie in (0, 1), got {q}")
    return -2.0 * math.log(q)


def chisq1_sf(x: float) -> float:
    return math.erfc(math.sqrt(x / 2.0)) if x > 0 else 1.0


def chisq1_upper_quantile(q: float, tol: float = 1e-10) -> float:
    """Bisection on the chi2(1) survival function."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"significance level q must lie in (0, 1), got {q}")
    lo, hi = 0.0, 1.0
    while chisq1_sf(hi) > q:
        hi *= 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if chisq1_sf(mid) > q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def chisq_upper_quantile(q: float, df: int) -> float:
    if df == 2:
        return chisq2_upper_quantile(q)
    if df == 1:
        return chisq1_upper_quantile(q)
    raise ValueError(f"only 1 or 2 degrees of freedom are supported, got {df}")

"""Euler-Maruyama simulation of jump diffusions on an equispaced grid.

Paths are generated on a fine grid of step h/refine. Jumps happen at their
exact (continuous) times: the fine step containing a jump is split there,
with the Brownian increment bridged between the step endpoints, and the
state moves by c(X_{tau-}) * xi. The continuous part is recorded as
X_t minus the accumulated jump effects, so it lives on the same trajectory.

Several replications can be advanced in lockstep (one numpy operation per
fine step across all of them); every replication draws only from its own
stream, so a path does not depend on which batch it was simulated in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDiffusion, SimulationDiverged
from .model import ModelSpec, ThetaTrue, lincomb
from .rngdist import RngStream, sample_jump_sizes, sample_poisson_count

OBS_BLOCK = 256  # observation intervals per batch of pre-drawn normals


@dataclass(frozen=True)
class SimConfig:
    n: int
    h: float
    theta: ThetaTrue
    refine: int = 10
    x0: float = 0.0
    fixed_jump_count: int | None = None
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"h must be positive and finite, got {self.h}")
        if int(self.refine) != self.refine or self.refine < 1:
            raise ValueError(f"refine must be an integer >= 1, got {self.refine}")
        if self.fixed_jump_count is not None and (
            int(self.fixed_jump_count) != self.fixed_jump_count or self.fixed_jump_count < 0
        ):
            raise ValueError(f"fixed_jump_count must be a nonnegative integer, got {self.fixed_jump_count}")
        if not math.isfinite(self.x0):
            raise ValueError("x0 must be finite")

    @property
    def T(self) -> float:
        return self.n * self.h

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "h": self.h,
            "T": self.T,
            "refine": self.refine,
            "x0": self.x0,
            "theta": self.theta.to_dict(),
            "fixed_jump_count": self.fixed_jump_count,
            "seed": self.seed,
            "stream": self.stream,
        }


@dataclass
class SamplePath:
    """Observed values plus simulation ground truth.

    ``jump_counts[j-1]`` is the number of jumps in the interval
    (t_{j-1}, t_j]. ``jump_effects`` holds c(X_{tau-}) * xi per jump.
    """

    x: np.ndarray
    h: float
    x_cont: np.ndarray | None = None
    jump_counts: np.ndarray | None = None
    jump_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    jump_sizes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    jump_effects: np.ndarray = field(default_factory=lambda: np.zeros(0))
    config: SimConfig | None = None
    model: str | None = None

    @property
    def n(self) -> int:
        return len(self.x) - 1

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    @property
    def dx(self) -> np.ndarray:
        return np.diff(self.x)

    @property
    def dx_cont(self) -> np.ndarray:
        """Increments of the continuous part.

        On intervals without jumps this is the observed increment itself,
        bit for bit.
        """
        if self.x_cont is None:
            raise ValueError("path carries no continuous-part annotation")
        dx = self.dx
        if self.jump_counts is None:
            return np.diff(self.x_cont)
        return np.where(self.jump_counts == 0, dx, np.diff(self.x_cont))

    def jump_intervals(self) -> np.ndarray:
        """1-based numbers of the intervals that contain at least one jump."""
        if self.jump_counts is None:
            raise ValueError("path carries no jump annotation")
        return np.flatnonzero(self.jump_counts > 0) + 1

    def jump_marks(self) -> list[tuple[float, float]]:
        return [(float(t), float(s)) for t, s in zip(self.jump_times, self.jump_sizes)]


def _draw_jumps(m: ModelSpec, cfg: SimConfig, rng: RngStream):
    law = m.jump_law
    if cfg.fixed_jump_count is not None:
        k = int(cfg.fixed_jump_count)
    elif law.kind == "none" or law.intensity == 0.0:
        k = 0
    else:
        k = sample_poisson_count(rng, law.intensity * cfg.T)
    if k and law.kind == "none":
        raise ValueError("a positive jump count needs a jump-size law")
    # given k jumps, the times are k sorted uniforms on (0, T]
    times = np.sort(cfg.T * (1.0 - rng.uniform(k))) if k else np.zeros(0)
    sizes = sample_jump_sizes(rng, law, k) if k else np.zeros(0)
    bridge = rng.normal(k) if k else np.zeros(0)
    return times, sizes, bridge


class _Coefficients:
    def __init__(self, m: ModelSpec, theta: ThetaTrue):
        self.m = m
        self.alpha = m.check_alpha(theta.alpha0)
        self.beta = m.check_beta(theta.beta0)

    def diffusion(self, x):
        a2 = lincomb(self.m.A(x), self.alpha)
        if not np.all(a2 > 0):
            bad = int(np.flatnonzero(~(np.atleast_1d(a2) > 0))[0])
            raise NonPositiveDiffusion(np.atleast_1d(x)[bad], self.alpha)
        return np.sqrt(a2)

    def drift(self, x):
        return lincomb(self.m.B(x), self.beta)

    def jump(self, x):
        return self.m.c(x)


def simulate_paths(m: ModelSpec, cfg: SimConfig, streams, normals=None) -> list[SamplePath]:
    """Simulate one path per stream id, all sharing ``cfg`` except the stream.

    ``normals`` (shape (len(streams), n*refine)) replaces the standard normal
    Brownian draws; jump draws still come from the streams. Used to couple
    paths across refinement levels.
    """
    streams = [int(s) for s in streams]
    R = len(streams)
    coef = _Coefficients(m, cfg.theta)
    n, refine = cfg.n, cfg.refine
    delta = cfg.h / refine
    sqd = math.sqrt(delta)
    n_steps = n * refine

    rngs = [RngStream(cfg.seed, s) for s in streams]
    jumps = [_draw_jumps(m, cfg, rng) for rng in rngs]

    # fine step s covers (s*delta, (s+1)*delta]; u is the position inside it
    events: dict[int, list] = {}
    for r, (times, sizes, bridge) in enumerate(jumps):
        pos = times / delta
        steps = np.clip(np.ceil(pos).astype(np.int64) - 1, 0, n_steps - 1)
        fracs = np.clip(pos - steps, 0.0, 1.0)
        for i in range(len(times)):
            events.setdefault(int(steps[i]), []).append((r, i, float(fracs[i])))

    x = np.full(R, float(cfg.x0))
    jacc = np.zeros(R)
    X = np.empty((R, n + 1))
    JA = np.empty((R, n + 1))
    X[:, 0] = x
    JA[:, 0] = 0.0
    counts = np.zeros((R, n), dtype=np.int64)
    effects = [np.zeros(len(j[0])) for j in jumps]

    s = 0
    while s < n_steps:
        block = min(OBS_BLOCK * refine, n_steps - s)
        if normals is not None:
            Z = np.asarray(normals, dtype=float)[:, s : s + block]
        else:
            Z = np.empty((R, block))
            for r, rng in enumerate(rngs):
                Z[r] = rng.normal(block)
        for b in range(block):
            dW = sqd * Z[:, b]
            a = coef.diffusion(x)
            x_new = x + coef.drift(x) * delta + a * dW
            ev = events.get(s)
            if ev:
                _apply_jumps(coef, ev, x, x_new, dW, delta, jumps, effects, jacc, counts, s // refine)
            x = x_new
            s += 1
            if s % refine == 0:
                j = s // refine
                if not np.all(np.isfinite(x)):
                    bad = int(np.flatnonzero(~np.isfinite(x))[0])
                    raise SimulationDiverged(s, replication=streams[bad])
                X[:, j] = x
                JA[:, j] = jacc

    paths = []
    for r, stream in enumerate(streams):
        times, sizes, _ = jumps[r]
        if len(times):
            xc = X[r] - JA[r]
        else:
            xc = X[r].copy()
        paths.append(
            SamplePath(
                x=X[r].copy(),
                h=cfg.h,
                x_cont=xc,
                jump_counts=counts[r].copy(),
                jump_times=times,
                jump_sizes=sizes,
                jump_effects=effects[r],
                config=SimConfig(
                    cfg.n, cfg.h, cfg.theta, cfg.refine, cfg.x0, cfg.fixed_jump_count, cfg.seed, stream
                ),
                model=m.name,
            )
        )
    return paths


def _apply_jumps(coef, ev, x, x_new, dW, delta, jumps, effects, jacc, counts, interval):
    by_rep: dict[int, list] = {}
    for r, i, u in ev:
        by_rep.setdefault(r, []).append((u, i))
    for r, items in by_rep.items():
        items.sort()
        times, sizes, bridge = jumps[r]
        cur_x = np.array([x[r]])
        cur_u, w_cur, w_end = 0.0, 0.0, float(dW[r])
        for u, i in items:
            rest = 1.0 - cur_u
            if rest > 0.0:
                w_u = w_cur + (u - cur_u) / rest * (w_end - w_cur)
                var = (u - cur_u) * (1.0 - u) / rest * delta
                w_u += math.sqrt(max(var, 0.0)) * bridge[i]
            else:
                w_u = w_end
            pre = cur_x + coef.drift(cur_x) * (u - cur_u) * delta + coef.diffusion(cur_x) * (w_u - w_cur)
            eff = float(coef.jump(pre)[0]) * sizes[i]
            effects[r][i] = eff
            jacc[r] += eff
            counts[r, interval] += 1
            cur_x = pre + eff
            cur_u, w_cur = u, w_u
        tail = cur_x + coef.drift(cur_x) * (1.0 - cur_u) * delta + coef.diffusion(cur_x) * (w_end - w_cur)
        x_new[r] = tail[0]


def simulate_path(m: ModelSpec, cfg: SimConfig) -> SamplePath:
    return simulate_paths(m, cfg, [cfg.stream])[0]


def interval_moment_check(m: ModelSpec, cfg: SimConfig, n_mc: int, chunk: int = 200_000) -> dict:
    """Monte Carlo check of the one-interval conditional moments.

    Simulates ``n_mc`` jump-free increments of length ``cfg.h`` started at
    ``cfg.x0`` and compares E[dX^2]/h with a^2(x0) and E[dX^4]/h^2 with
    3 a^4(x0). Jumps are ignored whatever the model's jump law says.
    """
    coef = _Coefficients(m, cfg.theta)
    x_start, h, refine = float(cfg.x0), cfg.h, cfg.refine
    a2 = float(coef.diffusion(np.array([x_start]))[0] ** 2)
    rng = RngStream(cfg.seed, cfg.stream)
    delta = h / refine
    sqd = math.sqrt(delta)
    s2 = s4 = s8 = 0.0
    done = 0
    while done < n_mc:
        size = min(chunk, n_mc - done)
        x = np.full(size, float(x_start))
        for _ in range(refine):
            dW = sqd * rng.normal(size)
            x = x + coef.drift(x) * delta + coef.diffusion(x) * dW
        d2 = (x - x_start) ** 2
        s2 += float(np.sum(d2))
        s4 += float(np.sum(d2 * d2))
        s8 += float(np.sum((d2 * d2) ** 2))
        done += size
    m2, m4, m8 = s2 / n_mc, s4 / n_mc, s8 / n_mc
    return {
        "a2": a2,
        "second_ratio": m2 / (h * a2),
        "second_se": math.sqrt(max(m4 - m2 * m2, 0.0) / n_mc) / (h * a2),
        "fourth_ratio": m4 / (h * h * a2 * a2),
        "fourth_se": math.sqrt(max(m8 - m4 * m4, 0.0) / n_mc) / (h * h * a2 * a2),
    }

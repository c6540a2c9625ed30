"""Iterative jump detection by repeated Jarque-Bera testing.

Start from the full sample. At each round, estimate on the retained
intervals, compute JB with the one-step diffusion estimate, and if the
test rejects, drop the retained interval with the largest |dX|. Stop at
the first acceptance; the intervals dropped so far are taken to carry one
jump each.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimators import Design, EstimateReport
from .jbtest import PARTS, JbResult, jb_from_design, jb_test
from .model import ModelSpec


@dataclass(frozen=True)
class DetectOptions:
    q: float = 1e-3
    batch: int = 1
    parts: str = "both"
    k_max: int | None = None  # default n // 2
    jb_alpha: str = "onestep"  # or "lse"

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if int(self.batch) != self.batch or self.batch < 1:
            raise ValueError(f"batch must be a positive integer, got {self.batch}")
        if self.parts not in PARTS:
            raise ValueError(f"parts must be one of {PARTS}, got {self.parts!r}")
        if self.jb_alpha not in ("onestep", "lse"):
            raise ValueError(f"jb_alpha must be 'onestep' or 'lse', got {self.jb_alpha!r}")
        if self.k_max is not None and self.k_max < 0:
            raise ValueError("k_max must be nonnegative")


@dataclass
class DetectionState:
    n: int
    removed: list[int]  # 1-based interval numbers, in removal order
    jb_trace: list[JbResult]
    k_star: int
    threshold_r: float | None
    final_report: EstimateReport
    initial_report: EstimateReport
    exhausted: bool = False
    options: DetectOptions = field(default_factory=DetectOptions)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k_star": self.k_star,
            "removed": list(self.removed),
            "threshold_r": self.threshold_r,
            "exhausted": self.exhausted,
            "jb_trace": [r.to_dict() for r in self.jb_trace],
            "initial_report": self.initial_report.to_dict(),
            "final_report": self.final_report.to_dict(),
            "options": {
                "q": self.options.q,
                "batch": self.options.batch,
                "parts": self.options.parts,
                "k_max": self.options.k_max,
                "jb_alpha": self.options.jb_alpha,
            },
        }


def _removal_order(dx: np.ndarray) -> np.ndarray:
    # descending |dX|; equal values keep ascending index order (stable sort)
    return np.argsort(-np.abs(dx), kind="stable")


def detect(m: ModelSpec, x, h: float, q: float = 1e-3, opts: DetectOptions | None = None) -> DetectionState:
    """Run the detection loop; ``opts.batch`` > 1 removes several per round."""
    if opts is None:
        opts = DetectOptions(q=q)
    x = np.asarray(x, dtype=float)
    n = len(x) - 1
    if n < 10:
        raise ValueError(f"detection needs at least 10 intervals, got {n}")
    k_max = n // 2 if opts.k_max is None else min(int(opts.k_max), n - 5)

    design = Design(m, x, h)
    order = _removal_order(design.inc)
    mask = np.ones(n, dtype=bool)
    removed: list[int] = []
    trace: list[JbResult] = []
    initial = None
    exhausted = False
    while True:
        report = design.report(mask)
        if initial is None:
            initial = report
        alpha_jb = report.alpha_onestep if opts.jb_alpha == "onestep" else report.alpha_lse
        res = jb_test(jb_from_design(design, mask, alpha_jb, opts.parts), opts.q)
        trace.append(res)
        if not res.reject:
            break
        k = len(removed)
        if k >= k_max:
            exhausted = True
            break
        take = min(opts.batch, k_max - k)
        # retained intervals are exactly order[k:], since removals follow the order
        for j in order[k : k + take]:
            mask[j] = False
            removed.append(int(j) + 1)

    k_star = len(removed)
    threshold_r = float(abs(design.inc[removed[-1] - 1])) if removed else None
    return DetectionState(
        n=n,
        removed=removed,
        jb_trace=trace,
        k_star=k_star,
        threshold_r=threshold_r,
        final_report=report,
        initial_report=initial,
        exhausted=exhausted,
        options=opts,
    )


def detect_batched(m: ModelSpec, x, h: float, q: float = 1e-3, batch: int = 1, **kw) -> DetectionState:
    return detect(m, x, h, opts=DetectOptions(q=q, batch=batch, **kw))


def classify(state: DetectionState, n: int | None = None) -> tuple[set[int], set[int]]:
    """Split 1..n into the one-jump group (removed) and the no-jump group."""
    n = state.n if n is None else n
    one_jump = set(state.removed)
    no_jump = set(range(1, n + 1)) - one_jump
    return one_jump, no_jump


def recall(state: DetectionState, true_jump_intervals) -> float:
    """Share of true jump intervals found among the removed ones (nan if none)."""
    truth = set(int(j) for j in true_jump_intervals)
    if not truth:
        return float("nan")
    return len(truth & set(state.removed)) / len(truth)

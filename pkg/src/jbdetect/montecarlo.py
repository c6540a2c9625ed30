"""Replication harness: simulate, estimate, detect, summarize.

Replications are cut into fixed chunks of ``CHUNK`` consecutive stream
ids. A chunk is simulated in lockstep and may run in any worker process;
results are reduced in replication order, so a summary does not depend on
the number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .detect import DetectOptions, detect, recall
from .errors import JbDetectError
from .estimators import Design
from .model import JumpLaw, ThetaTrue, builtin_model
from .simulate import SimConfig, simulate_paths

CHUNK = 50

ESTIMATOR_COLUMNS = ("alpha0", "beta0", "alpha_kn", "beta_kn", "alpha_kstar", "beta_kstar")
RECORD_FIELDS = ESTIMATOR_COLUMNS + (
    "alpha_cont",
    "beta_cont",
    "sigma_alpha_cont",
    "sigma_beta_cont",
    "jb0",
    "k_star",
    "recall",
    "true_jump_intervals",
    "exhausted",
)


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    model: str = "sine-vol-ou"
    alpha0: float = 3.0
    beta0: float = 1.0
    n: int = 1000
    h: float = 0.03
    jump_law: str = "gamma:4,1"
    fixed_jump_count: int | None = 15
    intensity: float | None = None  # defaults to fixed_jump_count / T
    q: float = 1e-3
    replications: int = 1000
    seed: int = 1
    batch: int = 1
    refine: int = 10
    x0: float = 0.0
    parts: str = "both"

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.intensity is not None and self.intensity < 0:
            raise ValueError("intensity must be nonnegative")
        self.law()
        self.sim_config()
        self.detect_options()
        builtin_model(self.model)

    @property
    def T(self) -> float:
        return self.n * self.h

    def law(self) -> JumpLaw:
        lam = self.intensity
        if lam is None:
            lam = (self.fixed_jump_count or 0) / self.T
        return JumpLaw.parse(self.jump_law, lam)

    def sim_config(self, stream: int = 0) -> SimConfig:
        return SimConfig(
            n=self.n,
            h=self.h,
            theta=ThetaTrue(self.alpha0, self.beta0),
            refine=self.refine,
            x0=self.x0,
            fixed_jump_count=self.fixed_jump_count,
            seed=self.seed,
            stream=stream,
        )

    def detect_options(self) -> DetectOptions:
        return DetectOptions(q=self.q, batch=self.batch, parts=self.parts)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown scenario keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_text(cls, text: str) -> "Scenario":
        """Parse a JSON object or flat ``key = value`` lines."""
        stripped = text.strip()
        if stripped.startswith("{"):
            return cls.from_dict(json.loads(stripped))
        data = {}
        types = {f.name: f.type for f in fields(cls)}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"line {lineno}: expected key=value")
            key, value = key.strip(), value.strip()
            if key not in types:
                raise ValueError(f"unknown scenario keys: {key}")
            data[key] = _coerce(value, types[key])
        return cls.from_dict(data)


def _coerce(value: str, typ: str):
    if value.lower() in ("none", "null", ""):
        return None
    if typ.startswith("int"):
        return int(value)
    if typ.startswith("float"):
        return float(value)
    return value


@dataclass
class McSummary:
    scenario: Scenario
    means: dict[str, float]
    sds: dict[str, float]
    mean_k_star: float
    mean_recall: float
    failures: int
    successes: int
    records: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    failure_messages: list[str] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "means": self.means,
            "sds": self.sds,
            "mean_k_star": self.mean_k_star,
            "mean_recall": self.mean_recall,
            "failures": self.failures,
            "successes": self.successes,
            "failure_messages": self.failure_messages,
        }


def _replicate(m, s: Scenario, path) -> dict:
    design = Design(m, path.x, path.h)
    state = detect(m, path.x, path.h, opts=s.detect_options())
    r0, rk = state.initial_report, state.final_report
    no_jump_mask = path.jump_counts == 0
    rstar = design.report(no_jump_mask)
    cont = Design(m, path.x, path.h, dx=path.dx_cont).report(np.ones(path.n, dtype=bool))
    truth = path.jump_intervals()
    return {
        "alpha0": r0.alpha_onestep[0],
        "beta0": r0.beta[0],
        "alpha_kn": rk.alpha_onestep[0],
        "beta_kn": rk.beta[0],
        "alpha_kstar": rstar.alpha_onestep[0],
        "beta_kstar": rstar.beta[0],
        "alpha_cont": cont.alpha_onestep[0],
        "beta_cont": cont.beta[0],
        "sigma_alpha_cont": cont.sigma_alpha[0, 0],
        "sigma_beta_cont": cont.sigma_beta[0, 0],
        "jb0": state.jb_trace[0].jb,
        "k_star": state.k_star,
        "recall": recall(state, truth),
        "true_jump_intervals": len(truth),
        "exhausted": float(state.exhausted),
    }


def run_chunk(s: Scenario, start: int, stop: int) -> list:
    """Results for replications start..stop-1: a dict, or an error string."""
    m = builtin_model(s.model, s.law())
    cfg = s.sim_config()
    streams = range(start, stop)
    try:
        paths = simulate_paths(m, cfg, streams)
    except (JbDetectError, ValueError, FloatingPointError):
        # isolate the failing replication(s)
        paths = []
        for r in streams:
            try:
                paths.append(simulate_paths(m, cfg, [r])[0])
            except (JbDetectError, ValueError, FloatingPointError) as exc:
                paths.append(f"replication {r}: simulation failed: {exc}")
    out = []
    for r, path in zip(streams, paths):
        if isinstance(path, str):
            out.append(path)
            continue
        try:
            out.append(_replicate(m, s, path))
        except (JbDetectError, ValueError, FloatingPointError) as exc:
            out.append(f"replication {r}: {type(exc).__name__}: {exc}")
    return out


def _chunks(R: int):
    return [(a, min(a + CHUNK, R)) for a in range(0, R, CHUNK)]


def run_scenario(s: Scenario, jobs: int = 1) -> McSummary:
    chunks = _chunks(s.replications)
    if jobs <= 1 or len(chunks) == 1:
        results = [run_chunk(s, a, b) for a, b in chunks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_chunk, s, a, b) for a, b in chunks]
            results = [f.result() for f in futures]
    flat = [item for chunk in results for item in chunk]

    records = {k: np.full(s.replications, np.nan) for k in RECORD_FIELDS}
    failures = []
    for r, item in enumerate(flat):
        if isinstance(item, str):
            failures.append(item)
            continue
        for k in RECORD_FIELDS:
            records[k][r] = item[k]
    ok = ~np.isnan(records["alpha0"])
    successes = int(ok.sum())
    if successes == 0:
        raise RuntimeError("all replications failed: " + "; ".join(failures[:3]))
    means, sds = {}, {}
    for k in ESTIMATOR_COLUMNS:
        v = records[k][ok]
        means[k] = float(np.mean(v))
        sds[k] = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    rec = records["recall"][ok]
    rec = rec[~np.isnan(rec)]
    return McSummary(
        scenario=s,
        means=means,
        sds=sds,
        mean_k_star=float(np.mean(records["k_star"][ok])),
        mean_recall=float(np.mean(rec)) if rec.size else math.nan,
        failures=len(failures),
        successes=successes,
        records=records,
        failure_messages=failures,
    )


SCENARIO_COLUMNS = ("name", "model", "jump_law", "T", "n", "h", "fixed_jump_count", "q", "replications", "seed", "batch", "refine")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def summary_row(sm: McSummary) -> dict:
    s = sm.scenario
    row = {c: (s.T if c == "T" else getattr(s, c)) for c in SCENARIO_COLUMNS}
    for k in ESTIMATOR_COLUMNS:
        row[f"{k}_mean"] = sm.means[k]
        row[f"{k}_sd"] = sm.sds[k]
    row["mean_k_star"] = sm.mean_k_star
    row["mean_recall"] = sm.mean_recall
    row["failures"] = sm.failures
    return row


def emit_table(summaries: list[McSummary]) -> tuple[str, str]:
    """Aligned text table (means with sds beneath) and machine-readable CSV."""
    if not summaries:
        raise ValueError("nothing to tabulate")
    rows = [summary_row(sm) for sm in summaries]

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in header])

    head = ["scenario", "T_n", "n", "h_n", "k*"] + [c for c in ESTIMATOR_COLUMNS] + ["k_hat", "recall", "fail"]
    lines = []
    for sm, row in zip(summaries, rows):
        k = "" if row["fixed_jump_count"] is None else str(row["fixed_jump_count"])
        lines.append(
            [row["name"], f"{row['T']:.1f}", str(row["n"]), f"{row['h']:g}", k]
            + [f"{sm.means[c]:.2f}" for c in ESTIMATOR_COLUMNS]
            + [f"{sm.mean_k_star:.1f}", f"{sm.mean_recall:.3f}", str(sm.failures)]
        )
        lines.append(["", "", "", "", ""] + [f"({sm.sds[c]:.2f})" for c in ESTIMATOR_COLUMNS] + ["", "", ""])
    widths = [max(len(head[i]), *(len(line[i]) for line in lines)) for i in range(len(head))]
    text = [" ".join(h.rjust(w) for h, w in zip(head, widths))]
    text.append(" ".join("-" * w for w in widths))
    text += [" ".join(c.rjust(w) for c, w in zip(line, widths)) for line in lines]
    return "\n".join(text) + "\n", buf.getvalue()


def parse_table_csv(text: str) -> list[dict]:
    """Inverse of the CSV half of :func:`emit_table`."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in row.items():
            if v == "":
                parsed[k] = None
                continue
            try:
                parsed[k] = int(v)
            except ValueError:
                try:
                    parsed[k] = float(v)
                except ValueError:
                    parsed[k] = v
        out.append(parsed)
    return out

"""Command line entry point: simulate, jbtest, estimate, detect, mc.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .detect import DetectOptions, detect
from .errors import JbDetectError
from .estimators import estimate
from .jbtest import PARTS, jb_statistic, jb_test
from .model import REGISTRY, JumpLaw, ThetaTrue, builtin_model
from .montecarlo import Scenario, emit_table, run_scenario
from .pathio import read_path_csv, read_retained, read_sidecar, write_path_csv
from .simulate import SimConfig, simulate_path


@dataclass(frozen=True)
class RunConfig:
    command: str
    options: dict

    def resolved(self) -> dict:
        return {"command": self.command, **self.options}


def _significance(text: str) -> float:
    try:
        q = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number in (0, 1), got {text!r}") from None
    if not 0.0 < q < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in the open interval (0, 1), got {text}")
    return q


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive and finite, got {text}")
    return v


def _vector(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _jump_law(text: str) -> str:
    try:
        JumpLaw.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jbdetect", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def model_arg(sp):
        sp.add_argument("--model", default="sine-vol-ou", choices=sorted(REGISTRY))

    sp = sub.add_parser("simulate", help="simulate a path and write CSV + JSON sidecar")
    model_arg(sp)
    sp.add_argument("--n", type=_positive_int, default=1000)
    sp.add_argument("--h", type=_positive_float, default=0.03)
    sp.add_argument("--alpha", type=_vector, default=[3.0])
    sp.add_argument("--beta", type=_vector, default=[1.0])
    sp.add_argument("--jump-law", type=_jump_law, default="gamma:4,1")
    sp.add_argument("--intensity", type=float, default=None,
                    help="jumps per unit time (ignored when --jumps is given)")
    sp.add_argument("--jumps", type=_nonneg_int, default=None, help="condition on exactly this many jumps")
    sp.add_argument("--refine", type=_positive_int, default=10)
    sp.add_argument("--x0", type=float, default=0.0)
    sp.add_argument("--seed", type=_nonneg_int, default=1)
    sp.add_argument("--stream", type=_nonneg_int, default=0)
    sp.add_argument("--out", required=True, help="output CSV path")

    sp = sub.add_parser("jbtest", help="Jarque-Bera statistic on a path")
    model_arg(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--alpha", type=_vector, default=None, help="default: one-step estimate on the retained set")
    sp.add_argument("--retained", default="all")
    sp.add_argument("--q", type=_significance, default=1e-3)
    sp.add_argument("--parts", choices=PARTS, default="both")

    sp = sub.add_parser("estimate", help="closed-form estimates on a retained set")
    model_arg(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--retained", default="all", help="'all' or a file of 1-based interval numbers")
    sp.add_argument("--oracle", action="store_true", help="also report ground-truth oracle estimates")

    sp = sub.add_parser("detect", help="iterative JB jump detection")
    model_arg(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--q", type=_significance, default=1e-3)
    sp.add_argument("--batch", type=_positive_int, default=1)
    sp.add_argument("--parts", choices=PARTS, default="both")
    sp.add_argument("--k-max", type=_nonneg_int, default=None)
    sp.add_argument("--jb-alpha", choices=("onestep", "lse"), default="onestep")
    sp.add_argument("--out", default=None, help="write JSON here instead of stdout")

    sp = sub.add_parser("mc", help="Monte Carlo replication of a scenario")
    sp.add_argument("--scenario", required=True, help="scenario file, or a shipped name such as t1r1.json")
    sp.add_argument("--jobs", type=_positive_int, default=1)
    sp.add_argument("--replications", type=_positive_int, default=None)
    sp.add_argument("--seed", type=_nonneg_int, default=None)
    sp.add_argument("--out", default=None, help="prefix for <out>.csv and <out>.json")
    return p


def parse_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    opts = vars(ns).copy()
    command = opts.pop("command")
    return RunConfig(command, opts)


def _provenance(cfg: RunConfig, seed=None) -> dict:
    return {"tool": "jbdetect", "version": __version__, "config": cfg.resolved(), "seed": seed}


def _dump(doc: dict, out=None):
    text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _input_seed(path) -> int | None:
    side = read_sidecar(path)
    if side and isinstance(side.get("seed"), int):
        return side["seed"]
    return None


def cmd_simulate(cfg: RunConfig) -> int:
    o = cfg.options
    n, h = o["n"], o["h"]
    intensity = o["intensity"]
    if intensity is None:
        intensity = 0.0 if o["jumps"] is None else o["jumps"] / (n * h)
    law = JumpLaw.parse(o["jump_law"], intensity)
    m = builtin_model(o["model"], law)
    sim = SimConfig(
        n=n, h=h, theta=ThetaTrue(o["alpha"], o["beta"]), refine=o["refine"], x0=o["x0"],
        fixed_jump_count=o["jumps"], seed=o["seed"], stream=o["stream"],
    )
    path = simulate_path(m, sim)
    meta = _provenance(cfg, o["seed"])
    meta["model"] = m.to_dict()
    meta["simulation"] = sim.to_dict()
    side = write_path_csv(path, o["out"], meta)
    print(f"wrote {o['out']} and {side} ({int(path.jump_counts.sum())} jumps)", file=sys.stderr)
    return 0


def cmd_jbtest(cfg: RunConfig) -> int:
    o = cfg.options
    path = read_path_csv(o["input"])
    m = builtin_model(o["model"])
    retained = read_retained(o["retained"], path.n)
    alpha = o["alpha"]
    if alpha is None:
        alpha = estimate(m, path.x, path.h, retained).alpha_onestep
    res = jb_test(jb_statistic(m, path.x, path.h, alpha, retained, o["parts"]), o["q"])
    doc = _provenance(cfg, _input_seed(o["input"]))
    doc.update(res.to_dict())
    doc["alpha"] = np.asarray(alpha, dtype=float).tolist()
    _dump(doc)
    return 0


def cmd_estimate(cfg: RunConfig) -> int:
    from .estimators import oracle_estimates

    o = cfg.options
    path = read_path_csv(o["input"])
    m = builtin_model(o["model"])
    retained = read_retained(o["retained"], path.n)
    rep = estimate(m, path.x, path.h, retained)
    doc = _provenance(cfg, _input_seed(o["input"]))
    doc["report"] = rep.to_dict()
    if o["oracle"]:
        if path.x_cont is None:
            raise ValueError("--oracle needs x_cont and jump_count columns in the input")
        orc = oracle_estimates(m, path)
        doc["oracle"] = {"cont": orc.cont.to_dict(), "no_jump": orc.no_jump.to_dict()}
    _dump(doc)
    return 0


def cmd_detect(cfg: RunConfig) -> int:
    o = cfg.options
    path = read_path_csv(o["input"])
    m = builtin_model(o["model"])
    opts = DetectOptions(q=o["q"], batch=o["batch"], parts=o["parts"], k_max=o["k_max"], jb_alpha=o["jb_alpha"])
    state = detect(m, path.x, path.h, opts=opts)
    doc = _provenance(cfg, _input_seed(o["input"]))
    doc.update(state.to_dict())
    # removals per unit time; descriptive only, not an intensity estimator
    doc["removed_per_unit_time"] = state.k_star / (path.n * path.h)
    if path.jump_counts is not None:
        from .detect import recall

        doc["recall"] = recall(state, path.jump_intervals())
    _dump(doc, o["out"])
    return 0


def load_scenario(ref: str) -> Scenario:
    p = Path(ref)
    if p.exists():
        return Scenario.from_text(p.read_text())
    shipped = resources.files("jbdetect") / "scenarios" / p.name
    if shipped.is_file():
        return Scenario.from_text(shipped.read_text())
    raise FileNotFoundError(f"scenario file not found: {ref}")


def cmd_mc(cfg: RunConfig) -> int:
    o = cfg.options
    s = load_scenario(o["scenario"])
    overrides = {k: o[k] for k in ("replications", "seed") if o[k] is not None}
    if overrides:
        s = Scenario.from_dict({**s.to_dict(), **overrides})
    summary = run_scenario(s, jobs=o["jobs"])
    text, csv_text = emit_table([summary])
    sys.stdout.write(text)
    if o["out"]:
        out = Path(o["out"])
        Path(f"{out}.csv").write_text(csv_text)
        doc = {
            "tool": "jbdetect",
            "version": __version__,
            "config": {"command": "mc", "scenario": s.to_dict()},
            "seed": s.seed,
            "summary": summary.to_dict(),
        }
        Path(f"{out}.json").write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "jbtest": cmd_jbtest,
    "estimate": cmd_estimate,
    "detect": cmd_detect,
    "mc": cmd_mc,
}


def main(argv=None) -> int:
    cfg = parse_args(argv)
    try:
        return COMMANDS[cfg.command](cfg)
    except (JbDetectError, ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"jbdetect {cfg.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

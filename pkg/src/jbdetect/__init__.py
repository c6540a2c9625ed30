"""Jump-robust estimation for ergodic jump diffusions via iterative Jarque-Bera testing."""

__version__ = "0.1.0"

from .detect import DetectionState, DetectOptions, classify, detect, detect_batched
from .estimators import (
    EstimateReport,
    alpha_lse,
    alpha_onestep,
    beta_plugin,
    estimate,
    oracle_estimates,
    sigma0_plugin,
    solve_spd,
)
from .jbtest import JbResult, jb_statistic, jb_test
from .model import JumpLaw, ModelSpec, ThetaTrue, builtin_model, eval_diffusion_sq
from .residuals import euler_residuals, normalize
from .simulate import SamplePath, SimConfig, simulate_path, simulate_paths

__all__ = [
    "DetectOptions", "DetectionState", "EstimateReport", "JbResult", "JumpLaw", "ModelSpec",
    "SamplePath", "SimConfig", "ThetaTrue", "alpha_lse", "alpha_onestep", "beta_plugin",
    "builtin_model", "classify", "detect", "detect_batched", "estimate", "euler_residuals",
    "eval_diffusion_sq", "jb_statistic", "jb_test", "normalize", "oracle_estimates",
    "sigma0_plugin", "simulate_path", "simulate_paths", "solve_spd",
]

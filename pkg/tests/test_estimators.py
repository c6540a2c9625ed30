import math

import mpmath
import numpy as np
import pytest

from jbdetect.errors import NonPositiveDiffusion, SingularNormalMatrix
from jbdetect.estimators import (
    Design,
    alpha_lse,
    alpha_onestep,
    beta_plugin,
    estimate,
    gql_score,
    oracle_estimates,
    sigma0_plugin,
    solve_spd,
)
from jbdetect.model import ModelSpec, ThetaTrue, builtin_model
from jbdetect.simulate import SimConfig, simulate_path, simulate_paths

from conftest import golden_section, path_from_increments


def test_solve_spd_examples():
    np.testing.assert_array_equal(solve_spd(np.eye(2), [3.0, 1.0]).y, [3.0, 1.0])
    np.testing.assert_allclose(solve_spd([[2.0, 0.0], [0.0, 4.0]], [2.0, 8.0]).y, [1.0, 2.0], rtol=1e-15)


def test_solve_spd_random_matrices():
    rng = np.random.default_rng(11)
    for _ in range(20):
        G = rng.normal(size=(5, 5))
        M = G @ G.T + 0.5 * np.eye(5)
        y = rng.normal(size=5)
        sol = solve_spd(M, M @ y)
        np.testing.assert_allclose(sol.y, y, rtol=1e-10, atol=1e-10)
        assert sol.method == "cholesky"
        assert 0 < sol.rcond <= 1


def test_solve_spd_indefinite_falls_back_to_lu():
    sol = solve_spd([[0.0, 1.0], [1.0, 0.0]], [2.0, 3.0])
    assert sol.method == "lu"
    np.testing.assert_allclose(sol.y, [3.0, 2.0])


def test_solve_spd_singular():
    with pytest.raises(SingularNormalMatrix):
        solve_spd([[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0])
    with pytest.raises(SingularNormalMatrix):
        solve_spd(np.zeros((2, 2)), [1.0, 2.0])


def test_lse_exact_fit(const):
    x = path_from_increments(np.full(6, 0.1))
    assert alpha_lse(const, x, 0.01)[0] == pytest.approx(1.0, rel=1e-14)


def test_lse_mean_of_squares(const):
    x = path_from_increments([math.sqrt(0.01), -math.sqrt(0.03)])
    assert alpha_lse(const, x, 0.01)[0] == pytest.approx(2.0, rel=1e-14)


def test_lse_matches_golden_section(sine, six_point_path):
    x, h = six_point_path
    dx, A = np.diff(x), 1.0 / (1.0 + np.sin(x[:-1]) ** 2)
    ref = golden_section(lambda a: np.sum((dx**2 - h * A * a) ** 2), 0.0, 100.0)
    assert alpha_lse(sine, x, h)[0] == pytest.approx(ref, abs=1e-6)


def test_onestep_fixed_point_constant_basis(const):
    dx = np.array([0.12, -0.05, 0.2, -0.11, 0.03])
    x, h = path_from_increments(dx), 0.01
    a_tilde = np.mean(dx**2 / h)
    assert alpha_onestep(const, x, h, alpha_init=[a_tilde])[0] == pytest.approx(a_tilde, rel=1e-14)
    assert alpha_onestep(const, x, h)[0] == pytest.approx(a_tilde, rel=1e-14)


def test_onestep_zero_score_fixed_point(sine):
    h, alpha = 0.02, 2.7
    states = np.array([0.0, 0.4, -1.1, 2.3, 0.9, -0.2])
    A = 1.0 / (1.0 + np.sin(states) ** 2)
    mag = np.sqrt(h * A * alpha) * np.array([1, -1, 1, 1, -1, 1])
    # states are fixed, so build x as pairs sharing the states through dx
    x = np.append(states, states[-1] + mag[-1])
    dx = mag
    out = alpha_onestep(sine, x, h, alpha_init=[alpha], dx=dx)
    assert out[0] == pytest.approx(alpha, rel=1e-13)


def test_onestep_high_precision_oracle(sine, six_point_path):
    x, h = six_point_path
    mpmath.mp.dps = 40
    a0 = mpmath.mpf("2.5")
    hh = mpmath.mpf(h)
    num, den = mpmath.mpf(0), mpmath.mpf(0)
    for j in range(1, len(x)):
        s = mpmath.mpf(x[j - 1])
        A = 1 / (1 + mpmath.sin(s) ** 2)
        a2 = A * a0
        d = mpmath.mpf(x[j]) - s
        den += A * A / a2**2
        num += (1 / a2 - d**2 / (hh * a2**2)) * A
    ref = float(a0 - num / den)
    assert alpha_onestep(sine, x, h, alpha_init=[2.5])[0] == pytest.approx(ref, rel=1e-8)


def _const_drift():
    return builtin_model("const-drift")


def test_beta_plugin_constant_drift():
    m = _const_drift()
    x = path_from_increments(np.full(5, 0.02))
    assert beta_plugin(m, x, 0.01, alpha_hat=[1.0])[0] == pytest.approx(2.0, rel=1e-14)
    x0 = path_from_increments(np.zeros(5))
    assert beta_plugin(m, x0, 0.01, alpha_hat=[1.0])[0] == 0.0


def test_beta_plugin_matches_golden_section(sine, six_point_path):
    x, h = six_point_path
    s = x[:-1]
    dx, A, B = np.diff(x), 1.0 / (1.0 + np.sin(s) ** 2), -s
    ref = golden_section(lambda b: np.sum((dx - h * B * b) ** 2 / (A * 3.0)), -200.0, 200.0)
    assert beta_plugin(sine, x, h, alpha_hat=[3.0])[0] == pytest.approx(ref, abs=1e-6)


def test_normal_equation_residuals(sine):
    path = simulate_path(sine, SimConfig(n=400, h=0.03, theta=ThetaTrue(3, 1), seed=4))
    x, h = path.x, path.h
    mask = np.ones(400, dtype=bool)
    mask[::7] = False
    d = Design(sine, x, h)
    a = alpha_lse(sine, x, h, mask)
    A, dx = d.A[mask, 0], d.inc[mask]
    lhs = np.sum((dx**2 - h * A * a[0]) * A)
    assert abs(lhs) <= 1e-8 * np.sum(np.abs(dx**2 * A))
    b = beta_plugin(sine, x, h, mask, alpha_hat=[3.0])
    B, a2 = d.B[mask, 0], 3.0 * A
    lhs = np.sum((dx - h * B * b[0]) * B / a2)
    assert abs(lhs) <= 1e-8 * np.sum(np.abs(dx * B / a2))


def test_score_reduction(sine):
    path = simulate_path(sine, SimConfig(n=2000, h=0.01, theta=ThetaTrue(3, 1), seed=21))
    for init in (2.75, 2.9, 3.2, 3.3):
        before = abs(gql_score(sine, path.x, path.h, [init])[0])
        after_alpha = alpha_onestep(sine, path.x, path.h, alpha_init=[init])
        after = abs(gql_score(sine, path.x, path.h, after_alpha)[0])
        assert after <= before


def test_score_mean_zero_at_truth(sine):
    cfg = SimConfig(n=500, h=0.01, theta=ThetaTrue(3, 1), seed=5)
    paths = simulate_paths(sine, cfg, range(200))
    scores = np.array([gql_score(sine, p.x, p.h, [3.0])[0] for p in paths])
    se = scores.std(ddof=1) / math.sqrt(len(scores))
    assert abs(scores.mean()) <= 3 * se


def test_sigma0_constant_model():
    m = _const_drift()
    x = path_from_increments([0.1, -0.2, 0.05, 0.3])
    sa, sb = sigma0_plugin(m, x, 0.01, alpha_hat=[2.0])
    assert sa[0, 0] == pytest.approx(8.0, rel=1e-14)
    assert sb[0, 0] == pytest.approx(2.0, rel=1e-14)


def test_sigma0_scalar_alpha_identity(sine):
    path = simulate_path(sine, SimConfig(n=300, h=0.03, theta=ThetaTrue(3, 1), seed=2))
    sa, _ = sigma0_plugin(sine, path.x, path.h, alpha_hat=[3.0])
    # A / (A alpha) = 1 / alpha for a one-dimensional diffusion basis
    assert sa[0, 0] == pytest.approx(18.0, rel=1e-12)


def test_oracle_equals_plain_without_jumps(sine):
    path = simulate_path(sine, SimConfig(n=300, h=0.03, theta=ThetaTrue(3, 1), seed=7))
    orc = oracle_estimates(sine, path)
    plain = estimate(sine, path.x, path.h)
    for rep in (orc.cont, orc.no_jump):
        assert np.array_equal(rep.alpha_lse, plain.alpha_lse)
        assert np.array_equal(rep.alpha_onestep, plain.alpha_onestep)
        assert np.array_equal(rep.beta, plain.beta)


def test_oracle_needs_ground_truth(sine):
    from jbdetect.simulate import SamplePath

    with pytest.raises(ValueError):
        oracle_estimates(sine, SamplePath(x=np.zeros(5), h=0.1))


def test_collinear_basis_is_singular():
    def A(x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.ones_like(x), 2.0 * np.ones_like(x)], axis=-1)

    def dA(x):
        return np.zeros(np.shape(x) + (2,))

    def B(x):
        return -np.asarray(x, dtype=float)[..., None]

    m = ModelSpec("collinear", 2, 1, A, dA, B, lambda x: np.ones_like(x))
    x = path_from_increments([0.1, -0.2, 0.05, 0.3, 0.1])
    with pytest.raises(SingularNormalMatrix):
        alpha_lse(m, x, 0.01)


def test_non_positive_diffusion_in_onestep(const):
    x = path_from_increments([0.1, -0.2, 0.05])
    with pytest.raises(NonPositiveDiffusion):
        alpha_onestep(const, x, 0.01, alpha_init=[-1.0])


def test_report_fields(sine, six_point_path):
    x, h = six_point_path
    rep = estimate(sine, x, h, retained=[1, 2, 4, 5, 6])
    assert rep.retained_count == 5
    d = rep.to_dict()
    assert set(d) >= {"alpha_lse", "alpha_onestep", "beta", "sigma_alpha", "sigma_beta"}
    assert rep.diagnostics["rcond_lse"] == pytest.approx(1.0)

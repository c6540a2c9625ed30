import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jbdetect.jbtest import JbResult, jb_statistic, jb_test
from jbdetect.rngdist import chisq1_upper_quantile, chisq2_upper_quantile

from conftest import path_from_increments

# path of a fixed shape used by the high-precision oracle below
TEN_POINT = [0.0, 0.21, -0.05, 0.34, 0.12, 0.58, 0.47, 1.32, 0.96, 1.05, 0.88]


def _gaussian_moment_set():
    # four points +-a, +-b cannot reach kurtosis 3 (it would need a^2 b^2 = -1);
    # eight points +-a (three times each) and +-b can:
    # 3a^2 + b^2 = 4 and 3a^4 + b^4 = 12 give a^2 = 1 - sqrt(2/3)
    a2 = 1.0 - math.sqrt(2.0 / 3.0)
    a, b = math.sqrt(a2), math.sqrt(4.0 - 3.0 * a2)
    return np.array([a, a, a, b, -a, -a, -a, -b])


def test_jb_zero_for_gaussian_moment_match(const):
    eps = _gaussian_moment_set()
    assert np.mean(eps**4) == pytest.approx(3.0, rel=1e-14)
    h = 0.01
    x = path_from_increments(eps * math.sqrt(h))
    r = jb_statistic(const, x, h, [1.0])
    assert r.jb == pytest.approx(0.0, abs=1e-24)
    assert r.correction == 0.0


def test_symmetric_residuals_have_no_skew_part(const):
    eps = np.array([-1.5, -0.5, 0.5, 1.5, 0.5, -0.5]) * 0.7
    x = path_from_increments(eps * 0.1)
    r = jb_statistic(const, x, 0.01, [2.0])
    assert r.skew_part == pytest.approx(0.0, abs=1e-28)
    assert r.jb == r.kurt_part
    N = (eps - eps.mean()) / eps.std()
    assert r.kurt_part == pytest.approx(np.sum(N**4 - 3) ** 2 / (24 * 6), rel=1e-12)


def _jb_mpmath(x, h, alpha, retained):
    mpmath.mp.dps = 50
    xs = [mpmath.mpf(v) for v in x]
    hh, al = mpmath.mpf(h), mpmath.mpf(alpha)
    eps, da = [], []
    for j in retained:
        s = xs[j - 1]
        A = 1 / (1 + mpmath.sin(s) ** 2)
        dA = -mpmath.sin(2 * s) / (1 + mpmath.sin(s) ** 2) ** 2
        a2 = A * al
        eps.append((xs[j] - xs[j - 1]) / mpmath.sqrt(a2 * hh))
        da.append(dA * al / (2 * mpmath.sqrt(a2)))
    m = len(eps)
    mean = sum(eps) / m
    var = sum((e - mean) ** 2 for e in eps) / m
    N = [(e - mean) / mpmath.sqrt(var) for e in eps]
    skew = (sum(v**3 for v in N) - 3 * mpmath.sqrt(hh) * sum(da)) ** 2 / (6 * m)
    kurt = sum(v**4 - 3 for v in N) ** 2 / (24 * m)
    return float(skew), float(kurt)


@pytest.mark.parametrize("retained", [None, [1, 2, 3, 5, 6, 8, 9, 10]])
def test_against_high_precision_oracle(sine, retained):
    h = 0.03
    r = jb_statistic(sine, TEN_POINT, h, [3.0], retained)
    idx = list(range(1, 11)) if retained is None else retained
    skew, kurt = _jb_mpmath(TEN_POINT, h, 3.0, idx)
    assert r.skew_part == pytest.approx(skew, rel=1e-12, abs=1e-15)
    assert r.kurt_part == pytest.approx(kurt, rel=1e-12)
    assert r.jb == pytest.approx(skew + kurt, rel=1e-12)
    assert r.retained_count == len(idx)


def test_rejection_thresholds():
    base = JbResult(0.0, 0.0, 0.0, 0.0, 100)
    assert jb_test(base, 0.05).reject is False
    r = jb_test(JbResult(13.9, 13.9, 0.0, 0.0, 100), 1e-3)
    assert r.reject is True
    assert r.threshold == pytest.approx(13.815510557964274, rel=1e-14)
    edge = chisq2_upper_quantile(1e-3)
    assert jb_test(JbResult(edge, edge, 0.0, 0.0, 100), 1e-3).reject is False


def test_single_part_uses_one_degree_of_freedom(sine):
    r = jb_statistic(sine, TEN_POINT, 0.03, [3.0], parts="skew")
    assert r.jb == r.skew_part
    t = jb_test(r, 0.05)
    assert t.threshold == pytest.approx(3.841458820694124, abs=1e-9)
    assert t.threshold == pytest.approx(chisq1_upper_quantile(0.05), abs=0)
    k = jb_statistic(sine, TEN_POINT, 0.03, [3.0], parts="kurt")
    assert k.jb == k.kurt_part
    with pytest.raises(ValueError):
        jb_statistic(sine, TEN_POINT, 0.03, [3.0], parts="neither")


def test_needs_five_retained(sine):
    with pytest.raises(ValueError):
        jb_statistic(sine, TEN_POINT, 0.03, [3.0], retained=[1, 2, 3, 4])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=6, max_size=30), st.floats(-2, 2))
def test_invariant_to_constant_shift(eps, shift):
    from jbdetect.model import builtin_model

    const = builtin_model("const-ou")
    eps = np.array(eps)
    if np.var(eps) < 1e-4:
        return
    h = 0.01
    a = jb_statistic(const, path_from_increments(eps * math.sqrt(h)), h, [1.0])
    b = jb_statistic(const, path_from_increments((eps + shift) * math.sqrt(h)), h, [1.0])
    assert b.jb == pytest.approx(a.jb, rel=1e-7, abs=1e-9)
    assert a.jb >= 0.0

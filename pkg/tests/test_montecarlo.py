import math

import numpy as np
import pytest

from jbdetect.montecarlo import (
    ESTIMATOR_COLUMNS,
    Scenario,
    emit_table,
    parse_table_csv,
    run_chunk,
    run_scenario,
)


def _small(**kw):
    base = dict(name="small", n=300, h=0.03, fixed_jump_count=5, replications=60, seed=3)
    base.update(kw)
    return Scenario(**base)


@pytest.fixture(scope="module")
def small_summary():
    return run_scenario(_small())


def test_no_jump_scenario_gives_identical_estimators():
    sm = run_scenario(_small(jump_law="none", fixed_jump_count=None, replications=40))
    rec = sm.records
    assert np.array_equal(rec["alpha0"], rec["alpha_kstar"])
    assert np.array_equal(rec["beta0"], rec["beta_kstar"])
    assert np.array_equal(rec["alpha0"], rec["alpha_cont"])
    assert math.isnan(sm.mean_recall)


def test_summary_moments_match_records(small_summary):
    sm = small_summary
    assert sm.successes == 60 and sm.failures == 0
    for k in ESTIMATOR_COLUMNS:
        assert sm.means[k] == np.mean(sm.records[k])
        assert sm.sds[k] == np.std(sm.records[k], ddof=1)
    assert np.all(sm.records["true_jump_intervals"] <= 5)
    # jumps inflate the full-sample diffusion estimate
    assert sm.means["alpha0"] > sm.means["alpha_kn"]


def test_chunks_are_independent_of_grouping():
    s = _small(replications=12)
    whole = run_chunk(s, 0, 12)
    parts = run_chunk(s, 0, 5) + run_chunk(s, 5, 12)
    assert whole == parts


def test_worker_count_does_not_change_results():
    s = _small(replications=120)
    a = run_scenario(s, jobs=1)
    b = run_scenario(s, jobs=2)
    assert emit_table([a])[1] == emit_table([b])[1]
    for k in a.records:
        assert np.array_equal(a.records[k], b.records[k], equal_nan=True)


def test_failures_are_counted_not_fatal(monkeypatch):
    import jbdetect.montecarlo as mc

    real = mc._replicate

    def flaky(m, s, path):
        if path.config.stream == 2:
            raise ValueError("boom")
        return real(m, s, path)

    monkeypatch.setattr(mc, "_replicate", flaky)
    sm = run_scenario(_small(replications=6))
    assert sm.failures == 1 and sm.successes == 5
    assert "replication 2" in sm.failure_messages[0]
    assert np.isnan(sm.records["alpha0"][2])
    assert sm.means["alpha0"] == np.mean(np.delete(sm.records["alpha0"], 2))


def test_emit_table_rows(small_summary):
    other = run_scenario(_small(name="second", replications=5))
    text, csv_text = emit_table([small_summary])
    assert len(csv_text.strip().splitlines()) == 2
    rows = parse_table_csv(emit_table([small_summary, other])[1])
    assert [r["name"] for r in rows] == ["small", "second"]
    assert "alpha_kn" in text.splitlines()[0]
    with pytest.raises(ValueError):
        emit_table([])


def test_csv_round_trip(small_summary):
    row = parse_table_csv(emit_table([small_summary])[1])[0]
    for k in ESTIMATOR_COLUMNS:
        assert row[f"{k}_mean"] == pytest.approx(small_summary.means[k], rel=1e-12)
        assert row[f"{k}_sd"] == pytest.approx(small_summary.sds[k], rel=1e-12)
    assert row["n"] == 300 and row["fixed_jump_count"] == 5


def test_scenario_parsing():
    s = Scenario.from_text('{"name": "a", "n": 500, "h": 0.02}')
    assert (s.n, s.h, s.T) == (500, 0.02, 10.0)
    kv = Scenario.from_text("name = b\nn = 400  # comment\nfixed_jump_count = none\njump_law = big:2,1,4,1\n")
    assert kv.n == 400 and kv.fixed_jump_count is None and kv.law().kind == "big"
    with pytest.raises(ValueError, match="unknown scenario keys: colour"):
        Scenario.from_dict({"colour": "red"})
    with pytest.raises(ValueError):
        Scenario.from_text("n: 3")
    with pytest.raises(ValueError):
        Scenario(replications=0)
    assert Scenario.from_dict(s.to_dict()) == s


def test_default_intensity_matches_fixed_count():
    s = Scenario(n=1000, h=0.03, fixed_jump_count=15)
    assert s.law().intensity == pytest.approx(0.5)

import json
import math

import numpy as np
import pytest
from scipy import integrate

from imgeo import flow, params, stats
from imgeo.stats import TestReport


def report(stat, thr, rule):
    return TestReport("t", 1, 1, stat, thr, rule, [1, 2])


@pytest.mark.parametrize("stat,thr,rule,verdict", [
    (0.5, 0.9, ">=", "fail"), (0.9, 0.9, ">=", "pass"), (0.9, 0.9, ">", "fail"),
    (0.04, 0.05, "<", "pass"), (0.05, 0.05, "<", "fail"), (1, 1, "<=", "pass"), (2, 1, "<=", "fail"),
])
def test_verdict_rule(stat, thr, rule, verdict):
    assert report(stat, thr, rule).verdict == verdict


def test_report_json_leaves_out_runtime():
    r = report(0.1, 0.2, "<")
    r.runtime = 12.5
    r.details = {"x": np.float64(0.25), "k": np.int64(3), "a": np.arange(2), "bad": float("nan")}
    d = json.loads(r.to_json())
    assert "runtime" not in d and d["verdict"] == "pass"
    assert d["details"] == {"x": 0.25, "k": 3, "a": [0, 1], "bad": "nan"}
    r.runtime = 99.0
    assert r.to_json() == json.dumps(d, sort_keys=True)


def test_trial_seeds_are_stable_and_distinct():
    a = stats.trial_seeds(7, "merging", 5)
    assert a == stats.trial_seeds(7, "merging", 5)
    assert a[:3] == stats.trial_seeds(7, "merging", 3)
    assert len(set(a)) == 5
    assert set(a).isdisjoint(stats.trial_seeds(7, "twisting", 5))
    assert a != stats.trial_seeds(8, "merging", 5)


def test_committed_manifest_matches_golden():
    golden = stats.load_golden()
    assert stats.load_manifest() == json.loads(json.dumps(stats.build_manifest(golden)))


def test_golden_thresholds():
    t = stats.load_golden()["tests"]
    assert t["merging"]["config"]["threshold"] == 0.9
    assert t["theta_stationary"]["config"]["threshold"] == 0.05
    assert t["beta_recovery"]["config"]["threshold"] == 0.3
    assert t["twisting"]["config"]["threshold"] == 10.0
    assert t["order_soundness"]["config"]["threshold"] == 0.95
    assert t["reversal"]["config"]["alpha"] == 0.01
    assert t["transience"]["config"]["ratio"] == 4.0 and t["transience"]["config"]["threshold"] == 0.9
    assert set(t) == set(stats.CHECKS)


@pytest.mark.parametrize("kappa,rho", [(2.0, 0.0), (3.0, 1.0), (8 / 3, -2 / 3), (1.0, 0.5)])
def test_stationary_cdf_against_quadrature(kappa, rho):
    F = stats.theta_stationary_cdf(kappa, rho)
    p = 2 * (rho + 2) / kappa
    f = lambda x: math.sin(x / 2) ** p
    total = integrate.quad(f, 0, 2 * math.pi)[0]
    for x in (0.3, 1.0, math.pi, 4.0, 6.0):
        assert F(x) == pytest.approx(integrate.quad(f, 0, x)[0] / total, abs=1e-6)


def test_stationary_density_exponents():
    # rho = kappa/2 - 2 gives sin(theta/2): CDF (1 - cos(theta/2))/2
    F = stats.theta_stationary_cdf(3.0, -0.5)
    assert F(1.3) == pytest.approx((1 - math.cos(0.65)) / 2, abs=1e-7)
    # (2, 0) gives sin^2(theta/2): CDF (theta - sin theta)/(2 pi)
    F = stats.theta_stationary_cdf(2.0, 0.0)
    assert F(2.0) == pytest.approx((2.0 - math.sin(2.0)) / (2 * math.pi), abs=1e-7)


def test_crossing_budget():
    c = params.derive_constants(2.0)
    assert stats.crossing_budget(0.0, c.chi) == 1
    assert stats.crossing_budget(c.chi, c.chi) == 1  # floor(1/4) = 0 extra
    assert stats.crossing_budget(-0.75 * c.chi, c.chi) == 3


def test_angle_gap_pi_never_merges():
    c = params.derive_constants(4 / 3)
    for k in range(-3, 4):
        d = flow.HeightDifference(flow.height_difference(0.0, math.pi, k, c), k, "right")
        assert flow.classify_interaction(d, c) != "merges"


def test_merging_identical_starts():
    cfg = {"kappa": 4 / 3, "n": 60, "step": 0.01, "pairs": 3, "half_window": 0.5, "threshold": 0.9,
           "coincide": True}
    r = stats.test_merging(cfg, [1, 2])
    assert r.statistic == 1.0 and r.verdict == "pass"


def test_small_crossing_run_is_reproducible():
    cfg = {"kappa": 2.0, "n": 40, "step": 0.01, "gaps": [0.5, 1.5]}
    a = stats.test_crossing_bound(cfg, [3, 4])
    b = stats.test_crossing_bound(cfg, [3, 4])
    assert a.to_json() == b.to_json()
    assert a.trials == 4 and a.details["budget"] == 1


def test_run_check_unknown_name():
    with pytest.raises(KeyError):
        stats.run_check("nonsense")


def test_table_and_rows():
    r = report(0.1, 0.2, "<")
    assert stats.summary_rows([r])[0][:2] == ("t", "pass")
    assert "verdict" in stats.format_table([r]).splitlines()[0]
    assert "seconds" not in stats.format_table([r], runtimes=False)


def test_report_json_accepts_numpy_counts():
    r = stats.TestReport("x", np.int64(4), np.int64(3), np.int64(1), 0, "<=", [5], {"ok": np.bool_(True)})
    d = json.loads(r.to_json())
    assert d["passes"] == 3 and d["trials"] == 4 and d["details"]["ok"] is True

"""End-to-end acceptance suite over the bundled scenarios.

Each test prints one ``CRITERION n: PASS|FAIL ...`` line; the lines are
repeated in the terminal summary. Run directly with
``python tests/test_acceptance.py`` or through pytest.
"""

import math
import time

import pytest

from kreinlab.runner import run
from kreinlab.scenario import load_scenario

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow

COEFFICIENT_SCENARIOS = ("free", "gauss03", "bump03")
_RUNS = {}


def report(name):
    if name not in _RUNS:
        t0 = time.perf_counter()
        rep = run(load_scenario(name))
        _RUNS[name] = (rep, time.perf_counter() - t0)
    return _RUNS[name][0]


def _fmt(v):
    return f"{v:.3g}" if isinstance(v, float) else str(v)


def verdict(n, checks, details):
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    text = " ".join(f"{k}={_fmt(v)}" for k, v in details.items())
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {text}"
    if failed:
        line += f"  failed: {', '.join(failed)}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_free_collapse():
    rep = report("free")
    cf = rep.record("closed-form")
    sc = rep.record("scatter")
    o, s = cf.observed, sc.observed
    gaps = [float(g) for g in s["cauchy_gaps"]]
    runtime = cf.runtime_s + sc.runtime_s
    verdict(1, {
        "P": o["P_error"] < 1e-10 and o["r_max"] >= 20 and o["k_max"] >= 10,
        "Pi": o["Pi_error"] < 1e-10,
        "density": o["density_error"] < 1e-10,
        "gaps": max(gaps) < 1e-6,
        "identity": s["identity_distance"] < 1e-6,
        "runtime": runtime < 60,
    }, {"P_err": o["P_error"], "Pi_err": o["Pi_error"], "density_err": o["density_error"],
        "max_gap": max(gaps), "identity": s["identity_distance"], "runtime_s": runtime})


def test_criterion_2_identities():
    checks, details, runtime = {}, {}, 0.0
    for name in COEFFICIENT_SCENARIOS:
        rec = report(name).record("identities")
        runtime += rec.runtime_s
        res = rec.observed["residuals"]
        worst = max(res["conjugation"][0], res["integral"][0])
        ratios = [r for r in rec.observed["decay_ratio"].values() if r is not None]
        checks[f"{name}_residual"] = worst < 1e-7 and rec.observed["steps"][0] == 1e-3
        checks[f"{name}_decay"] = all(12 <= r <= 20 for r in ratios)
        details[f"{name}_res"] = worst
        details[f"{name}_ratios"] = "/".join(f"{r:.2f}" for r in ratios) or "exact"
    checks["runtime"] = runtime < 300
    details["runtime_s"] = runtime
    verdict(2, checks, details)


def test_criterion_3_isometries():
    checks, details = {}, {}
    for name in COEFFICIENT_SCENARIOS:
        o = report(name).record("plancherel").observed
        worst = max(o["plancherel_defect"], o["psi_defect"], o["E_defect"], o["odd_fft_defect"])
        checks[name] = worst < 1e-3 and o["k_max"] == 50
        details[name] = worst
    verdict(3, checks, details)


def test_criterion_4_normalization():
    checks, details = {}, {}
    for name in COEFFICIENT_SCENARIOS:
        o = report(name).record("normalization").observed
        checks[name] = o["ratio"] <= 10
        details[name] = o["ratio"]
    verdict(4, checks, details)


def test_criterion_5_maximal():
    checks, details = {}, {}
    for name in COEFFICIENT_SCENARIOS:
        o = report(name).record("mr-check").observed
        tail = o["tail"]
        checks[f"{name}_count"] = o["count"] == 100
        checks[f"{name}_ratio"] = max(o["integer_ratio_max"], o["continuous_ratio_max"]) <= 25
        checks[f"{name}_tail"] = tail["nonincreasing"] is True and tail["zero_beyond_support"]
        details[f"{name}_int"] = o["integer_ratio_max"]
        details[f"{name}_cont"] = o["continuous_ratio_max"]
    verdict(5, checks, details)


def test_criterion_6_wave_operator():
    rep = report("gauss03")
    rec = rep.record("scatter")
    o = rec.observed
    gaps = [float(g) for g in o["cauchy_gaps"]]
    dist = float(o["window_distances"][-1])
    verdict(6, {
        "times": list(o["times"]) == [5.0, 10.0, 20.0, 40.0, 80.0],
        "decreasing": all(b < a for a, b in zip(gaps, gaps[1:])),
        "window": dist < 5e-2,
        "norm": abs(o["limit_norm_ratio"] - 1) <= 1e-3,
        "runtime": rec.runtime_s < 900,
    }, {"gaps": "/".join(f"{g:.2g}" for g in gaps), "window_dist_t80": dist,
        "p_ratio": o["limit_norm_ratio"], "runtime_s": rec.runtime_s})


def test_criterion_7_crosscheck():
    checks, details = {}, {}
    for name in COEFFICIENT_SCENARIOS:
        o = report(name).record("crosscheck").observed
        diffs = [d for t, d in zip(o["times"], o["l2_difference"]) if t <= 10]
        checks[name] = max(diffs) < 1e-3
        details[name] = max(diffs)
    verdict(7, checks, details)


def test_criterion_8_appendix():
    o = report("appendix").record("asympt").observed
    fr, ph, fe, un = o["fresnel"], o["phase"], o["free"], o["uniform"]
    verdict(8, {
        "H0": fr["H0_error"] < 1e-10,
        "branch": fr["branch_gap"] < 1e-8,
        "c0": fr["c0_exact"] is True,
        "phase": ph["pass"] and min(ph["eps"]) <= 1e-4 and max(ph["eps"]) >= 1e-1,
        "free": fe["factor"] >= 10 and fe["times"][0] == 1 and fe["times"][-1] == 100,
        "uniform": un["flatness"] < 0.25,
    }, {"H0_err": fr["H0_error"], "branch": fr["branch_gap"],
        "phase_max_ratio": max(ph["ratios"]), "free_factor": fe["factor"],
        "flatness": un["flatness"]})


def test_criterion_9_determinism():
    first = report("free")
    again = run(load_scenario("free"), cache_dir=None)
    same = first.canonical() == again.canonical()
    verdict(9, {"identical": same, "passed": first.passed and again.passed},
            {"scenario": "free", "experiments": len(again.records),
             "rerun_uncached": True})


def test_all_bundled_scenarios_pass():
    for name in COEFFICIENT_SCENARIOS + ("appendix",):
        rep = report(name)
        bad = [r.name for r in rep.records if not r.passed]
        assert rep.passed, f"{name}: failing experiments {bad}"
        assert not any(math.isnan(r.runtime_s) for r in rep.records)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))

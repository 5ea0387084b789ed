import numpy as np
import pytest

from mblab.energy import glue
from mblab.grid import Field, GridSpec
from mblab.potential import make_potential
from mblab.solvers import periodic_states, solve_heteroclinic
from mblab.verify import (CheckResult, battery_passed, check_apriori_bound, check_decay,
                          check_gap_star0, check_gap_star1, check_lemma_6_11, check_lemma_6_74,
                          check_local_min, check_near_state_windows, check_pipeline,
                          check_remark_margins, check_window_bounds, check_window_upper,
                          context_hash, report_from_field, run_battery)


def test_result_line_and_dict():
    r = CheckResult("demo", True, measured={"x": 0.5, "arr": np.zeros(2)}, heuristic=True)
    assert r.line() == "PASS [heuristic] demo: x=0.5"
    assert r.to_dict()["measured"]["arr"] == [0.0, 0.0]
    assert context_hash({"a": 1}) == context_hash({"a": 1}) and len(context_hash({})) == 16


def test_gap_star0_pass_and_flat_fail(modulated):
    assert check_gap_star0(modulated, N=16, steps=8).passed
    r = check_gap_star0(make_potential("flat"), N=16, steps=8)
    assert not r.passed and r.measured["min_excess"] == pytest.approx(0.0, abs=1e-12)


def test_gap_star1_modulated_passes(mod_fronts):
    r = check_gap_star1(mod_fronts[0])
    assert r.passed and r.heuristic


def test_gap_star1_pendulum_fails(pend_fronts):
    # the autonomous front comes in a continuous family, so nothing separates translates
    assert not check_gap_star1(pend_fronts[0]).passed


def test_front_sum_check_accepts_floats(mod_fronts):
    assert check_lemma_6_11(*mod_fronts).passed
    assert not check_lemma_6_11(0.0, 0.0).passed


def test_level_set_energy_check(mod_fronts, accept_spec):
    r = check_lemma_6_74(accept_spec, *mod_fronts)
    assert r.passed and r.measured["min_excess"] > 0.05
    assert len(r.measured["estimates"]) == 4


def test_decay_on_front_and_wrong_target(mod_fronts):
    up = mod_fronts[0]
    assert check_decay(up, "left").passed
    assert not check_decay(up, "right").passed
    assert check_decay(up, "right", target=up.w0).passed


def test_apriori_bound_skips_non_solutions(modulated):
    g = GridSpec(1, -4, 4, 16)
    v0 = Field.constant(g, 0.0)
    ramp = Field.from_function(g, lambda x: np.clip((x + 4) / 8, 0, 1))
    r = check_apriori_bound(report_from_field(ramp, modulated, v0))
    assert r.skipped and r.passed


def test_apriori_bound_on_front(mod_fronts):
    r = check_apriori_bound(mod_fronts[0])
    assert r.passed and not r.skipped and r.measured["eligible_tiles"] > 0


def test_local_min_front_and_ramp(modulated, mod_fronts):
    assert check_local_min(mod_fronts[0], 10).passed
    g = GridSpec(1, -4, 4, 32)
    v0, w0 = Field.constant(g, 0.0), Field.constant(g, 1.0)
    ramp = report_from_field(glue(w0, v0, 0, "left"), modulated, v0)
    r = check_local_min(ramp, centres=[[0.5]])
    assert not r.passed and r.measured["max_relative_drop"] > 1e-2


def test_window_bounds(mod_fronts):
    up = mod_fronts[0]
    assert check_window_bounds(up).passed
    assert check_window_upper(up).passed


def test_multi_report_checks(multi_report, mod_fronts):
    assert check_remark_margins(multi_report, *mod_fronts).passed
    assert check_near_state_windows(multi_report).passed
    assert all(r.passed for r in check_pipeline(multi_report))


def test_battery_on_acceptance_run(modulated, mod_fronts, multi_report):
    res = run_battery(modulated, *mod_fronts, multi_report, local_trials=5)
    assert battery_passed(res)
    names = [r.check for r in res]
    assert {"gap_star0", "gap_star1", "lemma_6_11", "lemma_6_74", "decay_left",
            "pipeline_E"} <= set(names)


def test_battery_flags_pendulum(pendulum, pend_fronts):
    res = run_battery(pendulum, *pend_fronts, local_trials=3)
    star1 = next(r for r in res if r.check == "gap_star1")
    assert not star1.passed and star1.heuristic
    assert battery_passed(res)

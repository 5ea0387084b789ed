import numpy as np
import pytest

from conftest import ACCEPT_L, ACCEPT_M, C1_MODULATED, C1_PENDULUM
from mblab.energy import strip_energy, tile_energies
from mblab.errors import ConfigurationError, InfeasibleError
from mblab.grid import Field, GridSpec, tile_l2_distance
from mblab.solvers import (SolveReport, TransitionSpec, approximate_infinite, block_period,
                           build_initial_guess, embed, forbidden_rho_samples, front_center,
                           periodic_states, rho_admissibility, scan_geometry, solve_heteroclinic,
                           solve_multitransition, solve_tile_constrained)


# ---------------------------------------------------------------- spec data

def test_constraint_regions():
    s = TransitionSpec.single(ACCEPT_M, ACCEPT_L, 0.1)
    c = s.constraints()
    assert [(x.tiles, x.target) for x in c] == [
        ((-4, -1), "v0"), ((12, 15), "w0"), ((26, 29), "w0"), ((42, 45), "v0")]
    assert s.outer_left == -4 and s.outer_right == 45


@pytest.mark.parametrize("m,l,rho,alpha,msg", [
    ((0, 3, 30, 42), (4, 4, 4, 4), 0.1, 1, "separated"),
    ((0, 12, 30, 42), (4, 0, 4, 4), 0.1, 1, "positive"),
    ((0, 12, 30, 42), (4, 4, 4, 4), 1.0, 1, "outside"),
    ((0, 12, 30, 42), (4, 4, 4, 4), (0.1, 0.2, 0.1, 0.1), 1, "alphabet"),
    ((0, 12, 16, 42), (4, 4, 4, 4), 0.1, 1, "separated"),
])
def test_spec_validation_errors(m, l, rho, alpha, msg):
    with pytest.raises(ConfigurationError, match=msg):
        TransitionSpec.single(m, l, rho, alpha).validate()


def test_spec_length_mismatch():
    with pytest.raises(ConfigurationError):
        TransitionSpec(1, (0, 12, 30), (4, 4, 4), (0.1,) * 3).validate()


def test_block_period_keeps_chain():
    s = TransitionSpec.single(ACCEPT_M, ACCEPT_L, 0.1)
    P = block_period(s)
    TransitionSpec.concat([s, s.shifted(P)]).validate()
    with pytest.raises(ConfigurationError):
        TransitionSpec.concat([s, s.shifted(P - 1)]).validate()


# ---------------------------------------------------------------- heteroclinics

def test_pendulum_front_energy(pend_fronts):
    up, down = pend_fronts
    # second-order scheme at N = 32: error about 0.25 / N^2
    assert up.objective == pytest.approx(C1_PENDULUM, abs=5e-4)
    assert up.objective < C1_PENDULUM
    assert down.objective == pytest.approx(up.objective, rel=1e-12)


def test_modulated_front_energy(mod_fronts):
    up, down = mod_fronts
    assert up.objective == pytest.approx(C1_MODULATED, abs=5e-4)
    assert up.converged and up.pde_residual < 1e-6
    # minimizing front sits at a half-integer, where the amplitude is smallest
    c = front_center(up.minimizer, up.v0)
    assert abs((c - 0.5) - round(c - 0.5)) < 0.1


def test_front_symmetry_and_ordering(mod_fronts):
    up, down = mod_fronts
    u = up.minimizer.full()
    d = down.minimizer.full()
    assert np.all(np.diff(u) >= -1e-12)
    assert np.all(np.diff(d) <= 1e-12)
    assert np.all(u >= 0) and np.all(u <= 1)


def test_front_tails_reach_states(mod_fronts):
    up = mod_fronts[0]
    U = up.minimizer
    assert tile_l2_distance(U, up.v0, U.grid.a) < 1e-20
    assert tile_l2_distance(U, up.w0, U.grid.b - 1) < 1e-20


def test_heteroclinic_needs_room(modulated, mod_states):
    with pytest.raises(ConfigurationError):
        solve_heteroclinic(modulated, GridSpec(1, 0, 4, 16), states=mod_states)


def test_two_dimensional_front_is_x1_independent(modulated):
    st = periodic_states(modulated, 2, 8)
    r = solve_heteroclinic(modulated, GridSpec(2, -6, 6, 8), "up", states=st)
    u = r.minimizer.full()
    assert np.max(np.ptp(u, axis=1)) < 1e-8
    assert r.objective == pytest.approx(C1_MODULATED, abs=2e-2)


def test_forbidden_samples_and_admissibility(mod_fronts, accept_spec):
    up, down = mod_fronts
    s = forbidden_rho_samples(up, "minus")
    assert s.shape == (up.minimizer.grid.n_tiles,)
    assert rho_admissibility(accept_spec, up, down) == []
    bad = TransitionSpec.single(ACCEPT_M, ACCEPT_L, float(s[np.argmin(np.abs(s - 0.3))]))
    assert rho_admissibility(bad, up, down)


# ---------------------------------------------------------------- multi-transition

def test_empty_spec_gives_v0(modulated, mod_states):
    g = GridSpec(1, -4, 4, 32)
    u = build_initial_guess(modulated, g, TransitionSpec.empty(), states=mod_states)
    assert np.array_equal(u.full(), mod_states.v0(g).full())


def test_initial_guess_feasible(modulated, mod_states, mod_fronts, accept_spec):
    g = GridSpec(1, -15, 57, 32)
    u = build_initial_guess(modulated, g, accept_spec, heteroclinics=mod_fronts, states=mod_states)
    v0 = mod_states.v0(g)
    for c in accept_spec.constraints():
        phi = v0 if c.target == "v0" else v0.shift_values(1)
        for i in c.tile_range():
            assert tile_l2_distance(u, phi, i) <= c.rho


def test_embed_is_integer_translation():
    g = GridSpec(1, -4, 4, 8)
    u = Field.from_function(g, lambda x: np.tanh(x))
    e = embed(u, g, 1)
    sel = g.x1 >= -3
    assert np.array_equal(e.full()[sel], np.tanh(g.x1[sel] - 1))


def test_multitransition_report(multi_report, mod_fronts):
    r = multi_report
    up, down = mod_fronts
    assert r.strictly_inactive and r.min_margin > 0
    assert r.pde_residual < 1e-6
    assert r.objective >= up.objective + down.objective - 1e-9
    assert r.objective == pytest.approx(r.rounds[0]["J1"], abs=1e-9) or r.objective < r.rounds[0]["J1"]
    assert r.objective == pytest.approx(strip_energy(r.minimizer, r.potential, r.c0))


def test_multitransition_needs_padding(modulated, mod_states, mod_fronts, accept_spec):
    with pytest.raises(ConfigurationError, match="extend"):
        solve_multitransition(modulated, GridSpec(1, -8, 57, 32), accept_spec,
                              states=mod_states, heteroclinics=mod_fronts)


def test_forbidden_rho_rejected(modulated, mod_states, mod_fronts):
    s = forbidden_rho_samples(mod_fronts[0], "minus")
    r = float(s[np.argmin(np.abs(s - 0.05))])
    spec = TransitionSpec.single(ACCEPT_M, ACCEPT_L, (r, 0.1, 0.1, 0.1), alphabet_size=2)
    with pytest.raises(ConfigurationError, match="forbidden"):
        solve_multitransition(modulated, GridSpec(1, -15, 57, 32), spec,
                              states=mod_states, heteroclinics=mod_fronts)


def test_single_penalty_round(modulated, mod_states, mod_fronts, accept_spec):
    g = GridSpec(1, -15, 57, 32)
    r = solve_multitransition(modulated, g, accept_spec, states=mod_states,
                              heteroclinics=mod_fronts, penalty_schedule=(1e2,))
    assert r.converged and len(r.rounds) == 2


def test_unreachable_feasibility_raises(modulated, mod_states, mod_fronts, accept_spec):
    with pytest.raises(InfeasibleError) as exc:
        solve_multitransition(modulated, GridSpec(1, -15, 57, 32), accept_spec,
                              states=mod_states, heteroclinics=mod_fronts,
                              penalty_schedule=(1e2, 1e4), feas_tol=-1.0)
    assert isinstance(exc.value.best, Field)


def test_report_json_roundtrip(multi_report):
    d = multi_report.to_json_dict()
    back = SolveReport.from_json_dict(d, multi_report.minimizer, multi_report.v0,
                                      multi_report.potential)
    assert back.to_json_dict() == d


def test_tile_constrained_estimate(mod_fronts):
    up = mod_fronts[0]
    out = solve_tile_constrained(up, 0.1, "minus")
    assert out["constraint_error"] < 1e-3
    assert out["lower"] <= out["upper"] + 1e-9
    assert out["lower"] > up.objective


def test_geometry_scan(modulated, mod_states, mod_fronts):
    out = scan_geometry(modulated, 0.1, ells=(2, 4), gaps=(4, 12), states=mod_states,
                        heteroclinics=mod_fronts)
    assert [(r["l"], r["gap"]) for r in out["runs"]] == [(2, 4), (4, 4), (2, 12), (4, 12)]
    assert out["smallest_passing"] == {"l": 2, "gap": 4, "m": [0, 4, 12, 16]}
    lower = mod_fronts[0].objective + mod_fronts[1].objective
    assert all(abs(r["objective"] - lower) < 1e-9 for r in out["runs"])


# ---------------------------------------------------------------- infinite mode

def test_infinite_single_K_has_empty_table(modulated, mod_states, mod_fronts, accept_spec):
    res = approximate_infinite(modulated, "right", accept_spec, (1,), (-10, -6),
                               states=mod_states, heteroclinics=mod_fronts)
    assert res.cauchy == [] and res.cauchy_csv() == "K,diff\n"
    assert len(res.window_to_v0) == 1


@pytest.mark.parametrize("mode,window", [("right", (50, 52)), ("bilateral", (-40, -38)),
                                         ("left", (-10, -6))])
def test_infinite_window_validation(modulated, mod_states, mod_fronts, accept_spec, mode, window):
    with pytest.raises(ConfigurationError):
        approximate_infinite(modulated, mode, accept_spec, (1, 2), window,
                             states=mod_states, heteroclinics=mod_fronts)


def test_infinite_bad_K_list(modulated, accept_spec):
    with pytest.raises(ConfigurationError):
        approximate_infinite(modulated, "right", accept_spec, (2, 1), (-10, -6))

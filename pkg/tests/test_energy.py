import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mblab.energy import (cell_energy, compute_c0, energy_and_gradient, energy_hessian,
                          estimate_C1, glue, grad_J1, ledger, pde_residual, periodic_extension,
                          strip_energy, tile_energies, tile_energy, tile_gradient_norms,
                          window_energy)
from mblab.errors import RangeError, ShapeError
from mblab.grid import Field, GridSpec
from mblab.potential import make_potential

FLAT = make_potential("flat")
MOD = make_potential("pendulum_modulated")


def test_ramp_tile_energy_is_exact():
    g = GridSpec(1, -2, 2, 16)
    u = Field.from_function(g, lambda x: np.sqrt(2.0) * x)
    assert tile_energy(u, FLAT, 0) == pytest.approx(1.0, abs=1e-14)
    assert strip_energy(u, FLAT) == pytest.approx(4.0, abs=1e-13)


def test_constants_on_integers_have_zero_energy():
    g = GridSpec(2, -2, 2, 8)
    for k in (-1, 0, 3):
        u = Field.constant(g, float(k))
        assert np.all(tile_energies(u, MOD) == 0.0)


def test_c0_shift_per_tile():
    g = GridSpec(1, 0, 4, 8)
    u = Field.constant(g, 0.0)
    assert np.allclose(tile_energies(u, MOD, c0=0.25), -0.25)


def test_range_errors():
    g = GridSpec(1, 0, 4, 8)
    u = Field.constant(g, 0.2)
    with pytest.raises(RangeError):
        tile_energy(u, MOD, 4)
    with pytest.raises(RangeError):
        window_energy(u, MOD, 2, 1)
    with pytest.raises(ShapeError):
        cell_energy(u, MOD)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([1, 2]))
def test_tile_sums_partition_strip(seed, n):
    g = GridSpec(n, -3, 3, 8)
    rng = np.random.default_rng(seed)
    u = Field.from_full(g, rng.uniform(-1, 2, g.shape))
    t = tile_energies(u, MOD, 0.1)
    assert strip_energy(u, MOD, 0.1) == pytest.approx(np.sum(t), abs=1e-12)
    for p in range(-3, 2):
        assert window_energy(u, MOD, -3, p, 0.1) + window_energy(u, MOD, p + 1, 2, 0.1) \
            == pytest.approx(np.sum(t), abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(-3, 3))
def test_integer_shift_invariance(seed, k):
    g = GridSpec(1, -2, 2, 8)
    rng = np.random.default_rng(seed)
    u = Field.from_full(g, rng.uniform(0, 1, g.shape))
    assert np.allclose(tile_energies(u.shift_values(k), MOD), tile_energies(u, MOD), atol=1e-13)


@pytest.mark.parametrize("n", [1, 2])
def test_gradient_matches_finite_differences(n):
    g = GridSpec(n, -2, 2, 8)
    rng = np.random.default_rng(3)
    u = Field.from_full(g, rng.uniform(0, 1, g.shape))
    E, G = energy_and_gradient(u, MOD)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        d = rng.standard_normal(g.shape)
        Ep = energy_and_gradient(Field.from_full(g, u.full() + h * d), MOD)[0]
        Em = energy_and_gradient(Field.from_full(g, u.full() - h * d), MOD)[0]
        fd = (Ep - Em) / (2 * h)
        worst = max(worst, abs(fd - np.sum(G * d)) / max(1.0, abs(fd)))
    assert worst <= 1e-6


def test_hessian_matches_gradient_differences():
    g = GridSpec(2, 0, 4, 8)
    rng = np.random.default_rng(4)
    u = Field.from_full(g, rng.uniform(0, 1, g.shape))
    H = energy_hessian(u, MOD)
    d = rng.standard_normal(g.shape)
    h = 1e-6
    Gp = energy_and_gradient(Field.from_full(g, u.full() + h * d), MOD)[1]
    Gm = energy_and_gradient(Field.from_full(g, u.full() - h * d), MOD)[1]
    assert np.allclose(H @ d.ravel(), ((Gp - Gm) / (2 * h)).ravel(), atol=1e-6)


def test_grad_J1_is_discrete_pde_operator():
    g = GridSpec(1, -2, 2, 64)
    u = Field.from_function(g, lambda x: 0.25 + 0.1 * np.sin(np.pi * x))
    r = grad_J1(u, MOD).full()
    x = g.x1
    exact = 0.1 * np.pi ** 2 * np.sin(np.pi * x) + MOD.Fu(x, u.full())
    assert np.max(np.abs(r[1:-1] - exact[1:-1])) < 1e-2
    assert r[0] == 0.0 and r[-1] == 0.0
    v0 = Field.constant(g, 0.0)
    assert pde_residual(v0, MOD) == 0.0


def test_glue_examples():
    g = GridSpec(1, -2, 2, 8)
    u, phi = Field.constant(g, 0.0), Field.constant(g, 1.0)
    w = glue(u, phi, 0, "left")
    x = g.x1
    assert np.all(w.full()[x <= 0] == 0.0) and np.all(w.full()[x >= 1] == 1.0)
    assert np.allclose(w.full()[(x >= 0) & (x <= 1)], x[(x >= 0) & (x <= 1)])
    w2 = glue(u, phi, 0, "right")
    assert np.all(w2.full()[x <= 0] == 1.0) and np.all(w2.full()[x >= 1] == 0.0)
    same = glue(u, u, 1, "left")
    assert np.array_equal(same.full(), u.full())


@pytest.mark.parametrize("family", ["pendulum_modulated", "pendulum", "twowell_periodized"])
def test_cell_problem_constants(family):
    pot = make_potential(family)
    c0, cell = compute_c0(pot, n=1, N=32)
    assert c0 == pytest.approx(0.0, abs=1e-12)
    assert np.max(np.abs(cell.full())) < 1e-6
    c0o, _ = compute_c0(make_potential(family, offset=0.2), n=1, N=32)
    assert c0o == pytest.approx(0.2, abs=1e-12)


def test_cell_problem_transverse():
    c0, _ = compute_c0(MOD, n=2, N=8)
    assert c0 == pytest.approx(0.0, abs=1e-12)


def test_periodic_extension_of_cell_field():
    cell = Field.from_function(GridSpec.cell(1, 8), lambda x: 0.1 * np.cos(2 * np.pi * x))
    ext = periodic_extension(cell, GridSpec(1, -2, 2, 8))
    assert np.allclose(ext.full(), 0.1 * np.cos(2 * np.pi * ext.grid.x1), atol=1e-15)


def test_C1_estimate_at_least_one():
    # u = 1/2 on a unit tile has energy equal to the mean amplitude, which is 1
    assert estimate_C1(MOD, 120) >= 1.0 - 1e-12


def test_gradient_norms_of_ramp():
    g = GridSpec(1, 0, 4, 8)
    w = Field.from_function(g, lambda x: 2 * x)
    assert np.allclose(tile_gradient_norms(w), 2.0)


def test_ledger_windows():
    g = GridSpec(1, 0, 4, 8)
    u = Field.from_function(g, lambda x: 0.2 * x)
    L = ledger(u, MOD, 0.05)
    assert L.total == pytest.approx(strip_energy(u, MOD, 0.05))
    assert L.window(1, 2) == pytest.approx(window_energy(u, MOD, 1, 2, 0.05))
    brute = min(L.window(p, q) for p in range(4) for q in range(p, 4))
    assert L.min_window() == pytest.approx(brute)
    assert L.to_csv().splitlines()[0] == "p,J1p"

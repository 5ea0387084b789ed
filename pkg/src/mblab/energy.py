"""
Discrete energies on strips and on the unit cell.

The Lagrangian ``L(u) = |grad u|^2 / 2 + F(x, u)`` is discretized cell by
cell: ``x_1``-differences live on the edges between consecutive ``x_1``
slices and count fully toward the tile that contains the edge; transverse
differences and ``F`` live on the nodes and are weighted with the
trapezoid rule in ``x_1`` (rectangle rule in the periodic directions).  A
node on a tile face gives half its weight to each neighbouring tile, so the
tile energies partition the strip total exactly.  On a unit tile the scheme
is the P1 finite-element energy with lumped potential, hence second order.

The gradient and Hessian below are the exact derivatives of that quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ConvergenceError, RangeError, ShapeError
from .grid import Field, GridSpec
from .optim import Curvature, minimize
from .potential import Potential

__all__ = [
    "EnergyLedger",
    "cell_energy",
    "compute_c0",
    "tile_energies",
    "tile_energy",
    "window_energy",
    "strip_energy",
    "energy_and_gradient",
    "energy_hessian",
    "grad_J1",
    "pde_residual",
    "tile_gradient_norms",
    "glue",
    "estimate_C1",
    "ledger",
]


def _x1_diff(values, lift, periodic):
    if periodic:
        return (np.roll(lift, -1, axis=0) - lift) + (np.roll(values, -1, axis=0) - values)
    return (lift[1:] - lift[:-1]) + (values[1:] - values[:-1])


def _t_diff(values, lift, axis):
    return (np.roll(lift, -1, axis=axis) - lift) + (np.roll(values, -1, axis=axis) - values)


def _sum_transverse(a):
    return a.reshape(a.shape[0], -1).sum(axis=1)


def _parts(u: Field, pot: Potential | None):
    """Per-edge and per-slice energy densities.

    Returns ``edge`` (x1-edge energies, summed over the transverse nodes),
    ``grad_d`` and ``pot_d`` (slice densities still to be multiplied by the
    ``x_1`` quadrature weight).
    """
    g = u.grid
    h = g.h
    hn = h ** (g.n - 1)
    d1 = _x1_diff(u.values, u.lift, g.periodic)
    edge = 0.5 * h ** (g.n - 2) * _sum_transverse(d1 * d1)
    grad_d = np.zeros(g.n1)
    for ax in range(1, g.n):
        dt = _t_diff(u.values, u.lift, ax)
        grad_d += 0.5 * hn / (h * h) * _sum_transverse(dt * dt)
    if pot is None:
        pot_d = np.zeros(g.n1)
    else:
        x1 = g.x1.reshape((g.n1,) + (1,) * (g.n - 1))
        pot_d = hn * _sum_transverse(np.broadcast_to(pot.F(x1, u.values), g.shape))
    return edge, grad_d, pot_d


def _tile_sums(g: GridSpec, edge: np.ndarray, dens: np.ndarray) -> np.ndarray:
    T, N, h = g.n_tiles, g.N, g.h
    e = edge.reshape(T, N).sum(axis=1)
    faces = dens[0::N]
    inner = dens[:-1].reshape(T, N)[:, 1:].sum(axis=1)
    return e + h * (0.5 * faces[:-1] + inner + 0.5 * faces[1:])


def cell_energy(u: Field, pot: Potential) -> float:
    """``J_0(u)``: the energy of a 1-periodic field over the unit cell."""
    if not u.grid.periodic:
        raise ShapeError("cell_energy needs a periodic (unit cell) grid")
    edge, grad_d, pot_d = _parts(u, pot)
    return float(edge.sum() + u.grid.h * (grad_d + pot_d).sum())


def tile_energies(u: Field, pot: Potential, c0: float = 0.0) -> np.ndarray:
    """Renormalized energies ``J_{1,p}(u)`` for every tile ``p = a..b-1``."""
    g = u.grid
    if g.periodic:
        raise ShapeError("tile energies are defined on strips")
    edge, grad_d, pot_d = _parts(u, pot)
    return _tile_sums(g, edge, grad_d + pot_d) - c0


def tile_energy(u: Field, pot: Potential, p: int, c0: float = 0.0) -> float:
    u.grid.check_tile(p)
    return float(tile_energies(u, pot, c0)[p - u.grid.a])


def window_energy(u: Field, pot: Potential, p: int, q: int, c0: float = 0.0) -> float:
    """``J_{1;p,q}(u) = sum_{i=p}^{q} J_{1,i}(u)``."""
    g = u.grid
    if not (g.a <= p <= q <= g.b - 1):
        raise RangeError(f"window [{p},{q}] not inside tiles {g.a}..{g.b - 1}")
    tiles = tile_energies(u, pot, c0)
    return float(np.sum(tiles[p - g.a:q - g.a + 1]))


def strip_energy(u: Field, pot: Potential, c0: float = 0.0) -> float:
    """Total ``J_1`` of the strip, tile sums combined in index order."""
    return float(np.sum(tile_energies(u, pot, c0)))


def tile_gradient_norms(w: Field) -> np.ndarray:
    """``||grad w||_{L^2(T_i)}`` for every tile (no potential term)."""
    edge, grad_d, _ = _parts(w, None)
    return np.sqrt(2.0 * _tile_sums(w.grid, edge, grad_d))


def energy_and_gradient(u: Field, pot: Potential, c0: float = 0.0):
    """Total energy (``J_1`` on strips, ``J_0`` on the cell) and its plain gradient."""
    g = u.grid
    h = g.h
    W = g.node_weights()
    x1 = g.x1.reshape((g.n1,) + (1,) * (g.n - 1))
    grad = W * pot.Fu(x1, u.values)
    d1 = _x1_diff(u.values, u.lift, g.periodic)
    c = h ** (g.n - 2)
    if g.periodic:
        grad -= c * d1
        grad += c * np.roll(d1, 1, axis=0)
    else:
        grad[:-1] -= c * d1
        grad[1:] += c * d1
    for ax in range(1, g.n):
        dt = _t_diff(u.values, u.lift, ax) * (W / (h * h))
        grad -= dt
        grad += np.roll(dt, 1, axis=ax)
    if g.periodic:
        E = cell_energy(u, pot) - c0
    else:
        E = strip_energy(u, pot, c0)
    return E, np.broadcast_to(grad, g.shape).copy()


def energy_hessian(u: Field, pot: Potential) -> sp.csr_matrix:
    """Exact Hessian of the discrete energy in x1-major flat ordering."""
    g = u.grid
    h = g.h
    idx = np.arange(g.size).reshape(g.shape)
    W = np.broadcast_to(g.node_weights(), g.shape)
    x1 = g.x1.reshape((g.n1,) + (1,) * (g.n - 1))
    rows, cols, data = [], [], []

    def add_edges(i, j, c):
        c = np.broadcast_to(c, i.shape).ravel() if np.ndim(c) else np.full(i.size, c)
        i, j = i.ravel(), j.ravel()
        rows.extend([i, j, i, j])
        cols.extend([i, j, j, i])
        data.extend([c, c, -c, -c])

    if g.periodic:
        add_edges(idx, np.roll(idx, -1, axis=0), h ** (g.n - 2))
    else:
        add_edges(idx[:-1], idx[1:], h ** (g.n - 2))
    for ax in range(1, g.n):
        add_edges(idx, np.roll(idx, -1, axis=ax), W / (h * h))
    diag = (W * pot.Fuu(x1, u.values)).ravel()
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    data.append(diag)
    H = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(g.size, g.size))
    return H.tocsr()


def dirichlet_mask(grid: GridSpec) -> np.ndarray:
    """Nodes pinned by the strip's Dirichlet ends (both ``x_1`` faces)."""
    mask = np.zeros(grid.shape, dtype=bool)
    if not grid.periodic:
        mask[0] = mask[-1] = True
    return mask


def grad_J1(u: Field, pot: Potential, fixed_mask: np.ndarray | None = None) -> Field:
    """Energy gradient divided by the quadrature weights, zero on fixed nodes.

    Off the mask this is the discrete ``-Laplace(u) + F_u(x, u)``.
    """
    if fixed_mask is None:
        fixed_mask = dirichlet_mask(u.grid)
    _, grad = energy_and_gradient(u, pot)
    scaled = grad / u.grid.node_weights()
    scaled[np.asarray(fixed_mask, dtype=bool)] = 0.0
    return Field(u.grid, scaled)


def pde_residual(u: Field, pot: Potential, fixed_mask: np.ndarray | None = None,
                 tiles=None) -> float:
    """Max-norm of ``-Laplace(u) + F_u`` on free nodes (optionally per tile range)."""
    r = np.abs(grad_J1(u, pot, fixed_mask).values)
    if tiles is not None:
        g = u.grid
        keep = np.zeros(g.n1, dtype=bool)
        for i in tiles:
            keep[g.tile_slice(i)] = True
        r = r[keep]
    return float(r.max()) if r.size else 0.0


def glue(u: Field, phi: Field, p: int, direction: str = "left") -> Field:
    """Linear gluing across tile ``T_p``.

    ``direction="left"`` keeps ``u`` for ``x_1 <= p`` and ``phi`` for
    ``x_1 >= p + 1``; ``"right"`` keeps ``phi`` on the left and ``u`` on the
    right.  On ``T_p`` the result is the convex blend with weights linear in
    ``x_1``, equal to the kept fields at the two faces.
    """
    if u.grid != phi.grid:
        raise ShapeError("glue needs both fields on one grid")
    g = u.grid
    g.check_tile(p)
    if direction not in ("left", "right"):
        raise ConfigurationError("glue direction must be 'left' or 'right'")
    left, right = (u, phi) if direction == "left" else (phi, u)
    k0 = g.index_of(p)
    k1 = k0 + g.N
    t = np.clip((g.x1 - p), 0.0, 1.0).reshape((g.n1,) + (1,) * (g.n - 1))
    # blend the difference so integer lifts stay exact on both plateaus
    d = right.diff(left)
    values = left.values + t * d
    lift = left.lift.copy()
    values = np.array(values)
    values[k1:] = right.values[k1:]
    lift[k1:] = right.lift[k1:]
    values[:k0 + 1] = left.values[:k0 + 1]
    return Field(g, values, lift).normalized()


def compute_c0(pot: Potential, grid: GridSpec | None = None, *, n: int = 1, N: int = 64,
               starts: int = 4, seed: int = 0, gtol: float = 1e-10,
               max_iters: int = 200) -> tuple[float, Field]:
    """Solve the cell problem ``c0 = inf J_0`` by multistart Newton descent.

    Starts from the constants ``k / starts`` and from the same constants plus
    seeded random perturbations.  Among minimizers within ``1e-13`` of the
    best value the earliest start wins, so exact constant minimizers are
    preferred.  The minimizer is shifted by an integer so that its value at
    the base point lies in ``[0, 1)``.
    """
    if grid is None:
        grid = GridSpec.cell(n, N)
    if not grid.periodic:
        raise ShapeError("compute_c0 needs the periodic unit cell")
    rng = np.random.default_rng(seed)
    inits = [np.full(grid.shape, k / starts) for k in range(starts)]
    inits += [np.full(grid.shape, k / starts) + 0.1 * rng.standard_normal(grid.shape)
              for k in range(starts)]
    W = np.broadcast_to(grid.node_weights(), grid.shape).ravel()
    best = None
    last_err = None
    for x0 in inits:
        def fun(x):
            f, gr = energy_and_gradient(Field(grid, x.reshape(grid.shape)), pot)
            return f, gr.ravel()

        def hess(x):
            return Curvature(energy_hessian(Field(grid, x.reshape(grid.shape)), pot))

        try:
            res = minimize(fun, x0.ravel(), hess=hess, metric=W, gtol=gtol, max_iters=max_iters)
        except ConvergenceError as err:
            last_err = err
            continue
        if best is None or res.fun < best[0] - 1e-13:
            best = (res.fun, res.x)
    if best is None:
        raise ConvergenceError("cell problem did not converge from any start",
                               best=None if last_err is None else last_err.best,
                               value=None if last_err is None else last_err.value)
    c0, x = best
    u = Field.from_full(grid, x.reshape(grid.shape))
    base = u.full().flat[0]
    return float(c0), u.shift_values(-int(np.floor(base)))


def periodic_extension(cell_field: Field, grid: GridSpec) -> Field:
    """Extend a unit-cell field 1-periodically in ``x_1`` to a strip grid."""
    cg = cell_field.grid
    if not cg.periodic or cg.N != grid.N or cg.n != grid.n or cg.n_tiles != 1:
        raise ShapeError("cell field incompatible with strip grid")
    k = (np.arange(grid.n1) + grid.a * grid.N) % grid.N
    return Field(grid, cell_field.values[k], cell_field.lift[k])


def estimate_C1(pot: Potential, samples: int = 200, *, n: int = 1, N: int = 32,
                v0: Field | None = None, c0: float = 0.0, seed: int = 0) -> float:
    """Empirical lower estimate of ``sup |J_{1,p}(u) - ||grad(u - v0)||^2/2|``.

    Samples fields ``v0 <= u <= v0 + 1`` on a single tile (the strip is the
    minimal four-tile one; tile 0 is used): constants on a grid of levels,
    random smooth profiles, and random nodal values.
    """
    if samples < 100:
        raise ConfigurationError("estimate_C1 needs at least 100 samples")
    grid = GridSpec(n, 0, 4, N)
    if v0 is None:
        v0 = Field.constant(grid, 0.0)
    rng = np.random.default_rng(seed)
    x = np.meshgrid(grid.x1, *grid.transverse_coords(), indexing="ij")
    n_const = max(samples // 4, 17) | 1  # odd, so the level 1/2 is sampled
    levels = np.linspace(0.0, 1.0, n_const)
    best = 0.0
    for k in range(samples):
        if k < n_const:
            frac = np.full(grid.shape, levels[k])
        elif k % 2:
            phase = rng.uniform(0, 1, size=grid.n)
            amp = rng.uniform(0, 0.5)
            frac = 0.5 + amp * np.prod([np.cos(2 * np.pi * (xi + ph)) for xi, ph in zip(x, phase)], axis=0)
            frac = frac + rng.uniform(-0.5 + amp, 0.5 - amp)
        else:
            frac = rng.uniform(0, 1, size=grid.shape)
        u = Field.from_full(grid, v0.full() + np.clip(frac, 0.0, 1.0))
        J = tile_energy(u, pot, 0, c0)
        w = Field(grid, u.diff(v0))
        dir_half = 0.5 * tile_gradient_norms(w)[0] ** 2
        best = max(best, abs(J - dir_half))
    return float(best)


@dataclass
class EnergyLedger:
    """Per-tile renormalized energies of one field."""

    c0: float
    a: int
    tiles: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.tiles))

    def tile(self, p: int) -> float:
        return float(self.tiles[p - self.a])

    def window(self, p: int, q: int) -> float:
        if not (self.a <= p <= q <= self.a + len(self.tiles) - 1):
            raise RangeError(f"window [{p},{q}] outside ledger")
        return float(np.sum(self.tiles[p - self.a:q - self.a + 1]))

    def min_window(self) -> float:
        """``min_{p<=q} J_{1;p,q}`` via prefix sums."""
        s = np.concatenate([[0.0], np.cumsum(self.tiles)])
        run_max = np.maximum.accumulate(s[:-1])
        return float(np.min(s[1:] - run_max))

    def max_window(self) -> float:
        s = np.concatenate([[0.0], np.cumsum(self.tiles)])
        run_min = np.minimum.accumulate(s[:-1])
        return float(np.max(s[1:] - run_min))

    @property
    def K1bar_est(self) -> float:
        """Smallest ``K`` with every window sum ``>= -K`` (empirical ``K1bar``)."""
        return max(0.0, -self.min_window())

    def to_csv(self) -> str:
        lines = ["p,J1p"]
        lines += [f"{self.a + i},{v:.17g}" for i, v in enumerate(self.tiles)]
        return "\n".join(lines) + "\n"

    def header(self) -> dict:
        return {"c0": self.c0, "total": self.total, "K1bar_est": self.K1bar_est}


def ledger(u: Field, pot: Potential, c0: float = 0.0) -> EnergyLedger:
    return EnergyLedger(float(c0), u.grid.a, tile_energies(u, pot, c0))

"""
Uniform tensor grids on truncated cylinders ``[a, b] x T^{n-1}``.

Nodes sit at ``x_1 = a + k/N`` (boundary nodes included) and at ``j/N`` in
each periodic transverse direction, so every integer ``x_1`` is a grid line
and the tile ``T_i = [i, i+1] x T^{n-1}`` is an exact union of cells.

Fields carry an integer *lift* next to their real values: the represented
function is ``lift + values``.  Because the potentials are 1-periodic in
``u`` the energy only ever needs ``values``, while distances to the integer
states ``0`` and ``1`` keep full relative precision deep in the tails of a
transition layer (``1 - u ~ 1e-40`` is representable as ``lift=1,
values=-1e-40`` but not as a plain float near 1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, RangeError, ShapeError

__all__ = [
    "GridSpec",
    "Field",
    "TileView",
    "tile_restrict",
    "translate",
    "tile_l2_distance",
    "window_l2_distance",
    "refine",
    "dump_field",
    "load_field",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with spacing ``h = 1/N`` on ``[a, b] x T^{n-1}``.

    With ``periodic=True`` the grid is the unit cell (``x_1`` wraps too) used
    by the cell problem; otherwise it is a strip with Dirichlet ends.
    """

    n: int
    a: int
    b: int
    N: int
    periodic: bool = False

    def __post_init__(self):
        if not 1 <= self.n <= 3:
            raise ConfigurationError(f"dimension n={self.n} outside 1..3")
        if self.N < 8:
            raise ConfigurationError(f"points_per_unit N={self.N} must be >= 8")
        if int(self.a) != self.a or int(self.b) != self.b:
            raise ConfigurationError("strip ends must be integers")
        if self.periodic:
            if self.b - self.a < 1:
                raise ConfigurationError("periodic cell needs b > a")
        elif self.b - self.a < 4:
            raise ConfigurationError(f"strip [{self.a},{self.b}] shorter than 4 tiles")

    @classmethod
    def cell(cls, n: int, N: int) -> "GridSpec":
        return cls(n=n, a=0, b=1, N=N, periodic=True)

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def n_tiles(self) -> int:
        return self.b - self.a

    @property
    def n1(self) -> int:
        """Number of nodes along ``x_1``."""
        nodes = self.n_tiles * self.N
        return nodes if self.periodic else nodes + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n1,) + (self.N,) * (self.n - 1)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def slab(self) -> int:
        """Nodes per ``x_1`` slice; also the Hessian half-bandwidth."""
        return self.N ** (self.n - 1)

    @property
    def x1(self) -> np.ndarray:
        k = np.arange(self.n1)
        return (self.a * self.N + k) / self.N

    @property
    def tiles(self) -> range:
        return range(self.a, self.b)

    def x1_weights(self) -> np.ndarray:
        """Trapezoid weights in ``x_1`` (rectangle rule on the periodic cell)."""
        w = np.full(self.n1, self.h)
        if not self.periodic:
            w[0] = w[-1] = 0.5 * self.h
        return w

    def node_weights(self) -> np.ndarray:
        """Quadrature weight of every node, broadcastable against ``shape``."""
        w = self.x1_weights() * self.h ** (self.n - 1)
        return w.reshape((self.n1,) + (1,) * (self.n - 1))

    def tile_x1_weights(self) -> np.ndarray:
        """Tile-local trapezoid weights for the ``N + 1`` slices of a tile."""
        w = np.full(self.N + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w * self.h ** (self.n - 1)

    def check_tile(self, i: int) -> None:
        if self.periodic:
            raise ShapeError("tiles are defined on strips, not on the periodic cell")
        if not self.a <= i <= self.b - 1:
            raise RangeError(f"tile {i} outside strip [{self.a},{self.b}]")

    def tile_slice(self, i: int) -> slice:
        self.check_tile(i)
        k0 = (i - self.a) * self.N
        return slice(k0, k0 + self.N + 1)

    def index_of(self, x1: int) -> int:
        """Node index of the integer abscissa ``x1``."""
        if not self.a <= x1 <= self.b:
            raise RangeError(f"x1={x1} outside strip [{self.a},{self.b}]")
        return (x1 - self.a) * self.N

    def transverse_coords(self) -> list[np.ndarray]:
        return [np.arange(self.N) * self.h for _ in range(self.n - 1)]

    def with_strip(self, a: int, b: int) -> "GridSpec":
        return GridSpec(n=self.n, a=a, b=b, N=self.N)

    def to_dict(self) -> dict:
        return {"n": self.n, "a": self.a, "b": self.b, "N": self.N,
                "periodic": self.periodic}


@dataclass(frozen=True, eq=False)
class Field:
    """A real function sampled on a :class:`GridSpec` as ``lift + values``.

    ``valid`` optionally records the ``x_1`` range on which the values are
    genuine (set by :func:`translate`).
    """

    grid: GridSpec
    values: np.ndarray
    lift: np.ndarray = field(default=None)
    valid: tuple[int, int] | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ShapeError(f"values shape {values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ShapeError("field values must be finite")
        if self.lift is None:
            lift = np.zeros(values.shape, dtype=np.int64)
        else:
            lift = np.array(self.lift, dtype=np.int64)
            if lift.shape != values.shape:
                raise ShapeError("lift shape does not match values")
        values.setflags(write=False)
        lift.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lift", lift)

    @classmethod
    def from_full(cls, grid: GridSpec, full, valid=None) -> "Field":
        """Split plain values into nearest-integer lift and remainder (exact)."""
        full = np.asarray(full, dtype=np.float64)
        if full.shape != grid.shape:
            full = np.broadcast_to(full, grid.shape)
        lift = np.rint(full)
        return cls(grid, full - lift, lift.astype(np.int64), valid)

    @classmethod
    def constant(cls, grid: GridSpec, c: float) -> "Field":
        return cls.from_full(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "Field":
        """Sample ``fn(x1, *xt)`` on the nodes (coordinates broadcast)."""
        axes = [grid.x1] + grid.transverse_coords()
        mesh = np.meshgrid(*axes, indexing="ij")
        return cls.from_full(grid, np.broadcast_to(fn(*mesh), grid.shape))

    def full(self) -> np.ndarray:
        return self.lift + self.values

    def diff(self, other: "Field") -> np.ndarray:
        """Nodewise ``self - other``, subtracting integer lifts first."""
        if other.grid != self.grid:
            raise ShapeError("fields live on different grids")
        return (self.lift - other.lift) + (self.values - other.values)

    def shift_values(self, k: int) -> "Field":
        """The field ``u + k`` for an integer ``k``."""
        return Field(self.grid, self.values, self.lift + int(k), self.valid)

    def replace(self, values=None, lift=None) -> "Field":
        return Field(self.grid,
                     self.values if values is None else values,
                     self.lift if lift is None else lift)

    def normalized(self) -> "Field":
        """Same function with ``values`` folded into ``[-1/2, 1/2]``."""
        k = np.rint(self.values)
        return Field(self.grid, self.values - k, self.lift + k.astype(np.int64), self.valid)


@dataclass(frozen=True, eq=False)
class TileView:
    """Read-only view of a field restricted to one tile."""

    index: int
    x1: np.ndarray
    values: np.ndarray
    lift: np.ndarray
    weights: np.ndarray

    def full(self) -> np.ndarray:
        return self.lift + self.values


def tile_restrict(u: Field, i: int) -> TileView:
    """View of ``u`` on the nodes with ``x_1 in [i, i+1]``; shares memory with ``u``."""
    sl = u.grid.tile_slice(i)
    return TileView(i, u.grid.x1[sl], u.values[sl], u.lift[sl], u.grid.tile_x1_weights())


def _shift_indices(n1: int, N: int, j: int) -> np.ndarray:
    src = np.arange(n1) - j * N
    left = src < 0
    right = src > n1 - 1
    src[left] = src[left] % N
    src[right] = n1 - 1 - ((n1 - 1 - src[right]) % N)
    return src


def translate(u: Field, j: int) -> Field:
    """``tau_j u(x) = u(x - j e_1)`` on the strip.

    Outside the overlap ``[a+j, b+j] & [a, b]`` the result repeats the
    nearest end tile periodically, which reproduces any 1-periodic state
    exactly.  ``valid`` on the result records the overlap.
    """
    g = u.grid
    if g.periodic:
        return Field(g, np.roll(u.values, j * g.N, axis=0), np.roll(u.lift, j * g.N, axis=0))
    if abs(j) >= g.n_tiles:
        raise RangeError(f"shift {j} not shorter than strip length {g.n_tiles}")
    src = _shift_indices(g.n1, g.N, int(j))
    valid = (max(g.a, g.a + j), min(g.b, g.b + j))
    return Field(g, u.values[src], u.lift[src], valid)


def _tile_norm(diff: np.ndarray, weights: np.ndarray) -> float:
    w = weights.reshape((-1,) + (1,) * (diff.ndim - 1))
    return float(np.sqrt(np.sum(w * diff * diff)))


def tile_l2_distance(u: Field, phi: Field, i: int) -> float:
    """Quadrature ``||u - phi||_{L^2(T_i)}`` (trapezoid in ``x_1``)."""
    if u.grid != phi.grid:
        raise ShapeError("tile_l2_distance needs both fields on one grid")
    sl = u.grid.tile_slice(i)
    d = (u.lift[sl] - phi.lift[sl]) + (u.values[sl] - phi.values[sl])
    return _tile_norm(d, u.grid.tile_x1_weights())


def _tile_arrays(u: Field, i: int):
    sl = u.grid.tile_slice(i)
    return u.values[sl], u.lift[sl]


def window_l2_distance(u: Field, v: Field, tiles: Iterable[int]) -> float:
    """``||u - v||_{L^2}`` over a union of tiles; the strips may differ.

    Both fields need the same ``n`` and ``N`` and must contain every tile.
    """
    if (u.grid.n, u.grid.N) != (v.grid.n, v.grid.N):
        raise ShapeError("fields differ in dimension or resolution")
    w = u.grid.tile_x1_weights()
    total = 0.0
    for i in tiles:
        uv, ul = _tile_arrays(u, i)
        vv, vl = _tile_arrays(v, i)
        total += _tile_norm((ul - vl) + (uv - vv), w) ** 2
    return float(np.sqrt(total))


def _interp_axis(a: np.ndarray, axis: int, factor: int, periodic: bool) -> np.ndarray:
    m = a.shape[axis]
    n_new = m * factor if periodic else (m - 1) * factor + 1
    k = np.arange(n_new)
    c0 = k // factor
    t = (k % factor) / factor
    c1 = (c0 + 1) % m if periodic else np.minimum(c0 + 1, m - 1)
    shape = [1] * a.ndim
    shape[axis] = n_new
    t = t.reshape(shape)
    return (1.0 - t) * np.take(a, c0, axis=axis) + t * np.take(a, c1, axis=axis)


def refine(u: Field, factor: int) -> Field:
    """Multilinear interpolation onto the grid with ``N * factor`` points per unit."""
    if factor < 2:
        raise ConfigurationError("refinement factor must be >= 2")
    g = u.grid
    fine = GridSpec(g.n, g.a, g.b, g.N * factor, g.periodic)
    # values and lift are interpolated separately so integer plateaus stay exact
    parts = []
    for arr in (u.values, u.lift.astype(np.float64)):
        out = _interp_axis(arr, 0, factor, g.periodic)
        for ax in range(1, g.n):
            out = _interp_axis(out, ax, factor, True)
        parts.append(out)
    frac, lift = parts
    k = np.rint(lift)
    return Field(fine, frac + (lift - k), k.astype(np.int64)).normalized()


def dump_field(u: Field, path, extra: dict | None = None) -> dict:
    """Write ``path.f64`` (little-endian, x1-major) plus a JSON sidecar.

    The integer lift and the remainder are written next to it so that a
    reload keeps tail precision; a ``path.csv`` is added for ``n = 1``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.with_suffix("")
    u.full().astype("<f8").tofile(base.with_suffix(".f64"))
    u.values.astype("<f8").tofile(base.with_suffix(".frac.f64"))
    u.lift.astype("<i8").tofile(base.with_suffix(".lift.i64"))
    meta = {
        "n": u.grid.n, "a": u.grid.a, "b": u.grid.b, "N": u.grid.N,
        "shape": list(u.grid.shape), "ordering": "x1-major",
        "dtype": "<f8", "periodic": u.grid.periodic,
        "data_file": base.with_suffix(".f64").name,
        "frac_file": base.with_suffix(".frac.f64").name,
        "lift_file": base.with_suffix(".lift.i64").name,
    }
    if extra:
        meta.update(extra)
    base.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if u.grid.n == 1:
        rows = np.column_stack([u.grid.x1, u.full()])
        np.savetxt(base.with_suffix(".csv"), rows, delimiter=",", header="x1,value",
                   comments="", fmt="%.17g")
    return meta


def load_field(path) -> Field:
    """Inverse of :func:`dump_field`; ``path`` may name the sidecar or the base."""
    base = Path(path).with_suffix("")
    if base.suffix in (".frac", ".lift"):
        base = base.with_suffix("")
    meta = json.loads(base.with_suffix(".json").read_text())
    grid = GridSpec(meta["n"], meta["a"], meta["b"], meta["N"], meta.get("periodic", False))
    shape = tuple(meta["shape"])
    frac = base.parent / meta.get("frac_file", "")
    lift = base.parent / meta.get("lift_file", "")
    if meta.get("frac_file") and frac.exists() and lift.exists():
        values = np.fromfile(frac, dtype="<f8").reshape(shape)
        lifts = np.fromfile(lift, dtype="<i8").reshape(shape)
        return Field(grid, values, lifts)
    full = np.fromfile(base.parent / meta["data_file"], dtype="<f8").reshape(shape)
    return Field.from_full(grid, full)

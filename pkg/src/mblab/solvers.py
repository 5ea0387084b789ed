"""
Constrained minimization pipeline.

* :func:`solve_heteroclinic` minimizes the strip energy between the two
  adjacent periodic states ``v0`` and ``w0 = v0 + 1``.
* :func:`solve_multitransition` minimizes it over fields pinned to ``v0`` at
  both ends that stay within tile-wise L^2 balls around ``v0``/``w0`` on
  prescribed tile ranges (``TransitionSpec``), via quadratic-hinge penalties.
* :func:`approximate_infinite` replicates a block pattern ``K`` times and
  tracks how the solutions settle on a fixed window as ``K`` grows.

All solves share :func:`mblab.optim.minimize` and can checkpoint through a
store object exposing ``load(key, size) -> OptState | None`` and
``save(key, state)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .energy import (compute_c0, dirichlet_mask, energy_and_gradient, energy_hessian,
                     glue, pde_residual, periodic_extension, strip_energy)
from .errors import ConfigurationError, ConvergenceError, InfeasibleError
from .grid import Field, GridSpec, tile_l2_distance, window_l2_distance
from .optim import Curvature, OptResult, minimize
from .potential import Potential

logger = logging.getLogger(__name__)

__all__ = [
    "Constraint", "TransitionSpec", "SolveReport", "InfiniteResult", "States",
    "periodic_states", "solve_heteroclinic", "build_initial_guess",
    "solve_multitransition", "solve_tile_constrained", "approximate_infinite",
    "forbidden_rho_samples", "rho_admissibility", "block_period", "front_center",
    "embed", "scan_geometry",
]

UP, DOWN = "up", "down"
_DIRECTIONS = {"up": UP, "v0->w0": UP, "v0_w0": UP, "down": DOWN, "w0->v0": DOWN, "w0_v0": DOWN}


def _direction(d: str) -> str:
    try:
        return _DIRECTIONS[d]
    except KeyError:
        raise ConfigurationError(f"unknown direction {d!r}; use 'up' or 'down'") from None


# ----------------------------------------------------------------------------
# Constraint data
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Constraint:
    """``||u - target||_{L^2(T_i)} <= rho`` for every tile ``i`` in ``tiles``."""

    index: int                 # 1-based position in m / l / rho
    tiles: tuple[int, int]     # inclusive tile range
    target: str                # "v0" or "w0"
    rho: float

    def tile_range(self) -> range:
        return range(self.tiles[0], self.tiles[1] + 1)


@dataclass(frozen=True)
class TransitionSpec:
    """Geometry of a ``2K``-transition constraint set.

    Block ``j`` uses entries ``4j .. 4j+3`` (0-based) of ``m``, ``l`` and
    ``rho``: a ``v0``-region ending at ``m[4j]``, a ``w0``-region starting at
    ``m[4j+1]``, a ``w0``-region ending at ``m[4j+2]`` and a ``v0``-region
    starting at ``m[4j+3]``.
    """

    K: int
    m: tuple
    l: tuple
    rho: tuple
    alphabet_size: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(int(v) for v in self.m))
        object.__setattr__(self, "l", tuple(int(v) for v in self.l))
        object.__setattr__(self, "rho", tuple(float(v) for v in self.rho))

    @classmethod
    def single(cls, m, l, rho, alphabet_size=None) -> "TransitionSpec":
        m, l = tuple(m), tuple(l)
        rho = tuple(rho) if np.ndim(rho) else (float(rho),) * len(m)
        if len(m) % 4:
            raise ConfigurationError("m must have 4K entries")
        return cls(len(m) // 4, m, l, rho, alphabet_size)

    @classmethod
    def empty(cls) -> "TransitionSpec":
        return cls(0, (), (), ())

    def chain(self) -> list[int]:
        """The ordered quantities that must increase by more than 3."""
        q: list[int] = []
        m, l = self.m, self.l
        for j in range(self.K):
            b = 4 * j
            q += [m[b], m[b + 1], m[b + 1] + l[b + 1] + l[b + 2], m[b + 2], m[b + 3]]
            if j < self.K - 1:
                q += [m[b + 3] + l[b + 3] + l[b + 4]]
        return q

    def validate(self, rho_bar: float = 1.0) -> "TransitionSpec":
        if self.K < 0:
            raise ConfigurationError("K must be nonnegative")
        n = 4 * self.K
        for name in ("m", "l", "rho"):
            if len(getattr(self, name)) != n:
                raise ConfigurationError(f"spec.{name} must have 4K={n} entries")
        if any(v < 1 for v in self.l):
            raise ConfigurationError("every l_i must be a positive integer")
        for i, r in enumerate(self.rho):
            if not 0.0 < r < rho_bar:
                raise ConfigurationError(f"rho[{i}]={r} outside (0, {rho_bar:.6g})")
        q = self.chain()
        for k in range(len(q) - 1):
            if q[k + 1] - q[k] <= 3:
                raise ConfigurationError(
                    f"ordering chain entries {q[k]} and {q[k + 1]} are not separated by more than 3")
        if self.alphabet_size is not None:
            if self.alphabet_size < 1:
                raise ConfigurationError("alphabet_size must be positive")
            if len(set(self.rho)) > self.alphabet_size:
                raise ConfigurationError(
                    f"{len(set(self.rho))} distinct rho values exceed alphabet_size={self.alphabet_size}")
        return self

    def constraints(self) -> list[Constraint]:
        out = []
        for k in range(4 * self.K):
            m, l, r = self.m[k], self.l[k], self.rho[k]
            kind = k % 4
            if kind == 0:
                out.append(Constraint(k + 1, (m - l, m - 1), "v0", r))
            elif kind == 1:
                out.append(Constraint(k + 1, (m, m + l - 1), "w0", r))
            elif kind == 2:
                out.append(Constraint(k + 1, (m - l, m - 1), "w0", r))
            else:
                out.append(Constraint(k + 1, (m, m + l - 1), "v0", r))
        return out

    @property
    def outer_left(self) -> int:
        """First constrained tile."""
        return self.m[0] - self.l[0]

    @property
    def outer_right(self) -> int:
        """Last constrained tile."""
        return self.m[-1] + self.l[-1] - 1

    def shifted(self, k: int) -> "TransitionSpec":
        return TransitionSpec(self.K, tuple(v + k for v in self.m), self.l, self.rho,
                              self.alphabet_size)

    @classmethod
    def concat(cls, specs: Sequence["TransitionSpec"]) -> "TransitionSpec":
        m, l, rho = [], [], []
        for s in specs:
            m += s.m
            l += s.l
            rho += s.rho
        sizes = [s.alphabet_size for s in specs if s.alphabet_size is not None]
        return cls(sum(s.K for s in specs), tuple(m), tuple(l), tuple(rho),
                   max(sizes) if sizes else None)

    def to_dict(self) -> dict:
        return {"K": self.K, "m": list(self.m), "l": list(self.l), "rho": list(self.rho),
                "alphabet_size": self.alphabet_size}


# ----------------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------------

@dataclass
class SolveReport:
    """Outcome of one strip minimization."""

    kind: str
    minimizer: Field
    objective: float
    pde_residual: float
    iterations: int
    converged: bool
    c0: float
    potential: Potential
    v0: Field
    direction: str | None = None
    spec: TransitionSpec | None = None
    margins: np.ndarray = field(default_factory=lambda: np.zeros(0))
    margin_tiles: list = field(default_factory=list)
    rho_bar: float = 1.0
    trace: list = field(default_factory=list)
    rounds: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def w0(self) -> Field:
        return self.v0.shift_values(1)

    @property
    def strictly_inactive(self) -> bool:
        """Every constraint margin exceeds ``1e-4 * rho_bar``."""
        return bool(np.all(self.margins > 1e-4 * self.rho_bar))

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margins)) if self.margins.size else float("inf")

    def to_json_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "objective": float(self.objective),
            "margins": [float(v) for v in self.margins],
            "margin_tiles": [list(t) for t in self.margin_tiles],
            "pde_residual": float(self.pde_residual),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "c0": float(self.c0),
            "direction": self.direction,
            "potential": self.potential.to_dict(),
            "grid": self.minimizer.grid.to_dict(),
            "rho_bar": float(self.rho_bar),
            "trace": [float(v) for v in self.trace],
            "rounds": self.rounds,
        }
        if self.spec is not None:
            d["spec"] = self.spec.to_dict()
            d["strictly_inactive"] = self.strictly_inactive
        d["extra"] = dict(self.extra)
        return d

    @classmethod
    def from_json_dict(cls, d: dict, minimizer: Field, v0: Field,
                       potential: Potential) -> "SolveReport":
        """Rebuild a report from :meth:`to_json_dict` output and its field dump."""
        spec = None
        if d.get("spec") is not None:
            s = d["spec"]
            spec = TransitionSpec(s["K"], s["m"], s["l"], s["rho"], s.get("alphabet_size"))
        return cls(kind=d["kind"], minimizer=minimizer, objective=float(d["objective"]),
                   pde_residual=float(d["pde_residual"]), iterations=int(d["iterations"]),
                   converged=bool(d["converged"]), c0=float(d["c0"]), potential=potential,
                   v0=v0, direction=d.get("direction"), spec=spec,
                   margins=np.array(d.get("margins", []), dtype=float),
                   margin_tiles=[tuple(t) for t in d.get("margin_tiles", [])],
                   rho_bar=float(d.get("rho_bar", 1.0)), trace=list(d.get("trace", [])),
                   rounds=list(d.get("rounds", [])), extra=dict(d.get("extra", {})))


@dataclass
class InfiniteResult:
    """Growing-``K`` sweep with its Cauchy table on a fixed tile window."""

    mode: str
    K_list: tuple
    window: tuple[int, int]
    reports: list
    cauchy: list            # (K, K_next, ||U_next - U_K||_{L^2(window)})
    window_to_v0: list      # ||U_K - v0||_{L^2(window)} per K

    def cauchy_csv(self) -> str:
        lines = ["K,diff"] + [f"{k},{d:.17g}" for k, _, d in self.cauchy]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class States:
    """The periodic ground states used as boundary data on strips."""

    c0: float
    v0_cell: Field

    def v0(self, grid: GridSpec) -> Field:
        return periodic_extension(self.v0_cell, grid)

    def w0(self, grid: GridSpec) -> Field:
        return self.v0(grid).shift_values(1)


def periodic_states(pot: Potential, n: int, N: int, c0: float | None = None,
                    v0_cell: Field | None = None) -> States:
    """Cell minimum and minimizer (computed unless both are given)."""
    if c0 is None or v0_cell is None:
        c0_, v0_ = compute_c0(pot, n=n, N=N)
        c0 = c0_ if c0 is None else c0
        v0_cell = v0_ if v0_cell is None else v0_cell
    return States(float(c0), v0_cell)


# ----------------------------------------------------------------------------
# Strip problem: free nodes, bounds, penalties
# ----------------------------------------------------------------------------

@dataclass
class _Term:
    nodes: np.ndarray       # flat node indices of the tile
    pos: np.ndarray         # positions of those nodes among the unknowns (-1 if fixed)
    w: np.ndarray           # quadrature weights of the tile nodes
    dlift: np.ndarray       # integer part of u - phi
    phival: np.ndarray
    rho2: float
    equality: bool


class _StripProblem:
    """Strip energy over the free nodes plus optional tile-distance penalties."""

    def __init__(self, pot: Potential, c0: float, init: Field, fixed: np.ndarray,
                 lower: Field | None = None, upper: Field | None = None):
        g = init.grid
        self.grid, self.pot, self.c0 = g, pot, float(c0)
        self.lift = init.lift
        self.base = np.array(init.values)
        self.free = np.flatnonzero(~np.asarray(fixed, dtype=bool).ravel())
        self.posmap = np.full(g.size, -1, dtype=np.int64)
        self.posmap[self.free] = np.arange(self.free.size)
        self.metric = np.broadcast_to(g.node_weights(), g.shape).ravel()[self.free].copy()
        self.lower = None if lower is None else self._rel(lower)
        self.upper = None if upper is None else self._rel(upper)
        self.terms: list[_Term] = []
        self.mu = 0.0
        self._allidx = np.arange(g.size).reshape(g.shape)

    def _rel(self, phi: Field) -> np.ndarray:
        return ((phi.lift - self.lift) + phi.values).ravel()[self.free]

    def x0(self) -> np.ndarray:
        return self.base.ravel()[self.free].copy()

    def field(self, x: np.ndarray) -> Field:
        v = self.base.copy()
        v.reshape(-1)[self.free] = x
        return Field(self.grid, v, self.lift)

    def add_term(self, tile: int, phi: Field, rho: float, equality: bool = False):
        g = self.grid
        sl = g.tile_slice(tile)
        nodes = self._allidx[sl].ravel()
        wx = g.tile_x1_weights().reshape((-1,) + (1,) * (g.n - 1))
        w = np.broadcast_to(wx, self._allidx[sl].shape).ravel().copy()
        dlift = (self.lift[sl] - phi.lift[sl]).ravel().astype(float)
        self.terms.append(_Term(nodes, self.posmap[nodes], w, dlift,
                                phi.values[sl].ravel().copy(), float(rho) ** 2, equality))

    def _term_state(self, t: _Term, v: np.ndarray):
        delta = t.dlift + (v[t.nodes] - t.phival)
        s = float(np.sum(t.w * delta * delta))
        r = s - t.rho2
        if not t.equality:
            r = max(r, 0.0)
        return s, r, delta

    def distances(self, x: np.ndarray) -> np.ndarray:
        v = self.field(x).values.ravel()
        return np.sqrt([self._term_state(t, v)[0] for t in self.terms])

    def energy(self, x: np.ndarray) -> float:
        return strip_energy(self.field(x), self.pot, self.c0)

    def penalty(self, x: np.ndarray) -> float:
        v = self.field(x).values.ravel()
        return sum(0.5 * self.mu * self._term_state(t, v)[1] ** 2 for t in self.terms)

    def fun(self, x: np.ndarray):
        u = self.field(x)
        f, gr = energy_and_gradient(u, self.pot, self.c0)
        gr = gr.ravel()[self.free]
        if self.mu and self.terms:
            v = u.values.ravel()
            for t in self.terms:
                _, r, delta = self._term_state(t, v)
                if r == 0.0:
                    continue
                f += 0.5 * self.mu * r * r
                keep = t.pos >= 0
                np.add.at(gr, t.pos[keep], (self.mu * r * 2.0 * t.w * delta)[keep])
        return f, gr

    def hess(self, x: np.ndarray) -> Curvature:
        u = self.field(x)
        H = energy_hessian(u, self.pot)[self.free][:, self.free]
        low = []
        if self.mu and self.terms:
            v = u.values.ravel()
            diag = np.zeros(self.free.size)
            for t in self.terms:
                _, r, delta = self._term_state(t, v)
                if r == 0.0 and not t.equality:
                    continue
                keep = t.pos >= 0
                np.add.at(diag, t.pos[keep], (self.mu * r * 2.0 * t.w)[keep])
                a = np.zeros(self.free.size)
                a[t.pos[keep]] = (2.0 * t.w * delta)[keep]
                low.append((self.mu, a))
            H = H + sp.diags(diag)
        return Curvature(H.tocsr(), low)

    def run(self, x0, *, gtol, max_iters, store=None, key=None) -> OptResult:
        state = store.load(key, np.size(x0)) if store is not None else None
        checkpoint = (lambda st: store.save(key, st)) if store is not None else None
        try:
            return minimize(self.fun, x0, hess=self.hess, metric=self.metric,
                            lower=self.lower, upper=self.upper, gtol=gtol,
                            max_iters=max_iters, state=state, checkpoint=checkpoint)
        except ConvergenceError as err:
            best = None if err.best is None else self.field(err.best)
            raise type(err)(str(err), best=best, value=err.value, state=err.state) from err


def _default_gtol(grid: GridSpec, gtol: float | None) -> float:
    return 1e-8 * grid.N if gtol is None else float(gtol)


def _interior_residual(u: Field, pot: Potential) -> float:
    return pde_residual(u, pot, dirichlet_mask(u.grid))


# ----------------------------------------------------------------------------
# Heteroclinics
# ----------------------------------------------------------------------------

def _front_profile(grid: GridSpec, v0: Field, center: float, rate: float, direction: str) -> Field:
    """``v0 + expit`` front kept in lifted form so both tails stay exact."""
    x = grid.x1.reshape((-1,) + (1,) * (grid.n - 1))
    z = 2.0 * rate * (x - center)
    if direction == DOWN:
        z = -z
    past = np.broadcast_to(z >= 0, grid.shape)
    frac = np.where(past, -expit(-z), expit(z))
    vals = v0.values + frac
    lift = v0.lift + past.astype(np.int64)
    return Field(grid, vals, lift)


def front_center(u: Field, v0: Field) -> float:
    """``x_1`` where the transverse mean of ``u - v0`` first crosses 1/2."""
    d = u.diff(v0)
    prof = d.reshape(d.shape[0], -1).mean(axis=1)
    above = prof >= 0.5
    if prof[0] >= 0.5:
        above = ~above
    k = int(np.argmax(above))
    return float(u.grid.x1[k])


def solve_heteroclinic(pot: Potential, grid: GridSpec, direction: str = "up", *,
                       states: States | None = None, gtol: float | None = None,
                       max_iters: int = 300, center_offset: float = 0.25,
                       rate: float = 4.0, store=None, key: str | None = None) -> SolveReport:
    """Minimize the strip energy between ``v0`` and ``w0 = v0 + 1``.

    ``direction="up"`` pins ``v0`` on the left face and ``w0`` on the right;
    ``"down"`` swaps them.  Iterates stay in the order interval
    ``[v0, w0]``.  The initial front sits ``center_offset`` to the right of
    the strip centre, away from the symmetric saddle of modulated families.
    """
    direction = _direction(direction)
    if grid.periodic or grid.n_tiles < 8:
        raise ConfigurationError("heteroclinic strip needs at least 8 tiles")
    if states is None:
        states = periodic_states(pot, grid.n, grid.N)
    v0, w0 = states.v0(grid), states.w0(grid)
    init = _front_profile(grid, v0, 0.5 * (grid.a + grid.b) + center_offset, rate, direction)
    # pin the faces exactly
    vals, lift = np.array(init.values), np.array(init.lift)
    left, right = (v0, w0) if direction == UP else (w0, v0)
    vals[0], lift[0] = left.values[0], left.lift[0]
    vals[-1], lift[-1] = right.values[-1], right.lift[-1]
    init = Field(grid, vals, lift)
    prob = _StripProblem(pot, states.c0, init, dirichlet_mask(grid), v0, w0)
    res = prob.run(prob.x0(), gtol=_default_gtol(grid, gtol), max_iters=max_iters,
                   store=store, key=key or f"hetero_{direction}")
    U = prob.field(res.x)
    return SolveReport(
        kind="heteroclinic", minimizer=U, objective=strip_energy(U, pot, states.c0),
        pde_residual=_interior_residual(U, pot), iterations=res.iterations,
        converged=res.converged, c0=states.c0, potential=pot, v0=v0,
        direction=direction, rho_bar=tile_l2_distance(w0, v0, grid.a), trace=res.trace)


def forbidden_rho_samples(report: SolveReport, which: str) -> np.ndarray:
    """``rho_-`` (``which="minus"``) or ``rho_+`` over all integer translates of a heteroclinic."""
    U, v0 = report.minimizer, report.v0
    phi = v0 if which == "minus" else v0.shift_values(1)
    return np.array([tile_l2_distance(U, phi, i) for i in U.grid.tiles])


def rho_admissibility(spec: TransitionSpec, up: SolveReport, down: SolveReport,
                      tol: float = 1e-3) -> list[tuple[int, float, float]]:
    """Entries of ``spec.rho`` within ``tol`` of a sampled forbidden value.

    Returns ``(index, rho, nearest_sample)`` for each offending entry (1-based).
    """
    samples = {
        0: forbidden_rho_samples(up, "minus"),
        1: forbidden_rho_samples(up, "plus"),
        2: forbidden_rho_samples(down, "plus"),
        3: forbidden_rho_samples(down, "minus"),
    }
    bad = []
    for k, r in enumerate(spec.rho):
        s = samples[k % 4]
        j = int(np.argmin(np.abs(s - r)))
        if abs(s[j] - r) <= tol:
            bad.append((k + 1, r, float(s[j])))
    return bad


# ----------------------------------------------------------------------------
# Multi-transition solutions
# ----------------------------------------------------------------------------

def embed(src: Field, grid: GridSpec, shift: int) -> Field:
    """``src(x - shift)`` sampled on ``grid``; end tiles repeat outside ``src``'s strip."""
    sg = src.grid
    if (sg.n, sg.N) != (grid.n, grid.N):
        raise ConfigurationError("embed needs equal dimension and resolution")
    N = grid.N
    idx = np.arange(grid.n1) + (grid.a - shift - sg.a) * N
    lo, hi = idx < 0, idx > sg.n1 - 1
    idx[lo] = idx[lo] % N
    idx[hi] = sg.n1 - 1 - ((sg.n1 - 1 - idx[hi]) % N)
    return Field(grid, src.values[idx], src.lift[idx])


def _place_front(front: Field, v0_front: Field, grid: GridSpec, target: float) -> Field:
    shift = int(np.rint(target - front_center(front, v0_front)))
    return embed(front, grid, shift)


def build_initial_guess(pot: Potential, grid: GridSpec, spec: TransitionSpec, *,
                        heteroclinics: tuple[SolveReport, SolveReport] | None = None,
                        states: States | None = None) -> Field:
    """Concatenate flats and integer-translated heteroclinics.

    Block ``j`` is ``v0`` up to tile ``m[4j]``, an up-front centred in
    ``(m[4j], m[4j+1])``, ``w0`` from ``m[4j+1]`` to ``m[4j+2]``, a
    down-front centred in ``(m[4j+2], m[4j+3])`` and ``v0`` again; the pieces
    are joined with :func:`glue` on the first and last tile of each gap, so
    every constrained tile is exactly ``v0`` or ``w0``.
    """
    if states is None:
        states = periodic_states(pot, grid.n, grid.N)
    v0, w0 = states.v0(grid), states.w0(grid)
    if spec.K == 0:
        return v0
    spec.validate()
    if grid.a > spec.outer_left or grid.b <= spec.outer_right:
        raise ConfigurationError("constraint regions do not fit in the strip")
    if heteroclinics is None:
        hg = GridSpec(grid.n, -20, 20, grid.N)
        heteroclinics = (solve_heteroclinic(pot, hg, "up", states=states),
                         solve_heteroclinic(pot, hg, "down", states=states))
    up, down = heteroclinics
    u = v0
    for j in range(spec.K):
        m1, m2, m3, m4 = spec.m[4 * j:4 * j + 4]
        U = _place_front(up.minimizer, up.v0, grid, 0.5 * (m1 + m2))
        D = _place_front(down.minimizer, down.v0, grid, 0.5 * (m3 + m4))
        u = glue(U, u, m1, "right")
        u = glue(u, w0, m2 - 1, "left")
        u = glue(D, u, m3, "right")
        u = glue(u, v0, m4 - 1, "left")
    return u


def _margins(u: Field, v0: Field, spec: TransitionSpec):
    w0 = v0.shift_values(1)
    margins, where = [], []
    for c in spec.constraints():
        phi = v0 if c.target == "v0" else w0
        for i in c.tile_range():
            margins.append(c.rho - tile_l2_distance(u, phi, i))
            where.append((c.index, i))
    return np.array(margins), where


def solve_multitransition(pot: Potential, grid: GridSpec, spec: TransitionSpec, *,
                          states: States | None = None,
                          heteroclinics: tuple[SolveReport, SolveReport] | None = None,
                          pad: int = 10, gtol: float | None = None, max_iters: int = 300,
                          penalty_schedule: Sequence[float] = (1e2, 1e4, 1e6, 1e8),
                          feas_tol: float = 1e-8, check_admissible: bool = True,
                          store=None, key: str = "multi") -> SolveReport:
    """Minimize the strip energy over the ``2K``-transition constraint set.

    The constraints are imposed by the penalty
    ``mu/2 * sum max(0, ||u - phi||^2_{T_i} - rho^2)^2`` with ``mu`` taken
    from ``penalty_schedule``; rounds stop once the worst violation of
    ``||u - phi||_{T_i} <= rho`` is at most ``feas_tol``.  Both strip faces are
    pinned to ``v0``.  The report carries every tile margin
    ``rho - ||u - phi||_{T_i}`` for the audit.
    """
    if states is None:
        states = periodic_states(pot, grid.n, grid.N)
    v0, w0 = states.v0(grid), states.w0(grid)
    rho_bar = tile_l2_distance(w0, v0, grid.a)
    spec.validate(rho_bar)
    if spec.K == 0:
        raise ConfigurationError("solve_multitransition needs K >= 1")
    if grid.a > spec.outer_left - pad or grid.b < spec.outer_right + 1 + pad:
        raise ConfigurationError(
            f"strip [{grid.a},{grid.b}] must extend {pad} tiles beyond the constrained "
            f"tiles [{spec.outer_left},{spec.outer_right}]")
    if heteroclinics is None:
        hg = GridSpec(grid.n, -20, 20, grid.N)
        heteroclinics = (solve_heteroclinic(pot, hg, "up", states=states, store=store,
                                            key=f"{key}/hetero_up"),
                         solve_heteroclinic(pot, hg, "down", states=states, store=store,
                                            key=f"{key}/hetero_down"))
    if check_admissible:
        bad = rho_admissibility(spec, *heteroclinics)
        if bad:
            k, r, s = bad[0]
            raise ConfigurationError(
                f"rho[{k}]={r} lies within 1e-3 of the sampled forbidden value {s:.6g}")
    guess = build_initial_guess(pot, grid, spec, heteroclinics=heteroclinics, states=states)
    prob = _StripProblem(pot, states.c0, guess, dirichlet_mask(grid), v0, w0)
    targets = []
    for c in spec.constraints():
        for i in c.tile_range():
            prob.add_term(i, v0 if c.target == "v0" else w0, c.rho)
            targets.append(c.rho)
    targets = np.array(targets)
    gtol = _default_gtol(grid, gtol)
    x = prob.x0()
    rounds = [{"mu": 0.0, "J1": prob.energy(x), "violation": 0.0, "iterations": 0}]
    trace: list = []
    iters = 0
    violation = np.inf
    for r, mu in enumerate(penalty_schedule):
        prob.mu = float(mu)
        res = prob.run(x, gtol=gtol, max_iters=max_iters, store=store, key=f"{key}/round{r}")
        x = res.x
        iters += res.iterations
        trace += res.trace
        violation = float(max(0.0, np.max(prob.distances(x) - targets)))
        rounds.append({"mu": float(mu), "J1": prob.energy(x), "violation": violation,
                       "iterations": res.iterations})
        logger.info("penalty round %d mu=%.1e J1=%.12g violation=%.3e", r, mu,
                    rounds[-1]["J1"], violation)
        if violation <= feas_tol:
            break
    U = prob.field(x)
    if violation > feas_tol:
        raise InfeasibleError(f"constraint violation {violation:.3e} after the last penalty round",
                              best=U, value=prob.energy(x))
    margins, where = _margins(U, v0, spec)
    return SolveReport(
        kind="multitransition", minimizer=U, objective=strip_energy(U, pot, states.c0),
        pde_residual=_interior_residual(U, pot), iterations=iters, converged=True,
        c0=states.c0, potential=pot, v0=v0, spec=spec, margins=margins,
        margin_tiles=where, rho_bar=rho_bar, trace=trace, rounds=rounds,
        extra={"initial_J1": rounds[0]["J1"]})


def scan_geometry(pot: Potential, rho: float, *, ells: Sequence[int] = (2, 3, 4),
                  gaps: Sequence[int] = (4, 6, 8, 12), n: int = 1, N: int = 32, pad: int = 10,
                  states: States | None = None,
                  heteroclinics: tuple[SolveReport, SolveReport] | None = None,
                  **solve_kw) -> dict:
    """Strict-inactivity audit over a family of single-block geometries.

    Geometry ``(l, G)`` has every ``l_i = l`` and ``m = (0, G, 2G + 2l, 3G + 2l)``,
    i.e. gaps of ``G`` tiles between consecutive constraint regions.  Runs
    are ordered by block length; the result lists every run and the first
    (smallest) geometry whose solve converges with all constraints strictly
    inactive, or ``None``.
    """
    if states is None:
        states = periodic_states(pot, n, N)
    if heteroclinics is None:
        hg = GridSpec(n, -20, 20, N)
        heteroclinics = (solve_heteroclinic(pot, hg, "up", states=states),
                         solve_heteroclinic(pot, hg, "down", states=states))
    combos = sorted(((l, G) for l in ells for G in gaps), key=lambda t: (3 * t[1] + 2 * t[0], t[0]))
    rows, smallest = [], None
    for l, G in combos:
        m = (0, G, 2 * G + 2 * l, 3 * G + 2 * l)
        spec = TransitionSpec.single(m, (l,) * 4, rho, alphabet_size=1)
        row = {"l": l, "gap": G, "m": list(m)}
        try:
            spec.validate()
            grid = GridSpec(n, spec.outer_left - pad, spec.outer_right + 1 + pad, N)
            rep = solve_multitransition(pot, grid, spec, states=states,
                                        heteroclinics=heteroclinics, pad=pad, **solve_kw)
            row.update(passed=rep.strictly_inactive, min_margin=rep.min_margin,
                       pde_residual=rep.pde_residual, objective=rep.objective)
        except (ConfigurationError, ConvergenceError) as err:
            row.update(passed=False, error=f"{type(err).__name__}: {err}")
        rows.append(row)
        if smallest is None and row["passed"]:
            smallest = {"l": l, "gap": G, "m": list(m)}
    return {"rho": float(rho), "runs": rows, "smallest_passing": smallest}


# ----------------------------------------------------------------------------
# Equality-constrained tile problem (level sets of rho_- / rho_+ on T_0)
# ----------------------------------------------------------------------------

def solve_tile_constrained(report: SolveReport, rho: float, which: str = "minus", *,
                           tile: int = 0, penalty_schedule=(1e2, 1e4, 1e6, 1e8),
                           gtol: float | None = None, max_iters: int = 300) -> dict:
    """Minimize the heteroclinic strip energy subject to ``||u - phi||_{T_tile} = rho``.

    ``phi`` is ``v0`` for ``which="minus"`` and ``w0`` for ``"plus"``.  Starts
    from the two integer translates of the heteroclinic whose tile distances
    bracket ``rho`` and applies an equality penalty with increasing weight.
    Returns the penalized minimum (a lower estimate of the constrained
    infimum when the penalized minimizer is global), the energy of the
    minimizer after radially rescaling ``u - phi`` on the tile onto the
    constraint (a feasible upper estimate) and the final constraint error.
    """
    U, v0 = report.minimizer, report.v0
    g = U.grid
    phi = v0 if which == "minus" else v0.shift_values(1)
    w0 = v0.shift_values(1)
    samples = np.array([tile_l2_distance(U, phi, i) for i in g.tiles])
    # translate k moves tile tile+k onto tile: tau_{-k}
    ks = np.array(list(g.tiles)) - tile
    order = np.argsort(np.abs(samples - rho))
    starts = []
    for idx in order:
        k = int(ks[idx])
        if abs(k) < g.n_tiles // 2 and k not in starts:
            starts.append(k)
        if len(starts) == 2:
            break
    fixed = dirichlet_mask(g)
    gtol = _default_gtol(g, gtol)
    best = None
    for k in starts:
        init = embed(U, g, -k)
        vals, lift = np.array(init.values), np.array(init.lift)
        vals[0], lift[0], vals[-1], lift[-1] = U.values[0], U.lift[0], U.values[-1], U.lift[-1]
        init = Field(g, vals, lift)
        prob = _StripProblem(report.potential, report.c0, init, fixed, v0, w0)
        prob.add_term(tile, phi, rho, equality=True)
        x = prob.x0()
        try:
            for mu in penalty_schedule:
                prob.mu = float(mu)
                x = prob.run(x, gtol=gtol, max_iters=max_iters).x
        except ConvergenceError as err:
            logger.warning("tile-constrained solve from translate %d: %s", k, err)
            continue
        val = prob.energy(x) + prob.penalty(x)
        if best is None or val < best[0]:
            best = (val, prob, x, k)
    if best is None:
        raise ConvergenceError("tile-constrained solve failed from every start")
    val, prob, x, k = best
    u = prob.field(x)
    diff = u.diff(phi)
    sl = g.tile_slice(tile)
    dist = tile_l2_distance(u, phi, tile)
    full = u.full().copy()
    full[sl] = phi.full()[sl] + diff[sl] * (rho / dist if dist > 0 else 1.0)
    full = np.clip(full, v0.full(), w0.full())
    feas = Field.from_full(g, full)
    return {
        "lower": float(val),
        "upper": strip_energy(feas, report.potential, report.c0),
        "J1": prob.energy(x),
        "constraint_error": float(abs(dist - rho)),
        "start_translate": k,
        "minimizer": u,
    }


# ----------------------------------------------------------------------------
# Infinite-transition surrogate
# ----------------------------------------------------------------------------

def block_period(base: TransitionSpec) -> int:
    """Smallest shift at which consecutive copies of ``base`` satisfy the ordering chain."""
    return base.m[-1] + base.l[-1] + base.l[0] + 4 - base.m[0]


def _block_offsets(mode: str, K: int) -> list[int]:
    if mode == "right":
        return list(range(K))
    if mode == "left":
        return list(range(-(K - 1), 1))
    if mode == "bilateral":
        return list(range(-(K - 1), K))
    raise ConfigurationError(f"unknown mode {mode!r}; use right, left or bilateral")


def approximate_infinite(pot: Potential, mode: str, base_spec: TransitionSpec,
                         K_list: Iterable[int], window: tuple[int, int], *, n: int = 1,
                         N: int = 32, pad: int = 10, period: int | None = None,
                         states: States | None = None,
                         heteroclinics: tuple[SolveReport, SolveReport] | None = None,
                         store=None, **solve_kw) -> InfiniteResult:
    """Solve with the base block pattern repeated and record window differences.

    ``mode="right"`` adds blocks toward ``+inf`` (block offsets ``0..K-1``),
    ``"left"`` toward ``-inf`` and ``"bilateral"`` on both sides
    (``-(K-1)..K-1``).  ``window`` is an inclusive tile range; it may not
    meet any added block, and for one-sided modes it must lie on the side
    away from the growth.
    """
    K_list = tuple(int(k) for k in K_list)
    if not K_list or any(k < 1 for k in K_list) or any(
            b <= a for a, b in zip(K_list, K_list[1:])):
        raise ConfigurationError("K_list must be strictly increasing positive integers")
    base_spec.validate()
    if base_spec.alphabet_size is not None and len(set(base_spec.rho)) > base_spec.alphabet_size:
        raise ConfigurationError("base spec exceeds its rho alphabet")
    P = block_period(base_spec) if period is None else int(period)
    w_lo, w_hi = int(window[0]), int(window[1])
    if w_hi < w_lo:
        raise ConfigurationError("window must be an inclusive tile range lo <= hi")
    Kmax = K_list[-1]
    for j in _block_offsets(mode, Kmax):
        s = base_spec.shifted(j * P)
        if j != 0 and not (w_hi < s.outer_left or w_lo > s.outer_right):
            raise ConfigurationError(f"window [{w_lo},{w_hi}] overlaps added block {j}")
        if mode == "right" and j > 0 and w_hi >= s.outer_left:
            raise ConfigurationError("right mode needs the window left of all added blocks")
        if mode == "left" and j < 0 and w_lo <= s.outer_right:
            raise ConfigurationError("left mode needs the window right of all added blocks")
    if states is None:
        states = periodic_states(pot, n, N)
    if heteroclinics is None:
        hg = GridSpec(n, -20, 20, N)
        heteroclinics = (solve_heteroclinic(pot, hg, "up", states=states, store=store,
                                            key="infinite/hetero_up"),
                         solve_heteroclinic(pot, hg, "down", states=states, store=store,
                                            key="infinite/hetero_down"))
    reports = []
    for K in K_list:
        spec = TransitionSpec.concat([base_spec.shifted(j * P) for j in _block_offsets(mode, K)])
        spec.validate()
        a = min(spec.outer_left - pad, w_lo)
        b = max(spec.outer_right + 1 + pad, w_hi + 1)
        grid = GridSpec(n, a, b, N)
        rep = solve_multitransition(pot, grid, spec, states=states, heteroclinics=heteroclinics,
                                    pad=pad, store=store, key=f"infinite/K{K}", **solve_kw)
        rep.extra.update({"K": K, "period": P, "mode": mode})
        reports.append(rep)
    tiles = range(w_lo, w_hi + 1)
    cauchy = []
    for (K0, r0), (K1, r1) in zip(zip(K_list, reports), zip(K_list[1:], reports[1:])):
        cauchy.append((K0, K1, window_l2_distance(r1.minimizer, r0.minimizer, tiles)))
    to_v0 = [window_l2_distance(r.minimizer, r.v0, tiles) for r in reports]
    return InfiniteResult(mode, K_list, (w_lo, w_hi), reports, cauchy, to_v0)

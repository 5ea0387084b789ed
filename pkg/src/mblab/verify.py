"""
A posteriori checks on potentials and solver output.

Each check returns a :class:`CheckResult` holding the pass flag, the
measured quantities and the tolerances used, so that a failing check shows
by how much it failed.  Checks marked ``heuristic`` are reported but do not
count towards the battery's verdict.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .energy import (cell_energy, compute_c0, dirichlet_mask, glue, ledger, pde_residual,
                     strip_energy, tile_energy, tile_gradient_norms, window_energy)
from .errors import ConfigurationError, ConvergenceError, RangeError
from .grid import Field, GridSpec, tile_l2_distance, translate, window_l2_distance
from .potential import Potential
from .solvers import (SolveReport, TransitionSpec, _StripProblem,
                      solve_tile_constrained)

logger = logging.getLogger(__name__)

__all__ = [
    "CheckResult", "context_hash", "report_from_field",
    "check_gap_star0", "check_gap_star1", "check_lemma_6_11", "check_lemma_6_74",
    "check_decay", "check_apriori_bound", "check_local_min", "check_remark_margins",
    "check_window_bounds", "check_window_upper", "check_near_state_windows",
    "check_pipeline", "run_battery", "battery_passed",
]


def context_hash(obj) -> str:
    """Short SHA-256 of a JSON-serializable description."""
    text = json.dumps(obj, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class CheckResult:
    check: str
    passed: bool
    measured: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)
    context: dict = field(default_factory=dict)
    heuristic: bool = False
    skipped: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {"check": self.check, "passed": bool(self.passed), "heuristic": self.heuristic,
                "skipped": self.skipped, "measured": _plain(self.measured),
                "tolerance": _plain(self.tolerance), "context": self.context,
                "note": self.note}

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if self.skipped:
            tag += " (skipped)"
        if self.heuristic:
            tag += " [heuristic]"
        keys = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items()
                         if np.isscalar(v))
        return f"{tag} {self.check}: {keys}"


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, (float, np.floating)) else str(v)


def _plain(d):
    if isinstance(d, dict):
        return {k: _plain(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_plain(v) for v in d]
    if isinstance(d, np.ndarray):
        return [_plain(v) for v in d.tolist()]
    if isinstance(d, (np.floating,)):
        return float(d)
    if isinstance(d, (np.integer,)):
        return int(d)
    if isinstance(d, (np.bool_,)):
        return bool(d)
    return d


def _context(pot: Potential | None = None, grid: GridSpec | None = None,
             spec: TransitionSpec | None = None) -> dict:
    ctx = {}
    if pot is not None:
        ctx["potential"] = context_hash(pot.to_dict())
    if grid is not None:
        ctx["grid"] = context_hash(grid.to_dict())
    if spec is not None:
        ctx["spec"] = context_hash(spec.to_dict())
    return ctx


def _report_context(r: SolveReport) -> dict:
    return _context(r.potential, r.minimizer.grid, r.spec)


def report_from_field(u: Field, pot: Potential, v0: Field, c0: float = 0.0,
                      kind: str = "field") -> SolveReport:
    """Wrap an arbitrary field as a report (for checks on non-solver fields)."""
    return SolveReport(kind=kind, minimizer=u, objective=strip_energy(u, pot, c0),
                       pde_residual=pde_residual(u, pot, dirichlet_mask(u.grid)),
                       iterations=0, converged=False, c0=c0, potential=pot, v0=v0)


# ----------------------------------------------------------------------------
# Gap conditions
# ----------------------------------------------------------------------------

def check_gap_star0(pot: Potential, grid: GridSpec | None = None, *, n: int = 1, N: int = 32,
                    gap_tol: float = 1e-3, steps: int = 32, c0: float | None = None,
                    max_iters: int = 200) -> CheckResult:
    """No cell minimizer strictly between ``v0`` and ``w0 = v0 + 1``.

    For ``s = k/steps``, ``0 < s < 1``, minimizes ``J_0`` with the base slice
    ``x_1 = 0`` pinned to ``v0 + s``; passes if every pinned minimum exceeds
    ``c0 + gap_tol``.
    """
    if grid is None:
        grid = GridSpec.cell(n, N)
    c0_cell, v0 = compute_c0(pot, grid)
    if c0 is None:
        c0 = c0_cell
    fixed = np.zeros(grid.shape, dtype=bool)
    fixed[0] = True
    excess = []
    for k in range(1, steps):
        s = k / steps
        init = v0.replace(values=v0.values + s)
        prob = _StripProblem(pot, 0.0, init, fixed)
        try:
            res = prob.run(prob.x0(), gtol=1e-8 * grid.N, max_iters=max_iters)
            x = res.x
        except ConvergenceError as err:
            x = err.best.values.ravel()[prob.free] if err.best is not None else prob.x0()
        J0 = cell_energy(prob.field(x), pot)
        excess.append(J0 - c0)
    excess = np.array(excess)
    k = int(np.argmin(excess))
    return CheckResult(
        "gap_star0", bool(excess[k] > gap_tol),
        measured={"min_excess": float(excess[k]), "argmin_s": (k + 1) / steps, "c0": float(c0),
                  "excess": excess},
        tolerance={"gap_tol": gap_tol}, context=_context(pot, grid))


def _orbit_distance(u: Field, U: Field, tiles: Sequence[int], kmax: int) -> tuple[float, int]:
    best = (np.inf, 0)
    for k in range(-kmax, kmax + 1):
        d = window_l2_distance(u, translate(U, k), tiles)
        if d < best[0]:
            best = (d, k)
    return best


def check_gap_star1(report: SolveReport, *, gap_tol: float = 1e-3, orbit_tol: float = 1e-3,
                    ts: Sequence[float] = (0.45, 0.55), max_iters: int = 300) -> CheckResult:
    """Heuristic test that the heteroclinic and its unit translate are adjacent.

    Requires ``||tau_{-1} U - U||`` on the central tile to exceed ``gap_tol``
    and that re-minimizing from ``(1 - t) U + t tau_{-1} U`` for each ``t`` in
    ``ts`` returns to the integer-translate orbit of ``U`` (within
    ``orbit_tol`` on the interior tiles).  The exact midpoint ``t = 1/2`` is
    avoided because it may be a symmetric critical point.
    """
    U, v0 = report.minimizer, report.v0
    g = U.grid
    Um = translate(U, -1)
    centre = (g.a + g.b) // 2
    sep = tile_l2_distance(Um, U, centre)
    tiles = range(g.a + 6, g.b - 6)
    dists, shifts = [], []
    for t in ts:
        start = Field.from_full(g, (1 - t) * U.full() + t * Um.full())
        vals, lift = np.array(start.values), np.array(start.lift)
        vals[0], lift[0], vals[-1], lift[-1] = U.values[0], U.lift[0], U.values[-1], U.lift[-1]
        start = Field(g, vals, lift)
        prob = _StripProblem(report.potential, report.c0, start, dirichlet_mask(g), v0,
                             v0.shift_values(1))
        try:
            x = prob.run(prob.x0(), gtol=1e-8 * g.N, max_iters=max_iters).x
        except ConvergenceError as err:
            x = err.best.values.ravel()[prob.free]
        d, k = _orbit_distance(prob.field(x), U, tiles, 4)
        dists.append(d)
        shifts.append(k)
    ok = bool(sep > gap_tol and max(dists) <= orbit_tol)
    return CheckResult(
        "gap_star1", ok,
        measured={"translate_separation": sep, "max_orbit_distance": float(max(dists)),
                  "orbit_distances": dists, "matched_shifts": shifts},
        tolerance={"gap_tol": gap_tol, "orbit_tol": orbit_tol},
        context=_report_context(report), heuristic=True)


# ----------------------------------------------------------------------------
# Heteroclinic energy bounds
# ----------------------------------------------------------------------------

def _value(r) -> float:
    return float(r.objective if hasattr(r, "objective") else r)


def check_lemma_6_11(up, down, *, pos_tol: float = 1e-3) -> CheckResult:
    """``c1(v0, w0) + c1(w0, v0)`` is positive (beyond ``pos_tol``)."""
    c1, c1p = _value(up), _value(down)
    s = c1 + c1p
    return CheckResult("lemma_6_11", bool(s > pos_tol),
                       measured={"c1": c1, "c1_reverse": c1p, "sum": s},
                       tolerance={"pos_tol": pos_tol})


def check_lemma_6_74(spec: TransitionSpec, up: SolveReport, down: SolveReport, *,
                     pos_tol: float = 1e-3, tile: int = 0) -> CheckResult:
    """Level sets of the tile distance on ``T_0`` cost more than ``c1``.

    For every block, the strip energy is minimized on the heteroclinic strip
    subject to ``rho_-(u) = rho_{4j+1}`` and to ``rho_+(u) = rho_{4j+2}``
    (forward direction) and to ``rho_+(u) = rho_{4j+3}``,
    ``rho_-(u) = rho_{4j+4}`` (reverse direction).  The penalized minimum is
    used as the estimate of ``d``; passes if every estimate exceeds the
    matching ``c1`` by more than ``pos_tol``.
    """
    jobs = {}
    for k, rho in enumerate(spec.rho):
        rep, which = [(up, "minus"), (up, "plus"), (down, "plus"), (down, "minus")][k % 4]
        jobs.setdefault((id(rep), which, rho), (rep, which, rho, []))[3].append(k + 1)
    rows = []
    for rep, which, rho, idx in jobs.values():
        est = solve_tile_constrained(rep, rho, which, tile=tile)
        rows.append({"indices": idx, "direction": rep.direction, "branch": which, "rho": rho,
                     "d_lower": est["lower"], "d_upper": est["upper"],
                     "excess": est["lower"] - rep.objective,
                     "constraint_error": est["constraint_error"]})
    excess = min(r["excess"] for r in rows) if rows else np.inf
    return CheckResult("lemma_6_74", bool(excess > pos_tol),
                       measured={"min_excess": float(excess), "estimates": rows},
                       tolerance={"pos_tol": pos_tol},
                       context=_context(up.potential, up.minimizer.grid, spec))


# ----------------------------------------------------------------------------
# Structure of solutions
# ----------------------------------------------------------------------------

def check_decay(report: SolveReport, side: str, start_tile: int | None = None, *,
                target: Field | None = None, beyond: int = 10, threshold: float = 1e-2,
                slack: float = 0.1) -> CheckResult:
    """Tile distances to ``v0`` decay toward one end of the strip.

    Marches from ``start_tile`` (default: the outermost constrained tile on
    that side, or the strip centre for reports without constraints) to the
    strip end.  Passes if ``||U - v0||_{L^2(T_i)} <= threshold`` on every tile
    at least ``beyond`` tiles past the outermost constraint region and each
    distance is at most ``(1 + slack)`` times the previous one.  The
    ``W^{1,2}(X_i)`` distances over five-tile windows are reported as well.
    """
    U = report.minimizer
    g = U.grid
    phi = report.v0 if target is None else target
    spec = report.spec
    if side not in ("left", "right"):
        raise ConfigurationError("side must be 'left' or 'right'")
    if start_tile is None:
        if spec is not None and spec.K:
            start_tile = spec.outer_left if side == "left" else spec.outer_right
        else:
            start_tile = (g.a + g.b) // 2
    if not g.a <= start_tile <= g.b - 1:
        raise RangeError(f"start tile {start_tile} outside the strip")
    if spec is not None and spec.K:
        edge = spec.outer_left if side == "left" else spec.outer_right
    else:
        edge = start_tile
    tiles = (list(range(start_tile, g.a - 1, -1)) if side == "left"
             else list(range(start_tile, g.b)))
    diff = Field(g, U.diff(phi))
    l2 = np.array([tile_l2_distance(U, phi, i) for i in tiles])
    grad = tile_gradient_norms(diff)
    w12 = []
    for i in tiles:
        win = [j for j in range(i - 2, i + 3) if g.a <= j <= g.b - 1]
        w12.append(float(np.sqrt(sum(tile_l2_distance(U, phi, j) ** 2 + grad[j - g.a] ** 2
                                     for j in win))))
    far = np.array([abs(i - edge) >= beyond for i in tiles])
    far_ok = bool(np.all(l2[far] <= threshold)) if far.any() else True
    steps = l2[1:] <= (1.0 + slack) * l2[:-1]
    mono_ok = bool(np.all(steps))
    worst = int(np.argmin(steps)) if not mono_ok else -1
    return CheckResult(
        f"decay_{side}", far_ok and mono_ok,
        measured={"max_far_distance": float(l2[far].max()) if far.any() else 0.0,
                  "far_tiles": int(far.sum()), "monotone": mono_ok,
                  "first_increase_tile": tiles[worst + 1] if worst >= 0 else None,
                  "tiles": tiles, "l2": l2, "w12_X": w12},
        tolerance={"threshold": threshold, "beyond": beyond, "slack": slack},
        context=_report_context(report))


def check_apriori_bound(report: SolveReport, *, C_cap: float = 50.0, floor: float = 1e-8,
                        residual_tol: float = 1e-4) -> CheckResult:
    """``||grad(U - v0)||_{T_i} <= C ||U - v0||_{T_{i-1} + T_i + T_{i+1}}``.

    Evaluated for interior tiles whose three-tile denominator exceeds
    ``floor``; skipped when the field is not a solution (interior residual
    above ``residual_tol``).
    """
    U, v0 = report.minimizer, report.v0
    g = U.grid
    if report.pde_residual > residual_tol:
        return CheckResult("apriori_bound", True, measured={"pde_residual": report.pde_residual},
                           tolerance={"residual_tol": residual_tol},
                           context=_report_context(report), skipped=True,
                           note="field does not solve the PDE; precondition not met")
    grad = tile_gradient_norms(Field(g, U.diff(v0)))
    l2 = np.array([tile_l2_distance(U, v0, i) for i in g.tiles])
    ratios = []
    for k in range(1, g.n_tiles - 1):
        den = float(np.sqrt(np.sum(l2[k - 1:k + 2] ** 2)))
        if den > floor:
            ratios.append(grad[k] / den)
    mx = float(max(ratios)) if ratios else 0.0
    return CheckResult("apriori_bound", mx <= C_cap,
                       measured={"max_ratio": mx, "eligible_tiles": len(ratios)},
                       tolerance={"C_cap": C_cap, "floor": floor},
                       context=_report_context(report))


def _ball_mask(g: GridSpec, centre: np.ndarray, radius: float) -> np.ndarray:
    axes = [g.x1] + g.transverse_coords()
    mesh = np.meshgrid(*axes, indexing="ij")
    r2 = (mesh[0] - centre[0]) ** 2
    for k in range(1, g.n):
        d = np.abs(mesh[k] - centre[k]) % 1.0
        d = np.minimum(d, 1.0 - d)
        r2 = r2 + d * d
    return r2 < radius * radius


def check_local_min(report: SolveReport, trials: int = 20, radius: float = 1.0, *,
                    seed: int = 0, centres: Sequence[Sequence[float]] | None = None,
                    rel_tol: float = 1e-8, max_iters: int = 200) -> CheckResult:
    """Re-minimize inside random balls with the exterior frozen.

    Passes if no re-solve lowers the energy by more than
    ``rel_tol * (1 + |I|)``, ``I`` being the energy of the tiles the ball
    meets.  Balls leaving the strip or containing no node are skipped.
    """
    if not 0 < radius <= 2:
        raise ConfigurationError("radius must lie in (0, 2] tiles")
    U = report.minimizer
    g = U.grid
    rng = np.random.default_rng(seed)
    if centres is None:
        centres = [np.concatenate([[rng.uniform(g.a + radius, g.b - radius)],
                                   rng.uniform(0, 1, g.n - 1)]) for _ in range(trials)]
    fixed_ends = dirichlet_mask(g)
    rows, worst = [], -np.inf
    for z in centres:
        z = np.asarray(z, dtype=float)
        if z[0] - radius < g.a or z[0] + radius > g.b:
            rows.append({"centre": z.tolist(), "skipped": "ball leaves strip"})
            continue
        ball = _ball_mask(g, z, radius) & ~fixed_ends
        if not ball.any():
            rows.append({"centre": z.tolist(), "skipped": "no interior node"})
            continue
        lo_t = max(g.a, int(np.floor(z[0] - radius)))
        hi_t = min(g.b - 1, int(np.ceil(z[0] + radius)) - 1)
        I = window_energy(U, report.potential, lo_t, hi_t, report.c0)
        prob = _StripProblem(report.potential, report.c0, U, ~ball)
        E0 = prob.energy(prob.x0())
        try:
            x = prob.run(prob.x0(), gtol=1e-10 * g.N, max_iters=max_iters).x
        except ConvergenceError as err:
            x = err.best.values.ravel()[prob.free]
        drop = E0 - prob.energy(x)
        rel = drop / (1.0 + abs(I))
        worst = max(worst, rel)
        rows.append({"centre": z.tolist(), "drop": float(drop), "local_energy": float(I),
                     "relative_drop": float(rel)})
    done = [r for r in rows if "skipped" not in r]
    ok = bool(all(r["relative_drop"] <= rel_tol for r in done))
    return CheckResult("local_min", ok,
                       measured={"trials": len(rows), "completed": len(done),
                                 "skipped": len(rows) - len(done),
                                 "max_relative_drop": float(worst) if done else 0.0,
                                 "details": rows},
                       tolerance={"rel_tol": rel_tol, "radius": radius},
                       context=_report_context(report), skipped=not done)


def check_remark_margins(report: SolveReport, up, down, tile: int | None = None) -> CheckResult:
    """``|J_{1,tile}|`` of the solution and of both cut-offs at ``tile`` stay below ``gamma``.

    ``gamma = (c1 + c1') / 6``.  The cut-offs keep the solution on one side
    of the tile and ``v0`` on the other, glued linearly across it.  The
    default tile is the one closest to ``v0`` in the first constraint region.
    """
    U, v0 = report.minimizer, report.v0
    pot, c0 = report.potential, report.c0
    gamma = (_value(up) + _value(down)) / 6.0
    if tile is None:
        if report.spec is None or not report.spec.K:
            raise ConfigurationError("default tile needs a transition spec")
        c = report.spec.constraints()[0]
        d = [tile_l2_distance(U, v0, i) for i in c.tile_range()]
        tile = c.tiles[0] + int(np.argmin(d))
    f1 = glue(U, v0, tile, "left")
    f2 = glue(U, v0, tile, "right")
    vals = {"J_U": tile_energy(U, pot, tile, c0), "J_f1": tile_energy(f1, pot, tile, c0),
            "J_f2": tile_energy(f2, pot, tile, c0)}
    worst = max(abs(v) for v in vals.values())
    return CheckResult("remark_margins", bool(worst < gamma),
                       measured={"gamma": gamma, "tile": tile, "max_abs": worst, **vals,
                                 "distance_to_v0": tile_l2_distance(U, v0, tile)},
                       tolerance={"gamma": gamma}, context=_report_context(report))


# ----------------------------------------------------------------------------
# Ledger bounds and structural checks
# ----------------------------------------------------------------------------

def check_window_bounds(report: SolveReport, K1bar: float = 0.0, tol: float = 1e-10) -> CheckResult:
    """Every window sum of tile energies is at least ``-K1bar`` (up to ``tol``)."""
    L = ledger(report.minimizer, report.potential, report.c0)
    mn = L.min_window()
    return CheckResult("window_lower_bound", bool(mn >= -K1bar - tol),
                       measured={"min_window": mn, "min_tile": float(L.tiles.min())},
                       tolerance={"K1bar": K1bar, "tol": tol}, context=_report_context(report))


def check_window_upper(report: SolveReport, K1bar: float | None = None,
                       tol: float = 1e-10) -> CheckResult:
    """Every window sum is at most ``J_1 + 2 K1bar`` (``K1bar`` estimated if omitted)."""
    L = ledger(report.minimizer, report.potential, report.c0)
    K = L.K1bar_est if K1bar is None else K1bar
    mx = L.max_window()
    return CheckResult("window_upper_bound", bool(mx <= L.total + 2 * K + tol),
                       measured={"max_window": mx, "total": L.total, "K1bar": K},
                       tolerance={"tol": tol}, context=_report_context(report))


def _best_windows(report: SolveReport):
    """Per constraint region: the five-tile window closest to its target state."""
    U, v0 = report.minimizer, report.v0
    g = U.grid
    w0 = v0.shift_values(1)
    out = []
    for c in report.spec.constraints():
        phi = v0 if c.target == "v0" else w0
        best = None
        for i in c.tile_range():
            win = [j for j in range(i - 2, i + 3)]
            if win[0] < g.a or win[-1] > g.b - 1:
                continue
            d = window_l2_distance(U, phi, win)
            if best is None or d < best[0]:
                best = (d, i)
        out.append((c, best))
    return out


def check_near_state_windows(report: SolveReport, sigma: float = 1e-2) -> CheckResult:
    """Each constraint region holds a five-tile window within ``sigma`` of its state."""
    rows = []
    for c, best in _best_windows(report):
        rows.append({"region": c.index, "centre": None if best is None else best[1],
                     "distance": np.inf if best is None else best[0]})
    worst = max(r["distance"] for r in rows) if rows else 0.0
    return CheckResult("near_state_windows", bool(worst <= sigma),
                       measured={"max_distance": float(worst), "regions": rows},
                       tolerance={"sigma": sigma}, context=_report_context(report))


def check_pipeline(report: SolveReport, *, residual_tol: float = 1e-5,
                   decay_threshold: float = 1e-2, end_tol: float = 1e-3) -> list[CheckResult]:
    """Structural checks on a multi-transition report.

    * ``pipeline_A``: each constraint region contains a five-tile window on
      which the residual is below ``residual_tol``;
    * ``pipeline_B``: the end tiles are within ``end_tol`` of ``v0``;
    * ``pipeline_C``: the reported objective is the strip energy of the
      minimizer and does not exceed the initial guess;
    * ``pipeline_D``: every constraint is strictly inactive and the residual
      is below ``residual_tol`` on all interior tiles;
    * ``pipeline_E``: decay toward ``v0`` on both sides.
    """
    U, v0, pot = report.minimizer, report.v0, report.potential
    g = U.grid
    ctx = _report_context(report)
    mask = dirichlet_mask(g)
    out = []
    worst = 0.0
    for c, best in _best_windows(report):
        if best is None:
            worst = np.inf
            continue
        i = best[1]
        worst = max(worst, pde_residual(U, pot, mask, range(i - 2, i + 3)))
    out.append(CheckResult("pipeline_A", bool(worst <= residual_tol),
                           measured={"max_window_residual": worst},
                           tolerance={"residual_tol": residual_tol}, context=ctx))
    ends = (tile_l2_distance(U, v0, g.a), tile_l2_distance(U, v0, g.b - 1))
    out.append(CheckResult("pipeline_B", bool(max(ends) <= end_tol),
                           measured={"left_end": ends[0], "right_end": ends[1]},
                           tolerance={"end_tol": end_tol}, context=ctx))
    J = strip_energy(U, pot, report.c0)
    init = report.extra.get("initial_J1", np.inf)
    out.append(CheckResult("pipeline_C",
                           bool(abs(J - report.objective) <= 1e-12 * (1 + abs(J))
                                and J <= init + 1e-10),
                           measured={"objective": report.objective, "recomputed": J,
                                     "initial_J1": init},
                           tolerance={"energy_tol": 1e-10}, context=ctx))
    res_all = pde_residual(U, pot, mask)
    out.append(CheckResult("pipeline_D", bool(report.strictly_inactive and res_all <= residual_tol),
                           measured={"min_margin": report.min_margin,
                                     "margin_floor": 1e-4 * report.rho_bar,
                                     "pde_residual": res_all},
                           tolerance={"residual_tol": residual_tol}, context=ctx))
    left = check_decay(report, "left", threshold=decay_threshold)
    right = check_decay(report, "right", threshold=decay_threshold)
    out.append(CheckResult("pipeline_E", left.passed and right.passed,
                           measured={"left_far": left.measured["max_far_distance"],
                                     "right_far": right.measured["max_far_distance"],
                                     "left_monotone": left.measured["monotone"],
                                     "right_monotone": right.measured["monotone"]},
                           tolerance=left.tolerance, context=ctx))
    return out


# ----------------------------------------------------------------------------
# Battery
# ----------------------------------------------------------------------------

def run_battery(pot: Potential, up: SolveReport, down: SolveReport,
                multi: SolveReport | None = None, *, local_trials: int = 20,
                seed: int = 0) -> list[CheckResult]:
    """All checks that apply to the given reports, in a fixed order."""
    g = up.minimizer.grid
    out = [check_gap_star0(pot, n=g.n, N=g.N), check_gap_star1(up),
           check_lemma_6_11(up, down)]
    for r in (up, down):
        out.append(check_apriori_bound(r))
        out.append(check_local_min(r, local_trials, seed=seed))
        out.append(check_window_bounds(r))
        out.append(check_window_upper(r))
    if multi is not None:
        out.append(check_lemma_6_74(multi.spec, up, down))
        out.append(check_decay(multi, "left"))
        out.append(check_decay(multi, "right"))
        out.append(check_apriori_bound(multi))
        out.append(check_local_min(multi, local_trials, seed=seed))
        out.append(check_remark_margins(multi, up, down))
        out.append(check_window_bounds(multi))
        out.append(check_window_upper(multi))
        out.append(check_near_state_windows(multi))
        out.extend(check_pipeline(multi))
    for r in out:
        r.context.setdefault("potential", context_hash(pot.to_dict()))
    return out


def battery_passed(results: Sequence[CheckResult]) -> bool:
    """True unless a non-heuristic, non-skipped check failed."""
    return all(r.passed or r.heuristic or r.skipped for r in results)

"""
Projected modified-Newton minimizer shared by every solve in the package.

The objective is ``fun(x) -> (f, g)`` with ``g`` the plain gradient.  A
positive ``metric`` (the quadrature weights) turns it into the scaled
gradient ``g / metric`` whose max-norm is the stopping quantity; for the
discrete energies that is the pointwise residual of the PDE.

Box constraints are handled with a Bertsekas-style active set: variables
sitting on a bound with the gradient pushing outward take a scaled gradient
step (and are clipped back), the free block takes a Newton step.  The
Hessian may be indefinite; a Levenberg shift ``lambda * diag(metric)`` is
raised until the banded/dense Cholesky factorization succeeds.  Low-rank
positive terms (penalty curvature) are added through Woodbury.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ConvergenceError, NumericalError

logger = logging.getLogger(__name__)

__all__ = ["Curvature", "OptState", "OptResult", "minimize"]

EPS = np.finfo(float).eps


@dataclass
class Curvature:
    """Hessian model ``matrix + sum_k coef_k v_k v_k^T`` (all ``coef_k > 0``)."""

    matrix: sp.spmatrix
    lowrank: list = field(default_factory=list)


@dataclass
class OptState:
    """Everything needed to continue an interrupted minimization bit-for-bit."""

    x: np.ndarray
    iteration: int = 0
    trace: list = field(default_factory=list)
    shift: float = 0.0
    step: float = 1.0

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "trace": list(map(float, self.trace)),
                "shift": float(self.shift), "step": float(self.step)}

    @classmethod
    def from_dict(cls, d: dict, x: np.ndarray) -> "OptState":
        return cls(np.array(x, dtype=float), int(d["iteration"]), list(d["trace"]),
                   float(d["shift"]), float(d["step"]))


@dataclass
class OptResult:
    x: np.ndarray
    fun: float
    iterations: int
    trace: list
    pgnorm: float
    converged: bool


class _Factor:
    """Cholesky factor of a sparse SPD matrix; banded when that is cheaper."""

    def __init__(self, A: sp.spmatrix):
        A = sp.coo_matrix(A)
        n = A.shape[0]
        bw = int(np.max(np.abs(A.row - A.col))) if A.nnz else 0
        self.n = n
        if n > 4 * (bw + 1):
            upper = A.row <= A.col
            ab = np.zeros((bw + 1, n))
            np.add.at(ab, (bw + A.row[upper] - A.col[upper], A.col[upper]), A.data[upper])
            self.banded = True
            self.cb = sla.cholesky_banded(ab, lower=False)
        else:
            self.banded = False
            self.cf = sla.cho_factor(A.toarray(), lower=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.banded:
            return sla.cho_solve_banded((self.cb, False), rhs)
        return sla.cho_solve(self.cf, rhs)


def _newton_direction(curv: Curvature, g, free_idx, metric, shift):
    H = sp.csr_matrix(curv.matrix)[free_idx][:, free_idx]
    wf = metric[free_idx]
    lam = shift / 4.0 if shift > 1e-10 else 0.0
    while True:
        try:
            fac = _Factor(H + sp.diags(lam * wf) if lam > 0 else H)
            break
        except (sla.LinAlgError, ValueError):
            lam = max(4.0 * lam, 1e-2)
            if lam > 1e14:
                raise NumericalError("could not regularize Hessian")
    d = fac.solve(-g[free_idx])
    if curv.lowrank:
        U = np.column_stack([v[free_idx] for _, v in curv.lowrank])
        c = np.array([coef for coef, _ in curv.lowrank])
        Z = fac.solve(U)
        S = np.diag(1.0 / c) + U.T @ Z
        d = d - Z @ np.linalg.solve(S, U.T @ d)
    return d, lam


def minimize(
    fun: Callable,
    x0: np.ndarray,
    *,
    hess: Callable | None = None,
    metric: np.ndarray | None = None,
    lower: np.ndarray | float | None = None,
    upper: np.ndarray | float | None = None,
    project: Callable | None = None,
    gtol: float = 1e-8,
    max_iters: int = 500,
    state: OptState | None = None,
    checkpoint: Callable | None = None,
    c1: float = 1e-4,
) -> OptResult:
    """Minimize ``fun`` over the box ``[lower, upper]`` (then ``project``).

    Stops when the max-norm of the projected, metric-scaled gradient is at
    most ``gtol``.  Steps are accepted by backtracking under the Armijo
    condition; once the predicted decrease falls below the rounding level of
    ``f`` a full step is accepted only if it lowers the projected gradient,
    so the trace is nonincreasing up to ``100 * eps * (1 + |f|)``.

    Raises :class:`ConvergenceError` (with the best iterate) when
    ``max_iters`` is exhausted or no step can be taken, and
    :class:`NumericalError` on a non-finite objective.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    n = x0.size
    metric = np.ones(n) if metric is None else np.broadcast_to(np.asarray(metric, float).ravel(), (n,))
    lo = np.full(n, -np.inf) if lower is None else np.broadcast_to(np.asarray(lower, float).ravel(), (n,))
    hi = np.full(n, np.inf) if upper is None else np.broadcast_to(np.asarray(upper, float).ravel(), (n,))

    def P(z):
        z = np.clip(z, lo, hi)
        return project(z) if project is not None else z

    if state is None:
        state = OptState(P(x0.copy()))
    x = state.x
    f, g = fun(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NumericalError("non-finite objective at the initial point")
    if not state.trace:
        state.trace.append(float(f))

    while True:
        active = ((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0))
        pg = np.where(active, 0.0, g / metric)
        pgnorm = float(np.max(np.abs(pg))) if n else 0.0
        if pgnorm <= gtol:
            return OptResult(x, float(f), state.iteration, state.trace, pgnorm, True)
        if state.iteration >= max_iters:
            raise ConvergenceError(
                f"max_iters={max_iters} reached with projected gradient {pgnorm:.3e}",
                best=x.copy(), value=float(f), state=state)

        d = np.where(active, -g / metric, 0.0)
        free_idx = np.flatnonzero(~active)
        if hess is not None:
            d[free_idx], state.shift = _newton_direction(hess(x), g, free_idx, metric, state.shift)
            alpha = 1.0
        else:
            d[free_idx] = -g[free_idx] / metric[free_idx]
            alpha = min(1.0, 2.0 * state.step) if state.iteration else state.step

        accepted = False
        for _ in range(60):
            xn = P(x + alpha * d)
            step = xn - x
            if not np.any(step):
                break
            fn, gn = fun(xn)
            if not np.isfinite(fn) or not np.all(np.isfinite(gn)):
                raise NumericalError("non-finite objective during line search")
            bound = f + c1 * float(g @ step)
            if bound == f:
                break  # predicted decrease below rounding: use the fallback
            if fn <= bound:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # below the rounding level of f: judge steps by the projected gradient
            alpha = 1.0
            for _ in range(30):
                xn = P(x + alpha * d)
                fn, gn = fun(xn)
                act_n = ((xn <= lo) & (gn > 0)) | ((xn >= hi) & (gn < 0))
                pg_n = float(np.max(np.abs(np.where(act_n, 0.0, gn / metric))))
                if pg_n < pgnorm and fn - f <= 100 * EPS * (1.0 + abs(f)):
                    accepted = True
                    break
                alpha *= 0.5
        if not accepted:
            raise ConvergenceError(
                f"line search failed at iteration {state.iteration} "
                f"(projected gradient {pgnorm:.3e})",
                best=x.copy(), value=float(f), state=state)

        x, f, g = xn, fn, gn
        state.x = x
        state.iteration += 1
        state.step = alpha
        state.trace.append(float(f))
        logger.debug("iter %d f=%.16g |pg|=%.3e alpha=%.3g shift=%.3g",
                     state.iteration, f, pgnorm, alpha, state.shift)
        if checkpoint is not None:
            checkpoint(state)

"""Dense-tableau simplex solver with deterministic pivoting.

Solves  maximize c.x  subject to  A x <= b,  x >= 0  with b >= 0, so the
all-slack basis is feasible and no phase-1 is needed.  The default
pricing is Bland's rule (lowest eligible index enters, lowest basis index
breaks leaving ties), which cannot cycle and makes every run bit-for-bit
reproducible.  Dantzig pricing (most negative reduced cost) is available
as a cross-check; it falls back to Bland after a run of degenerate
pivots, so it terminates as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dger

__all__ = ["SimplexError", "SimplexResult", "simplex_maximize"]

_RCOST_TOL = 1e-10
_PIVOT_TOLS = (1e-9, 3e-7, 1e-5)  # escalated across numerical restarts
_REFACTOR_PERIOD = 4000


class SimplexError(RuntimeError):
    """Raised on unbounded problems, bad input or iteration exhaustion."""


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    value: float
    iterations: int


class _SingularBasis(Exception):
    """Internal signal: restart the solve with a larger pivot tolerance."""


def _rebuild_tableau(a, b, cost_full, basis):
    """Recompute the tableau exactly from the original data and a basis.

    Rank-1 pivot updates accumulate round-off; rebuilding from the basis
    resets the tableau to solver precision.  Raises if the basis matrix
    has become numerically singular.
    """
    m, n = a.shape
    ext = np.empty((m, n + m + 1))
    ext[:, :n] = a
    ext[:, n : n + m] = np.eye(m)
    ext[:, -1] = b
    try:
        rows = np.linalg.solve(ext[:, basis], ext)
    except np.linalg.LinAlgError as exc:
        raise _SingularBasis from exc
    t = np.zeros((m + 1, n + m + 1), order="F")
    t[:m] = rows
    cb = cost_full[basis]
    t[m] = cb @ rows
    t[m, : n + m] -= cost_full
    return t


def _pivot_loop(a, b, c, cost_full, pricing, max_iter, pivot_tol):
    m, n = a.shape
    # tableau: constraint rows | slack block | rhs, plus a reduced-cost
    # row; Fortran order so the rank-1 pivot update runs in place
    t = np.zeros((m + 1, n + m + 1), order="F")
    t[:m, :n] = a
    t[:m, n : n + m] = np.eye(m)
    t[:m, -1] = b
    t[m, :n] = -c
    basis = np.arange(n, n + m)

    use_bland = pricing == "bland"
    degenerate_streak = 0
    it = 0
    since_refactor = 0
    z_floor = 0.0  # objective is nondecreasing; a drop means round-off
    while True:
        red = t[m, :-1]
        if use_bland:
            eligible = np.flatnonzero(red < -_RCOST_TOL)
            col = -1 if len(eligible) == 0 else int(eligible[0])
        else:
            col = int(np.argmin(red))
            if red[col] >= -_RCOST_TOL:
                col = -1
        if col < 0:
            if since_refactor == 0:
                break  # optimal against a freshly rebuilt tableau
            t = _rebuild_tableau(a, b, cost_full, basis)
            since_refactor = 0
            z_floor = float(t[m, -1])
            continue
        if it >= max_iter:
            raise SimplexError(f"iteration limit {max_iter} reached")

        pos = t[:m, col] > pivot_tol
        if not np.any(pos):
            if since_refactor > 0:
                t = _rebuild_tableau(a, b, cost_full, basis)
                since_refactor = 0
                z_floor = float(t[m, -1])
                continue
            raise SimplexError("objective unbounded above")
        rhs = np.maximum(t[:m, -1], 0.0)  # clamp round-off infeasibility
        ratios = np.full(m, np.inf)
        ratios[pos] = rhs[pos] / t[:m, col][pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, best))
        # among tied rows keep only comfortably large pivots (numerical
        # stability), then take the lowest basis index: deterministic and
        # Bland-compatible
        stable = ties[t[ties, col] >= 0.5 * t[ties, col].max()]
        row = int(stable[np.argmin(basis[stable])])

        if not use_bland:
            if best <= pivot_tol:
                degenerate_streak += 1
                if degenerate_streak > 2 * (m + n):
                    use_bland = True  # anti-cycling fallback
            else:
                degenerate_streak = 0

        piv = t[row, col]
        t[row] /= piv
        col_vals = t[:, col].copy()
        col_vals[row] = 0.0
        t = dger(-1.0, col_vals, t[row].copy(), a=t, overwrite_a=1)
        t[:, col] = 0.0
        t[row, col] = 1.0
        basis[row] = col
        it += 1
        since_refactor += 1

        z = float(t[m, -1])
        if z < z_floor - 1e-7 * (1.0 + abs(z_floor)) or (
            since_refactor >= _REFACTOR_PERIOD
        ):
            t = _rebuild_tableau(a, b, cost_full, basis)
            since_refactor = 0
            z_floor = float(t[m, -1])
        else:
            z_floor = max(z_floor, z)

    x = np.zeros(n + m)
    x[basis] = t[:m, -1]
    return SimplexResult(x=x[:n].copy(), value=float(t[m, -1]), iterations=it)


def simplex_maximize(
    c: np.ndarray,
    a_ub: np.ndarray,
    b_ub: np.ndarray,
    pricing: str = "bland",
    max_iter: int | None = None,
) -> SimplexResult:
    """Maximize c.x over {x >= 0 : a_ub x <= b_ub}, b_ub >= 0."""
    c = np.asarray(c, dtype=float)
    a = np.asarray(a_ub, dtype=float)
    b = np.asarray(b_ub, dtype=float)
    if a.ndim != 2 or c.ndim != 1 or b.ndim != 1:
        raise SimplexError("bad input ranks")
    m, n = a.shape
    if c.shape != (n,) or b.shape != (m,):
        raise SimplexError("inconsistent input shapes")
    if np.any(b < 0):
        raise SimplexError("b_ub must be nonnegative (slack basis start)")
    if pricing not in ("bland", "dantzig"):
        raise SimplexError(f"unknown pricing rule {pricing!r}")
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    cost_full = np.concatenate([c, np.zeros(m)])

    for pivot_tol in _PIVOT_TOLS:
        try:
            return _pivot_loop(a, b, c, cost_full, pricing, max_iter, pivot_tol)
        except _SingularBasis:
            continue  # restart from the slack basis, larger pivot floor
    raise SimplexError("basis kept going singular; problem is ill-conditioned")

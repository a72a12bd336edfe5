"""Dense two-phase simplex for ``min c @ x  s.t.  G @ x <= h``.

Bland's rule is used in both phases, so the pivot sequence is a
deterministic function of the data and cycling cannot occur.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NumericalBreakdown

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-11    # smallest entry eligible in the ratio test
BREAKDOWN_TOL = 1e-13
MAX_PIVOTS = 100_000


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """``min objective @ x`` subject to ``constraint_matrix @ x <= rhs``.

    Variables are free unless ``nonnegative`` is set, in which case
    ``x >= 0`` is implied without spending constraint rows on it.
    """
    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray
    nonnegative: bool = False

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        g = np.atleast_2d(np.asarray(self.constraint_matrix, dtype=float))
        h = np.asarray(self.rhs, dtype=float).ravel()
        if c.size < 1 or h.size < 1:
            raise ValueError("need at least one variable and one constraint")
        if g.shape != (h.size, c.size):
            raise ValueError(f"constraint matrix shape {g.shape} != ({h.size}, {c.size})")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
            raise ValueError("linear program has non-finite data")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "constraint_matrix", g)
        object.__setattr__(self, "rhs", h)

    @property
    def num_vars(self) -> int:
        return self.objective.size


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective_value: float = float("nan")
    iterations: int = 0
    # reduced costs of the final basis over the standard-form columns
    # (structural then slack); all >= -OPT_TOL at optimality
    reduced_costs: np.ndarray | None = field(default=None, repr=False)


def _pivot(t: np.ndarray, row: int, col: int) -> None:
    piv = t[row, col]
    if abs(piv) < BREAKDOWN_TOL:
        raise NumericalBreakdown(f"pivot {piv:.3g} below {BREAKDOWN_TOL:g}")
    t[row] /= piv
    colv = t[:, col].copy()
    colv[row] = 0.0
    t -= np.outer(colv, t[row])
    t[:, col] = 0.0
    t[row, col] = 1.0


def _iterate(t: np.ndarray, basis: list[int], ncols: int, tol: float, count: int) -> tuple[str, int]:
    """Run Bland pivots on tableau ``t`` until optimal or unbounded."""
    m = t.shape[0] - 1
    while True:
        rc = t[m, :ncols]
        entering = np.flatnonzero(rc < -tol)
        if entering.size == 0:
            return "optimal", count
        col = int(entering[0])
        column = t[:m, col]
        eligible = np.flatnonzero(column > PIVOT_TOL)
        if eligible.size == 0:
            if np.any(column > BREAKDOWN_TOL):
                raise NumericalBreakdown(
                    f"entering column {col} has only pivots below {PIVOT_TOL:g}")
            return "unbounded", count
        ratios = t[eligible, -1] / column[eligible]
        best = ratios.min()
        ties = eligible[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(t, row, col)
        basis[row] = col
        count += 1
        if count > MAX_PIVOTS:
            raise NumericalBreakdown(f"no termination after {MAX_PIVOTS} pivots")


def _standard_form(prog: LinearProgram):
    g, c = prog.constraint_matrix, prog.objective
    if not prog.nonnegative:
        g = np.hstack([g, -g])
        c = np.concatenate([c, -c])
    m, nv = g.shape
    a = np.hstack([g, np.eye(m)])
    cost = np.concatenate([c, np.zeros(m)])
    return a, prog.rhs.copy(), cost, nv


def solve_lp(prog: LinearProgram) -> LpSolution:
    """Solve ``prog`` with the two-phase simplex method.

    Infeasible and unbounded programs are reported through
    :attr:`LpSolution.status`; only numerical trouble raises.
    """
    a, b, cost, nv = _standard_form(prog)
    m, ns = a.shape
    scale = max(1.0, float(np.max(np.abs(cost))))

    # rows with negative rhs are flipped and seeded with an artificial
    flip = b < 0
    a_rows = np.where(flip[:, None], -a, a)
    b_rows = np.abs(b)
    art_rows = np.flatnonzero(flip)
    k = art_rows.size
    t = np.zeros((m + 1, ns + k + 1))
    t[:m, :ns] = a_rows
    t[art_rows, ns + np.arange(k)] = 1.0
    t[:m, -1] = b_rows
    basis = [nv + i for i in range(m)]
    for idx, r in enumerate(art_rows):
        basis[r] = ns + idx

    count = 0
    if k:
        t[m, ns:ns + k] = 1.0
        t[m] -= t[art_rows].sum(axis=0)
        _, count = _iterate(t, basis, ns + k, OPT_TOL, count)
        if -t[m, -1] > FEAS_TOL * max(1.0, float(np.max(b_rows))):
            return LpSolution(LpStatus.INFEASIBLE, iterations=count)
        # drive zero-level artificials out of the basis; drop redundant rows
        keep = []
        for r in range(m):
            if basis[r] >= ns:
                cand = np.flatnonzero(np.abs(t[r, :ns]) > 1e-9)
                if cand.size == 0:
                    continue
                _pivot(t, r, int(cand[0]))
                basis[r] = int(cand[0])
            keep.append(r)
        cols = np.r_[np.arange(ns), ns + k]
        t = t[np.ix_(keep + [m], cols)]
        basis = [basis[r] for r in keep]
        m = len(keep)

    t[m, :] = 0.0
    t[m, :ns] = cost
    for r, j in enumerate(basis):
        if cost[j] != 0.0:
            t[m] -= cost[j] * t[r]
    status, count = _iterate(t, basis, ns, OPT_TOL * scale, count)
    if status == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, iterations=count)

    z = np.zeros(ns)
    z[basis] = t[:m, -1]
    z = _refine(a, b, basis, z)
    x = z[:nv]
    if not prog.nonnegative:
        n = prog.num_vars
        x = x[:n] - x[n:]
    # reduced costs recomputed from the original data, not the tableau
    try:
        y = np.linalg.solve(a[:, basis].T, cost[basis])
        rc = cost - a.T @ y
    except np.linalg.LinAlgError:
        rc = t[m, :ns].copy()
    return LpSolution(LpStatus.OPTIMAL, x=x, objective_value=float(prog.objective @ x),
                      iterations=count, reduced_costs=rc)


def _refine(a: np.ndarray, b: np.ndarray, basis: list[int], z: np.ndarray) -> np.ndarray:
    """Recompute basic values from the original constraint rows.

    Tableau updates drift; a fresh solve with the final basis restores
    full accuracy. Falls back to the tableau values if the basis matrix
    is singular in the selected rows or the solve leaves the feasible set.
    """
    if not basis:
        return z
    bmat = a[:, basis]
    try:
        if bmat.shape[0] == bmat.shape[1]:
            xb = np.linalg.solve(bmat, b)
        else:
            xb = np.linalg.lstsq(bmat, b, rcond=None)[0]
    except np.linalg.LinAlgError:
        return z
    if np.any(xb < -FEAS_TOL):
        return z
    out = np.zeros_like(z)
    out[basis] = np.maximum(xb, 0.0)
    if np.max(np.abs(a @ out - b)) > np.max(np.abs(a @ z - b)):
        return z
    return out

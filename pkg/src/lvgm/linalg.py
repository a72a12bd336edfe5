"""Dense symmetric linear algebra.

Matrices are plain float64 ``numpy`` arrays. :func:`sym` is the gatekeeper
that turns arbitrary input into a validated symmetric matrix; every other
routine here assumes its input already passed through it (or was built
symmetric by construction).
"""
from __future__ import annotations

from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import IllConditioned, NoConvergence, NotPositiveDefinite

SYMMETRY_TOL = 1e-12
DEFAULT_COND_LIMIT = 1e12
DEFAULT_EIG_TOL = 1e-14
MAX_SWEEPS = 100


class EigenDecomposition(NamedTuple):
    values: np.ndarray   # descending
    vectors: np.ndarray  # columns are eigenvectors


def sym(a, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """Return ``a`` as an exactly symmetric float64 array.

    Asymmetry up to ``tol`` (absolute) is averaged away; anything larger,
    non-square input, or non-finite entries raise ``ValueError``.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    gap = np.max(np.abs(a - a.T))
    if gap > tol:
        raise ValueError(f"matrix is not symmetric (max asymmetry {gap:.3g})")
    return 0.5 * (a + a.T)


def entrywise_max_norm(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def matrix_one_norm(a: np.ndarray) -> float:
    """Maximum absolute row sum."""
    return float(np.max(np.sum(np.abs(a), axis=1)))


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == a``.

    Raises :class:`NotPositiveDefinite` on the first pivot that is not
    strictly positive.
    """
    p = a.shape[0]
    low = np.zeros_like(a, dtype=float)
    for j in range(p):
        row = low[j, :j]
        d = a[j, j] - row @ row
        if not d > 0.0:
            raise NotPositiveDefinite(f"non-positive pivot {d:.3g} at index {j}")
        ljj = np.sqrt(d)
        low[j, j] = ljj
        if j + 1 < p:
            low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ row) / ljj
    return low


def _forward(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    x = np.empty_like(b, dtype=float)
    for i in range(low.shape[0]):
        x[i] = (b[i] - low[i, :i] @ x[:i]) / low[i, i]
    return x


def _backward(up: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = up.shape[0]
    x = np.empty_like(b, dtype=float)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - up[i, i + 1:] @ x[i + 1:]) / up[i, i]
    return x


def spd_inverse(a: np.ndarray, cond_limit: float = DEFAULT_COND_LIMIT) -> np.ndarray:
    """Invert a symmetric positive definite matrix through its Cholesky factor.

    The condition number is measured exactly in the l1 operator norm once the
    inverse is known; exceeding ``cond_limit`` raises :class:`IllConditioned`.
    """
    low = cholesky(a)
    y = _forward(low, np.eye(a.shape[0]))
    b = _backward(low.T, y)
    b = 0.5 * (b + b.T)
    cond = matrix_one_norm(a) * matrix_one_norm(b)
    if not cond <= cond_limit:
        raise IllConditioned(f"condition estimate {cond:.3g} exceeds {cond_limit:.3g}")
    return b


def is_positive_definite(a: np.ndarray) -> bool:
    try:
        cholesky(a)
    except NotPositiveDefinite:
        return False
    return True


def _round_robin(p: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings for one cyclic sweep in tournament order.

    Each round is a set of disjoint index pairs, so all of its rotations
    commute and can be applied together. Over ``m - 1`` rounds (``m`` = p
    rounded up to even) every pair appears exactly once.
    """
    m = p + (p % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        left, right = [], []
        for k in range(m // 2):
            i, j = players[k], players[m - 1 - k]
            if i < p and j < p:
                left.append(min(i, j))
                right.append(max(i, j))
        rounds.append((np.array(left, dtype=int), np.array(right, dtype=int)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def eig_sym(a: np.ndarray, tol: float = DEFAULT_EIG_TOL) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps until every off-diagonal magnitude is at most ``tol * ||a||_inf``
    (entrywise max norm of the input). Eigenvalues are returned in
    descending order; ties keep their original diagonal order.
    """
    a = np.array(a, dtype=float)
    p = a.shape[0]
    v = np.eye(p)
    scale = entrywise_max_norm(a)
    if p == 1 or scale == 0.0:
        return EigenDecomposition(np.diag(a).copy(), v)
    cutoff = tol * scale
    rounds = _round_robin(p)
    off = ~np.eye(p, dtype=bool)

    for _ in range(MAX_SWEEPS + 1):
        if np.max(np.abs(a[off])) <= cutoff:
            break
        for i, j in rounds:
            aij = a[i, j]
            active = np.abs(aij) > cutoff
            if not active.any():
                continue
            i, j, aij = i[active], j[active], aij[active]
            theta = (a[j, j] - a[i, i]) / (2.0 * aij)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # columns, then rows: A <- J^T A J
            ai, aj = a[:, i].copy(), a[:, j]
            a[:, i] = c * ai - s * aj
            a[:, j] = s * ai + c * aj
            cr, sr = c[:, None], s[:, None]
            ai, aj = a[i, :].copy(), a[j, :]
            a[i, :] = cr * ai - sr * aj
            a[j, :] = sr * ai + cr * aj
            a[i, j] = 0.0
            a[j, i] = 0.0
            vi, vj = v[:, i].copy(), v[:, j]
            v[:, i] = c * vi - s * vj
            v[:, j] = s * vi + c * vj
    else:
        raise NoConvergence(f"Jacobi did not converge in {MAX_SWEEPS} sweeps")

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    return EigenDecomposition(values[order], v[:, order])


def spectral_norm(a: np.ndarray, tol: float = DEFAULT_EIG_TOL) -> float:
    return float(np.max(np.abs(eig_sym(a, tol).values)))


def read_matrix(path) -> np.ndarray:
    """Parse the text format: a line with ``p`` then ``p`` rows of ``p`` reals."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    p = int(lines[0])
    if len(lines) - 1 != p:
        raise ValueError(f"{path}: expected {p} rows, found {len(lines) - 1}")
    rows = [[float(tok) for tok in ln.split()] for ln in lines[1:]]
    if any(len(r) != p for r in rows):
        raise ValueError(f"{path}: every row must have {p} entries")
    return sym(np.array(rows))


def write_matrix(path, a: np.ndarray) -> None:
    a = np.asarray(a, dtype=float)
    p = a.shape[0]
    out = [str(p)]
    out.extend(" ".join(format(x, ".17g") for x in row) for row in a)
    Path(path).write_text("\n".join(out) + "\n")

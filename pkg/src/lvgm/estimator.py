"""Two-stage latent-variable graphical model estimator.

Stage one solves, column by column, the constrained l1 program

    min ||beta||_1   subject to   ||Sigma_n @ beta - e_j||_inf <= tau

keeps the smaller-magnitude entry of each mirrored pair, and hard
thresholds at ``9 * Mp * tau`` to estimate the support and signs of ``S*``.
Stage two subtracts the inverse sample covariance from that sparse
estimate (the precision matrix is ``S* - L*``, so this difference tracks
``L*``) and keeps only eigenvalues above ``C3 * sqrt(p / n)``, which
yields the low-rank part and its rank.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import linalg
from .errors import LvgmError, SolverDegenerate
from .lp import LinearProgram, LpStatus, solve_lp


@dataclass(frozen=True)
class EstimatorConfig:
    C1: float = 2.0
    C3: float = 1.0
    Mp_proxy: float = 1.0
    lp_tol: float = 1e-9
    cond_limit: float = linalg.DEFAULT_COND_LIMIT
    # large-deviation constant; only used to decide event A. Defaults to C1 / 2.
    C2: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None and f.name == "C2":
                continue
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{f.name} must be finite and positive, got {v}")

    @property
    def c2(self) -> float:
        return self.C1 / 2.0 if self.C2 is None else self.C2

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown EstimatorConfig fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EstimateResult:
    S_hat1: np.ndarray
    S_hat: np.ndarray
    S_tilde: np.ndarray
    L_hat: np.ndarray
    L_tilde: np.ndarray
    rank_estimate: int
    tau_n: float
    sparse_threshold: float
    eigen_threshold: float
    feasibility_slack: float
    L_hat_eigenvalues: np.ndarray = field(repr=False)
    discarded_negative: np.ndarray = field(repr=False)  # negative eigenvalues of L_hat

    def summary(self) -> dict:
        return {
            "tau_n": self.tau_n,
            "sparse_threshold": self.sparse_threshold,
            "eigen_threshold": self.eigen_threshold,
            "feasibility_slack": self.feasibility_slack,
            "rank_estimate": self.rank_estimate,
            "L_hat_eigenvalues": self.L_hat_eigenvalues.tolist(),
            "discarded_negative_eigenvalues": self.discarded_negative.tolist(),
        }

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name in ("S_hat", "S_tilde", "L_hat", "L_tilde"):
            linalg.write_matrix(out / f"{name}.txt", getattr(self, name))
        # S_hat1 is generally asymmetric, so it bypasses the symmetric reader
        s1 = self.S_hat1
        rows = [str(s1.shape[0])] + [" ".join(format(x, ".17g") for x in r) for r in s1]
        (out / "S_hat1.txt").write_text("\n".join(rows) + "\n")
        (out / "estimate.json").write_text(json.dumps(self.summary(), indent=2) + "\n")


def compute_tau(p: int, n: int, cfg: EstimatorConfig) -> float:
    """``C1 * Mp * sqrt(log(p) / n)`` with the natural log."""
    if p < 2 or n < 2:
        raise ValueError("need p >= 2 and n >= 2")
    return cfg.C1 * cfg.Mp_proxy * float(np.sqrt(np.log(p) / n))


def clime_column(sigma_n: np.ndarray, col: int, tau: float) -> np.ndarray:
    """Minimum-l1 ``beta`` with ``||sigma_n @ beta - e_col||_inf <= tau``."""
    p = sigma_n.shape[0]
    if not 0 <= col < p:
        raise IndexError(f"column {col} out of range for p={p}")
    if not tau > 0:
        raise ValueError("tau must be positive")
    e = np.zeros(p)
    e[col] = 1.0
    # beta = plus - minus, both nonnegative
    g = np.block([[sigma_n, -sigma_n], [-sigma_n, sigma_n]])
    h = np.concatenate([tau + e, tau - e])
    sol = solve_lp(LinearProgram(np.ones(2 * p), g, h, nonnegative=True))
    if sol.status is not LpStatus.OPTIMAL:
        raise SolverDegenerate(
            f"column {col}: LP reported {sol.status.value}; adjust tau or regularize Sigma_n")
    return sol.x[:p] - sol.x[p:]


def clime_estimate(sigma_n: np.ndarray, tau: float) -> np.ndarray:
    """Stack the column solutions into the (generally asymmetric) ``S_hat1``."""
    p = sigma_n.shape[0]
    out = np.empty((p, p))
    for j in range(p):
        try:
            out[:, j] = clime_column(sigma_n, j, tau)
        except LvgmError as exc:
            raise type(exc)(f"CLIME column {j}: {exc}") from exc
    return out


def feasibility_slack(sigma_n: np.ndarray, s_hat1: np.ndarray) -> float:
    return linalg.entrywise_max_norm(sigma_n @ s_hat1 - np.eye(sigma_n.shape[0]))


def symmetrize_min(s1: np.ndarray) -> np.ndarray:
    """Keep, for every mirrored pair, the entry with smaller magnitude.

    Equal magnitudes resolve to the upper-triangle entry ``s1[i, j]``, i < j.
    """
    s1 = np.asarray(s1, dtype=float)
    upper = np.where(np.abs(s1) <= np.abs(s1.T), s1, s1.T)
    upper = np.triu(upper, k=1)
    return upper + upper.T + np.diag(np.diag(s1))


def threshold_support(s: np.ndarray, threshold: float) -> np.ndarray:
    """Zero every entry with ``|s_ij| <= threshold``; keep the rest verbatim."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    return np.where(np.abs(s) > threshold, s, 0.0)


def sign_pattern(s: np.ndarray) -> np.ndarray:
    return np.sign(s).astype(int)


def estimate_sparse(sigma_n: np.ndarray, n: int, cfg: EstimatorConfig):
    """Return ``(S_hat1, S_hat, S_tilde, tau_n)``."""
    p = sigma_n.shape[0]
    tau = compute_tau(p, n, cfg)
    s1 = clime_estimate(sigma_n, tau)
    s_hat = symmetrize_min(s1)
    s_tilde = threshold_support(s_hat, 9.0 * cfg.Mp_proxy * tau)
    return s1, s_hat, s_tilde, tau


def eigen_threshold(p: int, n: int, cfg: EstimatorConfig) -> float:
    return cfg.C3 * float(np.sqrt(p / n))


def truncate_spectrum(l_hat: np.ndarray, threshold: float):
    """Keep eigenpairs with eigenvalue strictly above ``threshold``.

    Returns ``(L_tilde, rank, eigenvalues)``.
    """
    eig = linalg.eig_sym(l_hat)
    keep = eig.values > threshold
    v = eig.vectors[:, keep]
    l_tilde = linalg.sym((v * eig.values[keep]) @ v.T, tol=np.inf)
    return l_tilde, int(keep.sum()), eig.values


def estimate_lowrank(sigma_n: np.ndarray, s_tilde: np.ndarray, n: int, cfg: EstimatorConfig):
    """Return ``(L_hat, L_tilde, rank_estimate, eigenvalues of L_hat)``.

    The sample covariance must be invertible within ``cfg.cond_limit``; in
    the ``n <= p`` regime this raises instead of regularizing.
    """
    p = sigma_n.shape[0]
    # S* - inv(Sigma*) = L*, so the plug-in is S_tilde - inv(Sigma_n)
    l_hat = linalg.sym(s_tilde - linalg.spd_inverse(sigma_n, cfg.cond_limit), tol=np.inf)
    l_tilde, rank, values = truncate_spectrum(l_hat, eigen_threshold(p, n, cfg))
    return l_hat, l_tilde, rank, values


def estimate(sigma_n, n: int, cfg: EstimatorConfig) -> EstimateResult:
    """Run both stages on a sample covariance computed from ``n`` observations."""
    sigma_n = linalg.sym(sigma_n)
    p = sigma_n.shape[0]
    s1, s_hat, s_tilde, tau = estimate_sparse(sigma_n, n, cfg)
    l_hat, l_tilde, rank, values = estimate_lowrank(sigma_n, s_tilde, n, cfg)
    return EstimateResult(
        S_hat1=s1, S_hat=s_hat, S_tilde=s_tilde, L_hat=l_hat, L_tilde=l_tilde,
        rank_estimate=rank, tau_n=tau,
        sparse_threshold=9.0 * cfg.Mp_proxy * tau,
        eigen_threshold=eigen_threshold(p, n, cfg),
        feasibility_slack=feasibility_slack(sigma_n, s1),
        L_hat_eigenvalues=values,
        discarded_negative=values[values < 0],
    )

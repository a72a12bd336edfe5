"""Ground-truth latent-variable models and Gaussian sampling.

A model is a sparse conditional precision ``S*`` and a low-rank PSD
``L*`` whose difference is the marginal precision of the observed
coordinates: ``inv(Sigma*) = S* - L*``.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence`` so that
each (seed, replicate, purpose) triple owns an independent stream.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import linalg
from .errors import IncoherenceUnreachable, NotPositiveDefinite, SpecInfeasible

MAX_INCOHERENCE_DRAWS = 1000
MAX_ASSEMBLY_DRAWS = 100
MAX_SHRINK_STEPS = 60
SAMPLE_CHUNK = 65536

# stream purposes under one (seed, replicate) key
STREAM_MODEL = 0
STREAM_SAMPLE = 1


@dataclass(frozen=True)
class ModelSpec:
    p: int
    n: int
    s0: int
    r0: int
    c0: float
    theta: float
    sigma: float
    Mp: float
    M: float
    seed: int = 0

    def __post_init__(self):
        if self.p < 1 or self.n < 1 or self.s0 < 1 or self.r0 < 0:
            raise ValueError("p, n, s0 must be positive and r0 nonnegative")
        if self.r0 >= self.p or self.s0 > self.p:
            raise ValueError(f"need r0 < p and s0 <= p (p={self.p}, s0={self.s0}, r0={self.r0})")
        for name in ("c0", "theta", "sigma", "Mp", "M"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown ModelSpec fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LatentModel:
    spec: ModelSpec
    S_star: np.ndarray
    L_star: np.ndarray
    Sigma_star: np.ndarray
    support: frozenset = field(repr=False)  # (i, j) with i <= j and S*_ij != 0
    true_rank: int
    sigma_effective: float  # equals spec.sigma unless L* had to be shrunk
    M_effective: float

    @property
    def p(self) -> int:
        return self.spec.p


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 stream for ``seed`` and a tuple of integer labels."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def box_muller(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals from pairs of uniforms."""
    size = int(np.prod(shape))
    half = (size + 1) // 2
    u1 = rng.random(half)
    u2 = rng.random(half)
    radius = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 lies in (0, 1]
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:size]
    return z.reshape(shape)


def generate_sparse_component(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """Random diagonally dominant member of the sparse uniformity class.

    Off-diagonal support is a random graph of maximum degree ``s0 - 1``
    with magnitudes uniform on ``[theta, 2 theta]`` and random signs. The
    diagonal is the absolute off-diagonal row sum plus a uniform draw on
    ``[1, 2]``, which makes the matrix strictly diagonally dominant.
    """
    p, s0, theta = spec.p, spec.s0, spec.theta
    if s0 * 2.0 * theta + 2.0 > spec.Mp:
        raise SpecInfeasible(
            f"s0*2*theta + 2 = {s0 * 2 * theta + 2:.4g} exceeds the l1 budget Mp = {spec.Mp:.4g}")
    iu, ju = np.triu_indices(p, k=1)
    for _ in range(MAX_ASSEMBLY_DRAWS):
        s = np.zeros((p, p))
        degree = np.zeros(p, dtype=int)
        for k in rng.permutation(iu.size):
            i, j = iu[k], ju[k]
            if degree[i] < s0 - 1 and degree[j] < s0 - 1:
                v = rng.uniform(theta, 2.0 * theta) * (1.0 if rng.random() < 0.5 else -1.0)
                s[i, j] = s[j, i] = v
                degree[i] += 1
                degree[j] += 1
        offsum = np.abs(s).sum(axis=1)
        s[np.diag_indices(p)] = offsum + rng.uniform(1.0, 2.0, size=p)
        if linalg.matrix_one_norm(s) <= spec.Mp:
            return s
    raise SpecInfeasible(f"no sparse draw met ||S*||_1->1 <= Mp={spec.Mp} in {MAX_ASSEMBLY_DRAWS} tries")


def modified_gram_schmidt(g: np.ndarray) -> np.ndarray:
    q = np.array(g, dtype=float)
    for k in range(q.shape[1]):
        for j in range(k):
            q[:, k] -= (q[:, j] @ q[:, k]) * q[:, j]
        q[:, k] /= np.linalg.norm(q[:, k])
    return q


def generate_lowrank_component(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """Incoherent PSD matrix of rank ``r0`` with eigenvalues in ``[sigma, 2 sigma]``.

    Orthonormal bases come from modified Gram-Schmidt on standard Gaussian
    draws, rejected until every column has sup-norm at most
    ``sqrt(c0 / p)``. Gaussian acceptance collapses for small ``c0`` (about
    1e-3 per draw at p=40, c0=3), so once that budget is spent the same
    procedure is retried on random-sign matrices, whose columns start out
    perfectly flat.
    """
    p, r0 = spec.p, spec.r0
    if r0 == 0:
        return np.zeros((p, p))
    bound = np.sqrt(spec.c0 / p)
    draws = (lambda: box_muller(rng, (p, r0)),
             lambda: np.where(rng.random((p, r0)) < 0.5, -1.0, 1.0))
    for draw in draws:
        for _ in range(MAX_INCOHERENCE_DRAWS):
            u = modified_gram_schmidt(draw())
            if np.max(np.abs(u)) <= bound:
                lam = rng.uniform(spec.sigma, 2.0 * spec.sigma, size=r0)
                return linalg.sym((u * lam) @ u.T, tol=np.inf)
    raise IncoherenceUnreachable(
        f"no basis with sup-norm <= sqrt(c0/p) = {bound:.4g} in {2 * MAX_INCOHERENCE_DRAWS} draws")


def _check_draw(spec: ModelSpec, s: np.ndarray, low: np.ndarray):
    """Return (failure reason or None, Sigma*, M_effective)."""
    if linalg.matrix_one_norm(low) > spec.Mp:
        return "||L*||_1->1 > Mp", None, None
    try:
        sigma_star = linalg.spd_inverse(s - low)
    except NotPositiveDefinite:
        return "S* - L* not positive definite", None, None
    ev = linalg.eig_sym(sigma_star).values
    m_eff = float(max(ev[0], 1.0 / ev[-1]))
    if m_eff > spec.M:
        return "spectral bound M exceeded", None, None
    return None, sigma_star, m_eff


def assemble_model(spec: ModelSpec, rng: np.random.Generator | None = None) -> LatentModel:
    """Draw ``S*`` and ``L*`` until every class invariant holds.

    Fresh draws are tried first. If positive definiteness of ``S* - L*`` is
    what keeps failing, later draws shrink ``L*`` geometrically by 0.9 and
    the resulting minimum eigenvalue is recorded as ``sigma_effective``.
    """
    if rng is None:
        rng = make_rng(spec.seed, STREAM_MODEL)
    failures: Counter = Counter()

    def attempt(shrink: float):
        s = generate_sparse_component(spec, rng)
        low = shrink * generate_lowrank_component(spec, rng)
        reason, sigma_star, m_eff = _check_draw(spec, s, low)
        if reason is not None:
            failures[reason] += 1
            return None
        support = frozenset(zip(*map(lambda a: a.tolist(), np.nonzero(np.triu(s)))))
        return LatentModel(spec, s, low, sigma_star, support, spec.r0,
                           spec.sigma * shrink, m_eff)

    for _ in range(MAX_ASSEMBLY_DRAWS):
        model = attempt(1.0)
        if model is not None:
            return model
    if spec.r0 > 0 and failures.most_common(1)[0][0] == "S* - L* not positive definite":
        shrink = 1.0
        for _ in range(MAX_SHRINK_STEPS):
            shrink *= 0.9
            model = attempt(shrink)
            if model is not None:
                return model
    worst, count = failures.most_common(1)[0]
    raise SpecInfeasible(f"no draw satisfied the model class; most frequent failure: "
                         f"{worst} ({count} of {sum(failures.values())} draws)")


def check_model(model: LatentModel, tol: float = 1e-9) -> list[str]:
    """Every clause of the model class, as a list of violated clauses (empty if valid)."""
    spec, s, low = model.spec, model.S_star, model.L_star
    bad = []
    if not linalg.is_positive_definite(s):
        bad.append("S* not positive definite")
    if np.max(np.count_nonzero(s, axis=1)) > spec.s0:
        bad.append("row of S* has more than s0 nonzeros")
    if linalg.matrix_one_norm(s) > spec.Mp + tol:
        bad.append("||S*||_1->1 > Mp")
    nz = np.abs(s[s != 0])
    if nz.size and nz.min() < spec.theta - tol:
        bad.append("nonzero |S*_ij| below theta")
    eig = linalg.eig_sym(low)
    scale = max(1.0, float(np.max(np.abs(eig.values))))
    if eig.values[-1] < -tol * scale:
        bad.append("L* not positive semidefinite")
    kept = eig.values > 1e-10 * scale
    if int(kept.sum()) != spec.r0 or model.true_rank != spec.r0:
        bad.append("rank of L* differs from r0")
    if kept.any():
        if np.max(np.abs(eig.vectors[:, kept])) > np.sqrt(spec.c0 / spec.p) + 1e-9:
            bad.append("eigenvector of L* violates incoherence")
        if eig.values[kept].min() < model.sigma_effective * (1 - 1e-9):
            bad.append("nonzero eigenvalue of L* below sigma")
        # ||L*||_1->1 <= c0 * sum(lambda_i), i.e. c0 * r0 for unit-scale eigenvalues
        if linalg.matrix_one_norm(low) > spec.c0 * eig.values[kept].sum() * (1 + 1e-9):
            bad.append("||L*||_1->1 exceeds incoherence bound")
    if linalg.matrix_one_norm(low) > spec.Mp + tol:
        bad.append("||L*||_1->1 > Mp")
    try:
        inv = linalg.spd_inverse(model.Sigma_star)
        if np.max(np.abs(inv - (s - low))) > 1e-8 * max(1.0, linalg.entrywise_max_norm(s)):
            bad.append("inv(Sigma*) != S* - L*")
    except NotPositiveDefinite:
        bad.append("Sigma* not positive definite")
    ev = linalg.eig_sym(model.Sigma_star).values
    if ev[0] > spec.M * (1 + 1e-12) or ev[-1] < (1.0 / spec.M) * (1 - 1e-12):
        bad.append("spectrum of Sigma* outside [1/M, M]")
    return bad


def sample_covariance(model: LatentModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Known-mean sample covariance ``X.T @ X / n`` of ``n`` draws from N(0, Sigma*)."""
    if n < 2:
        raise ValueError("need n >= 2 samples")
    p = model.p
    chol = linalg.cholesky(model.Sigma_star)
    acc = np.zeros((p, p))
    done = 0
    while done < n:
        m = min(SAMPLE_CHUNK, n - done)
        x = box_muller(rng, (m, p)) @ chol.T
        acc += x.T @ x
        done += m
    return linalg.sym(acc / n, tol=np.inf)


def with_overrides(spec: ModelSpec, **changes) -> ModelSpec:
    return replace(spec, **changes)


def save_model(model: LatentModel, out_dir) -> None:
    """Write ``S_star.txt``, ``L_star.txt``, ``Sigma_star.txt`` and ``model.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    linalg.write_matrix(out / "S_star.txt", model.S_star)
    linalg.write_matrix(out / "L_star.txt", model.L_star)
    linalg.write_matrix(out / "Sigma_star.txt", model.Sigma_star)
    meta = {
        "spec": model.spec.to_dict(),
        "support": sorted([list(ij) for ij in model.support]),
        "true_rank": model.true_rank,
        "sigma_effective": model.sigma_effective,
        "M_effective": model.M_effective,
    }
    (out / "model.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_model(in_dir) -> LatentModel:
    src = Path(in_dir)
    meta = json.loads((src / "model.json").read_text())
    return LatentModel(
        spec=ModelSpec.from_dict(meta["spec"]),
        S_star=linalg.read_matrix(src / "S_star.txt"),
        L_star=linalg.read_matrix(src / "L_star.txt"),
        Sigma_star=linalg.read_matrix(src / "Sigma_star.txt"),
        support=frozenset(tuple(ij) for ij in meta["support"]),
        true_rank=int(meta["true_rank"]),
        sigma_effective=float(meta["sigma_effective"]),
        M_effective=float(meta["M_effective"]),
    )

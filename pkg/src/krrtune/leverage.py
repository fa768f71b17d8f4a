"""Ridge leverage scores, sample-and-rescale sketches and subsampled regression
over several design matrices."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .sampling import make_rng

DEFAULT_C0 = 20.0


@dataclass(frozen=True)
class DesignSet:
    matrices: tuple[np.ndarray, ...]
    b: np.ndarray
    epsilon: float = 0.0

    def __post_init__(self):
        mats = tuple(np.asarray(A, dtype=float) for A in self.matrices)
        if not mats:
            raise ValueError("need at least one design matrix")
        shape = mats[0].shape
        if any(A.shape != shape or A.ndim != 2 for A in mats):
            raise ValueError("all design matrices must share one 2-d shape")
        b = np.asarray(self.b, dtype=float)
        if b.shape != (shape[0],):
            raise ValueError("target length must match the design row count")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "b", b)

    @property
    def Q(self) -> int:
        return len(self.matrices)


@dataclass(frozen=True)
class SketchMatrix:
    rows: np.ndarray
    scales: np.ndarray
    m: int

    @property
    def n(self) -> int:
        return self.rows.size

    def apply(self, X):
        """``S @ X`` without forming S."""
        X = np.asarray(X)
        if X.ndim == 1:
            return self.scales * X[self.rows]
        return self.scales[:, None] * X[self.rows]

    def dense(self) -> np.ndarray:
        S = np.zeros((self.n, self.m))
        S[np.arange(self.n), self.rows] = self.scales
        return S

    @classmethod
    def identity(cls, m: int) -> "SketchMatrix":
        return cls(np.arange(m), np.ones(m), m)


def ridge_leverage(A, epsilon: float) -> np.ndarray:
    """``tau_i = a_i (A^T A + eps I)^{-1} a_i^T`` for every row ``a_i``."""
    A = np.asarray(A, dtype=float)
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    G = A.T @ A + epsilon * np.eye(A.shape[1])
    try:
        c = scipy.linalg.cho_factor(G, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("A^T A + eps I is singular; need eps > 0 or full column rank") from exc
    if epsilon == 0 and np.linalg.cond(G) > 1e14:
        raise np.linalg.LinAlgError("A^T A is numerically singular at eps = 0")
    X = scipy.linalg.cho_solve(c, A.T)
    return np.einsum("ij,ji->i", A, X)


def pairwise_scores(ds: DesignSet) -> np.ndarray:
    """Row-wise max of the ridge leverage scores of ``[A_j | A_k]`` over all pairs ``j <= k``."""
    best = np.zeros(ds.matrices[0].shape[0])
    for j, k in itertools.combinations_with_replacement(range(ds.Q), 2):
        tau = ridge_leverage(np.hstack([ds.matrices[j], ds.matrices[k]]), ds.epsilon)
        np.maximum(best, tau, out=best)
    return best


def sample_rescale(tau_tilde, n: int, seed) -> SketchMatrix:
    """Draw ``n`` rows i.i.d. with probability ``tau / s`` and scale row ``i`` by
    ``sqrt(s / (n tau(r_i)))``, where ``s = sum(tau)``."""
    tau = np.asarray(tau_tilde, dtype=float)
    if np.any(tau < 0) or not np.any(tau > 0):
        raise ValueError("scores must be non-negative and not all zero")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(int(seed))
    s = float(tau.sum())
    rows = rng.choice(tau.size, size=n, p=tau / s)
    scales = np.sqrt(s / (n * tau[rows]))
    return SketchMatrix(rows, scales, tau.size)


def spectral_check(A, S: SketchMatrix | np.ndarray, epsilon: float, Delta: float,
                   tol: float = 1e-9) -> bool:
    """Check ``(1-D)(A^T A - eps I) <= A^T S^T S A + eps I <= (1+D)(A^T A + eps I)``."""
    A = np.asarray(A, dtype=float)
    SA = S.apply(A) if isinstance(S, SketchMatrix) else np.asarray(S) @ A
    G = A.T @ A
    I = np.eye(A.shape[1])
    mid = SA.T @ SA + epsilon * I
    lower = mid - (1 - Delta) * (G - epsilon * I)
    upper = (1 + Delta) * (G + epsilon * I) - mid
    for M in (lower, upper):
        M = (M + M.T) / 2
        scale = max(np.linalg.norm(M, 2), 1.0)
        if np.linalg.eigvalsh(M)[0] < -tol * scale:
            return False
    return True


def _ridge_solve(A, b, epsilon):
    d = A.shape[1]
    G = A.T @ A + epsilon * np.eye(d)
    return scipy.linalg.solve(G, A.T @ b, assume_a="pos")


def ridge_objective(A, b, epsilon, x) -> float:
    r = A @ x - b
    return float(r @ r + epsilon * (x @ x))


def full_optimum(ds: DesignSet) -> tuple[int, np.ndarray, float]:
    """Exact ``min_k min_x ||A_k x - b||^2 + eps ||x||^2``."""
    best = (-1, None, math.inf)
    for k, A in enumerate(ds.matrices):
        x = _ridge_solve(A, ds.b, ds.epsilon) if ds.epsilon > 0 else np.linalg.lstsq(A, ds.b, rcond=None)[0]
        o = ridge_objective(A, ds.b, ds.epsilon, x)
        if o < best[2]:
            best = (k, x, o)
    return best


def subsampled_select(ds: DesignSet, n: int, seed, scores=None,
                      sketch: SketchMatrix | None = None, optimum: float | None = None):
    """Select a design and coefficients from a leverage-sampled subproblem.

    Returns ``(k, x, ratio)``, where ``ratio`` is the full-data objective of the
    selection divided by the exact full-data optimum (``optimum`` if precomputed).
    """
    if sketch is None:
        if n < 1:
            raise ValueError("n must be >= 1")
        tau = pairwise_scores(ds) if scores is None else scores
        sketch = sample_rescale(tau, n, seed)
    Sb = sketch.apply(ds.b)
    best = (-1, None, math.inf)
    for k, A in enumerate(ds.matrices):
        SA = sketch.apply(A)
        if ds.epsilon > 0:
            x = _ridge_solve(SA, Sb, ds.epsilon)
        else:
            x = np.linalg.lstsq(SA, Sb, rcond=None)[0]
        o = ridge_objective(SA, Sb, ds.epsilon, x)
        if o < best[2]:
            best = (k, x, o)
    k, x, _ = best
    opt = full_optimum(ds)[2] if optimum is None else optimum
    full = ridge_objective(ds.matrices[k], ds.b, ds.epsilon, x)
    ratio = full / opt if opt > 0 else (1.0 if full == 0 else math.inf)
    return k, x, ratio


def theorem_budget(s_tilde: float, Q: int, delta: float, C0: float = DEFAULT_C0) -> int:
    """``ceil(C0 s ln(s Q / delta))`` for the matrix subsampling experiments."""
    return int(math.ceil(C0 * s_tilde * math.log(s_tilde * Q / delta)))


def ratio_bound(delta: float) -> float:
    return 9.0 + 8.0 / delta


def _instances(make_instance, trials: int, seed: int):
    out = []
    for i in range(trials):
        ds = make_instance(make_rng(seed, i))
        out.append((ds, pairwise_scores(ds), full_optimum(ds)[2]))
    return out


def _hit_rate(instances, n: int, delta: float, seed: int) -> float:
    bound = ratio_bound(delta)
    hits = 0
    for i, (ds, tau, opt) in enumerate(instances):
        _, _, ratio = subsampled_select(ds, n, make_rng(seed, i, n), scores=tau, optimum=opt)
        hits += ratio <= bound
    return hits / len(instances)


def success_rate(make_instance, n: int, trials: int, delta: float, seed: int) -> float:
    """Fraction of ``trials`` random instances with ratio within ``9 + 8/delta``.

    ``make_instance(rng)`` returns a DesignSet.
    """
    return _hit_rate(_instances(make_instance, trials, seed), n, delta, seed)


def minimal_n(make_instance, candidates: Sequence[int], trials: int, delta: float,
              seed: int, target: float = 0.9) -> int:
    """Smallest ``n`` in ``candidates`` (ascending) reaching ``target`` success rate.

    The same ``trials`` instances are reused for every candidate.  Returns ``-1``
    if no candidate reaches the target.
    """
    inst = _instances(make_instance, trials, seed)
    for n in candidates:
        if _hit_rate(inst, int(n), delta, seed) >= target:
            return int(n)
    return -1

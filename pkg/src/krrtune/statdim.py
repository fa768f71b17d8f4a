"""Statistical dimension of kernel integral operators and sample budgets."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.linalg

from .kernel import KernelSpec, kernel_eval
from .sampling import ALPHA_FLOOR

MAX_GRIDSIZE = 1 << 14
DEFAULT_C_ALPHA = 2.0
DEFAULT_C0 = 10.0


class StatDimNotConverged(RuntimeError):
    pass


@dataclass(frozen=True)
class StatDimEstimate:
    value: float
    gridsize: int
    converged: bool
    eig_sum: float = float("nan")


def statdim_matrix(eigs, epsilon: float) -> float:
    """``sum lambda / (lambda + eps)``; with ``eps = 0`` this counts nonzero eigenvalues."""
    lam = np.clip(np.asarray(eigs, dtype=float), 0.0, None)
    if epsilon == 0:
        return float(np.count_nonzero(lam))
    return float(np.sum(lam / (lam + epsilon)))


def operator_eigs(spec: KernelSpec, T: float, gridsize: int) -> np.ndarray:
    """Eigenvalues of the midpoint-rule discretization of the integral operator."""
    t = (np.arange(gridsize) + 0.5) * (T / gridsize)
    G = kernel_eval(spec, t[:, None] - t[None, :]) / gridsize
    return scipy.linalg.eigvalsh(G, check_finite=False)


def _start_gridsize(spec: KernelSpec, T: float, gridsize: int) -> int:
    # start near the Nyquist count for the widest band; smaller grids are wasted work
    fmax = max(abs(c.c) + 5.0 * c.sigma for c in spec.components)
    need = 2 ** math.ceil(math.log2(max(16.0, 2.0 * fmax * T)))
    return max(gridsize, min(need, MAX_GRIDSIZE // 2))


def statdim_operator(spec: KernelSpec, T: float, epsilon: float, gridsize: int = 16,
                     rtol: float = 0.01) -> StatDimEstimate:
    """Trace of ``K (K + eps I)^{-1}`` for the kernel integral operator on [0, T].

    The operator is discretized on a uniform midpoint grid and the grid doubled
    until the estimate changes by less than ``rtol``.
    """
    if gridsize < 16:
        raise ValueError("gridsize must be >= 16")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return _statdim_cached(spec, float(T), float(epsilon), int(gridsize), float(rtol))


@functools.lru_cache(maxsize=4096)
def _statdim_cached(spec, T, epsilon, gridsize, rtol):
    n = _start_gridsize(spec, T, gridsize)
    eigs = operator_eigs(spec, T, n)
    prev = statdim_matrix(eigs, epsilon)
    while 2 * n <= MAX_GRIDSIZE:
        n *= 2
        eigs = operator_eigs(spec, T, n)
        cur = statdim_matrix(eigs, epsilon)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return StatDimEstimate(cur, n, True, float(np.sum(eigs)))
        prev = cur
    raise StatDimNotConverged(f"statistical dimension did not converge by gridsize {n}")


def alpha_for(specs: Iterable[KernelSpec], T: float, epsilon: float,
              c_alpha: float = DEFAULT_C_ALPHA) -> float:
    specs = list(specs)
    if not specs:
        raise ValueError("need at least one spec")
    s_max = max(statdim_operator(sp, T, epsilon).value for sp in specs)
    return max(c_alpha * s_max, ALPHA_FLOOR)


def max_statdim(specs: Iterable[KernelSpec], T: float, epsilon: float) -> float:
    return max(statdim_operator(sp, T, epsilon).value for sp in specs)


def sample_budget(s_max: float, Q: int, delta: float, C0: float = DEFAULT_C0) -> int:
    """``ceil(C0 s ln(s Q / delta))``."""
    if s_max < 1:
        raise ValueError("s_max must be >= 1")
    if Q < 1:
        raise ValueError("Q must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return int(math.ceil(C0 * s_max * math.log(s_max * Q / delta)))

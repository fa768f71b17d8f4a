"""Kernel ridge regression on weighted sample designs and multi-kernel selection.

Conventions: with Gram matrix ``K[i, j] = v_i v_j k(t_i - t_j)`` and coefficients
``alpha`` the interpolant is ``y~(t) = sum_j v_j alpha_j k(t - t_j)``, so that
``v_i y~(t_i) = (K alpha)_i``.  Its frequency-domain norm equals ``alpha^H K alpha``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .kernel import KernelSpec, kernel_eval, kernel_matrix
from .sampling import SampleDesign

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class Interpolant:
    coefficients: np.ndarray
    design: SampleDesign
    spec: KernelSpec
    epsilon: float

    def __post_init__(self):
        a = np.asarray(self.coefficients)
        if a.shape != (self.design.n,):
            raise ValueError("coefficient count must match the design")
        object.__setattr__(self, "coefficients", a)

    def __call__(self, t):
        return interpolant_eval(self, t)


class _HermitianSolver:
    """Cholesky factorization of ``K + eps I`` with one refinement step per solve."""

    def __init__(self, K, epsilon):
        K = np.asarray(K)
        if not np.all(np.isfinite(K)):
            raise ValueError("K must be finite")
        if not (epsilon > 0 and math.isfinite(epsilon)):
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.A = K + epsilon * np.eye(K.shape[0])
        self.factor = scipy.linalg.cho_factor(self.A, lower=True, check_finite=False)

    def solve(self, b):
        b = np.asarray(b)
        if not np.all(np.isfinite(b)):
            raise ValueError("observations must be finite")
        x = scipy.linalg.cho_solve(self.factor, b, check_finite=False)
        r = b - self.A @ x
        x = x + scipy.linalg.cho_solve(self.factor, r, check_finite=False)
        scale = np.linalg.norm(b, axis=0)
        res = np.linalg.norm(b - self.A @ x, axis=0)
        if np.any(res > RESIDUAL_TOL * np.maximum(scale, np.finfo(float).tiny)):
            log.warning("KRR solve relative residual %.3g exceeds %.0e",
                        float(np.max(res / np.maximum(scale, np.finfo(float).tiny))), RESIDUAL_TOL)
        return x


def krr_fit(K, ybar, epsilon: float) -> np.ndarray:
    """Return ``(K + eps I)^{-1} ybar``."""
    return _HermitianSolver(K, epsilon).solve(ybar)


def sample_objective(K, ybar, epsilon: float, alpha) -> float:
    """``||K alpha - ybar||^2 + eps alpha^H K alpha``."""
    K = np.asarray(K)
    alpha = np.asarray(alpha)
    Ka = K @ alpha
    fit = np.vdot(Ka - ybar, Ka - ybar).real
    reg = np.vdot(alpha, Ka).real
    return float(fit + epsilon * reg)


def select_kernel(Ks: Sequence[np.ndarray], ybar, epsilon: float):
    """Fit every Gram matrix and keep the smallest sample objective.

    Ties go to the smallest index.  Returns ``(index, coefficients, objectives)``.
    """
    if len(Ks) == 0:
        raise ValueError("need at least one kernel matrix")
    best, best_alpha = -1, None
    objs = np.empty(len(Ks))
    for q, K in enumerate(Ks):
        a = krr_fit(K, ybar, epsilon)
        objs[q] = sample_objective(K, ybar, epsilon, a)
        if best < 0 or objs[q] < objs[best]:
            best, best_alpha = q, a
    return best, best_alpha, objs


def select_kernel_multi(Ks: Sequence[np.ndarray], ybars: np.ndarray, epsilon: float):
    """Like :func:`select_kernel` for several observation vectors (columns of ``ybars``)
    sharing one factorization per kernel."""
    if len(Ks) == 0:
        raise ValueError("need at least one kernel matrix")
    Y = np.asarray(ybars)
    m = Y.shape[1]
    best = np.full(m, -1)
    best_obj = np.full(m, np.inf)
    alphas = [None] * m
    for q, K in enumerate(Ks):
        A = _HermitianSolver(K, epsilon).solve(Y)
        for j in range(m):
            o = sample_objective(K, Y[:, j], epsilon, A[:, j])
            if o < best_obj[j]:
                best[j], best_obj[j], alphas[j] = q, o, A[:, j]
    return best, alphas, best_obj


def interpolant_eval(ip: Interpolant, t, chunk: int = 4096):
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    c = ip.design.weights * ip.coefficients
    out = np.empty(flat.shape, dtype=np.result_type(c, 1.0 if ip.spec.symmetric else 1j))
    for lo in range(0, flat.size, chunk):
        blk = flat[lo:lo + chunk]
        out[lo:lo + chunk] = kernel_eval(ip.spec, blk[:, None] - ip.design.times[None, :]) @ c
    out = out.reshape(t.shape)
    return out if out.ndim else out.item()


def rkhs_norm2(ip: Interpolant) -> float:
    """``alpha^H K alpha``, the power of the frequency-domain interpolant."""
    K = kernel_matrix(ip.spec, ip.design)
    return float(np.vdot(ip.coefficients, K @ ip.coefficients).real)


def _gauss_legendre_panels(a, b, panels, order):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges) / 2.0
    mids = (edges[:-1] + edges[1:]) / 2.0
    nodes = (mids[:, None] + h[:, None] * x[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


def tnorm2(f: Callable, T: float, breakpoints: Sequence[float] = (), panels: int = 32,
           order: int = 16, rtol: float = 1e-7, max_panels: int = 1 << 16) -> float:
    """``(1/T) int_0^T |f(t)|^2 dt`` by composite Gauss-Legendre.

    The panel count is doubled until successive estimates agree to ``rtol``.
    ``breakpoints`` split the interval where ``f`` has jumps.  If ``f`` returns a
    ``(k, len(t))`` array, all ``k`` norms are computed from the same nodes.
    """
    pts = sorted({0.0, float(T), *(float(b) for b in breakpoints if 0.0 < b < T)})
    lengths = np.diff(pts)
    prev = None
    p = max(1, int(panels))
    while p <= max_panels:
        total = 0.0
        for (a, b), L in zip(zip(pts[:-1], pts[1:]), lengths):
            k = max(1, int(math.ceil(p * L / T)))
            nodes, w = _gauss_legendre_panels(a, b, k, order)
            vals = np.asarray(f(nodes))
            total = total + np.sum(w * np.abs(vals) ** 2, axis=-1)
        est = np.asarray(total, dtype=float) / T
        if prev is not None:
            close = np.abs(est - prev) <= rtol * np.maximum(np.abs(est), 1e-300)
            if np.all(close | ((est == 0.0) & (prev == 0.0))):
                return float(est) if est.ndim == 0 else est
        prev = est
        p *= 2
    raise QuadratureError(f"T-norm quadrature did not converge to rtol={rtol}")


def _initial_panels(ip: Interpolant, T: float, extra_freq: float = 0.0) -> int:
    # roughly one panel per half-period of the fastest content
    fmax = max(abs(c.c) + 6.0 * c.sigma for c in ip.spec.components) + abs(extra_freq)
    return max(32, int(math.ceil(2.0 * fmax * T)))


def residual_norms(ip: Interpolant, scenario) -> tuple[float, float, float]:
    """``(||y~ - (y + z)||_T^2, ||y - y~||_T^2, ||y||_T^2)`` from one pass over shared nodes."""
    def resid(t):
        fit = interpolant_eval(ip, t)
        y = scenario.truth(t)
        return np.stack([fit - y - scenario.noise(t), y - fit, y])

    p0 = _initial_panels(ip, scenario.T, scenario.max_frequency())
    data, err, ynorm = tnorm2(resid, scenario.T, scenario.breakpoints(), panels=p0)
    return float(data), float(err), float(ynorm)


def continuous_objective(ip: Interpolant, scenario, fit_norm2: float | None = None) -> float:
    """``||y~ - (y + z)||_T^2 + eps alpha^H K alpha`` for a scenario exposing ``truth(t)``,
    ``noise(t)``, ``T`` and ``breakpoints``."""
    if fit_norm2 is None:
        def resid(t):
            return interpolant_eval(ip, t) - scenario.truth(t) - scenario.noise(t)

        p0 = _initial_panels(ip, scenario.T, scenario.max_frequency())
        fit_norm2 = tnorm2(resid, scenario.T, scenario.breakpoints(), panels=p0)
    return fit_norm2 + ip.epsilon * rkhs_norm2(ip)


def interp_error(ip: Interpolant, scenario) -> float:
    """``||y - y~||_T^2``."""
    def resid(t):
        return scenario.truth(t) - interpolant_eval(ip, t)

    return tnorm2(resid, scenario.T, (), panels=_initial_panels(ip, scenario.T, scenario.max_frequency()))


def operator_ridge_min(spec: KernelSpec, target: Callable, T: float, epsilon: float,
                       gridsize: int = 1024) -> float:
    """Minimum over g of ``||F* g - x||_T^2 + eps ||g||^2`` for a fixed kernel.

    The minimum equals ``eps <x, (K_op + eps I)^{-1} x>_T``; ``K_op`` is discretized
    on a midpoint grid of ``gridsize`` points.
    """
    t = (np.arange(gridsize) + 0.5) * (T / gridsize)
    G = kernel_eval(spec, t[:, None] - t[None, :]) / gridsize
    x = np.asarray(target(t))
    sol = krr_fit(G, x, epsilon)
    return float(epsilon * np.vdot(x, sol).real / gridsize)

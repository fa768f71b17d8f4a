"""Finite hyperparameter nets for spectral mixture kernels.

Means are covered additively (step ``rho * m``) and lengthscales multiplicatively
(ratio ``1 + gamma``).  Every continuous ``(c, sigma)`` in ``[0, W] x [m, M]`` rounds
to a grid point whose Gaussian density dominates it up to the factor returned by
:func:`distortion_constant`.
"""
from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import asdict, dataclass

from .kernel import GaussianComponent, KernelSpec

DEFAULT_CAP = 10 ** 6


class GridCapExceeded(ValueError):
    def __init__(self, required: int, cap: int):
        super().__init__(f"grid needs {required} entries but cap is {cap}")
        self.required = required
        self.cap = cap


@dataclass(frozen=True)
class GridConfig:
    W: float
    m: float
    M: float
    rho: float = 0.5
    gamma: float = 0.5
    q: int = 1
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if not (0 < self.m <= self.M):
            raise ValueError(f"need 0 < m <= M, got m={self.m}, M={self.M}")
        if self.W < 0:
            raise ValueError("W must be non-negative")
        if not (0 < self.rho <= 1 and 0 < self.gamma <= 1):
            raise ValueError("rho and gamma must lie in (0, 1]")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError("q must be a positive integer")
        if self.cap < 1:
            raise ValueError("cap must be positive")

    @classmethod
    def main_text(cls, W, m, M, q=1, cap=DEFAULT_CAP) -> "GridConfig":
        """Unit mean step and lengthscale doubling (distortion factor 8)."""
        return cls(W, m, M, rho=1.0, gamma=1.0, q=q, cap=cap)

    @classmethod
    def fine(cls, W, m, M, q=1, cap=DEFAULT_CAP) -> "GridConfig":
        """``rho = gamma = 0.5`` (distortion factor below 3)."""
        return cls(W, m, M, rho=0.5, gamma=0.5, q=q, cap=cap)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        keys = ("W", "m", "M", "rho", "gamma", "q", "cap")
        kw = {k: d[k] for k in keys if k in d}
        if "q" in kw:
            kw["q"] = int(kw["q"])
        if "cap" in kw:
            kw["cap"] = int(kw["cap"])
        return cls(**kw)


def mean_grid(cfg: GridConfig) -> list[float]:
    step = cfg.rho * cfg.m
    if cfg.W == 0:
        return [0.0]
    k_max = math.ceil(cfg.W / step)
    if k_max + 1 > cfg.cap:
        raise GridCapExceeded(k_max + 1, cfg.cap)
    pts = []
    k = 0
    while k * step < cfg.W * (1 - 1e-12):
        pts.append(k * step)
        k += 1
    pts.append(float(cfg.W))
    return pts


def lengthscale_grid(cfg: GridConfig) -> list[float]:
    """``m r, m r^2, ...`` with ``r = 1 + gamma``, up to the first point ``>= M r``."""
    r = 1.0 + cfg.gamma
    count = max(1, math.ceil(math.log(cfg.M / cfg.m) / math.log(r) - 1e-12) + 1)
    if count > cfg.cap:
        raise GridCapExceeded(count, cfg.cap)
    return [cfg.m * r ** k for k in range(1, count + 1)]


def grid_size(cfg: GridConfig) -> int:
    """Number of distinct q-component multisets of (mean, lengthscale) pairs."""
    p = len(mean_grid(cfg)) * len(lengthscale_grid(cfg))
    return math.comb(p + cfg.q - 1, cfg.q)


def sm_grid(cfg: GridConfig) -> list[KernelSpec]:
    """All symmetric unit-weight q-component specs over the mean and lengthscale grids,
    deduplicated as unordered multisets."""
    required = grid_size(cfg)
    if required > cfg.cap:
        raise GridCapExceeded(required, cfg.cap)
    pairs = [(c, s) for c in mean_grid(cfg) for s in lengthscale_grid(cfg)]
    specs = []
    for combo in itertools.combinations_with_replacement(pairs, cfg.q):
        specs.append(KernelSpec(tuple(GaussianComponent(c, s, 1.0) for c, s in combo), symmetric=True))
    return specs


def round_params(c_hat: float, sigma_hat: float, cfg: GridConfig,
                 grids: tuple[list[float], list[float]] | None = None) -> tuple[float, float]:
    """Round a continuous (mean, lengthscale) onto the grids.

    The mean goes to the nearest grid point; the lengthscale to the smallest grid
    value ``>= sigma_hat (1 + gamma)``.
    """
    if not (0 <= c_hat <= cfg.W):
        raise ValueError(f"mean {c_hat} outside [0, {cfg.W}]")
    if not (cfg.m <= sigma_hat <= cfg.M):
        raise ValueError(f"lengthscale {sigma_hat} outside [{cfg.m}, {cfg.M}]")
    cs, ss = grids if grids is not None else (mean_grid(cfg), lengthscale_grid(cfg))
    j = bisect.bisect_left(cs, c_hat)
    cands = [cs[i] for i in (j - 1, j) if 0 <= i < len(cs)]
    c_t = min(cands, key=lambda c: (abs(c - c_hat), c))
    target = sigma_hat * (1.0 + cfg.gamma)
    i = bisect.bisect_left(ss, target * (1 - 1e-12))
    s_t = ss[min(i, len(ss) - 1)]
    return c_t, s_t


def round_spec(spec: KernelSpec, cfg: GridConfig) -> KernelSpec:
    """Round each component of ``spec`` and set unit weights."""
    grids = (mean_grid(cfg), lengthscale_grid(cfg))
    comps = []
    for comp in spec.components:
        c, s = round_params(abs(comp.c), comp.sigma, cfg, grids)
        comps.append(GaussianComponent(c, s, 1.0))
    comps.sort(key=lambda x: (x.c, x.sigma))
    return KernelSpec(tuple(comps), symmetric=True)


def distortion_constant(rho: float, gamma: float) -> float:
    if rho < 0 or gamma <= 0:
        raise ValueError("need rho >= 0 and gamma > 0")
    r2 = (1.0 + gamma) ** 2
    return r2 * math.exp(rho ** 2 / 2.0 / (1.0 - 1.0 / r2))


def gaussian_log_ratio_max(c_hat, s_hat, c_t, s_t) -> float:
    """Log of ``sup_xi N(xi; c_hat, s_hat) / N(xi; c_t, s_t)`` for ``s_t > s_hat``."""
    return math.log(s_t / s_hat) + 0.5 * (c_t - c_hat) ** 2 / (s_t ** 2 - s_hat ** 2)


def spec_index(specs: list[KernelSpec]) -> dict:
    """Map from a spec's sorted component tuple to its position in ``specs``."""
    out = {}
    for i, sp in enumerate(specs):
        key = tuple(sorted((c.c, c.sigma) for c in sp.components))
        out.setdefault(key, i)
    return out


def nearest_grid_index(spec: KernelSpec, cfg: GridConfig, specs: list[KernelSpec]) -> int:
    key = tuple(sorted((c.c, c.sigma) for c in round_spec(spec, cfg).components))
    return spec_index(specs)[key]


__all__ = [
    "GridConfig", "GridCapExceeded", "mean_grid", "lengthscale_grid", "grid_size", "sm_grid",
    "round_params", "round_spec", "distortion_constant", "gaussian_log_ratio_max",
    "nearest_grid_index",
]

"""Universal time-sampling density on [0, T] and weighted sample designs.

The density is flat (``alpha**6 / T``) on the two edge bands of width ``T / alpha**6``
and ``alpha / min(t, T - t)`` in between.  It is left unnormalized; its mass is

    P = 12 alpha ln(alpha) - 2 alpha ln(2) + 2

independently of ``T``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

ALPHA_FLOOR = 2.0 ** (1.0 / 6.0)

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 finalizer; a fixed 64-bit mixing function."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def trial_seed(global_seed: int, trial: int) -> int:
    """Seed for trial ``trial`` of a run with ``global_seed``."""
    return splitmix64(splitmix64(global_seed & _MASK64) ^ (trial & _MASK64))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``seed`` and an optional stream path.

    ``make_rng(seed, trial, draw)`` gives reproducible independent streams for
    parallel trials.
    """
    ss = np.random.SeedSequence([seed & _MASK64, *(s & _MASK64 for s in stream)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class UniversalDensity:
    alpha: float
    T: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha ** 6 >= 2.0 * (1 - 1e-12)):
            raise ValueError(f"alpha must satisfy alpha**6 >= 2, got alpha={self.alpha}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"horizon T must be positive, got {self.T}")

    @property
    def edge(self) -> float:
        """Width of each flat edge band."""
        return self.T / self.alpha ** 6


@dataclass(frozen=True)
class SampleDesign:
    times: np.ndarray
    weights: np.ndarray
    P: float
    T: float
    alpha: float = float("nan")

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.weights, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and weights must be 1-d arrays of equal length")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "weights", v)

    @property
    def n(self) -> int:
        return self.times.size

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "T": self.T, "times": self.times.tolist(),
                "weights": self.weights.tolist(), "P": self.P}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SampleDesign":
        return cls(np.asarray(d["times"], dtype=float), np.asarray(d["weights"], dtype=float),
                   float(d["P"]), float(d["T"]), float(d.get("alpha", float("nan"))))

    @classmethod
    def from_json(cls, s: str) -> "SampleDesign":
        return cls.from_dict(json.loads(s))


def density_eval(d: UniversalDensity, t):
    """Unnormalized density at ``t``; raises for any ``t`` outside [0, T]."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > d.T) or not np.all(np.isfinite(t)):
        raise ValueError("t must lie in [0, T]")
    a, T = d.alpha, d.T
    edge = d.edge
    dist = np.minimum(t, T - t)
    with np.errstate(divide="ignore"):
        mid = a / dist
    out = np.where(dist < edge, a ** 6 / T, mid)
    return out if out.ndim else float(out)


def density_mass(d: UniversalDensity) -> float:
    a = d.alpha
    return 12.0 * a * math.log(a) - 2.0 * a * math.log(2.0) + 2.0


def cdf(d: UniversalDensity, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > d.T):
        raise ValueError("t must lie in [0, T]")
    P = density_mass(d)
    half = P / 2.0

    def lower(s):
        # mass of [0, s] for s <= T/2
        with np.errstate(divide="ignore"):
            mid = 1.0 + d.alpha * np.log(np.maximum(s, d.edge) / d.edge)
        return np.where(s <= d.edge, s * d.alpha ** 6 / d.T, mid)

    out = np.where(t <= d.T / 2, lower(t), P - lower(d.T - t)) / P
    # exact at the centre
    out = np.where(t == d.T / 2, half / P, out)
    return out if out.ndim else float(out)


def inverse_cdf(d: UniversalDensity, u):
    """Analytic inverse of the normalized CDF: linear on edge bands, exponential between."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u > 1) or not np.all(np.isfinite(u)):
        raise ValueError("u must lie in [0, 1]")
    P = density_mass(d)

    def lower(m):
        # inverse of the mass function on [0, T/2]
        return np.where(m <= 1.0, m * d.T / d.alpha ** 6, d.edge * np.exp((m - 1.0) / d.alpha))

    U = u * P
    out = np.where(U <= P / 2, lower(np.minimum(U, P / 2)), d.T - lower(np.minimum(P - U, P / 2)))
    out = np.clip(out, 0.0, d.T)
    return out if out.ndim else float(out)


def draw_design(d: UniversalDensity, n: int, seed: int | np.random.Generator) -> SampleDesign:
    """Draw ``n`` i.i.d. times from the normalized density with weights
    ``v_i = sqrt(P / (n T p(t_i)))``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(int(seed))
    times = np.atleast_1d(inverse_cdf(d, rng.random(n)))
    P = density_mass(d)
    weights = np.sqrt(P / (n * d.T * np.atleast_1d(density_eval(d, times))))
    return SampleDesign(times, weights, P, d.T, d.alpha)

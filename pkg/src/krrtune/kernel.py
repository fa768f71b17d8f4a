"""Spectral mixture densities, shift-invariant kernels and RKHS test signals.

A kernel is described by a mixture of Gaussians over frequency (Hz).  With
``symmetric=True`` every component is paired with its mirror at ``-c``, the pair
sharing the component weight, which makes the kernel real:

    k(d) = sum_j w_j exp(-2 pi^2 d^2 sigma_j^2) cos(2 pi d c_j)

Without mirroring a component contributes ``w exp(-2 pi^2 d^2 sigma^2) exp(-2 pi i c d)``,
the Fourier transform of the density under ``k(d) = int exp(-2 pi i xi d) mu(xi) dxi``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianComponent:
    c: float
    sigma: float
    w: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.c) and math.isfinite(self.sigma) and math.isfinite(self.w)):
            raise ValueError("component parameters must be finite")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"weight must lie in [0, 1], got {self.w}")


@dataclass(frozen=True)
class KernelSpec:
    components: tuple[GaussianComponent, ...]
    symmetric: bool = True

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a KernelSpec needs at least one component")
        object.__setattr__(self, "components", comps)

    @classmethod
    def rbf(cls, sigma: float, w: float = 1.0) -> "KernelSpec":
        return cls((GaussianComponent(0.0, sigma, w),), symmetric=True)

    @classmethod
    def from_params(cls, means, sigmas, weights=None, symmetric: bool = True) -> "KernelSpec":
        if weights is None:
            weights = [1.0] * len(means)
        comps = tuple(GaussianComponent(float(c), float(s), float(w))
                      for c, s, w in zip(means, sigmas, weights, strict=True))
        return cls(comps, symmetric)

    @property
    def total_weight(self) -> float:
        return float(sum(comp.w for comp in self.components))

    def to_dict(self) -> dict:
        return {
            "components": [{"c": comp.c, "sigma": comp.sigma, "w": comp.w} for comp in self.components],
            "symmetric": self.symmetric,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        comps = tuple(GaussianComponent(float(x["c"]), float(x["sigma"]), float(x.get("w", 1.0)))
                      for x in d["components"])
        return cls(comps, bool(d.get("symmetric", True)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "KernelSpec":
        return cls.from_dict(json.loads(s))

    def describe(self) -> str:
        """Compact, comma-free text form used in CSV output."""
        parts = [f"c={comp.c:.17g} sigma={comp.sigma:.17g} w={comp.w:.17g}" for comp in self.components]
        return "; ".join(parts) + ("" if self.symmetric else " (asym)")


@dataclass(frozen=True)
class RkhsSignal:
    """``y(t) = sum_j beta_j k(t - s_j)``; the empty signal is identically zero."""
    centers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.centers, dtype=float))
        b = np.atleast_1d(np.asarray(self.coefficients))
        if s.shape != b.shape or s.ndim != 1:
            raise ValueError("centers and coefficients must be 1-d arrays of equal length")
        object.__setattr__(self, "centers", s)
        object.__setattr__(self, "coefficients", b)

    def __len__(self):
        return self.centers.size

    def scaled(self, factor) -> "RkhsSignal":
        return RkhsSignal(self.centers, self.coefficients * factor)


def pdf_eval(spec: KernelSpec, xi):
    """Spectral density of ``spec`` at frequency ``xi`` (scalar or array)."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    for comp in spec.components:
        g = np.exp(-0.5 * ((xi - comp.c) / comp.sigma) ** 2)
        if spec.symmetric:
            g = 0.5 * (g + np.exp(-0.5 * ((xi + comp.c) / comp.sigma) ** 2))
        out = out + comp.w * g / (_SQRT_2PI * comp.sigma)
    return out if out.ndim else float(out)


def kernel_eval(spec: KernelSpec, delta):
    """Kernel value at lag ``delta`` (seconds).

    Returns a real array for symmetric specs and a complex array otherwise.
    """
    d = np.asarray(delta, dtype=float)
    if spec.symmetric:
        out = np.zeros_like(d)
        for comp in spec.components:
            env = np.exp(-2.0 * math.pi ** 2 * comp.sigma ** 2 * d * d)
            if comp.c != 0:
                env *= np.cos(2.0 * math.pi * comp.c * d)
            out = out + comp.w * env
    else:
        out = np.zeros(d.shape, dtype=complex)
        for comp in spec.components:
            out = out + comp.w * np.exp(-2.0 * math.pi ** 2 * comp.sigma ** 2 * d * d) * np.exp(-2j * math.pi * comp.c * d)
    return out if out.ndim else out.item()


def _check_design_arrays(times, weights):
    t = np.asarray(times, dtype=float)
    v = np.asarray(weights, dtype=float)
    if t.ndim != 1 or t.shape != v.shape or t.size < 1:
        raise ValueError("design needs matching 1-d times and weights with n >= 1")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
        raise ValueError("design times and weights must be finite")
    return t, v


def kernel_matrix(spec: KernelSpec, design) -> np.ndarray:
    """Weighted Gram matrix ``K[i, j] = v_i v_j k(t_i - t_j)`` for a SampleDesign."""
    # shares the batch code path so single and multi-kernel runs agree bit for bit
    return kernel_matrices([spec], design)[0]


def kernel_matrices(specs: Sequence[KernelSpec], design) -> list[np.ndarray]:
    """Gram matrices for many specs on one design.

    Gaussian envelopes and carriers are cached per distinct sigma and mean, which
    is the common case for grids where every spec shares the same few values.
    """
    t, v = _check_design_arrays(design.times, design.weights)
    d = t[:, None] - t[None, :]
    d2 = d * d
    vv = np.outer(v, v)
    env: dict[float, np.ndarray] = {}
    car: dict[tuple[float, bool], np.ndarray] = {}
    out = []
    for spec in specs:
        acc = None
        for comp in spec.components:
            e = env.get(comp.sigma)
            if e is None:
                e = env[comp.sigma] = np.exp(-2.0 * math.pi ** 2 * comp.sigma ** 2 * d2)
            key = (comp.c, spec.symmetric)
            cr = car.get(key)
            if cr is None:
                if comp.c == 0.0:
                    cr = 1.0
                elif spec.symmetric:
                    cr = np.cos(2.0 * math.pi * comp.c * d)
                else:
                    cr = np.exp(-2j * math.pi * comp.c * d)
                car[key] = cr
            term = comp.w * (e * cr)
            acc = term if acc is None else acc + term
        if not spec.symmetric and not np.iscomplexobj(acc):
            acc = acc.astype(complex)
        out.append(acc * vv)
    return out


def signal_eval(sig: RkhsSignal, spec: KernelSpec, t):
    t = np.asarray(t, dtype=float)
    if len(sig) == 0:
        return np.zeros(t.shape) if t.ndim else 0.0
    k = kernel_eval(spec, t[..., None] - sig.centers)
    out = k @ sig.coefficients
    return out if out.ndim else out.item()


def signal_energy(sig: RkhsSignal, spec: KernelSpec) -> float:
    """RKHS energy ``beta^H K_s beta`` with ``K_s[j, l] = k(s_j - s_l)``."""
    if len(sig) == 0:
        return 0.0
    s = sig.centers
    Ks = kernel_eval(spec, s[:, None] - s[None, :])
    b = sig.coefficients
    e = np.vdot(b, Ks @ b)
    if abs(e.imag) > 1e-10 * max(1.0, abs(e.real)):
        raise FloatingPointError(f"energy has non-negligible imaginary part {e.imag}")
    return float(max(e.real, 0.0))

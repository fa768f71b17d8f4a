"""Synthetic test scenarios: ground-truth RKHS signals plus structured adversarial noise."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretize import GridConfig, sm_grid
from .kernel import GaussianComponent, KernelSpec, RkhsSignal, signal_energy, signal_eval
from .sampling import make_rng

NOISE_KINDS = ("none", "offset", "sinusoid", "spike_train")


@dataclass(frozen=True)
class NoiseModel:
    """Deterministic noise families with closed-form ``||z||_T^2``.

    ``offset``: z = amplitude.  ``sinusoid``: z = amplitude cos(2 pi freq t).
    ``spike_train``: z = amplitude while ``t mod period < width``, else 0.
    """
    kind: str = "none"
    amplitude: float = 0.0
    freq: float = 0.0
    period: float = 1.0
    width: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "spike_train" and not (self.period > 0 and 0 <= self.width <= self.period):
            raise ValueError("spike train needs period > 0 and 0 <= width <= period")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "none":
            return np.zeros(t.shape)
        if self.kind == "offset":
            return np.full(t.shape, self.amplitude)
        if self.kind == "sinusoid":
            return self.amplitude * np.cos(2 * math.pi * self.freq * t)
        return np.where(np.mod(t, self.period) < self.width, self.amplitude, 0.0)

    def norm2(self, T: float) -> float:
        a = self.amplitude
        if self.kind == "none":
            return 0.0
        if self.kind == "offset":
            return a * a
        if self.kind == "sinusoid":
            return a * a * _cos2_mean(self.freq, T)
        full, rem = divmod(T, self.period)
        return a * a * (full * self.width + min(rem, self.width)) / T

    def breakpoints(self, T: float) -> list[float]:
        if self.kind != "spike_train":
            return []
        k = np.arange(0, math.ceil(T / self.period) + 1) * self.period
        pts = np.concatenate([k, k + self.width])
        return sorted(float(p) for p in pts if 0 < p < T)

    @classmethod
    def with_norm2(cls, kind: str, target: float, T: float, **kw) -> "NoiseModel":
        """Build a noise model scaled so that ``norm2(T) == target``."""
        unit = cls(kind, amplitude=1.0, **kw)
        base = unit.norm2(T)
        if kind == "none" or target == 0:
            return cls(kind, amplitude=0.0, **kw)
        if base <= 0:
            raise ValueError("noise family has zero norm on [0, T]")
        return cls(kind, amplitude=math.sqrt(target / base), **kw)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "amplitude": self.amplitude, "freq": self.freq,
                "period": self.period, "width": self.width}


def _cos2_mean(f: float, T: float) -> float:
    """``(1/T) int_0^T cos^2(2 pi f t) dt``."""
    if f == 0:
        return 1.0
    return 0.5 + math.sin(4 * math.pi * f * T) / (8 * math.pi * f * T)


@dataclass(frozen=True)
class Scenario:
    T: float
    truth_spec: KernelSpec
    signal: RkhsSignal
    noise: NoiseModel
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if len(self.signal) and (self.signal.centers.min() < 0 or self.signal.centers.max() > self.T):
            raise ValueError("signal centers must lie in [0, T]")

    def truth(self, t):
        return signal_eval(self.signal, self.truth_spec, t)

    def observe(self, t):
        return self.truth(t) + self.noise(t)

    def energy(self) -> float:
        return signal_energy(self.signal, self.truth_spec)

    def noise_norm2(self) -> float:
        return self.noise.norm2(self.T)

    def breakpoints(self) -> list[float]:
        return self.noise.breakpoints(self.T)

    def max_frequency(self) -> float:
        f = max(abs(c.c) + 6 * c.sigma for c in self.truth_spec.components)
        if self.noise.kind == "sinusoid":
            f = max(f, abs(self.noise.freq))
        return f

    def with_noise(self, noise: NoiseModel) -> "Scenario":
        return Scenario(self.T, self.truth_spec, self.signal, noise, self.epsilon, self.delta)


@dataclass
class ScenarioConfig:
    T: float = 10.0
    W: float = 4.0
    m: float = 0.5
    M: float = 2.0
    q: int = 1
    n_centers: int = 8
    epsilon: float = 1e-2
    delta: float = 0.2
    truth: str = "continuous"
    complex_coefficients: bool = False
    noise: dict = field(default_factory=lambda: {"kind": "none"})

    def __post_init__(self):
        if self.T <= 0 or not (0 < self.m <= self.M) or self.W < 0:
            raise ValueError("scenario needs T > 0, 0 < m <= M and W >= 0")
        if self.n_centers < 0 or self.q < 1:
            raise ValueError("n_centers must be >= 0 and q >= 1")
        if self.truth not in ("continuous", "grid"):
            raise ValueError("truth must be 'continuous' or 'grid'")
        if not isinstance(self.noise, dict) or self.noise.get("kind", "none") not in NOISE_KINDS:
            raise ValueError(f"noise.kind must be one of {NOISE_KINDS}")

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**d)

    def default_noise_freq(self) -> float:
        """Out-of-band frequency well above the mixture's spectral support."""
        return 2.0 * (self.W + 3.0 * self.M)


def build_noise(cfg: ScenarioConfig) -> NoiseModel:
    spec = dict(cfg.noise)
    kind = spec.pop("kind", "none")
    if kind == "none":
        return NoiseModel("none")
    kw = {}
    if kind == "sinusoid":
        kw["freq"] = float(spec.pop("freq", cfg.default_noise_freq()))
    elif kind == "spike_train":
        kw["period"] = float(spec.pop("period", cfg.T / 10))
        kw["width"] = float(spec.pop("width", kw["period"] / 10))
    if "norm2" in spec:
        return NoiseModel.with_norm2(kind, float(spec.pop("norm2")), cfg.T, **kw)
    return NoiseModel(kind, amplitude=float(spec.pop("amplitude", 0.0)), **kw)


def draw_truth_spec(cfg: ScenarioConfig, rng: np.random.Generator,
                    grid: GridConfig | None = None) -> KernelSpec:
    if cfg.truth == "grid":
        specs = sm_grid(grid or GridConfig(cfg.W, cfg.m, cfg.M, q=cfg.q))
        return specs[int(rng.integers(len(specs)))]
    comps = []
    for _ in range(cfg.q):
        c = float(rng.uniform(0.0, cfg.W))
        s = float(math.exp(rng.uniform(math.log(cfg.m), math.log(cfg.M))))
        comps.append(GaussianComponent(c, s, 1.0))
    return KernelSpec(tuple(comps), symmetric=True)


def synth_scenario(cfg: ScenarioConfig | dict, seed: int, grid: GridConfig | None = None) -> Scenario:
    """Random truth kernel, unit-energy signal and the configured noise; deterministic in ``seed``."""
    if isinstance(cfg, dict):
        cfg = ScenarioConfig.from_dict(cfg)
    rng = make_rng(seed, 0)
    spec = draw_truth_spec(cfg, rng, grid)
    centers = np.sort(rng.uniform(0.0, cfg.T, cfg.n_centers))
    beta = rng.standard_normal(cfg.n_centers)
    if cfg.complex_coefficients:
        beta = beta + 1j * rng.standard_normal(cfg.n_centers)
    sig = RkhsSignal(centers, beta)
    e = signal_energy(sig, spec)
    if e > 0:
        sig = sig.scaled(1.0 / math.sqrt(e))
    return Scenario(cfg.T, spec, sig, build_noise(cfg), cfg.epsilon, cfg.delta)

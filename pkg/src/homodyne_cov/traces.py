"""Seeded Monte Carlo generation of two-detector photocurrent traces.

Seed-to-trace mapping (stable within a release): ``numpy.random.PCG64``
seeded through ``SeedSequence(seed)``. Samples are produced in blocks of
``CHUNK`` (the last block may be shorter). For each block of ``m`` samples
the generator draws, in order, ``m`` standard normals for the LO amplitude
quadrature, ``m`` for the signal tilted quadrature, then a ``(2, m)`` array
for the two electronic-noise channels.
"""
from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .states import (
    GaussianState,
    LocalOscillator,
    MeasurementSetting,
    apply_loss,
    lo_after_loss,
    rotated_variance,
)

CHUNK = 1 << 18
MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class DetectorNoiseModel:
    sigma1: float = 0.0
    sigma2: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if not (self.sigma1 >= 0 and self.sigma2 >= 0):
            raise ValueError(f"noise std devs must be >= 0, got {self.sigma1!r}, {self.sigma2!r}")
        if not (-1.0 <= self.rho <= 1.0):
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho!r}")
        if not (math.isfinite(self.sigma1) and math.isfinite(self.sigma2)):
            raise ValueError("noise std devs must be finite")

    @classmethod
    def symmetric(cls, variance: float, rho: float = 0.0) -> DetectorNoiseModel:
        s = math.sqrt(variance)
        return cls(s, s, rho)

    @property
    def cross_covariance(self) -> float:
        return self.rho * self.sigma1 * self.sigma2


@dataclass(frozen=True)
class SimulationConfig:
    state: GaussianState
    lo: LocalOscillator
    setting: MeasurementSetting = field(default_factory=MeasurementSetting)
    noise: DetectorNoiseModel = field(default_factory=DetectorNoiseModel)
    n_samples: int = 1_000_000
    seed: int = 0
    ac_coupled: bool = True

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise ValueError(f"n_samples must be an integer >= 2, got {self.n_samples!r}")
        if not (0 <= self.seed <= MAX_SEED) or int(self.seed) != self.seed:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    def with_(self, **changes) -> SimulationConfig:
        return replace(self, **changes)

    def attenuated(self) -> tuple[GaussianState, LocalOscillator]:
        t = self.setting.transmission
        return apply_loss(self.state, t), lo_after_loss(self.lo, t)


@dataclass(frozen=True, eq=False)
class TracePair:
    ch1: np.ndarray
    ch2: np.ndarray
    metadata: Any = None

    def __post_init__(self):
        ch1 = np.ascontiguousarray(self.ch1, dtype=np.float64)
        ch2 = np.ascontiguousarray(self.ch2, dtype=np.float64)
        if ch1.ndim != 1 or ch1.shape != ch2.shape:
            raise ValueError(f"channels must be 1-d and equal length, got {ch1.shape} and {ch2.shape}")
        if ch1.size < 2:
            raise ValueError("a trace pair needs at least 2 samples")
        if not (np.isfinite(ch1).all() and np.isfinite(ch2).all()):
            raise ValueError("trace samples must be finite")
        ch1.flags.writeable = False
        ch2.flags.writeable = False
        object.__setattr__(self, "ch1", ch1)
        object.__setattr__(self, "ch2", ch2)

    def __len__(self) -> int:
        return self.ch1.size


@dataclass(frozen=True)
class Moments:
    """Closed-form first and second moments of the two photocurrents."""

    mean: float
    var1: float
    var2: float
    covariance: float
    difference_variance: float


def correlated_noise(sigma1, sigma2, rho, rng: np.random.Generator, size=None):
    """Zero-mean normal pair with stds (sigma1, sigma2) and correlation rho."""
    z1, z2 = rng.standard_normal((2,) if size is None else (2, size))
    e1 = sigma1 * z1
    e2 = sigma2 * (rho * z1 + math.sqrt(1.0 - rho * rho) * z2)
    return e1, e2


def correlated_noise_pair(sigma1, sigma2, rho, rng: np.random.Generator) -> tuple[float, float]:
    e1, e2 = correlated_noise(sigma1, sigma2, rho, rng)
    return float(e1), float(e2)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def iter_trace_chunks(config: SimulationConfig) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield successive (ch1, ch2) blocks; concatenated they equal :func:`sample_trace_pair`."""
    state, lo = config.attenuated()
    alpha = lo.amplitude
    sd_lo = math.sqrt(lo.v_x)
    sd_phi = math.sqrt(rotated_variance(state, config.setting.phase))
    noise = config.noise
    dc = 0.0 if config.ac_coupled else 0.5 * alpha * alpha
    rng = make_rng(config.seed)
    remaining = config.n_samples
    while remaining > 0:
        m = min(CHUNK, remaining)
        x_lo = sd_lo * rng.standard_normal(m)
        x_phi = sd_phi * rng.standard_normal(m)
        e1, e2 = correlated_noise(noise.sigma1, noise.sigma2, noise.rho, rng, m)
        ch1 = alpha * (x_lo + x_phi) + e1
        ch2 = alpha * (x_lo - x_phi) + e2
        if dc:
            ch1 += dc
            ch2 += dc
        yield ch1, ch2
        remaining -= m


def sample_trace_pair(config: SimulationConfig) -> TracePair:
    blocks = list(iter_trace_chunks(config))
    ch1 = np.concatenate([b[0] for b in blocks])
    ch2 = np.concatenate([b[1] for b in blocks])
    return TracePair(ch1, ch2, metadata=config)


def predicted_moments(config: SimulationConfig) -> Moments:
    """Exact moments of the generated channels, including correlated electronic noise."""
    state, lo = config.attenuated()
    a2 = lo.power
    v_phi = rotated_variance(state, config.setting.phase)
    n = config.noise
    return Moments(
        mean=0.0 if config.ac_coupled else 0.5 * a2,
        var1=a2 * (lo.v_x + v_phi) + n.sigma1**2,
        var2=a2 * (lo.v_x + v_phi) + n.sigma2**2,
        covariance=a2 * (lo.v_x - v_phi) + n.cross_covariance,
        difference_variance=4 * a2 * v_phi + n.sigma1**2 + n.sigma2**2 - 2 * n.cross_covariance,
    )

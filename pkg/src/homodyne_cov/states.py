"""Gaussian single-mode algebra for balanced homodyne detection.

Quadratures use X = (a^+ + a)/2, so the vacuum variance is 1/4. All
quantities are dimensionless; the squared LO amplitude is the mean LO photon
number per sample slot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

VACUUM_VARIANCE = 0.25
_HEISENBERG = VACUUM_VARIANCE**2
_PHYS_TOL = 1e-12


def _check_transmission(transmission: float) -> None:
    if not (0.0 <= transmission <= 1.0):
        raise ValueError(f"transmission must lie in [0, 1], got {transmission!r}")


@dataclass(frozen=True)
class GaussianState:
    """Second moments of the signal beam quadratures."""

    vx: float
    vy: float
    cxy: float = 0.0

    def __post_init__(self):
        for name in ("vx", "vy", "cxy"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.vx <= 0 or self.vy <= 0:
            raise ValueError(f"variances must be positive, got vx={self.vx}, vy={self.vy}")
        if self.determinant < _HEISENBERG * (1 - _PHYS_TOL):
            raise ValueError(
                f"unphysical state: vx*vy - cxy^2 = {self.determinant:.6g} < 1/16"
            )

    @classmethod
    def vacuum(cls) -> GaussianState:
        return cls(VACUUM_VARIANCE, VACUUM_VARIANCE, 0.0)

    @classmethod
    def from_db(cls, squeezing_db: float, antisqueezing_db: float) -> GaussianState:
        """Diagonal state with X squeezed/anti-squeezed by the given dB values."""
        return cls(
            VACUUM_VARIANCE * 10 ** (squeezing_db / 10),
            VACUUM_VARIANCE * 10 ** (antisqueezing_db / 10),
        )

    @property
    def determinant(self) -> float:
        return self.vx * self.vy - self.cxy**2


@dataclass(frozen=True)
class LocalOscillator:
    amplitude: float
    v_x: float = VACUUM_VARIANCE

    def __post_init__(self):
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValueError(f"LO amplitude must be finite and >= 0, got {self.amplitude!r}")
        if not (math.isfinite(self.v_x) and self.v_x > 0):
            raise ValueError(f"LO variance must be finite and > 0, got {self.v_x!r}")

    @property
    def power(self) -> float:
        """Mean photon number per sample slot, alpha^2."""
        return self.amplitude**2

    @property
    def shot_noise_limited(self) -> bool:
        return math.isclose(self.v_x, VACUUM_VARIANCE, rel_tol=0, abs_tol=1e-15)


@dataclass(frozen=True)
class MeasurementSetting:
    phase: float = 0.0
    transmission: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.phase):
            raise ValueError("phase must be finite")
        if not (0.0 < self.transmission <= 1.0):
            raise ValueError(f"transmission must lie in (0, 1], got {self.transmission!r}")


def rotated_variance(state: GaussianState, phase: float) -> float:
    """Variance of the tilted quadrature cos(phase) X + sin(phase) Y."""
    c, s = math.cos(phase), math.sin(phase)
    return c * c * state.vx + s * s * state.vy + 2 * s * c * state.cxy


def apply_loss(state: GaussianState, transmission: float) -> GaussianState:
    """Beam-splitter loss: mix the state with vacuum at the given power transmission."""
    _check_transmission(transmission)
    t = transmission
    return GaussianState(
        t * state.vx + (1 - t) * VACUUM_VARIANCE,
        t * state.vy + (1 - t) * VACUUM_VARIANCE,
        t * state.cxy,
    )


def lo_after_loss(lo: LocalOscillator, transmission: float) -> LocalOscillator:
    _check_transmission(transmission)
    t = transmission
    return LocalOscillator(math.sqrt(t) * lo.amplitude, t * lo.v_x + (1 - t) * VACUUM_VARIANCE)


def shot_noise_level(lo: LocalOscillator) -> float:
    """Electronic-noise-free difference variance for vacuum input, 4 alpha^2 / 4."""
    return 4 * lo.power * VACUUM_VARIANCE


def predicted_difference_variance(state, lo, setting, noise) -> float:
    """var(i1 - i2) for already-attenuated ``state`` and ``lo``, uncorrelated detector noise.

    Use :func:`en_difference_variance` for the noise term when ``noise.rho != 0``.
    """
    v_phi = rotated_variance(state, setting.phase)
    return 4 * lo.power * v_phi + noise.sigma1**2 + noise.sigma2**2


def en_difference_variance(noise) -> float:
    """Electronic-noise contribution to var(i1 - i2) including correlation."""
    return noise.sigma1**2 + noise.sigma2**2 - 2 * noise.rho * noise.sigma1 * noise.sigma2


def predicted_covariance(state, lo, setting) -> float:
    """cov(i1, i2) for uncorrelated detector noise; positive iff the signal is squeezed below the LO."""
    return lo.power * (lo.v_x - rotated_variance(state, setting.phase))


def squeezing_db(v: float, v_ref: float) -> float:
    if not (v > 0 and v_ref > 0):
        raise ValueError(f"squeezing_db needs positive arguments, got v={v!r}, v_ref={v_ref!r}")
    return 10 * math.log10(v / v_ref)


def ideal_squeezing_curve(v_signal: float, transmission: float) -> float:
    """Squeezing in dB seen by a noiseless detector after loss ``1 - transmission``."""
    if not (0 < transmission <= 1) or v_signal <= 0:
        raise ValueError("need 0 < transmission <= 1 and v_signal > 0")
    t = transmission
    return 10 * math.log10(t * (v_signal / VACUUM_VARIANCE) + (1 - t))

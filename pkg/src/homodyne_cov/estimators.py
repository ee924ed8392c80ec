"""Statistics on trace pairs: subtraction and covariance methods, SNL calibration, verdicts."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .states import VACUUM_VARIANCE, squeezing_db
from .traces import CHUNK, TracePair

_DB = 10 / math.log(10)


class InsufficientDataError(ValueError):
    pass


class CalibrationError(ValueError):
    pass


class OutOfRangeError(ValueError):
    """Covariance too large to invert into a positive quadrature variance."""

    def __init__(self, message: str, covariance: float):
        super().__init__(message)
        self.covariance = covariance


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    std_error: float
    n: int

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValueError(f"std_error must be >= 0, got {self.std_error!r}")
        if self.n < 2:
            raise InsufficientDataError(f"need at least 2 samples, got {self.n}")

    def z_against(self, expected: float, extra_se: float = 0.0) -> float:
        se = math.hypot(self.std_error, extra_se)
        diff = self.value - expected
        if se == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / se


@dataclass
class CoMoments:
    """Mergeable one-pass accumulator for two channels and their difference.

    Data are shifted by the first sample seen (``shift``) before
    accumulating, so large common offsets do not cancel catastrophically.
    Batches are folded in with the pairwise update of Chan, Golub and
    LeVeque; a batch of one sample reduces to Welford's update.
    """

    n: int = 0
    shift: tuple[float, float] = (0.0, 0.0)
    mean: np.ndarray = field(default_factory=lambda: np.zeros(3))
    # co-moment sums: xx, yy, xy, dd
    m2: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def update(self, x, y) -> CoMoments:
        x = np.asarray(x, dtype=np.float64).ravel()
        y = np.asarray(y, dtype=np.float64).ravel()
        if x.shape != y.shape:
            raise ValueError("channels must have equal length")
        if x.size == 0:
            return self
        if self.n == 0:
            self.shift = (float(x[0]), float(y[0]))
        dx = x - self.shift[0]
        dy = y - self.shift[1]
        dd = dx - dy
        nb = x.size
        mb = np.array([dx.mean(), dy.mean(), dd.mean()])
        cx, cy, cd = dx - mb[0], dy - mb[1], dd - mb[2]
        m2b = np.array([cx @ cx, cy @ cy, cx @ cy, cd @ cd])
        self._fold(nb, mb, m2b)
        return self

    def _fold(self, nb: int, mb: np.ndarray, m2b: np.ndarray) -> None:
        na = self.n
        if na == 0:
            self.n, self.mean, self.m2 = nb, mb.copy(), m2b.copy()
            return
        n = na + nb
        delta = mb - self.mean
        w = na * nb / n
        self.m2 = self.m2 + m2b + w * np.array(
            [delta[0] * delta[0], delta[1] * delta[1], delta[0] * delta[1], delta[2] * delta[2]]
        )
        self.mean = self.mean + delta * (nb / n)
        self.n = n

    def merge(self, other: CoMoments) -> CoMoments:
        """Combined accumulator, as if ``other``'s data had followed this one's."""
        out = CoMoments(self.n, self.shift, self.mean.copy(), self.m2.copy())
        if other.n == 0:
            return out
        if out.n == 0:
            return CoMoments(other.n, other.shift, other.mean.copy(), other.m2.copy())
        sx = other.shift[0] - out.shift[0]
        sy = other.shift[1] - out.shift[1]
        mb = other.mean + np.array([sx, sy, sx - sy])
        out._fold(other.n, mb, other.m2)
        return out

    @classmethod
    def from_arrays(cls, x, y, chunk: int = CHUNK) -> CoMoments:
        acc = cls()
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        for i in range(0, x.size, chunk):
            acc.update(x[i : i + chunk], y[i : i + chunk])
        return acc

    def _require(self) -> None:
        if self.n < 2:
            raise InsufficientDataError(f"need at least 2 samples, got {self.n}")

    @property
    def means(self) -> tuple[float, float]:
        return self.shift[0] + float(self.mean[0]), self.shift[1] + float(self.mean[1])

    @property
    def variances(self) -> tuple[float, float]:
        self._require()
        return float(self.m2[0]) / (self.n - 1), float(self.m2[1]) / (self.n - 1)

    def covariance(self) -> EstimateWithError:
        self._require()
        c = float(self.m2[2]) / (self.n - 1)
        v1, v2 = self.variances
        se = math.sqrt(max(v1 * v2 + c * c, 0.0) / (self.n - 1))
        return EstimateWithError(c, se, self.n)

    def difference_variance(self) -> EstimateWithError:
        self._require()
        v = float(self.m2[3]) / (self.n - 1)
        return EstimateWithError(v, v * math.sqrt(2 / (self.n - 1)), self.n)


def _accumulate(traces: TracePair) -> CoMoments:
    if len(traces) < 2:
        raise InsufficientDataError("need at least 2 samples")
    return CoMoments.from_arrays(traces.ch1, traces.ch2)


def difference_variance(traces: TracePair) -> EstimateWithError:
    """Subtraction method: unbiased sample variance of ch1 - ch2."""
    return _accumulate(traces).difference_variance()


def covariance(traces: TracePair) -> EstimateWithError:
    """Covariance method: unbiased sample covariance of the two channels."""
    return _accumulate(traces).covariance()


def covariance_two_pass(traces: TracePair) -> EstimateWithError:
    x, y = traces.ch1, traces.ch2
    n = x.size
    if n < 2:
        raise InsufficientDataError("need at least 2 samples")
    cx = x - x.mean()
    cy = y - y.mean()
    c = float(cx @ cy) / (n - 1)
    v1 = float(cx @ cx) / (n - 1)
    v2 = float(cy @ cy) / (n - 1)
    return EstimateWithError(c, math.sqrt((v1 * v2 + c * c) / (n - 1)), n)


# ---------------------------------------------------------------------------
# shot-noise calibration


@dataclass(frozen=True)
class SnlCalibration:
    slope: float
    intercept: float
    fit_points: tuple[tuple[float, float], ...]
    r_squared: float
    slope_stderr: float = 0.0
    intercept_stderr: float = 0.0

    def snl(self, power: float) -> float:
        """Extrapolated electronic-noise-free shot-noise variance at ``power``."""
        return self.slope * power

    def snl_stderr(self, power: float) -> float:
        return self.slope_stderr * power


def calibrate_snl(ladder) -> SnlCalibration:
    """Least-squares line through (LO power, difference variance) points.

    The intercept is the electronic-noise floor; the SNL is the line with the
    intercept removed, which is what extrapolating a high-power ladder gives.
    """
    pts = [(float(p), float(v)) for p, v in ladder]
    if len(pts) < 3:
        raise CalibrationError(f"need at least 3 ladder points, got {len(pts)}")
    p = np.array([q[0] for q in pts])
    v = np.array([q[1] for q in pts])
    if not (np.all(p > 0) and np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
        raise CalibrationError("ladder powers must be positive and values finite")
    if np.all(p == p[0]):
        raise CalibrationError("ladder powers are all equal")
    fit = stats.linregress(p, v)
    if not fit.slope > 0:
        raise CalibrationError(f"fitted slope {fit.slope:.6g} is not positive")
    r2 = float(fit.rvalue) ** 2 if math.isfinite(fit.rvalue) else 1.0
    return SnlCalibration(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        fit_points=tuple(pts),
        r_squared=min(max(r2, 0.0), 1.0),
        slope_stderr=float(np.nan_to_num(fit.stderr)),
        intercept_stderr=float(np.nan_to_num(fit.intercept_stderr)),
    )


# ---------------------------------------------------------------------------
# squeezing figures


def squeezing_from_subtraction(traces: TracePair, snl: float) -> float:
    return squeezing_db(difference_variance(traces).value, snl)


def normalized_variance_from_covariance(
    cov: float, snl: float, lo_variance: float = VACUUM_VARIANCE
) -> float:
    """Signal quadrature variance in vacuum units, inverted from cov = alpha^2 (V_LO - V_phi)."""
    if not snl > 0:
        raise ValueError(f"snl must be positive, got {snl!r}")
    # snl = alpha^2 for the X = (a^+ + a)/2 convention
    return (lo_variance - cov / snl) / VACUUM_VARIANCE


def covariance_to_db(cov: float, snl: float, lo_variance: float = VACUUM_VARIANCE) -> float:
    v = normalized_variance_from_covariance(cov, snl, lo_variance)
    if not v > 0:
        raise OutOfRangeError(
            f"covariance {cov:.6g} implies a non-positive variance for snl={snl:.6g}", cov
        )
    return _DB * math.log(v)


def squeezing_from_covariance(
    traces: TracePair, snl: float, lo_variance: float = VACUUM_VARIANCE
) -> float:
    return covariance_to_db(covariance(traces).value, snl, lo_variance)


def db_std_error(value: float, std_error: float) -> float:
    """Delta-method standard error of 10 log10(value)."""
    return _DB * std_error / abs(value)


# ---------------------------------------------------------------------------
# sign classification


class Verdict(enum.Enum):
    SQUEEZED = "Squeezed"
    COHERENT_CONSISTENT = "CoherentConsistent"
    EXCESS_NOISE = "ExcessNoise"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class StateVerdict:
    verdict: Verdict
    z_score: float

    def __str__(self) -> str:
        return f"{self.verdict.value} (z = {self.z_score:.3g})"


def classify_state(cov_est: EstimateWithError, z_threshold: float = 3.0) -> StateVerdict:
    """Sign test on the covariance; assumes a shot-noise-limited local oscillator."""
    if z_threshold <= 0:
        raise ValueError("z_threshold must be positive")
    value, se = cov_est.value, cov_est.std_error
    if not (math.isfinite(value) and math.isfinite(se)) or cov_est.n < 2:
        return StateVerdict(Verdict.INCONCLUSIVE, math.nan)
    if se == 0:
        z = 0.0 if value == 0 else math.copysign(math.inf, value)
    else:
        z = value / se
    if z > z_threshold:
        kind = Verdict.SQUEEZED
    elif z < -z_threshold:
        kind = Verdict.EXCESS_NOISE
    else:
        kind = Verdict.COHERENT_CONSISTENT
    return StateVerdict(kind, z)

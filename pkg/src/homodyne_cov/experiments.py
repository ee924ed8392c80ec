"""Phase scan, attenuation sweep and electronic-noise robustness runs.

Every row draws its own trace with a seed derived from the base seed, the
experiment name and the row index, so rows are independent, reproducible and
can be evaluated in any order.
"""
from __future__ import annotations

import csv
import functools
import io
import math
import zlib
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Any

import numpy as np

from .estimators import (
    CoMoments,
    EstimateWithError,
    OutOfRangeError,
    SnlCalibration,
    calibrate_snl,
    covariance_to_db,
    db_std_error,
    normalized_variance_from_covariance,
)
from .states import (
    VACUUM_VARIANCE,
    GaussianState,
    LocalOscillator,
    MeasurementSetting,
    ideal_squeezing_curve,
    predicted_covariance,
    rotated_variance,
    shot_noise_level,
    squeezing_db,
)
from .traces import DetectorNoiseModel, SimulationConfig, iter_trace_chunks, predicted_moments

Z_LIMIT = 4.0
DEFAULT_LADDER = (0.25, 0.5, 1.0, 2.0, 4.0)
# -1.65 dB squeezed, +5 dB anti-squeezed (impure)
DEFAULT_STATE = GaussianState(0.171, 0.79)


def default_phases(n: int = 64) -> list[float]:
    return [2 * math.pi * k / n for k in range(n)]


def default_transmissions(n: int = 20, t_min: float = 0.02) -> list[float]:
    ts = np.geomspace(t_min, 1.0, n)
    ts[-1] = 1.0
    return [float(t) for t in ts]


def default_config(**changes) -> SimulationConfig:
    base = SimulationConfig(
        state=DEFAULT_STATE,
        lo=LocalOscillator(1.0),
        setting=MeasurementSetting(0.0, 1.0),
        noise=DetectorNoiseModel(),
        n_samples=1_000_000,
        seed=1_650,
    )
    return base.with_(**changes)


def derive_seed(base_seed: int, experiment_id: str, row_index: int) -> int:
    key = (zlib.crc32(experiment_id.encode()), row_index)
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def accumulate(config: SimulationConfig) -> CoMoments:
    """Stream a generated trace through the estimator without holding it in memory."""
    acc = CoMoments()
    for ch1, ch2 in iter_trace_chunks(config):
        acc.update(ch1, ch2)
    return acc


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _guarded(fn: Callable, make_failed: Callable[[Any, Exception], Any], item):
    try:
        return fn(item)
    except (ValueError, ArithmeticError) as exc:
        return make_failed(item, exc)


def _safe(fn: Callable, make_failed: Callable[[Any, Exception], Any]) -> Callable:
    """Row runner that records a failure instead of aborting the whole run."""
    return functools.partial(_guarded, fn, make_failed)


@dataclass
class _Table:
    rows: list

    @property
    def columns(self) -> list[str]:
        return [f.name for f in fields(self.rows[0])] if self.rows else []

    @property
    def n_passed(self) -> int:
        return sum(bool(r.passed) for r in self.rows)

    @property
    def n_failed(self) -> int:
        return len(self.rows) - self.n_passed

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in asdict(row).values()])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


# ---------------------------------------------------------------------------
# phase scan


@dataclass
class PhaseScanRow:
    phase: float
    cov_mc: float
    cov_mc_se: float
    n: int
    cov_analytic: float
    cov_expected: float
    z: float
    passed: bool
    error: str = ""


@dataclass
class PhaseScanResult(_Table):
    rows: list[PhaseScanRow]


def _phase_row(config: SimulationConfig) -> PhaseScanRow:
    state, lo = config.attenuated()
    analytic = predicted_covariance(state, lo, config.setting)
    expected = analytic + config.noise.cross_covariance
    est = accumulate(config).covariance()
    z = est.z_against(expected)
    return PhaseScanRow(
        config.setting.phase, est.value, est.std_error, est.n, analytic, expected, z, abs(z) <= Z_LIMIT
    )


def _phase_failed(config: SimulationConfig, exc: Exception) -> PhaseScanRow:
    nan = math.nan
    return PhaseScanRow(config.setting.phase, nan, nan, 0, nan, nan, nan, False, str(exc))


def run_phase_scan(base: SimulationConfig, phases: Sequence[float], workers: int = 1) -> PhaseScanResult:
    phases = [float(p) for p in phases]
    if not phases:
        raise ValueError("phase scan needs at least one phase")
    if any(not (0 <= p < 2 * math.pi) for p in phases) or any(
        b <= a for a, b in zip(phases, phases[1:])
    ):
        raise ValueError("phases must be strictly increasing within [0, 2*pi)")
    configs = [
        base.with_(
            setting=MeasurementSetting(p, base.setting.transmission),
            seed=derive_seed(base.seed, "phase_scan", i),
        )
        for i, p in enumerate(phases)
    ]
    return PhaseScanResult(_map(_safe(_phase_row, _phase_failed), configs, workers))


# ---------------------------------------------------------------------------
# attenuation sweep


@dataclass
class AttenuationRow:
    transmission: float
    snl: float
    diff_var: float
    diff_var_se: float
    sq_subtraction_db: float
    sq_subtraction_se_db: float
    sq_subtraction_analytic_db: float
    cov_mc: float
    cov_mc_se: float
    sq_covariance_db: float
    sq_covariance_se_db: float
    cov_out_of_range: bool
    sq_ideal_db: float
    z_subtraction: float
    z_covariance: float
    passed: bool
    error: str = ""


@dataclass
class AttenuationSweepResult(_Table):
    rows: list[AttenuationRow]
    calibration: SnlCalibration | None = None

    def subtraction_crossing(self) -> float | None:
        """Transmission where the subtraction curve crosses 0 dB, interpolated in log t."""
        good = [r for r in self.rows if not r.error]
        for lo, hi in zip(good[::-1][1:], good[::-1]):
            a, b = lo.sq_subtraction_db, hi.sq_subtraction_db
            if a >= 0 > b:
                la, lb = math.log(lo.transmission), math.log(hi.transmission)
                return math.exp(la + (lb - la) * a / (a - b))
        return None


def _sweep_row(args) -> AttenuationRow:
    config, snl, snl_rel_se = args
    t = config.setting.transmission
    state, lo = config.attenuated()
    v_signal = rotated_variance(config.state, config.setting.phase)
    ideal = ideal_squeezing_curve(v_signal, t)
    acc = accumulate(config)
    dvar = acc.difference_variance()
    cov = acc.covariance()

    mom = predicted_moments(config)
    sub_db = squeezing_db(dvar.value, snl)
    sub_se_db = math.hypot(db_std_error(dvar.value, dvar.std_error), _to_db_rel(snl_rel_se))
    sub_analytic = squeezing_db(mom.difference_variance, snl)
    z_sub = (sub_db - sub_analytic) / sub_se_db if sub_se_db > 0 else 0.0

    try:
        cov_db = covariance_to_db(cov.value, snl, lo.v_x)
        v_norm = normalized_variance_from_covariance(cov.value, snl, lo.v_x)
        # d(v_norm) = -d(cov)/(snl * 1/4); snl uncertainty scales the same deviation term
        dev = abs(v_norm - lo.v_x / VACUUM_VARIANCE)
        v_se = math.hypot(cov.std_error / (snl * VACUUM_VARIANCE), dev * snl_rel_se)
        cov_se_db = db_std_error(v_norm, v_se)
        out_of_range = False
        z_cov = (cov_db - ideal) / cov_se_db if cov_se_db > 0 else 0.0
    except OutOfRangeError:
        cov_db = cov_se_db = z_cov = math.nan
        out_of_range = True
    passed = (not out_of_range) and abs(z_sub) <= Z_LIMIT and abs(z_cov) <= Z_LIMIT
    return AttenuationRow(
        t, snl, dvar.value, dvar.std_error, sub_db, sub_se_db, sub_analytic,
        cov.value, cov.std_error, cov_db, cov_se_db, out_of_range, ideal,
        z_sub, z_cov, passed,
    )


def _to_db_rel(rel: float) -> float:
    return 10 / math.log(10) * rel


def _sweep_failed(args, exc: Exception) -> AttenuationRow:
    nan = math.nan
    t = args[0].setting.transmission
    return AttenuationRow(t, *([nan] * 10), False, *([nan] * 3), False, str(exc))


def calibration_ladder(
    base: SimulationConfig, factors: Sequence[float] = DEFAULT_LADDER
) -> list[tuple[float, EstimateWithError]]:
    """Difference-variance measurements of a shot-noise-limited LO with blocked signal."""
    points = []
    for i, f in enumerate(factors):
        lo = LocalOscillator(base.lo.amplitude * math.sqrt(f))
        cfg = base.with_(
            state=GaussianState.vacuum(),
            lo=lo,
            setting=MeasurementSetting(base.setting.phase, 1.0),
            seed=derive_seed(base.seed, "snl_ladder", i),
        )
        points.append((lo.power, accumulate(cfg).difference_variance()))
    return points


def run_attenuation_sweep(
    base: SimulationConfig,
    transmissions: Sequence[float],
    snl_mode: str = "analytic",
    ladder_factors: Sequence[float] = DEFAULT_LADDER,
    workers: int = 1,
) -> AttenuationSweepResult:
    """Squeezing versus transmission by both methods, normalized to the noise-free SNL.

    ``base.setting.phase`` should select the squeezed quadrature.
    """
    ts = [float(t) for t in transmissions]
    if not ts or any(not (0 < t <= 1) for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("transmissions must be strictly increasing within (0, 1]")
    if snl_mode not in ("analytic", "calibrated"):
        raise ValueError(f"snl_mode must be 'analytic' or 'calibrated', got {snl_mode!r}")

    calibration = None
    if snl_mode == "calibrated":
        ladder = calibration_ladder(base, ladder_factors)
        calibration = calibrate_snl([(p, e.value) for p, e in ladder])

    jobs = []
    for i, t in enumerate(ts):
        cfg = base.with_(
            setting=MeasurementSetting(base.setting.phase, t),
            seed=derive_seed(base.seed, "atten_sweep", i),
        )
        power = base.lo.power * t
        if calibration is None:
            snl, rel = shot_noise_level(LocalOscillator(math.sqrt(power))), 0.0
        else:
            snl, rel = calibration.snl(power), calibration.slope_stderr / calibration.slope
        jobs.append((cfg, snl, rel))
    rows = _map(_safe(_sweep_row, _sweep_failed), jobs, workers)
    return AttenuationSweepResult(rows, calibration)


# ---------------------------------------------------------------------------
# electronic-noise robustness


@dataclass
class EnRobustnessRow:
    en_scale: float
    sigma1: float
    sigma2: float
    rho: float
    cov_mc: float
    cov_mc_se: float
    cov_analytic: float
    cov_bias: float
    expected_bias: float
    z_bias: float
    diff_var: float
    diff_var_se: float
    diff_var_analytic: float
    en_variance: float
    z_diff_var: float
    passed: bool
    error: str = ""


@dataclass
class EnRobustnessResult(_Table):
    rows: list[EnRobustnessRow]

    def covariance_spread(self) -> float:
        """Largest pairwise |z| between covariance estimates of different rows."""
        good = [r for r in self.rows if not r.error]
        worst = 0.0
        for i, a in enumerate(good):
            for b in good[i + 1 :]:
                worst = max(worst, abs(a.cov_mc - b.cov_mc) / math.hypot(a.cov_mc_se, b.cov_mc_se))
        return worst

    def difference_growth_z(self) -> list[float]:
        """z of (diff_var - first row's diff_var) against the injected noise variance."""
        good = [r for r in self.rows if not r.error]
        if not good:
            return []
        r0 = good[0]
        return [
            ((r.diff_var - r0.diff_var) - (r.en_variance - r0.en_variance))
            / math.hypot(r.diff_var_se, r0.diff_var_se)
            for r in good[1:]
        ]


def _en_row(args) -> EnRobustnessRow:
    config, scale = args
    state, lo = config.attenuated()
    noise = config.noise
    analytic = predicted_covariance(state, lo, config.setting)
    mom = predicted_moments(config)
    acc = accumulate(config)
    cov, dvar = acc.covariance(), acc.difference_variance()
    bias = cov.value - analytic
    expected_bias = noise.cross_covariance
    z_bias = EstimateWithError(bias, cov.std_error, cov.n).z_against(expected_bias)
    z_dvar = dvar.z_against(mom.difference_variance)
    en_var = noise.sigma1**2 + noise.sigma2**2 - 2 * noise.cross_covariance
    return EnRobustnessRow(
        scale, noise.sigma1, noise.sigma2, noise.rho, cov.value, cov.std_error, analytic,
        bias, expected_bias, z_bias, dvar.value, dvar.std_error, mom.difference_variance,
        en_var, z_dvar, abs(z_bias) <= Z_LIMIT and abs(z_dvar) <= Z_LIMIT,
    )


def _en_failed(args, exc: Exception) -> EnRobustnessRow:
    nan = math.nan
    cfg, scale = args
    return EnRobustnessRow(scale, *([nan] * 14), False, str(exc))


def run_en_robustness(
    base: SimulationConfig, en_scales: Sequence[float], rho: float = 0.0, workers: int = 1
) -> EnRobustnessResult:
    """Fixed optics, growing electronic noise.

    Each detector's noise variance is ``scale`` times the shot-noise level at
    the base LO power (after attenuation).
    """
    scales = [float(s) for s in en_scales]
    if not scales or any(not (s >= 0) for s in scales):
        raise ValueError("en_scales must be non-negative")
    _, lo = base.attenuated()
    snl = shot_noise_level(lo)
    jobs = [
        (
            base.with_(
                noise=DetectorNoiseModel.symmetric(s * snl, rho),
                seed=derive_seed(base.seed, "en_robustness", i),
            ),
            s,
        )
        for i, s in enumerate(scales)
    ]
    return EnRobustnessResult(_map(_safe(_en_row, _en_failed), jobs, workers))

"""Command-line front end.

Exit codes: 0 success, 2 user or config error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments as ex
from .estimators import (
    OutOfRangeError,
    calibrate_snl,
    classify_state,
    covariance_to_db,
    difference_variance,
    CoMoments,
)
from .serialization import (
    ConfigError,
    RunConfig,
    load_config,
    read_calibration,
    read_ladder_table,
    read_trace_csv,
    write_calibration,
    write_trace_csv,
)
from .states import VACUUM_VARIANCE, squeezing_db
from .traces import MAX_SEED, sample_trace_pair

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3


class UsageError(Exception):
    pass


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {text}")
    return v


def _samples(text: str) -> int:
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError(f"--samples must be >= 2, got {text}")
    return v


def _run_config(args) -> RunConfig:
    rc = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.samples is not None:
        changes["n_samples"] = args.samples
    if changes:
        rc.simulation = rc.simulation.with_(**changes)
    return rc


def _out_path(args, rc: RunConfig | None = None) -> str:
    out = args.out or (rc.out if rc else None)
    if not out:
        raise UsageError("no output path: pass --out or set 'out' in the config")
    return out


def _write_text(out: str, text: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_simulate(args) -> int:
    rc = _run_config(args)
    out = _out_path(args, rc)
    traces = sample_trace_pair(rc.simulation)
    write_trace_csv(out, traces)
    _log(f"wrote {len(traces)} samples to {out}")
    return EXIT_OK


def _summary(result, label: str) -> None:
    _log(f"{label}: {len(result.rows)} rows, {result.n_passed} passed, {result.n_failed} failed (4 SE)")


def cmd_phase_scan(args) -> int:
    rc = _run_config(args)
    out = _out_path(args, rc)
    phases = rc.phases if rc.phases is not None else ex.default_phases()
    result = ex.run_phase_scan(rc.simulation, phases, workers=rc.workers)
    _write_text(out, result.to_csv())
    _summary(result, "phase-scan")
    good = [r for r in result.rows if not r.error]
    if good:
        hi = max(good, key=lambda r: r.cov_analytic)
        lo = min(good, key=lambda r: r.cov_analytic)
        _log(f"analytic covariance max {hi.cov_analytic:+.4g} at phase {hi.phase:.4g}, "
             f"min {lo.cov_analytic:+.4g} at phase {lo.phase:.4g}")
    return EXIT_OK


def cmd_atten_sweep(args) -> int:
    rc = _run_config(args)
    out = _out_path(args, rc)
    ts = rc.transmissions if rc.transmissions is not None else ex.default_transmissions()
    kwargs = {"ladder_factors": rc.ladder_factors} if rc.ladder_factors else {}
    result = ex.run_attenuation_sweep(rc.simulation, ts, rc.snl_mode, workers=rc.workers, **kwargs)
    _write_text(out, result.to_csv())
    _summary(result, "atten-sweep")
    if result.calibration is not None:
        c = result.calibration
        _log(f"SNL calibration: slope {c.slope:.6g} +/- {c.slope_stderr:.2g}, "
             f"EN floor {c.intercept:.4g}, r^2 {c.r_squared:.6f}")
    t_cross = result.subtraction_crossing()
    if t_cross is None:
        _log("subtraction method does not cross 0 dB on this grid")
    else:
        _log(f"subtraction crosses 0 dB at t≈{t_cross:.3f}")
    agree = sum(
        1 for r in result.rows
        if not r.error and not r.cov_out_of_range
        and abs(r.sq_subtraction_db - r.sq_covariance_db)
        <= ex.Z_LIMIT * (r.sq_subtraction_se_db**2 + r.sq_covariance_se_db**2) ** 0.5
    )
    _log(f"both-method agreement: {agree}/{len(result.rows)} rows within 4 SE")
    return EXIT_OK


def cmd_en_robustness(args) -> int:
    rc = _run_config(args)
    out = _out_path(args, rc)
    result = ex.run_en_robustness(rc.simulation, rc.en_scales, rc.en_rho, workers=rc.workers)
    _write_text(out, result.to_csv())
    _summary(result, "en-robustness")
    _log(f"covariance spread across rows: max pairwise |z| = {result.covariance_spread():.3g}")
    growth = result.difference_growth_z()
    if growth:
        _log(f"difference-variance growth vs injected EN: max |z| = {max(map(abs, growth)):.3g}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    traces = read_trace_csv(args.trace)
    acc = CoMoments.from_arrays(traces.ch1, traces.ch2)
    cov, dvar = acc.covariance(), acc.difference_variance()
    if args.snl is not None:
        snl = args.snl
    else:
        cal = read_calibration(args.calibration)
        power = args.lo_power
        if power is None:
            if "lo_power" not in traces.metadata:
                raise UsageError("--calibration needs --lo-power or 'lo_power' trace metadata")
            power = float(traces.metadata["lo_power"])
        snl = cal.snl(power)
    if not snl > 0:
        raise UsageError(f"SNL must be positive, got {snl}")
    verdict = classify_state(cov, args.z_threshold)
    print(f"samples: {cov.n}")
    print(f"snl: {snl!r}")
    print(f"covariance: {cov.value!r} +/- {cov.std_error!r}")
    print(f"difference_variance: {dvar.value!r} +/- {dvar.std_error!r}")
    if dvar.value > 0:
        print(f"squeezing_subtraction_db: {squeezing_db(dvar.value, snl):.6f}")
    else:
        print("squeezing_subtraction_db: undefined (zero difference variance)")
    try:
        print(f"squeezing_covariance_db: {covariance_to_db(cov.value, snl, args.lo_variance):.6f}")
    except OutOfRangeError as exc:
        print(f"squeezing_covariance_db: out of range (covariance {exc.covariance!r})")
    print(f"verdict: {verdict.verdict.value}")
    print(f"z_score: {verdict.z_score:.6g}")
    return EXIT_OK


def _ladder_points(source: Path) -> list[tuple[float, float]]:
    if source.is_dir():
        points = []
        for f in sorted(source.glob("*.csv")):
            traces = read_trace_csv(f)
            if "lo_power" not in traces.metadata:
                raise UsageError(f"{f}: trace has no 'lo_power' metadata")
            points.append((float(traces.metadata["lo_power"]), difference_variance(traces).value))
        return points
    return read_ladder_table(source)


def cmd_calibrate_snl(args) -> int:
    if not args.out:
        raise UsageError("calibrate-snl needs --out")
    points = _ladder_points(Path(args.ladder))
    cal = calibrate_snl(points)
    write_calibration(args.out, cal)
    _log(f"slope {cal.slope!r}, intercept {cal.intercept!r}, r^2 {cal.r_squared:.8f}, "
         f"{len(points)} points")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path ('-' for stdout)")
    run = argparse.ArgumentParser(add_help=False, parents=[common])
    run.add_argument("--config", required=True, help="JSON run config")
    run.add_argument("--seed", type=_u64, help="override the config seed")
    run.add_argument("--samples", type=_samples, help="override n_samples")

    p = argparse.ArgumentParser(
        prog="homodyne-cov",
        description="Balanced homodyne detection: subtraction versus covariance method.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, hlp in [
        ("simulate", cmd_simulate, "generate a two-channel trace CSV"),
        ("phase-scan", cmd_phase_scan, "covariance versus LO phase"),
        ("atten-sweep", cmd_atten_sweep, "squeezing versus transmission, both methods"),
        ("en-robustness", cmd_en_robustness, "estimates versus electronic-noise level"),
    ]:
        sp = sub.add_parser(name, parents=[run], help=hlp)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("analyze", parents=[common], help="estimate squeezing from a trace CSV")
    sp.add_argument("trace")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--snl", type=float, help="electronic-noise-free shot-noise variance")
    src.add_argument("--calibration", help="calibration file written by calibrate-snl")
    sp.add_argument("--lo-power", type=float, help="LO power for --calibration (else trace metadata)")
    sp.add_argument("--lo-variance", type=float, default=VACUUM_VARIANCE,
                    help="LO amplitude-quadrature variance (default: shot-noise limited)")
    sp.add_argument("--z-threshold", type=float, default=3.0)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("calibrate-snl", parents=[common],
                        help="fit the shot-noise level from an LO power ladder")
    sp.add_argument("ladder", help="'lo_power,variance' CSV or a directory of trace CSVs")
    sp.set_defaults(func=cmd_calibrate_snl)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, ValueError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _log(f"I/O error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

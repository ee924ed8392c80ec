"""Run-config loading and trace/calibration file formats."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .estimators import SnlCalibration
from .states import GaussianState, LocalOscillator, MeasurementSetting
from .traces import MAX_SEED, DetectorNoiseModel, SimulationConfig, TracePair


class ConfigError(ValueError):
    pass


class TraceFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


_NUM = {"type": "number"}
_NUM_LIST = {"type": "array", "items": _NUM, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": ["simulate", "phase_scan", "atten_sweep", "en_robustness"]},
        "state": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "vx": {"type": "number", "exclusiveMinimum": 0},
                "vy": {"type": "number", "exclusiveMinimum": 0},
                "cxy": _NUM,
            },
        },
        "lo": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "amplitude": {"type": "number", "minimum": 0},
                "v_x": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "setting": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "phase": _NUM,
                "transmission": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sigma1": {"type": "number", "minimum": 0},
                "sigma2": {"type": "number", "minimum": 0},
                "rho": {"type": "number", "minimum": -1, "maximum": 1},
            },
        },
        "n_samples": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0, "maximum": MAX_SEED},
        "ac_coupled": {"type": "boolean"},
        "phases": _NUM_LIST,
        "n_phases": {"type": "integer", "minimum": 1},
        "transmissions": _NUM_LIST,
        "snl_mode": {"enum": ["analytic", "calibrated"]},
        "ladder_factors": {**_NUM_LIST, "minItems": 3},
        "en_scales": _NUM_LIST,
        "en_rho": {"type": "number", "minimum": -1, "maximum": 1},
        "workers": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
    },
}


@dataclass
class RunConfig:
    simulation: SimulationConfig
    experiment: str | None = None
    phases: list[float] | None = None
    transmissions: list[float] | None = None
    snl_mode: str = "analytic"
    ladder_factors: list[float] | None = None
    en_scales: list[float] = field(default_factory=lambda: [0.0, 1.0, 10.0])
    en_rho: float = 0.0
    workers: int = 1
    out: str | None = None


def _path(err: jsonschema.ValidationError) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def parse_config(doc: dict) -> RunConfig:
    """Validate a decoded JSON config and build the run configuration."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(f"{_path(e)}: {e.message}" for e in errors))

    def build(name, cls, **defaults):
        try:
            return cls(**{**defaults, **doc.get(name, {})})
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None

    from .experiments import DEFAULT_STATE

    state = build("state", GaussianState, vx=DEFAULT_STATE.vx, vy=DEFAULT_STATE.vy)
    sim = SimulationConfig(
        state=state,
        lo=build("lo", LocalOscillator, amplitude=1.0),
        setting=build("setting", MeasurementSetting),
        noise=build("noise", DetectorNoiseModel),
        n_samples=doc.get("n_samples", 1_000_000),
        seed=doc.get("seed", 0),
        ac_coupled=doc.get("ac_coupled", True),
    )
    phases = doc.get("phases")
    if phases is None and "n_phases" in doc:
        n = doc["n_phases"]
        phases = [2 * math.pi * k / n for k in range(n)]
    rc = RunConfig(
        simulation=sim,
        experiment=doc.get("experiment"),
        phases=phases,
        transmissions=doc.get("transmissions"),
        snl_mode=doc.get("snl_mode", "analytic"),
        ladder_factors=doc.get("ladder_factors"),
        en_rho=doc.get("en_rho", 0.0),
        workers=doc.get("workers", 1),
        out=doc.get("out"),
    )
    if "en_scales" in doc:
        rc.en_scales = doc["en_scales"]
    return rc


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>: config must be a JSON object")
    return parse_config(doc)


# ---------------------------------------------------------------------------
# traces


def trace_metadata(config: SimulationConfig) -> dict[str, str]:
    state, lo = config.attenuated()
    return {
        "vx": repr(config.state.vx),
        "vy": repr(config.state.vy),
        "cxy": repr(config.state.cxy),
        "lo_amplitude": repr(config.lo.amplitude),
        "lo_v_x": repr(config.lo.v_x),
        "phase": repr(config.setting.phase),
        "transmission": repr(config.setting.transmission),
        "sigma1": repr(config.noise.sigma1),
        "sigma2": repr(config.noise.sigma2),
        "rho": repr(config.noise.rho),
        "n_samples": str(config.n_samples),
        "seed": str(config.seed),
        "ac_coupled": str(config.ac_coupled).lower(),
        # LO photon number at the detectors, used to scale a stored SNL calibration
        "lo_power": repr(lo.power),
        "lo_v_x_detected": repr(lo.v_x),
    }


def write_trace_csv(path, traces: TracePair, metadata: dict[str, str] | None = None) -> None:
    if metadata is None and isinstance(traces.metadata, SimulationConfig):
        metadata = trace_metadata(traces.metadata)
    lines = [f"# {k}={v}" for k, v in (metadata or {}).items()]
    lines.append("i1,i2")
    # repr gives the shortest string that round-trips to the same double
    lines.extend(f"{a!r},{b!r}" for a, b in zip(traces.ch1.tolist(), traces.ch2.tolist()))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path) -> TracePair:
    """Parse a two-column trace file; '#' lines before the header carry key=value metadata."""
    metadata: dict[str, str] = {}
    ch1: list[float] = []
    ch2: list[float] = []
    header_seen = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep:
                    metadata[key.strip()] = value.strip()
                continue
            if not header_seen:
                if [c.strip() for c in line.split(",")] != ["i1", "i2"]:
                    raise TraceFormatError(f"expected header 'i1,i2', got {line!r}", lineno)
                header_seen = True
                continue
            cells = line.split(",")
            if len(cells) != 2:
                raise TraceFormatError(f"expected 2 columns, got {len(cells)}", lineno)
            try:
                a, b = float(cells[0]), float(cells[1])
            except ValueError:
                raise TraceFormatError(f"non-numeric cell in {line!r}", lineno) from None
            if not (math.isfinite(a) and math.isfinite(b)):
                raise TraceFormatError(f"non-finite sample in {line!r}", lineno)
            ch1.append(a)
            ch2.append(b)
    if not header_seen:
        raise TraceFormatError("missing 'i1,i2' header")
    if len(ch1) < 2:
        raise TraceFormatError(f"need at least 2 samples, got {len(ch1)}")
    return TracePair(np.array(ch1), np.array(ch2), metadata=metadata)


# ---------------------------------------------------------------------------
# calibration files


def calibration_to_dict(cal: SnlCalibration) -> dict:
    return {
        "slope": cal.slope,
        "intercept": cal.intercept,
        "r_squared": cal.r_squared,
        "slope_stderr": cal.slope_stderr,
        "intercept_stderr": cal.intercept_stderr,
        "points": [list(p) for p in cal.fit_points],
    }


def write_calibration(path, cal: SnlCalibration) -> None:
    Path(path).write_text(json.dumps(calibration_to_dict(cal), indent=2) + "\n")


def read_calibration(path) -> SnlCalibration:
    try:
        d = json.loads(Path(path).read_text())
        return SnlCalibration(
            slope=float(d["slope"]),
            intercept=float(d["intercept"]),
            fit_points=tuple((float(p), float(v)) for p, v in d["points"]),
            r_squared=float(d["r_squared"]),
            slope_stderr=float(d.get("slope_stderr", 0.0)),
            intercept_stderr=float(d.get("intercept_stderr", 0.0)),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed calibration file {path}: {exc}") from None


def read_ladder_table(path) -> list[tuple[float, float]]:
    """Ladder file: header 'lo_power,variance' then one point per line."""
    points = []
    header_seen = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if [c.strip() for c in line.split(",")] != ["lo_power", "variance"]:
                    raise TraceFormatError(
                        f"expected header 'lo_power,variance', got {line!r}", lineno
                    )
                header_seen = True
                continue
            cells = line.split(",")
            try:
                p, v = (float(c) for c in cells)
            except ValueError:
                raise TraceFormatError(f"bad ladder row {line!r}", lineno) from None
            points.append((p, v))
    return points

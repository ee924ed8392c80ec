"""Electronic-noise-free squeezing estimation from two-detector photocurrent covariance."""
from .estimators import (
    CalibrationError,
    CoMoments,
    EstimateWithError,
    InsufficientDataError,
    OutOfRangeError,
    SnlCalibration,
    StateVerdict,
    Verdict,
    calibrate_snl,
    classify_state,
    covariance,
    covariance_two_pass,
    difference_variance,
    squeezing_from_covariance,
    squeezing_from_subtraction,
)
from .states import (
    VACUUM_VARIANCE,
    GaussianState,
    LocalOscillator,
    MeasurementSetting,
    apply_loss,
    ideal_squeezing_curve,
    lo_after_loss,
    predicted_covariance,
    predicted_difference_variance,
    rotated_variance,
    squeezing_db,
)
from .traces import (
    DetectorNoiseModel,
    SimulationConfig,
    TracePair,
    correlated_noise_pair,
    sample_trace_pair,
)

__version__ = "0.1.0"

//! Tunnel-junction resistance model, its calibration, and the domain-wall device built on it.

mod device;
mod fit;
mod model;

pub use device::{solve_thickness, DeviceRole, DwDevice};
pub use fit::{
    default_calibration, fit_calibration, generate_samples, read_samples_csv, write_samples_csv, FitOptions, MtjSample,
    BUNDLED_SAMPLES_CSV,
};
pub use model::{angular_resistance, BranchCoefficients, CalibrationDomain, MtjCalibration};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MtjError {
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("(t_mgo = {t_mgo:e} m, V = {v} V) is outside the calibrated domain {domain:?}")]
    OutsideDomain {
        t_mgo: f64,
        v: f64,
        domain: CalibrationDomain,
    },
    #[error("model gives a non-physical resistance at t_mgo = {t_mgo:e} m, V = {v} V")]
    NonPhysical { t_mgo: f64, v: f64 },
    #[error("angle {0} rad outside [0, pi]")]
    AngleOutOfRange(f64),
    #[error("sample set is rank deficient for this model order")]
    RankDeficient,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("invalid device: {0}")]
    InvalidDevice(String),
    #[error("wall position {x:e} m outside [0, {max:e}]")]
    PositionOutOfRange { x: f64, max: f64 },
    #[error("no oxide thickness in [{t_min:e}, {t_max:e}] m gives conductance {target:e} S")]
    ThicknessUnreachable { target: f64, t_min: f64, t_max: f64 },
    #[error("calibration table: {0}")]
    Io(String),
}

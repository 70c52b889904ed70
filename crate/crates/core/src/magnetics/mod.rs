//! Micromagnetics of a perpendicular free layer on a heavy-metal underlayer: effective
//! field with interfacial DMI, spin-Hall driven LLG dynamics and domain-wall tracking.

mod field;
mod grid;
mod llg;
mod material;
mod wall;

pub use field::{effective_field, effective_field_into, total_energy};
pub use grid::{MagGrid, StripGeometry};
pub use llg::{step_llg, Dynamics, LlgConfig, LlgSolver, StepStats};
pub use material::{MaterialParams, E_CHARGE, HBAR, MU0, MU_B};
pub use wall::{
    dw_position, fit_wall_width, init_neel_wall, run_dw, velocity_sweep, wall_core_angle, DwRun, DwRunOptions, DwTrace,
    SweepOptions,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MagneticsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("effective anisotropy Ku2 - mu0 Ms^2/2 = {keff} J/m^3 is not positive")]
    NoPerpendicularAnisotropy { keff: f64 },
    #[error("wall position {x} m outside free layer [0, {max}] m")]
    PositionOutOfRange { x: f64, max: f64 },
    #[error("current is not finite")]
    NonFiniteCurrent,
    #[error("step rejected: dt = {dt} s rotates a cell by {max_angle} rad (cap {cap} rad)")]
    StepTooLarge { dt: f64, max_angle: f64, cap: f64 },
    #[error("no domain wall found")]
    NoWall,
    #[error("{0} domain walls found, expected one")]
    MultipleWalls(usize),
    #[error("no steady-state window for J = {j} A/m^2")]
    SweepUnresolved { j: f64 },
}

//! Runtime monitors and post-hoc checks: interpolation-inequality audits,
//! cumulative estimate monitors, Steklov time averages, and weak-form
//! residuals.

mod monitors;
mod steklov;
mod testfns;
mod weakform;

pub use monitors::{
    estimate_monitors, interpolation_check, DiagnosticsError, MonitorParams, MonitorSeries,
};
pub use steklov::{
    steklov_average, steklov_convergence_distance, steklov_identity_check, FieldHistory,
    HatExtension,
};
pub use testfns::{momentum_dictionary, temperature_dictionary, SpaceTimeTestFn, TestFunctionDictionary};
pub use weakform::{
    weak_residual_momentum, weak_residual_momentum_frames, weak_residual_momentum_signed,
    weak_residual_temperature, weak_residual_temperature_frames, weak_residual_temperature_signed,
};

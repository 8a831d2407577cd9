//! Structured-grid simulation of a Kelvin-Voigt thermoviscoelastic system
//! with temperature-dependent viscosity, built so that the semidiscrete
//! energy identity holds as an exact per-step ledger, together with a
//! harness that audits the estimates and limit behaviour the model is
//! supposed to satisfy.

pub mod band;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod grid;
pub mod io;
pub mod model;
pub mod norms;
pub mod operators;
pub mod solver;
pub mod sweep;

// The guide's code blocks run as doctests, keeping book and library in
// sync: `cargo test --doc` fails if a chapter drifts from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/model.md")]
    pub struct Model;
    #[doc = include_str!("../../../book/src/operators.md")]
    pub struct Operators;
    #[doc = include_str!("../../../book/src/ledger.md")]
    pub struct Ledger;
    #[doc = include_str!("../../../book/src/monitors.md")]
    pub struct Monitors;
    #[doc = include_str!("../../../book/src/weakforms.md")]
    pub struct Weakforms;
    #[doc = include_str!("../../../book/src/sweeps.md")]
    pub struct Sweeps;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}

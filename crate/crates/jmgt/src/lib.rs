//! Pseudo-spectral laboratory for the Jordan–Moore–Gibson–Thompson
//! acoustic wave equation with an exponentially fading memory kernel.
//!
//! The equation evolved on periodic boxes, in first-order form, is
//!
//! ```text
//! psi_t = v
//! v_t   = w
//! tau w_t = -alpha w + c_g^2 Lap(psi) + b Lap(v) + Int g(s) Lap(eta(s)) ds + 2 k v w
//! eta_t = v - eta_s
//! ```
//!
//! with `eta(t, s) = psi(t) - psi(t - s)` the Dafermos history variable and
//! `g(s) = m c^2 exp(-s / tau_k)` the relaxation kernel. The crate provides
//!
//! * spectral grids, transforms and norms ([`grid`], [`field`]),
//! * the kernel, its admissibility checks and the discrete history ([`kernel`], [`history`]),
//! * time integrators for the coupled system ([`solver`], [`picard`]),
//! * the full energy/Lyapunov calculus along trajectories ([`energy`]),
//! * an exact radially-reduced Fourier-symbol solver for whole-space
//!   decay-rate experiments ([`symbol`]),
//! * experiment orchestration, config parsing and artifact emission
//!   ([`config`], [`experiments`], [`checkpoint`], [`report`]).

// numeric-kernel idioms used deliberately: `!(x > 0.0)` also rejects NaN,
// and indexed loops walk several same-shaped arrays in lockstep
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_is_multiple_of)]
#![allow(clippy::too_many_arguments)]

pub mod checkpoint;
pub mod config;
pub mod energy;
pub mod experiments;
pub mod expm;
pub mod field;
pub mod fft;
pub mod grid;
pub mod history;
pub mod kernel;
pub mod params;
pub mod picard;
pub mod report;
pub mod rng;
pub mod solver;
pub mod state;
pub mod symbol;

pub use field::SpectralField;
pub use grid::SpectralGrid;
pub use history::HistoryField;
pub use kernel::KernelSpec;
pub use params::PhysicalParams;
pub use state::StateVector;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum JmgtError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("invalid kernel: {0}")]
    Kernel(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("solution blew up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, JmgtError>;

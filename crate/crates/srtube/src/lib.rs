//! Half-tube volumes and Steiner-type expansion coefficients for surfaces in
//! three-dimensional contact sub-Riemannian geometries.
//!
//! The library models a contact structure through an orthonormal horizontal
//! frame `X1, X2` plus the Reeb field `X0`, evaluates surface invariants
//! (horizontal normal, mean curvature, third-order integrand) from second-order
//! jets of a defining function, flows the characteristic Hamiltonian system to
//! build the metric normal exponential map, and compares the directly computed
//! volume `mu({0 < delta <= eps})` of one-sided tubular neighbourhoods against
//! the quadrature values of the closed-form coefficients
//!
//! ```text
//! mu(U_eps) = a1*eps + a2*eps^2/2 + a3*eps^3/6 + o(eps^3).
//! ```
//!
//! Built-in geometries: the Heisenberg group, SU(2) and SL(2) with a family of
//! left-invariant structures, and user-supplied coordinate frames.

pub mod contact;
pub mod expr;
pub mod flow;
pub mod jet;
pub mod linalg;
pub mod quad;
pub mod scene;
pub mod steiner;
pub mod surface;
pub mod volume;

pub mod cli;

use thiserror::Error;

/// Library-wide error type. `exit_code` maps each variant onto the CLI
/// contract: 2 for configuration/validation problems, 3 for numerical
/// failures detected while computing.
#[derive(Error, Debug)]
pub enum Error {
    #[error("parse error at byte {span_start}..{span_end}: {msg}")]
    Parse {
        msg: String,
        span_start: usize,
        span_end: usize,
    },

    #[error("domain error: {msg}")]
    Domain { msg: String },

    #[error("configuration error: {msg}")]
    Config { msg: String },

    #[error("frame is degenerate at point {point:?}: |det| = {det:.3e}")]
    DegenerateFrame { point: [f64; 4], det: f64 },

    #[error("invalid contact structure at {point:?}: {msg}")]
    InvalidStructure { point: [f64; 4], msg: String },

    #[error(
        "characteristic point: |grad_H f| = {norm:.3e} < {tol:.3e} at {point:?}"
    )]
    CharacteristicPoint {
        point: [f64; 4],
        norm: f64,
        tol: f64,
    },

    #[error("point {point:?} is off the surface: |f| = {residual:.3e}")]
    NotOnSurface { point: [f64; 4], residual: f64 },

    #[error("unsupported measure: {msg}")]
    UnsupportedMeasure { msg: String },

    #[error("transverse field invalid: {msg}")]
    InvalidTransverse { msg: String },

    #[error(
        "tube jacobian lost positivity at t = {t:.6}, patch point ({u1:.6}, {u2:.6}): C = {value:.6e}"
    )]
    TubeValidity {
        t: f64,
        u1: f64,
        u2: f64,
        value: f64,
    },

    #[error(
        "hamiltonian drift {drift:.3e} exceeds budget {budget:.3e} over t = {t:.4}"
    )]
    DriftExceeded { drift: f64, budget: f64, t: f64 },

    #[error(
        "expansion fit is ill-conditioned: cond = {cond:.3e}; widen the eps grid to span more of a decade"
    )]
    IllConditioned { cond: f64 },

    #[error("unsupported: {msg}")]
    Unsupported { msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain { msg: msg.into() }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config { msg: msg.into() }
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported { msg: msg.into() }
    }

    /// CLI process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Config { .. } | Error::Json(_) => 2,
            Error::Io(_) => 2,
            _ => 3,
        }
    }

    /// Stable machine-readable tag used in the CLI's JSON error body.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Domain { .. } => "domain",
            Error::Config { .. } => "config",
            Error::DegenerateFrame { .. } => "degenerate_frame",
            Error::InvalidStructure { .. } => "invalid_structure",
            Error::CharacteristicPoint { .. } => "characteristic_point",
            Error::NotOnSurface { .. } => "not_on_surface",
            Error::UnsupportedMeasure { .. } => "unsupported_measure",
            Error::InvalidTransverse { .. } => "invalid_transverse",
            Error::TubeValidity { .. } => "tube_validity",
            Error::DriftExceeded { .. } => "drift_exceeded",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::Unsupported { .. } => "unsupported",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

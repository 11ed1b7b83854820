//! Volume-constrained multiphase MBO thresholding on weighted discrete geometries.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: discrete weighted spaces `(M, μ)` (periodic grids, circles,
//!   weighted graphs) and initial partitions.
//! - [`kernel`]: the heat semigroup `e^{-hL}` with interchangeable backends
//!   (FFT, dense spectral, Chebyshev action, Gaussian surrogate).
//! - [`mbo`]: the diffuse / solve multiplier / threshold step, the run loop and
//!   the variational interpolation between steps.
//! - [`diagnostics`]: thresholding energy, kernel metric, dissipation ledger and
//!   geometric observables.
//! - [`verify`]: numerical checks of the heat-kernel estimates and constants.
//!
//! Data-parallel inner loops go through [`par`], which falls back to sequential
//! iteration when the `parallel` feature is disabled or when
//! [`ExecMode::Sequential`] is requested.

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kernel;
pub mod mbo;
pub mod par;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{DensitySpec, DiscreteGeometry, GeometryKind, PhaseField, ShapeSpec};
pub use kernel::{Backend, HeatKernelOperator};
pub use mbo::{MultiplierVector, SchemeConfig, SchemeState, TieRule};
pub use par::ExecMode;

/// The half-moment constant `1/√π` relating the thresholding energy to perimeter.
pub const C0: f64 = 0.564_189_583_547_756_3;

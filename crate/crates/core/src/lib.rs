//! Numerical laboratory for `E_N(x, g) = exp(g |S_N(x)|^2)`, where `S_N` is a
//! normalised Steinhaus random Fourier series with `(2N+1)^d` modes on the
//! unit torus.
//!
//! The crate computes the ensemble average `<E_N(g)>` exactly (one-dimensional
//! quadrature) and asymptotically (Laplace method at the saddle of the rate
//! function), samples realizations of the field on grids, and measures the
//! spatial statistics that separate the ergodic regime `g < 1` from the
//! intermittent regime `g > 1`.

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod field;
pub mod moments;
pub mod oracles;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use field::{ModelParams, PhaseRealization};
pub use moments::{MomentReport, Regime, SaddleData};

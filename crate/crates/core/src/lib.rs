//! Bayesian inverse uncertainty quantification for time-dependent simulation
//! responses.
//!
//! The crate wires together the full calibration loop against a built-in
//! synthetic transient simulator:
//!
//! 1. [`sim`] — generate designs and PCT-like transient curves,
//! 2. [`align`] — square-root-slope functional alignment (phase/amplitude
//!    separation),
//! 3. [`pca`] — conventional PCA and the functional-PCA composite,
//! 4. [`surrogate`] — GP / DNN / BNN maps from calibration factors to PC
//!    scores with predictive uncertainty,
//! 5. [`bayes`] — Gaussian likelihood in PC space and adaptive Metropolis
//!    sampling,
//! 6. [`fuq`] — forward propagation into predictive bands plus coverage
//!    and reconstruction metrics.
//!
//! [`pipeline`] exposes the staged orchestration used by the `iuq` binary;
//! [`io`] holds the on-disk CSV/JSON formats shared between stages.

pub mod align;
pub mod bayes;
pub mod error;
pub mod fuq;
pub mod io;
pub mod pca;
pub mod pipeline;
pub mod sim;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};
pub use sim::{CalibrationVector, ExperimentalCurve, TimeGrid, TransientCurve};

//! Frequency-domain identification of continuous-time MIMO systems from
//! multisine experiments.
//!
//! The crate covers the full chain from excitation design to uncertainty
//! quantification:
//!
//! - [`multisine`]: excitation designs, the fixed spectral-line ordering,
//!   and the admissibility checks (input rank, no line overlap after
//!   sampling, no spectral leakage);
//! - [`models`]: matrix-fraction, first-order, and modal model structures
//!   with stacked FRF evaluation and analytic Jacobians;
//! - [`sim`]: exact steady-state simulation with Gaussian measurement noise;
//! - [`frf`]: the least-squares estimator of the multisine-equivalent FIR
//!   model, its FRF interpolation, exact covariance, and the DTFT-ratio
//!   route for leakage-free records;
//! - [`fit`]: weighted frequency-domain, explicit trace, and time-domain
//!   prediction-error costs (equal up to a data constant), closed-form
//!   rational interpolation fits, damped Gauss-Newton for overconstrained
//!   structures, and a Levy-style linear baseline;
//! - [`bounds`]: finite-sample concentration radii for FRF and parameter
//!   errors.
//!
//! Estimation handles sub-Nyquist sampling: excited lines may alias, and as
//! long as no two lines fold onto each other the estimates at the excited
//! frequencies remain exact in expectation.
//!
//! All types are immutable after construction and all operations are pure,
//! so values can be shared freely across threads. Randomness (simulation,
//! random designs, multistart) flows through ChaCha12 streams keyed by
//! explicit seeds.

pub mod bounds;
pub mod error;
pub mod files;
pub mod fit;
pub mod frf;
pub mod linalg;
pub mod models;
pub mod multisine;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};

//! Fluctuation-induced radiative and mechanical observables for planar
//! layered media, including media with optical gain.
//!
//! The pipeline runs from a channel-resolved permittivity model
//! ([`material`]) through the dyadic Green tensor of a planar stack
//! ([`layered`]) to noise-current and field correlators ([`fluctuation`]),
//! which are then contracted into decay rates, level shifts and forces
//! ([`observables`]). Quadrature and the complex-frequency stability scanner
//! live in [`numerics`]; the declarative scenario runner in [`scenario`].
//!
//! All quantities are SI.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected; the
// Kronrod tables are quoted at the precision they were published with.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod constants;
pub mod error;
pub mod fluctuation;
pub mod layered;
pub mod material;
pub mod numerics;
pub mod observables;
pub mod scenario;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Complex 3×3 tensor used for Green tensors and correlators.
pub type Tensor3 = nalgebra::Matrix3<Complex64>;

//! Quadrature and complex-analysis machinery.
//!
//! * [`quadrature`]: adaptive Gauss–Kronrod integration over finite and
//!   semi-infinite ranges, oscillatory tails, and fixed-panel rules.
//! * [`pv`]: principal values by symmetric subtraction around the pole.
//! * [`stability`]: argument-principle winding numbers, zero polishing, and
//!   the modal stability scanner with threshold bisection.

pub mod pv;
pub mod quadrature;
pub mod stability;

pub use pv::{principal_value, principal_value_breaks};
pub use quadrature::{
    adaptive_integrate, integrate, integrate_breaks, integrate_oscillatory, integrate_semi_infinite, Domain, Estimate,
    Integrand, QuadratureSpec, TailMap,
};
pub use stability::{
    bisect_threshold, stability_scan, winding_number, Contour, KGrid, ModalSystem, StabilityReport, SuspectZero,
};

/// Pairwise (tree) summation. Used wherever partial results are reduced so
/// that the result depends only on the order of the inputs.
pub fn pairwise_sum<V: Integrand>(items: &[V]) -> V {
    match items.len() {
        0 => V::zero(),
        1 => items[0].clone(),
        n => {
            let (l, r) = items.split_at(n / 2);
            pairwise_sum(l).add(&pairwise_sum(r))
        }
    }
}

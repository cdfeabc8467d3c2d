//! Noise-current and field correlators, passive and active.
//!
//! Every channel with `Im ε_ℓ > 0` feeds antinormally ordered noise, every
//! channel with `Im ε_ℓ < 0` feeds normally ordered noise with weight
//! `|Im ε_ℓ|`. Correlators are densities per unit volume and per unit
//! angular frequency, evaluated in the vacuum state. Distinct channels are
//! treated as independent reservoirs (no cross-correlators).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{C, EPS0, HBAR, MU0};
use crate::error::{Error, Result};
use crate::layered::{imag_green, volume_terms, LayerStack, VolumeTerms};
use crate::material::MaterialResponse;
use crate::numerics::QuadratureSpec;
use crate::Tensor3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    /// `⟨j⁺j⁻⟩`, `⟨E⁺E⁻⟩`: nonzero only with gain.
    Normal,
    /// `⟨j⁻j⁺⟩`, `⟨E⁻E⁺⟩`.
    Antinormal,
    /// Mean of the two.
    Symmetrized,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelatorSample {
    pub ordering: Ordering,
    /// (A/m²)²·s for currents, (V/m)²·s for fields.
    pub value: Tensor3,
    /// Observation points; `None` for the local current density.
    pub points: Option<([f64; 3], [f64; 3])>,
    pub omega: f64,
    /// Absolute quadrature error estimate (Frobenius norm).
    pub error: f64,
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Coefficient of `I δ(r - r')` in the noise-current correlator of `m`.
pub fn noise_current_correlator(m: &MaterialResponse, omega: f64, ordering: Ordering) -> Result<CorrelatorSample> {
    if !(omega > 0.0) {
        return Err(Error::InvalidInput(format!("ω must be positive, got {omega}")));
    }
    let (loss, gain) = m.split_loss_gain(omega)?;
    let pref = HBAR / (PI * MU0) * omega * omega / (C * C);
    let coef = match ordering {
        Ordering::Antinormal => pref * loss,
        Ordering::Normal => pref * gain.abs(),
        Ordering::Symmetrized => 0.5 * pref * (loss + gain.abs()),
    };
    Ok(CorrelatorSample {
        ordering,
        value: Tensor3::identity() * c(coef),
        points: None,
        omega,
        error: 0.0,
    })
}

fn assemble(v: &VolumeTerms, ordering: Ordering) -> Tensor3 {
    let pref = c(HBAR / (PI * EPS0));
    let anti = (v.loss + v.escape) * pref;
    let normal = v.gain.map(|z| z.conj()) * pref;
    match ordering {
        Ordering::Antinormal => anti,
        Ordering::Normal => normal,
        Ordering::Symmetrized => (anti + normal) * c(0.5),
    }
}

/// Field correlator at two points above the stack. Passive stacks use
/// `(ħ/πε₀) Im Ḡ`; stacks with gain use the volume representation with
/// loss and gain channels routed to their orderings.
pub fn field_correlator(
    stack: &LayerStack,
    r: [f64; 3],
    rp: [f64; 3],
    omega: f64,
    ordering: Ordering,
    spec: &QuadratureSpec,
) -> Result<CorrelatorSample> {
    if stack.is_passive() {
        let pref = HBAR / (PI * EPS0);
        let est = imag_green(stack, r, rp, omega, spec)?;
        let anti = est.value * c(pref);
        let value = match ordering {
            Ordering::Antinormal => anti,
            Ordering::Normal => Tensor3::zeros(),
            Ordering::Symmetrized => anti * c(0.5),
        };
        return Ok(CorrelatorSample {
            ordering,
            value,
            points: Some((r, rp)),
            omega,
            error: est.error * pref,
        });
    }
    field_correlator_volume(stack, r, rp, omega, ordering, spec)
}

/// Field correlator through the volume representation, for any stack.
pub fn field_correlator_volume(
    stack: &LayerStack,
    r: [f64; 3],
    rp: [f64; 3],
    omega: f64,
    ordering: Ordering,
    spec: &QuadratureSpec,
) -> Result<CorrelatorSample> {
    let v = volume_terms(stack, r, rp, omega, spec)?;
    Ok(CorrelatorSample {
        ordering,
        value: assemble(&v, ordering),
        points: Some((r, rp)),
        omega,
        error: v.error * HBAR / (PI * EPS0),
    })
}

/// Commutator kernel: antinormal minus normal channel weights,
/// `∫Ḡ ε″_> Ḡ† - ∫Ḡ |ε″_<| Ḡ†` plus radiation escaping the stack. Equals
/// `Im Ḡ(r, r', ω)` whenever the Green tensor exists.
pub fn commutator_kernel(
    stack: &LayerStack,
    r: [f64; 3],
    rp: [f64; 3],
    omega: f64,
    spec: &QuadratureSpec,
) -> Result<Tensor3> {
    Ok(volume_terms(stack, r, rp, omega, spec)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layered::free_space_imag_green;
    use crate::material::PermittivityChannel;

    const W0: f64 = 2.0e15;
    const G: f64 = 1.0e14;

    fn wp_for(im: f64) -> f64 {
        (im.abs() * G * W0).sqrt()
    }

    fn mixed(loss: f64, gain: f64) -> MaterialResponse {
        let mut ch = vec![PermittivityChannel::lorentz(1.0, W0, G, wp_for(loss))];
        if gain != 0.0 {
            ch.push(PermittivityChannel::lorentz(-1.0, W0, G, wp_for(gain)));
        }
        MaterialResponse::new(2.0, ch)
    }

    #[test]
    fn passive_medium_has_no_normal_noise() {
        let m = mixed(0.2, 0.0);
        let n = noise_current_correlator(&m, W0, Ordering::Normal).unwrap();
        assert_eq!(n.value, Tensor3::zeros());
        let a = noise_current_correlator(&m, W0, Ordering::Antinormal).unwrap();
        assert!(a.value[(0, 0)].re > 0.0);
    }

    #[test]
    fn mixed_channels_prefactor() {
        let m = mixed(0.2, 0.05);
        let a = noise_current_correlator(&m, W0, Ordering::Antinormal).unwrap().value[(0, 0)].re;
        let n = noise_current_correlator(&m, W0, Ordering::Normal).unwrap().value[(0, 0)].re;
        // ħ/(π μ₀) (ω/c)² evaluated from the CODATA values independently
        let hbar = 6.626_070_15e-34 / (2.0 * PI);
        let mu0 = 1.256_637_062_12e-6;
        let c0 = 299_792_458.0;
        let pref = hbar / (PI * mu0) * (W0 / c0).powi(2);
        // HBAR is stored to 10 significant digits
        assert!((a / (0.2 * pref) - 1.0).abs() < 1e-9);
        assert!((n / (0.05 * pref) - 1.0).abs() < 1e-9);
        let pure_gain = MaterialResponse::new(1.0, vec![PermittivityChannel::lorentz(-1.0, W0, G, wp_for(0.05))]);
        assert_eq!(
            noise_current_correlator(&pure_gain, W0, Ordering::Antinormal)
                .unwrap()
                .value,
            Tensor3::zeros()
        );
    }

    #[test]
    fn vacuum_field_correlator() {
        let s = LayerStack::vacuum();
        let spec = QuadratureSpec::default();
        let r = [0.0, 0.0, 10e-9];
        let f = field_correlator(&s, r, r, W0, Ordering::Antinormal, &spec).unwrap();
        let expected = HBAR / (PI * EPS0) * W0.powi(3) / (6.0 * PI * C.powi(3));
        assert!(((f.value - Tensor3::identity() * c(expected)).norm() / expected) < 1e-6);
        let fv = field_correlator_volume(&s, r, r, W0, Ordering::Antinormal, &spec).unwrap();
        assert!(((fv.value - f.value).norm() / f.value.norm()) < 1e-4);
        let _ = free_space_imag_green(r, r, W0);
    }

    #[test]
    fn routes_agree_for_passive_half_space() {
        let s = LayerStack::interface(mixed(0.2, 0.0)).unwrap();
        let spec = QuadratureSpec::with_rel_tol(1e-6);
        let r = [0.0, 0.0, 30e-9];
        let a = field_correlator(&s, r, r, W0, Ordering::Antinormal, &spec)
            .unwrap()
            .value;
        let b = field_correlator_volume(&s, r, r, W0, Ordering::Antinormal, &spec)
            .unwrap()
            .value;
        assert!((a - b).norm() / a.norm() < 1e-3);
    }

    fn slab(loss: f64, gain: f64) -> LayerStack {
        LayerStack::new(
            MaterialResponse::vacuum(),
            vec![(mixed(loss, gain), 20e-9)],
            MaterialResponse::vacuum(),
        )
        .unwrap()
    }

    #[test]
    fn gain_slab_normal_ordering_positive_outside() {
        let s = slab(0.2, 0.05);
        let spec = QuadratureSpec::with_rel_tol(1e-6);
        let r = [0.0, 0.0, 15e-9];
        let n = field_correlator(&s, r, r, W0, Ordering::Normal, &spec).unwrap().value;
        let herm = (n + n.adjoint()) * c(0.5);
        let ev = herm.map(|z| z.re).symmetric_eigenvalues();
        assert!(ev.iter().all(|&e| e >= -1e-12 * n.norm()));
        assert!(n.trace().re > 0.0);
    }

    #[test]
    fn commutator_is_split_invariant() {
        let spec = QuadratureSpec::with_rel_tol(1e-7);
        let r = [0.0, 0.0, 15e-9];
        let a = commutator_kernel(&slab(0.2, 0.0), r, r, W0, &spec).unwrap();
        let b = commutator_kernel(&slab(0.25, 0.05), r, r, W0, &spec).unwrap();
        assert!((a - b).norm() / a.norm() < 1e-6, "{}", (a - b).norm() / a.norm());
    }

    #[test]
    fn normal_correlator_linear_in_gain() {
        let spec = QuadratureSpec::with_rel_tol(1e-8);
        let r = [0.0, 0.0, 15e-9];
        let n = |g: f64| {
            field_correlator(&slab(0.2 + g, g), r, r, W0, Ordering::Normal, &spec)
                .unwrap()
                .value
                .trace()
                .re
        };
        let (a, b) = (n(1e-3), n(2e-3));
        assert!((b / a - 2.0).abs() < 1e-3, "{}", b / a);
    }
}

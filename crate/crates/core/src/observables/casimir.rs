//! Casimir pressure between two planar stacks.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{C, HBAR};
use crate::error::{Error, Result};
use crate::layered::{Fresnel, LayerStack};
use crate::numerics::{integrate_semi_infinite, Estimate};

use super::{ObservableOptions, ObservableResult, Trap};

/// Two stacks facing each other across a gap. Each stack is described
/// from the gap side: layer 0 is the gap medium, which must be the same
/// lossless dielectric for both.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StackPair {
    pub lower: LayerStack,
    pub upper: LayerStack,
}

impl StackPair {
    pub fn new(lower: LayerStack, upper: LayerStack) -> Self {
        Self { lower, upper }
    }

    pub fn validate(&self) -> Result<()> {
        self.lower.validate()?;
        self.upper.validate()?;
        let (a, b) = (self.lower.top(), self.upper.top());
        if !a.channels.is_empty() || !b.channels.is_empty() || a.background != b.background {
            return Err(Error::InvalidInput(
                "both stacks must start with the same dispersionless gap medium".into(),
            ));
        }
        for s in [&self.lower, &self.upper] {
            if !s.is_passive()
                || s.layers
                    .iter()
                    .any(|l| l.material.is_moving() || l.material.is_biased())
            {
                return Err(Error::InvalidInput(
                    "Casimir pressure needs passive stacks at rest (ground-state fluctuations)".into(),
                ));
            }
        }
        Ok(())
    }

    fn gap_index(&self) -> f64 {
        self.lower.top().background.sqrt()
    }

    /// `Σ_pol q k_z X / (1 - X)` with `X = r₁r₂e^{2ik_z d}`.
    fn kernel(&self, q: f64, omega: Complex64, d: f64) -> Result<Complex64> {
        let a = Fresnel::compute(&self.lower, [q, 0.0], omega)?;
        let b = Fresnel::compute(&self.upper, [q, 0.0], omega)?;
        let kz = a.kz[0];
        let e = (2.0 * Complex64::i() * kz * d).exp();
        let mut s = Complex64::new(0.0, 0.0);
        for (r1, r2) in [(a.r_s, b.r_s), (a.r_p, b.r_p)] {
            let x = r1 * r2 * e;
            s += x / (1.0 - x);
        }
        Ok(s * kz * q)
    }
}

/// `-π²ħc/(240 d⁴)`, the pressure between perfect mirrors in vacuum.
pub fn ideal_mirror_pressure(d: f64) -> f64 {
    -PI * PI * HBAR * C / (240.0 * d.powi(4))
}

fn check(pair: &StackPair, d: f64, opts: &ObservableOptions) -> Result<()> {
    opts.validate()?;
    pair.validate()?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidInput(format!("gap must be positive, got {d}")));
    }
    Ok(())
}

fn finish(est: Estimate<f64>, scale: f64, extra: (&str, f64)) -> ObservableResult {
    let mut out = ObservableResult::new(vec![scale * est.value], "Pa");
    out.abs_error = scale.abs() * est.error;
    out.subdivisions = est.subdivisions;
    out.evaluations = est.evaluations;
    out.extras.insert(extra.0.into(), extra.1);
    out
}

/// Normal pressure on the stacks (Pa); negative is attractive. Lifshitz
/// formula on the imaginary frequency axis:
/// `P = -(ħ/2π²) ∫_0^∞ dξ ∫_0^∞ dq q κ Σ_pol X/(1 - X)`,
/// `X = r₁r₂e^{-2κd}`, `κ = √(q² + ε_gap ξ²/c²)`.
pub fn casimir_pressure(pair: &StackPair, d: f64, opts: &ObservableOptions) -> Result<ObservableResult> {
    check(pair, d, opts)?;
    let n = pair.gap_index();
    let inner = opts.spec_2d.inner();
    let trap = Trap::new();
    let mut evals = 0usize;
    let outer = integrate_semi_infinite(
        |xi: f64| -> f64 {
            if trap.tripped() {
                return 0.0;
            }
            let w = Complex64::new(0.0, xi);
            // k_z = iκ on the imaginary axis
            let est = integrate_semi_infinite(
                |q: f64| (trap.take(pair.kernel(q, w, d)) * Complex64::new(0.0, -1.0)).re,
                0.0,
                0.5 / d,
                &[],
                &inner,
            )
            .and_then(|e| e.into_result("Casimir wavevector integral"));
            trap.take(est.map(|e| {
                evals += e.evaluations;
                e.value
            }))
        },
        0.0,
        C / (2.0 * n * d),
        &[],
        &opts.spec_2d,
    )?;
    trap.finish()?;
    let mut est = outer.into_result("Casimir frequency integral")?;
    est.evaluations += evals;
    Ok(finish(est, -HBAR / (2.0 * PI * PI), ("gap", d)))
}

/// Same pressure from real-frequency stress integration,
/// `P = (ħ/2π²) Re ∫ dω ∫_0^∞ dq q k_z Σ_pol X/(1 - X)` with
/// `X = r₁r₂e^{2ik_z d}`. The frequency path is the ray `ω = t e^{iθ}` with
/// the small angle `θ = tilt`: on the real axis itself, lossless cavities
/// put poles on the path and the integral converges only in the Abel sense.
pub fn casimir_pressure_real_frequency(pair: &StackPair, d: f64, opts: &ObservableOptions) -> Result<ObservableResult> {
    check(pair, d, opts)?;
    let n = pair.gap_index();
    let inner = opts.spec_2d.inner();
    let rot = Complex64::from_polar(1.0, opts.tilt);
    let trap = Trap::new();
    let mut evals = 0usize;
    let outer = integrate_semi_infinite(
        |t: f64| -> Complex64 {
            if trap.tripped() {
                return Complex64::new(0.0, 0.0);
            }
            let w = rot * t;
            let kl = n * t / C;
            let est = integrate_semi_infinite(
                |q: f64| trap.take(pair.kernel(q, w, d)),
                0.0,
                (0.5 / d).max(kl),
                &[kl],
                &inner,
            )
            .and_then(|e| e.into_result("real-frequency wavevector integral"));
            trap.take(est.map(|e| {
                evals += e.evaluations;
                e.value * rot
            }))
        },
        0.0,
        C / (2.0 * n * d * opts.tilt.sin()),
        &[],
        &opts.spec_2d,
    )?;
    trap.finish()?;
    let est = outer.into_result("real-frequency integral")?;
    let imag = est.value.im;
    let mut est = est.map(|z| z.re);
    est.evaluations += evals;
    let mut out = finish(est, HBAR / (2.0 * PI * PI), ("gap", d));
    out.extras.insert("tilt".into(), opts.tilt);
    out.extras
        .insert("imaginary_residue".into(), HBAR / (2.0 * PI * PI) * imag);
    Ok(out)
}

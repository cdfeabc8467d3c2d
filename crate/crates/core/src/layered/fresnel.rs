use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{in_plane, kz, LayerStack};
use crate::error::{Error, Result};
use crate::numerics::ModalSystem;

/// Relative size of the k_z neighbourhood treated as a branch point.
const BRANCH_GUARD: f64 = 1e-9;

/// Plane-wave response of a stack for one (ω, k∥): reflection seen from the
/// upper half-space plus the amplitudes needed to rebuild the field in any
/// layer. Index 0 is TE (s), 1 is TM (p). TM amplitudes refer to the
/// tangential magnetic field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fresnel {
    pub omega: Complex64,
    /// In-plane wavevector actually used (after a branch-point nudge).
    pub k: [f64; 2],
    pub eps: Vec<Complex64>,
    pub kz: Vec<Complex64>,
    pub r_s: Complex64,
    pub r_p: Complex64,
    pub t_s: Complex64,
    pub t_p: Complex64,
    /// Size of the k∥ nudge applied near a branch point, rad/m.
    pub nudge: Option<f64>,
    /// Downward amplitude at the top of each layer (layer 0: at `z = 0`).
    pub(crate) down: [Vec<Complex64>; 2],
    /// Reflection at the bottom of each layer, referenced at that interface.
    pub(crate) refl: [Vec<Complex64>; 2],
    pub(crate) thickness: Vec<f64>,
}

fn interface_r(eta_a: Complex64, eta_b: Complex64) -> Result<Complex64> {
    let den = eta_a + eta_b;
    if den.norm() == 0.0 {
        return Err(Error::Singular("interface impedances cancel".into()));
    }
    Ok((eta_a - eta_b) / den)
}

impl Fresnel {
    pub fn compute(stack: &LayerStack, k: [f64; 2], omega: Complex64) -> Result<Self> {
        if omega.norm() == 0.0 {
            return Err(Error::InvalidInput("frequency must be nonzero".into()));
        }
        let (dir, q0) = in_plane(k);
        let eps = stack.permittivities(omega, k)?;
        let k0 = omega.norm() / crate::constants::C;
        let mut q = q0;
        let mut nudge = None;
        let mut kzs: Vec<Complex64> = eps.iter().map(|&e| kz(e, omega, q)).collect();
        if kzs.iter().any(|v| v.norm() < BRANCH_GUARD * k0) {
            let dq = 1e-7 * k0;
            q += dq;
            nudge = Some(dq);
            kzs = eps.iter().map(|&e| kz(e, omega, q)).collect();
        }
        let kvec = [dir[0] * q, dir[1] * q];
        let n = stack.len();
        let thickness: Vec<f64> = stack.layers.iter().map(|l| l.thickness).collect();
        let one = Complex64::new(1.0, 0.0);
        let mut down = [vec![one; n], vec![one; n]];
        let mut refl = [vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n]];
        for pol in 0..2 {
            let eta: Vec<Complex64> = (0..n)
                .map(|j| if pol == 0 { kzs[j] } else { kzs[j] / eps[j] })
                .collect();
            let rr: Vec<Complex64> = (0..n - 1)
                .map(|j| interface_r(eta[j], eta[j + 1]))
                .collect::<Result<_>>()?;
            // reflection seen at the top of layer j, referenced there
            let top_refl = |j: usize, refl: &[Complex64]| -> Complex64 {
                if j == n - 1 {
                    Complex64::new(0.0, 0.0)
                } else {
                    (2.0 * Complex64::i() * kzs[j] * thickness[j]).exp() * refl[j]
                }
            };
            for j in (0..n - 1).rev() {
                let g = top_refl(j + 1, &refl[pol]);
                let den = one + rr[j] * g;
                if den.norm() == 0.0 {
                    return Err(Error::Singular(format!(
                        "multiple-reflection denominator vanishes in layer {j}"
                    )));
                }
                refl[pol][j] = (rr[j] + g) / den;
            }
            for j in 0..n - 1 {
                let d = if j == 0 {
                    one
                } else {
                    down[pol][j] * (Complex64::i() * kzs[j] * thickness[j]).exp()
                };
                let g = top_refl(j + 1, &refl[pol]);
                down[pol][j + 1] = d * (one + rr[j]) / (one + rr[j] * g);
            }
        }
        let last = n - 1;
        Ok(Self {
            omega,
            k: kvec,
            r_s: refl[0][0],
            r_p: refl[1][0],
            t_s: down[0][last],
            t_p: down[1][last],
            eps,
            kz: kzs,
            nudge,
            down,
            refl,
            thickness,
        })
    }

    pub fn q(&self) -> f64 {
        self.k[0].hypot(self.k[1])
    }

    /// Ratio of transmitted to incident normal energy flux per unit `|t|²`.
    pub fn flux_factors(&self) -> [f64; 2] {
        let (n, t) = (self.kz.len() - 1, 0);
        let s = self.kz[n].re / self.kz[t].re;
        let p = (self.kz[n] / self.eps[n]).re / (self.kz[t] / self.eps[t]).re;
        [s, p]
    }

    /// `|r|² + flux·|t|²` per polarization; equals 1 for lossless stacks in
    /// the propagating regime.
    pub fn energy_balance(&self) -> [f64; 2] {
        let f = self.flux_factors();
        [
            self.r_s.norm_sqr() + f[0] * self.t_s.norm_sqr(),
            self.r_p.norm_sqr() + f[1] * self.t_p.norm_sqr(),
        ]
    }

    /// Downward and upward amplitudes in layer `j ≥ 1` for polarization
    /// `pol`. The field at depth ζ below the layer top is
    /// `down·e^{ik_z ζ} + up·e^{ik_z (t - ζ)}` (up = 0 in the lower
    /// half-space), per unit downward amplitude at the top interface.
    pub(crate) fn layer_amplitudes(&self, pol: usize, j: usize) -> (Complex64, Complex64) {
        let a = self.down[pol][j];
        if j == self.kz.len() - 1 {
            return (a, Complex64::new(0.0, 0.0));
        }
        let t = self.thickness[j];
        (a, a * (Complex64::i() * self.kz[j] * t).exp() * self.refl[pol][j])
    }
}

/// Single-frequency reflection and transmission coefficients of the stack
/// for a plane wave incident from the upper half-space.
pub fn fresnel_coefficients(stack: &LayerStack, k: [f64; 2], omega: f64) -> Result<Fresnel> {
    if !(omega > 0.0) {
        return Err(Error::InvalidInput(format!("ω must be positive, got {omega}")));
    }
    Fresnel::compute(stack, k, Complex64::new(omega, 0.0))
}

/// `(cos(k_z t), sin(k_z t)/k_z, k_z sin(k_z t))`, all scaled by
/// `e^{-|Im k_z t|}`.
fn slab_terms(kz: Complex64, t: f64) -> (Complex64, Complex64, Complex64) {
    let x = kz * t;
    let shift = x.im.abs();
    let ep = (Complex64::i() * x - shift).exp();
    let em = (-Complex64::i() * x - shift).exp();
    let cos = 0.5 * (ep + em);
    let sin = (ep - em) / (2.0 * Complex64::i());
    let sinc = if x.norm() < 1e-4 {
        let x2 = x * x;
        (-shift).exp() * t * (1.0 - x2 / 6.0 + x2 * x2 / 120.0)
    } else {
        sin / kz
    };
    (cos, sinc, kz * sin)
}

/// Modal (guided and surface) denominators of a stack. Zeros in the upper
/// half ω plane are growing modes.
#[derive(Debug, Clone)]
pub struct StackModes {
    pub stack: LayerStack,
}

impl StackModes {
    /// Characteristic function of polarization `pol` built from the layer
    /// transfer matrices; entire in the slab wavevectors, so only the two
    /// half-spaces carry branch cuts.
    pub fn characteristic(&self, omega: Complex64, k: [f64; 2], pol: usize) -> Result<Complex64> {
        let (_, q) = in_plane(k);
        let eps = self.stack.permittivities(omega, k)?;
        let n = eps.len();
        let kzs: Vec<Complex64> = eps.iter().map(|&e| kz(e, omega, q)).collect();
        let w = |j: usize| if pol == 0 { Complex64::new(1.0, 0.0) } else { eps[j] };
        let i = Complex64::i();
        let mut psi = Complex64::new(1.0, 0.0);
        let mut phi = -i * kzs[n - 1] / w(n - 1);
        for j in (1..n - 1).rev() {
            let (c, sinc, ksin) = slab_terms(kzs[j], self.stack.layers[j].thickness);
            let wj = w(j);
            let p2 = c * psi + wj * sinc * phi;
            let f2 = -ksin / wj * psi + c * phi;
            let s = p2.norm().max(f2.norm());
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Singular("transfer matrix degenerate".into()));
            }
            psi = p2 / s;
            phi = f2 / s;
        }
        Ok(phi - i * kzs[0] / w(0) * psi)
    }
}

impl ModalSystem for StackModes {
    fn denominator(&self, omega: Complex64, k: [f64; 2]) -> Complex64 {
        match (self.characteristic(omega, k, 0), self.characteristic(omega, k, 1)) {
            (Ok(a), Ok(b)) => a * b,
            _ => Complex64::new(f64::NAN, f64::NAN),
        }
    }

    fn hint_frequencies(&self, _k: [f64; 2]) -> Vec<f64> {
        let mut v = self.stack.surface_modes();
        v.extend(self.stack.frequency_scales());
        v
    }
}

//! Volume-integral route to `Im Ḡ`: `Σ_layers ∫d³s Ḡ(r,s) ε″(s) Ḡ†(r',s)`
//! plus the flux escaping through lossless half-spaces. The lateral
//! integral is done exactly in the plane-wave basis, the depth integral in
//! closed form for every pair of exponential terms, and the remaining k∥
//! integral numerically.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fresnel::Fresnel;
use super::green::{imag_green, integrate_q, q_breaks, transmitted_terms, Basis};
use super::LayerStack;
use crate::constants::C;
use crate::error::{Error, Result};
use crate::numerics::{Integrand, QuadratureSpec};
use crate::Tensor3;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Pieces of the volume representation, all in units of `Ḡ`:
/// `Im Ḡ(r, r') = loss - gain + escape`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeTerms {
    /// `∫ Ḡ ε″_> Ḡ†` over absorbing channels.
    pub loss: Tensor3,
    /// `∫ Ḡ |ε″_<| Ḡ†` over amplifying channels.
    pub gain: Tensor3,
    /// Radiation leaving through lossless half-spaces.
    pub escape: Tensor3,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl VolumeTerms {
    pub fn total(&self) -> Tensor3 {
        self.loss - self.gain + self.escape
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: Tensor3,
    pub rhs: Tensor3,
    pub residual: f64,
    pub volume: VolumeTerms,
}

/// `(e^x - 1)/x`.
fn phi1(x: Complex64) -> Complex64 {
    if x.norm() < 1e-5 {
        1.0 + x / 2.0 + x * x / 6.0
    } else {
        x.exp_m1() / x
    }
}

trait ExpM1 {
    fn exp_m1(self) -> Self;
}

impl ExpM1 for Complex64 {
    fn exp_m1(self) -> Self {
        // e^{a+ib} - 1 = (e^a - 1) cos b + (cos b - 1) + i e^a sin b
        let (s, co) = self.im.sin_cos();
        let ea1 = self.re.exp_m1();
        let cm1 = -2.0 * (0.5 * self.im).sin().powi(2);
        Complex64::new(ea1 * co + cm1, (ea1 + 1.0) * s)
    }
}

/// `∫_a^b exp(α h + β) dh`; `b = ∞` needs `Re α < 0`.
fn exp_integral(alpha: Complex64, beta: Complex64, a: f64, b: f64) -> Complex64 {
    let ea = (alpha * a + beta).exp();
    if b == f64::INFINITY {
        return -ea / alpha;
    }
    let x = alpha * (b - a);
    if x.norm() < 1e-3 {
        ea * (b - a) * phi1(x)
    } else {
        ((alpha * b + beta).exp() - ea) / alpha
    }
}

/// `C exp(rate·h + off)`.
struct ExpTerm {
    coef: Tensor3,
    rate: Complex64,
    off: Complex64,
}

/// Spectral Green tensor for observer height `zo` and a source at height
/// `h` in the upper half-space, valid for `h` on the same side of `zo` as
/// `side_probe`.
fn top_terms(fr: &Fresnel, b: &Basis, zo: f64, side_probe: f64) -> [ExpTerm; 2] {
    let q = fr.q();
    let kz = fr.kz[0];
    let kt2 = fr.eps[0] * (fr.omega / C) * (fr.omega / C);
    let i = Complex64::i();
    let pref = i / (2.0 * kz);
    let ss = b.s * b.s.transpose();
    let up = b.tm(kz, q, -1.0);
    let dn = b.tm(kz, q, 1.0);
    let direct = if side_probe < zo {
        ExpTerm {
            coef: (ss + up * up.transpose() / kt2) * pref,
            rate: -i * kz,
            off: i * kz * zo,
        }
    } else {
        ExpTerm {
            coef: (ss + dn * dn.transpose() / kt2) * pref,
            rate: i * kz,
            off: -i * kz * zo,
        }
    };
    let refl = ExpTerm {
        coef: (ss * fr.r_s + up * dn.transpose() * (fr.r_p / kt2)) * pref,
        rate: i * kz,
        off: i * kz * zo,
    };
    [direct, refl]
}

fn eval_terms(terms: &[ExpTerm], h: f64) -> Tensor3 {
    terms
        .iter()
        .fold(Tensor3::zeros(), |acc, t| acc + t.coef * (t.rate * h + t.off).exp())
}

/// Integrand of the k∥ quadrature. Error control uses the net kernel and
/// the summed channel weight only, so any re-partition of channels that
/// keeps both fixed reproduces the same adaptive grid.
#[derive(Clone)]
struct Sample {
    loss: Tensor3,
    gain: Tensor3,
    escape: Tensor3,
}

impl Integrand for Sample {
    fn zero() -> Self {
        Self {
            loss: Tensor3::zeros(),
            gain: Tensor3::zeros(),
            escape: Tensor3::zeros(),
        }
    }
    fn add(&self, o: &Self) -> Self {
        Self {
            loss: self.loss + o.loss,
            gain: self.gain + o.gain,
            escape: self.escape + o.escape,
        }
    }
    fn scale(&self, s: f64) -> Self {
        Self {
            loss: self.loss * c(s),
            gain: self.gain * c(s),
            escape: self.escape * c(s),
        }
    }
    fn norm(&self) -> f64 {
        let net = self.loss - self.gain + self.escape;
        let weight = self.loss + self.gain;
        Integrand::norm(&net).max(Integrand::norm(&weight))
    }
}

struct LayerWeights {
    loss: f64,
    gain: f64,
}

/// Volume and escape terms for two points above a reciprocal stack.
pub fn volume_terms(
    stack: &LayerStack,
    r: [f64; 3],
    rp: [f64; 3],
    omega: f64,
    spec: &QuadratureSpec,
) -> Result<VolumeTerms> {
    if !(omega > 0.0) {
        return Err(Error::InvalidInput(format!("ω must be positive, got {omega}")));
    }
    if !(r[2] > 0.0 && rp[2] > 0.0) {
        return Err(Error::InvalidInput(
            "both points must lie in the upper half-space (z > 0)".into(),
        ));
    }
    if !stack.is_reciprocal() {
        return Err(Error::InvalidInput("volume route requires a reciprocal stack".into()));
    }
    let n = stack.len();
    let k0 = omega / C;
    let eps: Vec<Complex64> = stack.permittivities(c(omega), [0.0, 0.0])?;
    let weights: Vec<LayerWeights> = stack
        .layers
        .iter()
        .map(|l| {
            l.material
                .split_loss_gain(omega)
                .map(|(lo, g)| LayerWeights { loss: lo, gain: -g })
        })
        .collect::<Result<_>>()?;
    let top_lossy = weights[0].loss + weights[0].gain > 0.0;
    for (j, w) in weights.iter().enumerate() {
        if (w.loss > 0.0 || w.gain > 0.0) && eps[j].im == 0.0 && (j == 0 || j == n - 1) {
            return Err(Error::Singular(format!(
                "half-space {j} has balanced loss and gain: its volume integral diverges"
            )));
        }
    }
    let dz = (r[2] - rp[2]).abs();
    if top_lossy && dz == 0.0 {
        return Err(Error::InvalidInput(
            "points in an absorbing upper medium must be vertically separated".into(),
        ));
    }
    let mut k_top = eps[0].sqrt() * k0;
    if k_top.im < 0.0 {
        k_top = -k_top;
    }
    let decay = if top_lossy {
        1.0 / dz.min(r[2] + rp[2])
    } else {
        1.0 / (r[2] + rp[2])
    };
    let breaks = q_breaks(stack, omega, 1e-3 * k0, (60.0 * decay).max(4.0 * k0));
    let (dx, dy) = (r[0] - rp[0], r[1] - rp[1]);
    let rho = dx.hypot(dy);
    let i = Complex64::i();
    let kt2 = eps[0] * k0 * k0;

    let integrand = |q: f64| -> Sample {
        let nan = Tensor3::from_element(c(f64::NAN));
        let fr = match Fresnel::compute(stack, [q, 0.0], c(omega)) {
            Ok(f) => f,
            Err(_) => {
                return Sample {
                    loss: nan,
                    gain: nan,
                    escape: nan,
                }
            }
        };
        let nphi = 16 + 2 * (q * rho).ceil() as usize;
        let mut loss = Tensor3::zeros();
        let mut gain = Tensor3::zeros();
        let mut esc = Tensor3::zeros();
        let kzs = &fr.kz;
        for m in 0..nphi {
            let phi = 2.0 * PI * (m as f64 + 0.5) / nphi as f64;
            let dir = [phi.cos(), phi.sin()];
            let phase = (i * q * (dir[0] * dx + dir[1] * dy)).exp();
            let b_minus = Basis::new([-dir[0], -dir[1]]);
            let b_plus = Basis::new(dir);
            let mut lo = Tensor3::zeros();
            let mut ga = Tensor3::zeros();
            let mut es = Tensor3::zeros();
            for j in 1..n {
                let w = &weights[j];
                let lossless = w.loss == 0.0 && w.gain == 0.0;
                if lossless && j < n - 1 {
                    continue;
                }
                let (a_d, a_u) = transmitted_terms(&fr, &b_minus, j, r[2]);
                let (b_d, b_u) = transmitted_terms(&fr, &b_minus, j, rp[2]);
                let (td, tu, sd, su) = (a_d.transpose(), a_u.transpose(), b_d.transpose(), b_u.transpose());
                let kz = kzs[j];
                if j == n - 1 {
                    if lossless {
                        if kz.im == 0.0 && kz.re > 0.0 {
                            es += td * sd.adjoint() * kz;
                        }
                    } else {
                        let v = td * sd.adjoint() * c(0.5 / kz.im);
                        lo += v * c(w.loss);
                        ga += v * c(w.gain);
                    }
                    continue;
                }
                let t = stack.layers[j].thickness;
                let same = t * phi1(c(-2.0 * kz.im * t));
                let cross = (-i * kz.conj() * t).exp() * t * phi1(2.0 * i * kz.re * t);
                let v = (td * sd.adjoint() + tu * su.adjoint()) * same
                    + td * su.adjoint() * cross
                    + tu * sd.adjoint() * cross.conj();
                lo += v * c(w.loss);
                ga += v * c(w.gain);
            }
            if top_lossy {
                let mut cuts = vec![0.0, r[2].min(rp[2]), r[2].max(rp[2]), f64::INFINITY];
                cuts.dedup();
                let mut v = Tensor3::zeros();
                for seg in cuts.windows(2) {
                    let probe = if seg[1].is_finite() {
                        0.5 * (seg[0] + seg[1])
                    } else {
                        seg[0] + 1.0
                    };
                    let ta = top_terms(&fr, &b_plus, r[2], probe);
                    let tb = top_terms(&fr, &b_plus, rp[2], probe);
                    for x in &ta {
                        for y in &tb {
                            let alpha = x.rate + y.rate.conj();
                            let beta = x.off + y.off.conj();
                            v += x.coef * y.coef.adjoint() * exp_integral(alpha, beta, seg[0], seg[1]);
                        }
                    }
                }
                // contact terms of the -ẑẑ δ/k² part of G
                let zz = Tensor3::from_fn(|a, b| if a == 2 && b == 2 { c(1.0) } else { c(0.0) });
                let g_rp_at_r = eval_terms(&top_terms(&fr, &b_plus, rp[2], r[2]), r[2]);
                let g_r_at_rp = eval_terms(&top_terms(&fr, &b_plus, r[2], rp[2]), rp[2]);
                let contact = -(zz * g_rp_at_r.adjoint()) / kt2 - (g_r_at_rp * zz) / kt2.conj();
                let v = v + contact;
                lo += v * c(weights[0].loss);
                ga += v * c(weights[0].gain);
            } else if q < k_top.re && k_top.im == 0.0 {
                let kz = kzs[0];
                let ta = top_terms(&fr, &b_plus, r[2], f64::INFINITY);
                let tb = top_terms(&fr, &b_plus, rp[2], f64::INFINITY);
                let ua = ta.iter().fold(Tensor3::zeros(), |acc, t| acc + t.coef * t.off.exp());
                let ub = tb.iter().fold(Tensor3::zeros(), |acc, t| acc + t.coef * t.off.exp());
                es += ua * ub.adjoint() * kz;
            }
            loss += lo * phase;
            gain += ga * phase;
            esc += es * phase;
        }
        let meas = c(q / (4.0 * PI * PI) * 2.0 * PI / nphi as f64);
        Sample {
            loss: loss * meas,
            gain: gain * meas,
            escape: esc * meas,
        }
    };
    let est = integrate_q(integrand, k_top, &breaks, decay, spec)?;
    let Sample {
        loss,
        gain,
        escape: esc,
    } = est.value.clone();
    if !(loss.iter().chain(gain.iter()).chain(esc.iter()).all(|z| z.is_finite())) {
        return Err(Error::Singular("non-finite volume integrand".into()));
    }
    let k4 = c(k0.powi(4));
    let k2 = c(k0 * k0);
    let out = VolumeTerms {
        loss: loss * k4,
        gain: gain * k4,
        escape: esc * k2,
        error: est.error * k0.powi(4),
        evaluations: est.evaluations,
        converged: est.converged,
    };
    if !out.converged {
        return Err(Error::NonConvergence {
            message: "volume integral".into(),
            value: Integrand::norm(&est.value),
            error: est.error,
            subdivisions: est.subdivisions,
        });
    }
    Ok(out)
}

/// Relative mismatch between `Im Ḡ(r, r')` from the Green tensor itself and
/// from the volume representation.
pub fn imag_green_identity_check(
    stack: &LayerStack,
    r: [f64; 3],
    rp: [f64; 3],
    omega: f64,
    spec: &QuadratureSpec,
) -> Result<IdentityCheck> {
    if !stack.is_passive() {
        return Err(Error::InvalidInput("identity check requires a passive stack".into()));
    }
    let lhs = imag_green(stack, r, rp, omega, spec)?.value;
    let volume = volume_terms(stack, r, rp, omega, spec)?;
    let rhs = volume.total();
    let residual = (lhs - rhs).norm() / lhs.norm();
    Ok(IdentityCheck {
        lhs,
        rhs,
        residual,
        volume,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layered::green::homogeneous_green;
    use crate::material::{MaterialResponse, PermittivityChannel};

    const W: f64 = 2.0e15;

    #[test]
    fn expm1_complex() {
        let z = Complex64::new(1e-9, 2e-9);
        assert!((z.exp_m1() - z).norm() < 1e-17);
        let z = Complex64::new(0.3, -1.2);
        assert!((z.exp_m1() - (z.exp() - 1.0)).norm() < 1e-15);
    }

    #[test]
    fn closed_form_depth_integrals() {
        let alpha = Complex64::new(-2.0, 3.0);
        let beta = Complex64::new(0.1, 0.2);
        let exact = exp_integral(alpha, beta, 0.5, 1.5);
        let n = 20000;
        let h = 1.0 / n as f64;
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let x = 0.5 + (k as f64 + 0.5) * h;
            s += (alpha * x + beta).exp() * h;
        }
        assert!((s - exact).norm() < 1e-8 * exact.norm());
        let tail = exp_integral(alpha, beta, 0.5, f64::INFINITY);
        assert!((tail - (-(alpha * 0.5 + beta).exp() / alpha)).norm() < 1e-15);
    }

    #[test]
    fn vacuum_is_pure_escape() {
        let s = LayerStack::vacuum();
        let spec = QuadratureSpec::with_rel_tol(1e-8);
        let r = [0.0, 0.0, 50e-9];
        let chk = imag_green_identity_check(&s, r, r, W, &spec).unwrap();
        assert_eq!(chk.volume.loss, Tensor3::zeros());
        assert_eq!(chk.volume.gain, Tensor3::zeros());
        assert!(chk.residual < 1e-6, "{}", chk.residual);
        let rp = [40e-9, -20e-9, 90e-9];
        let chk = imag_green_identity_check(&s, r, rp, W, &spec).unwrap();
        assert!(chk.residual < 1e-6, "{}", chk.residual);
    }

    #[test]
    fn lossy_half_space() {
        let m = MaterialResponse::new(2.0, vec![PermittivityChannel::lorentz(1.0, 2.2e15, 2e14, 2e15)]);
        let s = LayerStack::interface(m).unwrap();
        let spec = QuadratureSpec::with_rel_tol(1e-7);
        let r = [0.0, 0.0, 30e-9];
        let chk = imag_green_identity_check(&s, r, r, W, &spec).unwrap();
        assert!(chk.residual < 1e-3, "{}", chk.residual);
        let rp = [15e-9, 5e-9, 60e-9];
        let chk = imag_green_identity_check(&s, r, rp, W, &spec).unwrap();
        assert!(chk.residual < 1e-3, "{}", chk.residual);
    }

    #[test]
    fn lossy_slab_on_dielectric() {
        let m = MaterialResponse::new(1.0, vec![PermittivityChannel::drude(1.0, 3e14, 8e15)]);
        let s = LayerStack::new(
            MaterialResponse::vacuum(),
            vec![(m, 20e-9)],
            MaterialResponse::dielectric(2.25),
        )
        .unwrap();
        let spec = QuadratureSpec::with_rel_tol(1e-7);
        let r = [0.0, 0.0, 40e-9];
        let chk = imag_green_identity_check(&s, r, r, W, &spec).unwrap();
        assert!(chk.residual < 1e-4, "{}", chk.residual);
    }

    #[test]
    fn homogeneous_lossy_medium() {
        let m = MaterialResponse::new(2.0, vec![PermittivityChannel::lorentz(1.0, 2.5e15, 3e14, 2e15)]);
        let s = LayerStack::half_space(m.clone(), m.clone()).unwrap();
        let spec = QuadratureSpec::with_rel_tol(1e-8);
        let r = [0.0, 0.0, 100e-9];
        let rp = [20e-9, -10e-9, 160e-9];
        let vol = volume_terms(&s, r, rp, W, &spec).unwrap();
        assert_eq!(vol.escape, Tensor3::zeros());
        let lhs = homogeneous_green(m.eval_epsilon(W).unwrap(), r, rp, W)
            .unwrap()
            .map(|z| c(z.im));
        let res = (vol.total() - lhs).norm() / lhs.norm();
        assert!(res < 1e-4, "{res}");
    }
}

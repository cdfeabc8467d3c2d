use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fresnel::Fresnel;
use super::{in_plane, LayerStack};
use crate::constants::C;
use crate::error::{Error, Result};
use crate::numerics::{integrate_breaks, integrate_semi_infinite, Estimate, Integrand, QuadratureSpec};
use crate::Tensor3;

type V3 = Vector3<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn outer(a: &V3, b: &V3) -> Tensor3 {
    a * b.transpose()
}

/// Closed-form dyadic Green tensor of a homogeneous medium with
/// permittivity `eps`, scaled: `Ḡ = (ω²/c²) G`. Diverges at `r = r'`.
pub fn homogeneous_green(eps: Complex64, r: [f64; 3], rp: [f64; 3], omega: f64) -> Result<Tensor3> {
    let d = [r[0] - rp[0], r[1] - rp[1], r[2] - rp[2]];
    let rr = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if rr == 0.0 {
        return Err(Error::Singular("Green tensor diverges at coincident points".into()));
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidInput(format!("ω must be positive, got {omega}")));
    }
    let k0 = omega / C;
    let mut k = eps.sqrt() * k0;
    if k.im < 0.0 {
        k = -k;
    }
    let x = k * rr;
    let i = Complex64::i();
    let pref = (i * x).exp() / (4.0 * PI * rr);
    let a = 1.0 + (i * x - 1.0) / (x * x);
    let b = (3.0 - 3.0 * i * x - x * x) / (x * x);
    let u = V3::new(c(d[0] / rr), c(d[1] / rr), c(d[2] / rr));
    let g = (Tensor3::identity() * a + outer(&u, &u) * b) * pref;
    Ok(g * c(k0 * k0))
}

/// Scaled vacuum Green tensor `Ḡ(r, r', ω)`.
pub fn free_space_green(r: [f64; 3], rp: [f64; 3], omega: f64) -> Result<Tensor3> {
    homogeneous_green(c(1.0), r, rp, omega)
}

/// `(j0(x), j1(x)/x)` with a series near the origin.
fn spherical_j(x: f64) -> (f64, f64) {
    if x < 2e-2 {
        let x2 = x * x;
        (
            1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0,
            1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0 - x2 * x2 * x2 / 45360.0,
        )
    } else {
        let (s, co) = x.sin_cos();
        (s / x, (s / (x * x) - co / x) / x)
    }
}

/// `Im Ḡ(r, r', ω)` of a lossless homogeneous medium of index `n`; finite at
/// `r = r'` where it equals `n ω³/(6πc³) I`.
pub fn homogeneous_imag_green(n: f64, r: [f64; 3], rp: [f64; 3], omega: f64) -> Tensor3 {
    let d = [r[0] - rp[0], r[1] - rp[1], r[2] - rp[2]];
    let rr = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let k0 = omega / C;
    let k = n * k0;
    let (j0, j1x) = spherical_j(k * rr);
    let a = j0 - j1x;
    let b = -j0 + 3.0 * j1x;
    let u = if rr > 0.0 {
        V3::new(c(d[0] / rr), c(d[1] / rr), c(d[2] / rr))
    } else {
        V3::zeros()
    };
    (Tensor3::identity() * c(a) + outer(&u, &u) * c(b)) * c(k0 * k0 * k / (4.0 * PI))
}

/// `Im Ḡ` of vacuum.
pub fn free_space_imag_green(r: [f64; 3], rp: [f64; 3], omega: f64) -> Tensor3 {
    homogeneous_imag_green(1.0, r, rp, omega)
}

/// Spectral (plane-wave) Green tensor of a stack at one k∥, unscaled:
/// `G = (1/4π²) ∫d²k (direct + scattered) e^{ik·(ρ-ρ')}`. The singular
/// `-ẑẑ δ(r - r')/k²` term is not included.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralGreen {
    pub k: [f64; 2],
    pub omega: f64,
    pub kz: Vec<Complex64>,
    pub r_s: Complex64,
    pub r_p: Complex64,
    pub t_s: Complex64,
    pub t_p: Complex64,
    pub direct: Tensor3,
    pub scattered: Tensor3,
}

impl SpectralGreen {
    pub fn total(&self) -> Tensor3 {
        self.direct + self.scattered
    }
}

/// Basis vectors for a plane wave: `k̂`, `ŝ = ẑ × k̂`, `ẑ`.
pub(crate) struct Basis {
    pub kh: V3,
    pub s: V3,
    pub z: V3,
}

impl Basis {
    pub fn new(dir: [f64; 2]) -> Self {
        Self {
            kh: V3::new(c(dir[0]), c(dir[1]), c(0.0)),
            s: V3::new(c(-dir[1]), c(dir[0]), c(0.0)),
            z: V3::new(c(0.0), c(0.0), c(1.0)),
        }
    }

    /// `±k_z k̂ + q ẑ` (unnormalised TM polarization; `+` travels down).
    pub fn tm(&self, kz: Complex64, q: f64, sign: f64) -> V3 {
        self.kh * (kz * sign) + self.z * c(q)
    }
}

/// Spectral dyads for observer and source both in the upper half-space.
pub(crate) fn top_dyads(fr: &Fresnel, b: &Basis, z: f64, zp: f64) -> (Tensor3, Tensor3) {
    let q = fr.q();
    let kz = fr.kz[0];
    let kt2 = fr.eps[0] * (fr.omega / C) * (fr.omega / C);
    let i = Complex64::i();
    let pref = i / (2.0 * kz);
    let ss = outer(&b.s, &b.s);
    let up = b.tm(kz, q, -1.0);
    let dn = b.tm(kz, q, 1.0);
    let direct_tm = if z >= zp { outer(&up, &up) } else { outer(&dn, &dn) };
    let direct = (ss + direct_tm / kt2) * (pref * (i * kz * (z - zp).abs()).exp());
    let scattered = (ss * fr.r_s + outer(&up, &dn) * (fr.r_p / kt2)) * (pref * (i * kz * (z + zp)).exp());
    (direct, scattered)
}

/// Field in layer `j ≥ 1` from a point source at height `zs` in the upper
/// half-space: `ĝ(ζ) = T_down e^{ik_z ζ} + T_up e^{ik_z (t - ζ)}` with ζ the
/// depth below the layer top.
pub(crate) fn transmitted_terms(fr: &Fresnel, b: &Basis, j: usize, zs: f64) -> (Tensor3, Tensor3) {
    let q = fr.q();
    let kz0 = fr.kz[0];
    let kzj = fr.kz[j];
    let kj2 = fr.eps[j] * (fr.omega / C) * (fr.omega / C);
    let i = Complex64::i();
    let pref = i / (2.0 * kz0) * (i * kz0 * zs).exp();
    let src_p = b.tm(kz0, q, 1.0);
    let ss = outer(&b.s, &b.s);
    let (ds, us) = fr.layer_amplitudes(0, j);
    let (dp, upp) = fr.layer_amplitudes(1, j);
    let t_down = (ss * ds + outer(&b.tm(kzj, q, 1.0), &src_p) * (dp / kj2)) * pref;
    let t_up = (ss * us + outer(&b.tm(kzj, q, -1.0), &src_p) * (upp / kj2)) * pref;
    (t_down, t_up)
}

/// Spectral Green tensor `ĝ(k∥; z, z')` for observer height `z` and source
/// height `zp`. At least one point must lie in the upper half-space; a
/// source below it requires a reciprocal stack.
pub fn layered_green(stack: &LayerStack, z: f64, zp: f64, k: [f64; 2], omega: f64) -> Result<SpectralGreen> {
    if !(omega > 0.0) {
        return Err(Error::InvalidInput(format!("ω must be positive, got {omega}")));
    }
    let (lo, zeta_o) = stack.locate(z);
    let (ls, zeta_s) = stack.locate(zp);
    let (direct, scattered, fr) = match (lo, ls) {
        (0, 0) => {
            let fr = Fresnel::compute(stack, k, c(omega))?;
            let b = Basis::new(in_plane(fr.k).0);
            let (d, s) = top_dyads(&fr, &b, z, zp);
            (d, s, fr)
        }
        (j, 0) => {
            let fr = Fresnel::compute(stack, k, c(omega))?;
            let b = Basis::new(in_plane(fr.k).0);
            (Tensor3::zeros(), evaluate_transmitted(&fr, &b, j, zp, zeta_o), fr)
        }
        (0, j) => {
            if !stack.is_reciprocal() {
                return Err(Error::InvalidInput(
                    "source below the upper half-space requires a reciprocal stack".into(),
                ));
            }
            let kneg = [-k[0], -k[1]];
            let fr = Fresnel::compute(stack, kneg, c(omega))?;
            let b = Basis::new(in_plane(fr.k).0);
            let g = evaluate_transmitted(&fr, &b, j, z, zeta_s).transpose();
            (Tensor3::zeros(), g, fr)
        }
        _ => {
            return Err(Error::InvalidInput(
                "observer or source must lie in the upper half-space".into(),
            ))
        }
    };
    Ok(SpectralGreen {
        k: fr.k,
        omega,
        kz: fr.kz.clone(),
        r_s: fr.r_s,
        r_p: fr.r_p,
        t_s: fr.t_s,
        t_p: fr.t_p,
        direct,
        scattered,
    })
}

fn evaluate_transmitted(fr: &Fresnel, b: &Basis, j: usize, zs: f64, zeta: f64) -> Tensor3 {
    let (td, tu) = transmitted_terms(fr, b, j, zs);
    let i = Complex64::i();
    let kz = fr.kz[j];
    let mut g = td * (i * kz * zeta).exp();
    if j < fr.kz.len() - 1 {
        g += tu * (i * kz * (fr.thickness[j] - zeta)).exp();
    }
    g
}

/// Light lines of every layer and sharp peaks of the reflection
/// coefficients between `q_lo` and `q_hi`.
pub(crate) fn q_breaks(stack: &LayerStack, omega: f64, q_lo: f64, q_hi: f64) -> Vec<f64> {
    let k0 = omega / C;
    let mut out: Vec<f64> = Vec::new();
    if let Ok(eps) = stack.permittivities(c(omega), [0.0, 0.0]) {
        for e in eps {
            let n = e.sqrt();
            if n.re > 0.0 {
                out.push(n.re * k0);
            }
        }
    }
    let n = 600;
    let (a, b) = (q_lo.max(1e-3 * k0), q_hi.max(2.0 * q_lo.max(1e-3 * k0)));
    let qs: Vec<f64> = (0..=n).map(|i| a * (b / a).powf(i as f64 / n as f64)).collect();
    let vals: Vec<f64> = qs
        .iter()
        .map(|&q| {
            Fresnel::compute(stack, [q, 0.0], c(omega))
                .map(|f| f.r_s.norm() + f.r_p.norm())
                .unwrap_or(0.0)
        })
        .collect();
    for i in 1..n {
        if vals[i] > vals[i - 1] && vals[i] >= vals[i + 1] && vals[i] > 2.0 {
            out.push(qs[i]);
        }
    }
    out.retain(|x| x.is_finite() && *x > 0.0);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `∫_0^∞ f(q) dq` adapted to the 1/k_z endpoint behaviour at the light
/// line of the upper half-space (lossless case) and to evanescent decay on
/// the scale `decay` (rad/m).
pub(crate) fn integrate_q<V: Integrand>(
    f: impl Fn(f64) -> V,
    k_top: Complex64,
    breaks: &[f64],
    decay: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate<V>> {
    if k_top.im == 0.0 && k_top.re > 0.0 {
        let k = k_top.re;
        let mut tb = vec![0.0, 0.5 * PI];
        tb.extend(breaks.iter().filter(|&&b| b < k).map(|&b| (b / k).asin()));
        let prop = integrate_breaks(
            |t: f64| {
                let (s, co) = t.sin_cos();
                f(k * s).scale(k * co)
            },
            &tb,
            spec,
        );
        let ub: Vec<f64> = breaks.iter().filter(|&&b| b > k).map(|&b| (b - k).sqrt()).collect();
        let evan = integrate_semi_infinite(|u: f64| f(k + u * u).scale(2.0 * u), 0.0, decay.sqrt(), &ub, spec)?;
        Ok(combine(prop, evan))
    } else {
        let scale = decay.max(k_top.norm());
        integrate_semi_infinite(f, 0.0, scale, breaks, spec)
    }
}

pub(crate) fn combine<V: Integrand>(a: Estimate<V>, b: Estimate<V>) -> Estimate<V> {
    Estimate {
        value: a.value.add(&b.value),
        error: a.error + b.error,
        subdivisions: a.subdivisions + b.subdivisions,
        evaluations: a.evaluations + b.evaluations,
        converged: a.converged && b.converged,
    }
}

fn bessel(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        if n == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        puruspe::Jn(n, x)
    }
}

/// Scattered part `Ḡ_sc(r, r')` for both points in the upper half-space,
/// by Sommerfeld integration with the azimuth done in closed form.
/// `derivative` multiplies the integrand by `2ik_z`, i.e. returns
/// `∂/∂z Ḡ_sc` for `z = z'` moving together. `imag` integrates the
/// element-wise imaginary part only, so that error control is not swamped
/// by the large reactive near field.
fn sommerfeld(
    stack: &LayerStack,
    r: [f64; 3],
    rp: [f64; 3],
    omega: f64,
    spec: &QuadratureSpec,
    derivative: bool,
    imag: bool,
) -> Result<Estimate<Tensor3>> {
    if !(omega > 0.0) {
        return Err(Error::InvalidInput(format!("ω must be positive, got {omega}")));
    }
    if !(r[2] > 0.0 && rp[2] > 0.0) {
        return Err(Error::InvalidInput(
            "both points must lie in the upper half-space (z > 0)".into(),
        ));
    }
    if !stack.is_reciprocal() {
        return Err(Error::InvalidInput(
            "real-space Green tensor requires a reciprocal stack".into(),
        ));
    }
    let k0 = omega / C;
    let eps_t = stack.top().eval_epsilon(omega)?;
    let mut k_top = eps_t.sqrt() * k0;
    if k_top.im < 0.0 {
        k_top = -k_top;
    }
    let (dx, dy) = (r[0] - rp[0], r[1] - rp[1]);
    let rho = dx.hypot(dy);
    let (s0, c0) = if rho > 0.0 { (dy / rho, dx / rho) } else { (0.0, 1.0) };
    let (s2, c2) = (2.0 * s0 * c0, c0 * c0 - s0 * s0);
    let h = r[2] + rp[2];
    let decay = 1.0 / h;
    let breaks = q_breaks(stack, omega, 1e-3 * k0, (60.0 * decay).max(4.0 * k0));
    let i = Complex64::i();
    let kt2 = eps_t * k0 * k0;
    let integrand = |q: f64| -> Tensor3 {
        let fr = match Fresnel::compute(stack, [q, 0.0], c(omega)) {
            Ok(f) => f,
            Err(_) => return Tensor3::from_element(c(f64::NAN)),
        };
        let kz = fr.kz[0];
        let x = q * rho;
        let (j0, j1, j2) = (bessel(0, x), bessel(1, x), bessel(2, x));
        let i1 = c(2.0 * PI * j0);
        let ic = i * (2.0 * PI * j1 * c0);
        let is = i * (2.0 * PI * j1 * s0);
        let icc = c(PI * (j0 - j2 * c2));
        let iss = c(PI * (j0 + j2 * c2));
        let isc = c(-PI * j2 * s2);
        let z0 = c(0.0);
        let s = Tensor3::new(iss, -isc, z0, -isc, icc, z0, z0, z0, z0);
        let kz2 = kz * kz;
        let p = Tensor3::new(
            -kz2 * icc,
            -kz2 * isc,
            -kz * q * ic,
            -kz2 * isc,
            -kz2 * iss,
            -kz * q * is,
            q * kz * ic,
            q * kz * is,
            c(q * q) * i1,
        );
        let mut pref = i / (2.0 * kz) * (i * kz * h).exp() * q / (4.0 * PI * PI);
        if derivative {
            pref *= 2.0 * i * kz;
        }
        let g = (s * fr.r_s + p * (fr.r_p / kt2)) * pref;
        if imag {
            g.map(|z| c(z.im))
        } else {
            g
        }
    };
    // The imaginary part can vanish identically over whole ranges (lossless
    // evanescent reflection), so it gets an absolute floor relative to the
    // free-space value k/(6π).
    let spec = if imag {
        QuadratureSpec {
            abs_tol: spec.abs_tol.max(spec.rel_tol * 1e-3 * k_top.norm() / (6.0 * PI)),
            ..*spec
        }
    } else {
        *spec
    };
    let est = integrate_q(integrand, k_top, &breaks, decay, &spec)?;
    if !est.value.iter().all(|z| z.is_finite()) {
        return Err(Error::Singular("non-finite Sommerfeld integrand".into()));
    }
    est.map(|g| g * c(k0 * k0)).into_result("Sommerfeld integral")
}

/// Scattered part of `Ḡ(r, r', ω)` for two points above the stack.
pub fn scattered_green(
    stack: &LayerStack,
    r: [f64; 3],
    rp: [f64; 3],
    omega: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate<Tensor3>> {
    sommerfeld(stack, r, rp, omega, spec, false, false)
}

/// Element-wise `Im Ḡ_sc(r, r', ω)`, integrated directly.
pub fn scattered_imag_green(
    stack: &LayerStack,
    r: [f64; 3],
    rp: [f64; 3],
    omega: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate<Tensor3>> {
    sommerfeld(stack, r, rp, omega, spec, false, true)
}

/// `∂/∂z Ḡ_sc(r, r, ω)` at `r = (0, 0, z)`, differentiated under the
/// integral sign.
pub fn scattered_green_dz(stack: &LayerStack, z: f64, omega: f64, spec: &QuadratureSpec) -> Result<Estimate<Tensor3>> {
    let r = [0.0, 0.0, z];
    sommerfeld(stack, r, r, omega, spec, true, false)
}

/// Element-wise `Im ∂/∂z Ḡ_sc(r, r, ω)` at `r = (0, 0, z)`.
pub fn scattered_imag_green_dz(
    stack: &LayerStack,
    z: f64,
    omega: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate<Tensor3>> {
    let r = [0.0, 0.0, z];
    sommerfeld(stack, r, r, omega, spec, true, true)
}

/// Full `Ḡ(r, r', ω)` above the stack: homogeneous part of the upper
/// medium plus the scattered part. Diverges at `r = r'`.
pub fn real_space_green(
    stack: &LayerStack,
    r: [f64; 3],
    rp: [f64; 3],
    omega: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate<Tensor3>> {
    let eps_t = stack.top().eval_epsilon(omega)?;
    let g0 = homogeneous_green(eps_t, r, rp, omega)?;
    Ok(scattered_green(stack, r, rp, omega, spec)?.map(|g| g + g0))
}

/// Element-wise `Im Ḡ(r, r', ω)` above the stack; finite at `r = r'` when
/// the upper medium is lossless.
pub fn imag_green(
    stack: &LayerStack,
    r: [f64; 3],
    rp: [f64; 3],
    omega: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate<Tensor3>> {
    let eps_t = stack.top().eval_epsilon(omega)?;
    let g0 = if eps_t.im == 0.0 {
        homogeneous_imag_green(eps_t.re.sqrt(), r, rp, omega)
    } else {
        homogeneous_green(eps_t, r, rp, omega)?.map(|z| c(z.im))
    };
    Ok(scattered_imag_green(stack, r, rp, omega, spec)?.map(|g| g + g0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{MaterialResponse, PermittivityChannel};
    use crate::numerics::integrate;

    const W: f64 = 2.0e15;

    fn rel(a: &Tensor3, b: &Tensor3) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn free_space_coincident_imag() {
        let g = free_space_imag_green([0.0; 3], [0.0; 3], W);
        let expected = W.powi(3) / (6.0 * PI * C.powi(3));
        assert!(rel(&g, &(Tensor3::identity() * c(expected))) < 1e-14);
        let g2 = free_space_imag_green([0.0; 3], [0.0; 3], 2.0 * W);
        assert!(((g2[(0, 0)] / g[(0, 0)]).re - 8.0).abs() < 1e-12);
    }

    #[test]
    fn imag_part_matches_closed_form_off_diagonal() {
        let k0 = W / C;
        for &d in &[0.05, 0.7, 3.0, 25.0] {
            let r = [d / k0 * 0.6, -d / k0 * 0.48, d / k0 * 0.64];
            let full = free_space_green(r, [0.0; 3], W).unwrap().map(|z| c(z.im));
            let im = free_space_imag_green(r, [0.0; 3], W);
            assert!(rel(&im, &full) < 1e-9, "x = {d}");
        }
    }

    #[test]
    fn small_separation_limit_matches_series() {
        // independent small-x expansion of Im of the closed form:
        // Im G xx for R along z at x = kR: (k/4π)(2/3 - x²/... ) via finite x
        let k0 = W / C;
        let r = [0.0, 0.0, 1e-4 / k0];
        let full = free_space_green(r, [0.0; 3], W).unwrap();
        let expected = W.powi(3) / (6.0 * PI * C.powi(3));
        assert!((full[(0, 0)].im / expected - 1.0).abs() < 1e-6);
        assert!((full[(2, 2)].im / expected - 1.0).abs() < 1e-6);
    }

    #[test]
    fn far_field_decays_as_inverse_distance() {
        let k0 = W / C;
        let xs = [200.0, 400.0, 800.0, 1600.0];
        let mut logs = Vec::new();
        for &x in &xs {
            // trace magnitude averaged over a period to remove the phase
            let mut acc = 0.0;
            for j in 0..8 {
                let d = (x + j as f64 * PI / 8.0) / k0;
                let g = free_space_green([d, 0.0, 0.0], [0.0; 3], W).unwrap();
                acc += g.trace().norm();
            }
            logs.push(((x / k0).ln(), (acc / 8.0).ln()));
        }
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope + 1.0).abs() < 1e-2, "slope {slope}");
        let g = free_space_green([1600.0 / k0, 0.0, 0.0], [0.0; 3], W).unwrap();
        assert!(g[(0, 0)].norm() < 1e-2 * g[(1, 1)].norm());
    }

    #[test]
    fn coincident_full_tensor_is_an_error() {
        assert!(free_space_green([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], W).is_err());
    }

    #[test]
    fn vacuum_stack_has_no_scattering() {
        let s = LayerStack::vacuum();
        let g = layered_green(&s, 1e-7, 2e-7, [3e6, 1e6], W).unwrap();
        assert_eq!(g.scattered, Tensor3::zeros());
    }

    #[test]
    fn vacuum_spectral_integral_gives_radiative_imag_part() {
        // brute-force q and φ quadrature of the vacuum spectral form at
        // coincident points
        let s = LayerStack::vacuum();
        let z = 1e-7;
        let k0 = W / C;
        let spec = QuadratureSpec::with_rel_tol(1e-9);
        let nphi = 16;
        let radial = |q: f64| -> Tensor3 {
            let mut acc = Tensor3::zeros();
            for m in 0..nphi {
                let phi = 2.0 * PI * m as f64 / nphi as f64;
                let g = layered_green(&s, z, z, [q * phi.cos(), q * phi.sin()], W).unwrap();
                acc += g.total().map(|v| c(v.im));
            }
            acc * c(q * 2.0 * PI / nphi as f64 / (4.0 * PI * PI))
        };
        // only propagating waves contribute to the imaginary part; use
        // q = k0 sin θ to remove the endpoint singularity
        let est = integrate(|t: f64| radial(k0 * t.sin()) * c(k0 * t.cos()), 0.0, 0.5 * PI, &spec);
        let g = est.value * c(k0 * k0);
        let expected = free_space_imag_green([0.0; 3], [0.0; 3], W);
        assert!(rel(&g, &expected) < 1e-7, "{g}");
    }

    #[test]
    fn mirror_matches_image_theory() {
        let s = LayerStack::interface(MaterialResponse::dielectric(1e8)).unwrap();
        let k0 = W / C;
        let spec = QuadratureSpec::with_rel_tol(1e-8);
        let flip = Tensor3::from_diagonal(&V3::new(c(-1.0), c(-1.0), c(1.0)));
        for &(r, rp) in &[
            ([0.0, 0.0, 0.3 / k0], [0.0, 0.0, 0.3 / k0]),
            ([0.2 / k0, 0.1 / k0, 0.02 / k0], [0.0, 0.0, 0.05 / k0]),
            ([1.5 / k0, -0.7 / k0, 2.0 / k0], [0.0, 0.0, 0.9 / k0]),
        ] {
            let g = scattered_green(&s, r, rp, W, &spec).unwrap().value;
            let image = [rp[0], rp[1], -rp[2]];
            let expected = free_space_green(r, image, W).unwrap() * flip;
            assert!(rel(&g, &expected) < 1e-3, "{r:?}: {}", rel(&g, &expected));
        }
    }

    #[test]
    fn mirror_standing_wave_period() {
        let s = LayerStack::interface(MaterialResponse::dielectric(1e8)).unwrap();
        let k0 = W / C;
        let spec = QuadratureSpec::with_rel_tol(1e-8);
        // Im Ḡ_sc,zz(z) ∝ oscillation in 2 k0 z: successive maxima are π/k0 apart
        let f = |z: f64| {
            let r = [0.0, 0.0, z];
            scattered_green(&s, r, r, W, &spec).unwrap().value[(2, 2)].im
        };
        let zs: Vec<f64> = (0..400).map(|i| (3.0 + i as f64 * 0.025) / k0).collect();
        let vals: Vec<f64> = zs.iter().map(|&z| f(z)).collect();
        let peaks: Vec<f64> = (1..vals.len() - 1)
            .filter(|&i| vals[i] > vals[i - 1] && vals[i] >= vals[i + 1])
            .map(|i| zs[i])
            .collect();
        assert!(peaks.len() >= 2);
        let period = (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64;
        assert!((period * k0 / PI - 1.0).abs() < 2e-2, "period {}", period * k0 / PI);
    }

    #[test]
    fn reciprocity_and_transmitted_consistency() {
        let m = MaterialResponse::new(2.0, vec![PermittivityChannel::lorentz(1.0, 3e15, 1e14, 4e15)]);
        let s = LayerStack::new(
            MaterialResponse::vacuum(),
            vec![(m.clone(), 30e-9)],
            MaterialResponse::dielectric(3.0),
        )
        .unwrap();
        let spec = QuadratureSpec::with_rel_tol(1e-9);
        let r = [20e-9, -5e-9, 40e-9];
        let rp = [-3e-9, 9e-9, 25e-9];
        let a = real_space_green(&s, r, rp, W, &spec).unwrap().value;
        let b = real_space_green(&s, rp, r, W, &spec).unwrap().value;
        assert!(rel(&a, &b.transpose()) < 1e-9);
        // spectral: observer below, source above vs. the transpose relation
        let k = [2e7, -1e7];
        let down = layered_green(&s, -10e-9, 30e-9, k, W).unwrap().scattered;
        let up = layered_green(&s, 30e-9, -10e-9, [-k[0], -k[1]], W).unwrap().scattered;
        assert!(rel(&down, &up.transpose()) < 1e-12);
    }

    #[test]
    fn transmitted_field_is_continuous() {
        let m = MaterialResponse::new(1.0, vec![PermittivityChannel::drude(1.0, 1e14, 1e16)]);
        let s = LayerStack::new(
            MaterialResponse::vacuum(),
            vec![(MaterialResponse::dielectric(3.0), 30e-9)],
            m,
        )
        .unwrap();
        let k = [1.3e7, 0.4e7];
        let eps = 1e-15;
        for &(zi, e1, e2) in &[(0.0, 1.0, 3.0), (-30e-9, 3.0, f64::NAN)] {
            let above = layered_green(&s, zi + eps, 20e-9, k, W).unwrap().total();
            let below = layered_green(&s, zi - eps, 20e-9, k, W).unwrap().total();
            // tangential E continuous
            for col in 0..3 {
                for row in 0..2 {
                    let (a, b) = (above[(row, col)], below[(row, col)]);
                    assert!((a - b).norm() < 1e-6 * a.norm().max(1e-30), "tangential {row},{col}");
                }
            }
            // normal D continuous where both permittivities are known
            if e2.is_finite() {
                for col in 0..3 {
                    let (a, b) = (above[(2, col)] * e1, below[(2, col)] * e2);
                    assert!((a - b).norm() < 1e-6 * a.norm().max(1e-30), "normal {col}");
                }
            }
        }
    }

    #[test]
    fn passive_imag_green_is_positive_semidefinite() {
        let m = MaterialResponse::new(1.0, vec![PermittivityChannel::drude(1.0, 1e14, 1e16)]);
        let s = LayerStack::interface(m).unwrap();
        let spec = QuadratureSpec::with_rel_tol(1e-8);
        for &z in &[5e-9, 50e-9, 500e-9] {
            let r = [0.0, 0.0, z];
            let g = imag_green(&s, r, r, W, &spec).unwrap().value;
            let herm = (g + g.adjoint()) * c(0.5);
            let ev = herm.map(|v| v.re).symmetric_eigenvalues();
            let scale = g.norm();
            assert!(ev.iter().all(|&e| e >= -1e-12 * scale), "{ev}");
        }
    }
}

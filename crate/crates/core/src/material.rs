//! Channel-decomposed dielectric response.
//!
//! A material is a real background plus a sum of dispersive channels. Each
//! channel is strictly damped (`γ > 0`); a negative oscillator strength marks
//! an inverted (gain) channel whose imaginary part is negative for ω > 0.
//! Motion of the body and carrier drift enter as rigid Doppler shifts of the
//! channel frequency argument.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::EPS0;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// `f ω_p² / (ω₀² - ω² - iγω)`
    Lorentz,
    /// `-f ω_p² / (ω² + iγω)`
    Drude,
    /// `i f σ(ω) / (ε₀ ω)` with `σ(ω) = σ_xx γ / (γ - iω)`; carries an
    /// optional Hall part `σ_xy` with the same dispersion.
    Conductivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermittivityChannel {
    pub kind: ChannelKind,
    /// Oscillator strength; `f < 0` is an inverted (gain) channel.
    pub strength: f64,
    /// Resonance frequency, rad/s (Lorentz only).
    pub omega0: f64,
    /// Damping rate, rad/s.
    pub gamma: f64,
    /// Plasma frequency, rad/s (Lorentz and Drude).
    pub omega_p: f64,
    /// DC conductivity, S/m (conductivity only).
    pub sigma_xx: f64,
    /// DC Hall conductivity, S/m (conductivity only).
    pub sigma_xy: f64,
}

impl PermittivityChannel {
    pub fn lorentz(strength: f64, omega0: f64, gamma: f64, omega_p: f64) -> Self {
        Self {
            kind: ChannelKind::Lorentz,
            strength,
            omega0,
            gamma,
            omega_p,
            sigma_xx: 0.0,
            sigma_xy: 0.0,
        }
    }

    pub fn drude(strength: f64, gamma: f64, omega_p: f64) -> Self {
        Self {
            kind: ChannelKind::Drude,
            strength,
            omega0: 0.0,
            gamma,
            omega_p,
            sigma_xx: 0.0,
            sigma_xy: 0.0,
        }
    }

    pub fn conductivity(strength: f64, gamma: f64, sigma_xx: f64, sigma_xy: f64) -> Self {
        Self {
            kind: ChannelKind::Conductivity,
            strength,
            omega0: 0.0,
            gamma,
            omega_p: 0.0,
            sigma_xx,
            sigma_xy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.strength,
            self.omega0,
            self.gamma,
            self.omega_p,
            self.sigma_xx,
            self.sigma_xy,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidInput(format!("non-finite channel parameter in {self:?}")));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "channel damping must be positive, got {}",
                self.gamma
            )));
        }
        if self.omega0 < 0.0 || self.omega_p < 0.0 {
            return Err(Error::InvalidInput("channel frequencies must be non-negative".into()));
        }
        if self.kind == ChannelKind::Conductivity && !(self.sigma_xx > 0.0) {
            return Err(Error::InvalidInput("conductivity channel needs sigma_xx > 0".into()));
        }
        Ok(())
    }

    pub fn is_gain(&self) -> bool {
        self.strength < 0.0
    }

    fn has_zero_pole(&self) -> bool {
        matches!(self.kind, ChannelKind::Drude | ChannelKind::Conductivity)
    }

    /// Dispersive conductivity `σ(ω) = σ₀ γ / (γ - iω)`.
    pub fn sigma(&self, sigma0: f64, omega: Complex64) -> Complex64 {
        sigma0 * self.gamma / (self.gamma - Complex64::i() * omega)
    }

    /// Channel susceptibility at (possibly complex) frequency ω.
    pub fn eval(&self, omega: Complex64) -> Result<Complex64> {
        if omega == Complex64::new(0.0, 0.0) && self.has_zero_pole() {
            return Err(Error::Singular(format!("{:?} channel has a pole at ω = 0", self.kind)));
        }
        let i = Complex64::i();
        let v = match self.kind {
            ChannelKind::Lorentz => {
                self.strength * self.omega_p * self.omega_p
                    / (self.omega0 * self.omega0 - omega * omega - i * self.gamma * omega)
            }
            ChannelKind::Drude => {
                -self.strength * self.omega_p * self.omega_p / (omega * omega + i * self.gamma * omega)
            }
            ChannelKind::Conductivity => i * self.strength * self.sigma(self.sigma_xx, omega) / (EPS0 * omega),
        };
        Ok(v)
    }

    /// Susceptibility as `num / den` with `den` a polynomial in ω scaled by
    /// the plasma frequency; finite everywhere, including at the poles.
    pub fn rational(&self, omega: Complex64) -> (Complex64, Complex64) {
        let i = Complex64::i();
        let wp2 = self.plasma_sq();
        match self.kind {
            ChannelKind::Lorentz => (
                Complex64::new(self.strength, 0.0),
                (self.omega0 * self.omega0 - omega * omega - i * self.gamma * omega) / wp2,
            ),
            ChannelKind::Drude => (
                Complex64::new(-self.strength, 0.0),
                (omega * omega + i * self.gamma * omega) / wp2,
            ),
            ChannelKind::Conductivity => (i * self.strength, omega * (self.gamma - i * omega) / wp2),
        }
    }

    /// Frequencies where the channel has sharp structure.
    pub fn resonance(&self) -> f64 {
        match self.kind {
            ChannelKind::Lorentz => self.omega0,
            _ => 0.0,
        }
    }

    /// Squared plasma frequency (conductivity channels: `σ_xx γ / ε₀`).
    pub fn plasma_sq(&self) -> f64 {
        match self.kind {
            ChannelKind::Conductivity => self.sigma_xx * self.gamma / EPS0,
            _ => self.omega_p * self.omega_p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialResponse {
    pub channels: Vec<PermittivityChannel>,
    pub background: f64,
    /// In-plane body velocity, m/s.
    #[serde(default)]
    pub velocity: [f64; 2],
    /// In-plane carrier drift along the bias, m/s.
    #[serde(default)]
    pub drift_bias: [f64; 2],
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl MaterialResponse {
    pub fn vacuum() -> Self {
        Self::dielectric(1.0)
    }

    pub fn dielectric(background: f64) -> Self {
        Self {
            channels: Vec::new(),
            background,
            velocity: [0.0; 2],
            drift_bias: [0.0; 2],
        }
    }

    pub fn new(background: f64, channels: Vec<PermittivityChannel>) -> Self {
        Self {
            channels,
            background,
            velocity: [0.0; 2],
            drift_bias: [0.0; 2],
        }
    }

    pub fn with_velocity(mut self, v: [f64; 2]) -> Self {
        self.velocity = v;
        self
    }

    pub fn with_drift(mut self, v_d: [f64; 2]) -> Self {
        self.drift_bias = v_d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.background >= 1.0) || !self.background.is_finite() {
            return Err(Error::InvalidInput(format!(
                "background must be finite and >= 1, got {}",
                self.background
            )));
        }
        for c in &self.channels {
            c.validate()?;
        }
        let speed = self.velocity[0].hypot(self.velocity[1]);
        if !(speed < crate::constants::C) {
            return Err(Error::InvalidInput(format!("|v| = {speed} m/s must be below c")));
        }
        if !self.drift_bias.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("non-finite drift bias".into()));
        }
        Ok(())
    }

    pub fn is_vacuum(&self) -> bool {
        self.channels.is_empty() && self.background == 1.0
    }

    pub fn is_moving(&self) -> bool {
        self.velocity != [0.0; 2]
    }

    pub fn is_biased(&self) -> bool {
        self.drift_bias != [0.0; 2]
    }

    /// No inverted channel, no motion and no drift: the material is passive.
    pub fn is_passive(&self) -> bool {
        !self.is_moving() && !self.is_biased() && self.channels.iter().all(|c| !c.is_gain())
    }

    pub fn has_hall(&self) -> bool {
        self.channels
            .iter()
            .any(|c| c.kind == ChannelKind::Conductivity && c.sigma_xy != 0.0)
    }

    /// Rest-frame permittivity at complex frequency.
    pub fn eval_complex(&self, omega: Complex64) -> Result<Complex64> {
        let mut eps = Complex64::new(self.background, 0.0);
        for c in &self.channels {
            eps += c.eval(omega)?;
        }
        Ok(eps)
    }

    /// Rest-frame permittivity `background + Σ ε_ℓ(ω)`.
    pub fn eval_epsilon(&self, omega: f64) -> Result<Complex64> {
        self.eval_complex(Complex64::new(omega, 0.0))
    }

    /// Per-channel susceptibilities at real ω.
    pub fn channel_values(&self, omega: f64) -> Result<Vec<Complex64>> {
        self.channels
            .iter()
            .map(|c| c.eval(Complex64::new(omega, 0.0)))
            .collect()
    }

    /// Split of the imaginary permittivity into its loss (`≥ 0`) and gain
    /// (`≤ 0`) parts, summed channel by channel. Channels with a vanishing
    /// imaginary part contribute to neither.
    pub fn split_loss_gain(&self, omega: f64) -> Result<(f64, f64)> {
        let mut loss = 0.0;
        let mut gain = 0.0;
        for v in self.channel_values(omega)? {
            if v.im > 0.0 {
                loss += v.im;
            } else if v.im < 0.0 {
                gain += v.im;
            }
        }
        Ok((loss, gain))
    }

    /// Response of the moving body seen in the lab frame:
    /// the rest response evaluated at `ω - k∥·v`.
    pub fn doppler_shift(&self, omega: f64, k: [f64; 2]) -> Result<Complex64> {
        self.eval_epsilon(omega - dot(k, self.velocity))
    }

    /// Carrier drift velocity of a conductivity channel: the bias drift
    /// rotated by the Hall angle, `v_d + (σ_xy/σ_xx) ẑ × v_d`.
    pub fn carrier_drift(&self, channel: &PermittivityChannel) -> [f64; 2] {
        if channel.kind != ChannelKind::Conductivity {
            return [0.0; 2];
        }
        let r = channel.sigma_xy / channel.sigma_xx;
        let vd = self.drift_bias;
        [vd[0] - r * vd[1], vd[1] + r * vd[0]]
    }

    /// Frequency argument seen by a channel for a lab-frame mode (ω, k∥).
    fn shifted(&self, channel: &PermittivityChannel, omega: Complex64, k: [f64; 2]) -> Complex64 {
        let u = self.carrier_drift(channel);
        let v = [self.velocity[0] + u[0], self.velocity[1] + u[1]];
        omega - dot(k, v)
    }

    /// Lab-frame scalar permittivity for a mode (ω, k∥): every channel is
    /// Doppler shifted by the body velocity, conductivity channels
    /// additionally by their carrier drift.
    pub fn eval_lab(&self, omega: Complex64, k: [f64; 2]) -> Result<Complex64> {
        let mut eps = Complex64::new(self.background, 0.0);
        for c in &self.channels {
            eps += c.eval(self.shifted(c, omega, k))?;
        }
        Ok(eps)
    }

    /// Lab-frame permittivity as `num / den` with `den` the product of the
    /// channel denominators: both are entire in ω, so modal functions built
    /// from them carry no poles.
    pub fn eval_lab_rational(&self, omega: Complex64, k: [f64; 2]) -> (Complex64, Complex64) {
        let parts: Vec<(Complex64, Complex64)> = self
            .channels
            .iter()
            .map(|c| c.rational(self.shifted(c, omega, k)))
            .collect();
        let one = Complex64::new(1.0, 0.0);
        let den: Complex64 = parts.iter().fold(one, |acc, p| acc * p.1);
        let mut num = den * self.background;
        for (l, p) in parts.iter().enumerate() {
            let others = parts
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != l)
                .fold(one, |acc, (_, q)| acc * q.1);
            num += p.0 * others;
        }
        (num, den)
    }

    /// Lab-frame permittivity at real ω together with its loss and gain
    /// parts, evaluating each channel once.
    pub fn eval_lab_split(&self, omega: f64, k: [f64; 2]) -> Result<(Complex64, f64, f64)> {
        let mut eps = Complex64::new(self.background, 0.0);
        let (mut loss, mut gain) = (0.0, 0.0);
        for c in &self.channels {
            let v = c.eval(self.shifted(c, Complex64::new(omega, 0.0), k))?;
            eps += v;
            if v.im > 0.0 {
                loss += v.im;
            } else {
                gain += v.im;
            }
        }
        Ok((eps, loss, gain))
    }

    /// Loss/gain split of the lab-frame response at real ω.
    pub fn split_lab(&self, omega: f64, k: [f64; 2]) -> Result<(f64, f64)> {
        let mut loss = 0.0;
        let mut gain = 0.0;
        for c in &self.channels {
            let v = c.eval(self.shifted(c, Complex64::new(omega, 0.0), k))?;
            if v.im > 0.0 {
                loss += v.im;
            } else if v.im < 0.0 {
                gain += v.im;
            }
        }
        Ok((loss, gain))
    }

    /// In-plane conductivity tensor of the biased conductor for a lab-frame
    /// mode (ω, k∥). Each channel's longitudinal and Hall parts are evaluated
    /// at its drift-shifted frequency; the Hall part stays antisymmetric.
    pub fn biased_conductivity(&self, omega: f64, k: [f64; 2]) -> Result<[[Complex64; 2]; 2]> {
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        let mut any = false;
        for c in self.channels.iter().filter(|c| c.kind == ChannelKind::Conductivity) {
            any = true;
            let w = self.shifted(c, Complex64::new(omega, 0.0), k);
            let sxx = c.strength * c.sigma(c.sigma_xx, w);
            let sxy = c.strength * c.sigma(c.sigma_xy, w);
            out[0][0] += sxx;
            out[1][1] += sxx;
            out[0][1] += sxy;
            out[1][0] -= sxy;
        }
        if !any {
            return Err(Error::InvalidInput(
                "biased_conductivity needs a conductivity channel".into(),
            ));
        }
        Ok(out)
    }

    /// Effective imaginary permittivity for a mode travelling along k∥,
    /// `Im[i k̂·σ·k̂ / (ε₀ ω)]` from the biased conductivity tensor.
    pub fn effective_loss(&self, omega: f64, k: [f64; 2]) -> Result<f64> {
        let s = self.biased_conductivity(omega, k)?;
        let kn = k[0].hypot(k[1]);
        let (a, b) = if kn > 0.0 { (k[0] / kn, k[1] / kn) } else { (1.0, 0.0) };
        let long = a * a * s[0][0] + a * b * (s[0][1] + s[1][0]) + b * b * s[1][1];
        let _ = long;
        // The longitudinal projection of the antisymmetric part vanishes, so
        // each channel contributes its own shifted susceptibility.
        let mut im = 0.0;
        for c in self.channels.iter().filter(|c| c.kind == ChannelKind::Conductivity) {
            im += c.eval(self.shifted(c, Complex64::new(omega, 0.0), k))?.im;
        }
        Ok(im)
    }

    /// Characteristic frequencies (channel resonances and plasma scales).
    pub fn frequency_scales(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .channels
            .iter()
            .flat_map(|c| {
                let wp = c.plasma_sq().sqrt();
                [
                    c.resonance(),
                    wp,
                    (c.resonance().powi(2) + wp * wp / (self.background + 1.0)).sqrt(),
                    c.gamma,
                ]
            })
            .filter(|w| *w > 0.0 && w.is_finite())
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Real frequencies where `Re ε(ω) = -1` (nonretarded surface modes),
    /// found on a log grid over the material's frequency scales.
    pub fn surface_modes(&self) -> Vec<f64> {
        let scales = self.frequency_scales();
        let (Some(&lo), Some(&hi)) = (scales.first(), scales.last()) else {
            return Vec::new();
        };
        let (lo, hi) = (lo * 1e-2, hi * 10.0);
        let n = 4000;
        let g = |w: f64| self.eval_epsilon(w).map(|e| e.re + 1.0).unwrap_or(f64::NAN);
        let xs: Vec<f64> = (0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect();
        let mut out = Vec::new();
        for w in xs.windows(2) {
            let (ga, gb) = (g(w[0]), g(w[1]));
            if ga.is_finite() && gb.is_finite() && ga.signum() != gb.signum() {
                let (mut a, mut b, mut fa) = (w[0], w[1], ga);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    let fm = g(m);
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate_semi_infinite, principal_value, QuadratureSpec};
    use proptest::prelude::*;

    const W0: f64 = 2.0e15;
    const G: f64 = 1.0e14;
    const WP: f64 = 3.0e15;

    #[test]
    fn vacuum_is_identity() {
        let e = MaterialResponse::vacuum().eval_epsilon(1.234e15).unwrap();
        assert_eq!(e, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn lorentz_at_resonance() {
        // f = 1, ω_p = ω₀: ε = 1 + i ω_p²/(γ ω₀)
        let m = MaterialResponse::new(1.0, vec![PermittivityChannel::lorentz(1.0, W0, G, W0)]);
        let e = m.eval_epsilon(W0).unwrap();
        let expected = Complex64::new(1.0, W0 * W0 / (G * W0));
        assert!((e - expected).norm() < 1e-12 * expected.norm());
        let inv = MaterialResponse::new(1.0, vec![PermittivityChannel::lorentz(-1.0, W0, G, WP)]);
        let e = inv.eval_epsilon(W0).unwrap();
        assert!((e.im + WP * WP / (G * W0)).abs() < 1e-12 * e.norm());
    }

    #[test]
    fn conductivity_singular_at_zero() {
        let m = MaterialResponse::new(1.0, vec![PermittivityChannel::conductivity(1.0, G, 1e6, 0.0)]);
        assert!(matches!(m.eval_epsilon(0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn split_examples() {
        // loss channel Im = +0.2 and gain channel Im = -0.05 at ω = ω₀:
        // Im ε_ℓ(ω₀) = f ω_p²/(γ ω₀).
        let wp_for = |im: f64| (im.abs() * G * W0).sqrt();
        let m = MaterialResponse::new(
            1.0,
            vec![
                PermittivityChannel::lorentz(1.0, W0, G, wp_for(0.2)),
                PermittivityChannel::lorentz(-1.0, W0, G, wp_for(0.05)),
            ],
        );
        let (l, g) = m.split_loss_gain(W0).unwrap();
        assert!((l - 0.2).abs() < 1e-12 && (g + 0.05).abs() < 1e-12);
        let lossy = MaterialResponse::new(2.0, vec![PermittivityChannel::drude(1.0, G, WP)]);
        let (l, g) = lossy.split_loss_gain(W0).unwrap();
        assert_eq!(g, 0.0);
        assert_eq!(l, lossy.eval_epsilon(W0).unwrap().im);
        let gain = MaterialResponse::new(1.0, vec![PermittivityChannel::lorentz(-0.5, W0, G, WP)]);
        let (l, g) = gain.split_loss_gain(W0 * 1.1).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, gain.eval_epsilon(W0 * 1.1).unwrap().im);
    }

    #[test]
    fn doppler_identity_and_gain_sector() {
        let drude = MaterialResponse::new(1.0, vec![PermittivityChannel::drude(1.0, G, WP)]);
        let k = [1.0e7, 0.0];
        assert_eq!(drude.doppler_shift(W0, k).unwrap(), drude.eval_epsilon(W0).unwrap());
        let moving = drude.clone().with_velocity([1.0e6, 0.0]);
        let kv = 1.0e13;
        let e = moving.doppler_shift(0.5 * kv, k).unwrap();
        assert!(e.im < 0.0);
    }

    #[test]
    fn doppler_deviation_linear_in_v() {
        let drude = MaterialResponse::new(1.0, vec![PermittivityChannel::drude(1.0, G, WP)]);
        let k = [1.0e6, 0.0];
        let w = 5.0e15;
        let rest = drude.eval_epsilon(w).unwrap();
        let dev =
            |v: f64| (drude.clone().with_velocity([v, 0.0]).doppler_shift(w, k).unwrap() - rest).norm() / rest.norm();
        // finite-difference derivative of ε at ω predicts dev ≈ |ε'| k v / |ε|
        let h = w * 1e-6;
        let deriv = (drude.eval_epsilon(w + h).unwrap() - drude.eval_epsilon(w - h).unwrap()) / (2.0 * h);
        for &v in &[1.0e3, 1.0e2, 1.0e1] {
            let predicted = deriv.norm() * k[0] * v / rest.norm();
            assert!((dev(v) / predicted - 1.0).abs() < 1e-3, "v = {v}");
        }
        assert!(dev(1.0e2) / dev(1.0e3) < 0.1001);
    }

    #[test]
    fn biased_conductivity_symmetries() {
        let base = MaterialResponse::new(1.0, vec![PermittivityChannel::conductivity(1.0, G, 1.0e6, 0.0)]);
        let w = 3.0e13;
        let kp = [0.0, 2.0e7];
        let km = [0.0, -2.0e7];
        // v_d = 0: symmetric under k -> -k
        let s1 = base.biased_conductivity(w, [1e7, 3e6]).unwrap();
        let s2 = base.biased_conductivity(w, [-1e7, -3e6]).unwrap();
        assert_eq!(s1, s2);
        // σ_xy = 0, v_d along x: no transverse asymmetry
        let biased = base.clone().with_drift([1.0e5, 0.0]);
        assert_eq!(
            biased.effective_loss(w, kp).unwrap(),
            biased.effective_loss(w, km).unwrap()
        );
        assert_ne!(
            biased.effective_loss(w, [1e7, 0.0]).unwrap(),
            biased.effective_loss(w, [-1e7, 0.0]).unwrap()
        );
        // σ_xy ≠ 0: transverse asymmetry, odd under σ_xy -> -σ_xy
        let hall = |sxy: f64| {
            MaterialResponse::new(1.0, vec![PermittivityChannel::conductivity(1.0, G, 1.0e6, sxy)])
                .with_drift([1.0e5, 0.0])
        };
        let asym = |m: &MaterialResponse| m.effective_loss(w, kp).unwrap() - m.effective_loss(w, km).unwrap();
        let a = asym(&hall(2.0e5));
        let b = asym(&hall(-2.0e5));
        assert!(a.abs() > 0.0);
        assert!((a + b).abs() <= 1e-12 * a.abs());
        // Hall part antisymmetric in the tensor
        let t = hall(2.0e5).biased_conductivity(w, kp).unwrap();
        assert_eq!(t[0][1], -t[1][0]);
    }

    #[test]
    fn kramers_kronig_reconstruction() {
        let channels = [
            PermittivityChannel::lorentz(1.0, W0, G, WP),
            PermittivityChannel::drude(1.0, G, WP),
            PermittivityChannel::conductivity(1.0, G, 2.0e5, 0.0),
        ];
        let spec = QuadratureSpec::with_rel_tol(1e-8);
        for ch in channels {
            let im = |w: f64| ch.eval(Complex64::new(w, 0.0)).unwrap().im;
            for &w in &[0.5 * W0, 0.9 * W0, 1.5 * W0] {
                // Re χ(ω) = (2/π) PV ∫₀^∞ x Im χ(x)/(x² - ω²) dx
                let top = 40.0 * W0;
                let num = |x: f64| im(x) * 2.0 * x / (x + w);
                let pv = principal_value(num, 0.0, top, w, 0.5 * w, &spec).unwrap().value;
                let tail = integrate_semi_infinite(|x| im(x) * 2.0 * x / (x * x - w * w), top, top, &[], &spec)
                    .unwrap()
                    .value;
                let re = (-pv + tail) / std::f64::consts::PI;
                let exact = ch.eval(Complex64::new(w, 0.0)).unwrap().re;
                assert!(
                    (re - exact).abs() <= 0.01 * exact.abs(),
                    "{:?} at {w:e}: {re} vs {exact}",
                    ch.kind
                );
            }
        }
    }

    #[test]
    fn rational_form_matches_direct_evaluation() {
        let m = MaterialResponse::new(
            2.0,
            vec![
                PermittivityChannel::lorentz(0.5, W0, G, WP),
                PermittivityChannel::drude(1.0, G, WP),
                PermittivityChannel::conductivity(1.0, G, 1e6, 3e5),
            ],
        )
        .with_velocity([1e5, 0.0])
        .with_drift([0.0, 2e5]);
        for &(w, k) in &[((1e15, 3e13), [1e6, -2e6]), ((-4e14, 1e12), [3e7, 0.0])] {
            let w = Complex64::new(w.0, w.1);
            let (n, d) = m.eval_lab_rational(w, k);
            let e = m.eval_lab(w, k).unwrap();
            assert!((n / d - e).norm() < 1e-12 * e.norm());
        }
    }

    #[test]
    fn surface_mode_of_drude() {
        let m = MaterialResponse::new(1.0, vec![PermittivityChannel::drude(1.0, 1e12, WP)]);
        let modes = m.surface_modes();
        assert_eq!(modes.len(), 1);
        assert!((modes[0] / (WP / 2f64.sqrt()) - 1.0).abs() < 1e-6);
    }

    fn arb_channel() -> impl Strategy<Value = PermittivityChannel> {
        (0usize..3, -2.0f64..2.0, 0.1f64..5.0, 0.01f64..1.0, 0.1f64..5.0).prop_map(|(k, f, w0, g, wp)| match k {
            0 => PermittivityChannel::lorentz(f, w0 * 1e15, g * 1e15, wp * 1e15),
            1 => PermittivityChannel::drude(f, g * 1e15, wp * 1e15),
            _ => PermittivityChannel::conductivity(f, g * 1e15, wp * 1e5, 0.3 * wp * 1e5),
        })
    }

    proptest! {
        #[test]
        fn reality_symmetry(ch in arb_channel(), w in 0.05f64..10.0, wi in 0.0f64..2.0) {
            let z = Complex64::new(w * 1e15, wi * 1e15);
            let a = ch.eval(-z.conj()).unwrap();
            let b = ch.eval(z).unwrap().conj();
            prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
        }

        #[test]
        fn channel_sign_follows_strength(ch in arb_channel(), w in 0.05f64..10.0) {
            let im = ch.eval(Complex64::new(w * 1e15, 0.0)).unwrap().im;
            prop_assert_eq!(im > 0.0, ch.strength > 0.0);
        }

        #[test]
        fn split_is_additive(chs in proptest::collection::vec(arb_channel(), 0..5), w in 0.05f64..10.0) {
            let m = MaterialResponse::new(1.5, chs);
            let (l, g) = m.split_loss_gain(w * 1e15).unwrap();
            let total: f64 = m.channel_values(w * 1e15).unwrap().iter().map(|v| v.im).sum();
            prop_assert!(l >= 0.0 && g <= 0.0);
            prop_assert!((l + g - total).abs() <= 1e-15 * (l - g));
        }
    }
}

//! Quantum friction and Hall-drag lateral forces between two half-spaces
//! separated by a vacuum gap, in the nonretarded limit.
//!
//! Body 1 fills `z < 0`, body 2 fills `z > d`; either may move or carry a
//! drifting conductivity channel. The lateral momentum flux into body 1 is
//!
//! `F₁ = ħ/(2π)³ ∫d²k k ∫_0^∞ dω 4e^{-2kd} [Im R₁ g₂ - Im R₂ g₁] / |1 - R₁R₂e^{-2kd}|²`,
//!
//! with `R = (ε - 1)/(ε + 1)` of the lab-frame response and
//! `g = 2|ε″_<|/|ε + 1|²` its gain part: emission by one body's gain
//! channels absorbed by the other. Body 2 feels `-F₁`.

use std::cell::Cell;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::material::{ChannelKind, MaterialResponse};
use crate::numerics::{
    bisect_threshold, integrate_breaks, integrate_semi_infinite, stability_scan, Contour, Estimate, KGrid, ModalSystem,
    QuadratureSpec,
};

use super::{ObservableOptions, ObservableResult, Trap};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalfSpacePair {
    /// Occupies `z < 0`.
    pub first: MaterialResponse,
    /// Occupies `z > d`; forces are reported on this body.
    pub second: MaterialResponse,
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Lab-frame reflection `R` with the loss and gain parts of `Im R`.
fn response(m: &MaterialResponse, omega: f64, k: [f64; 2]) -> Result<(Complex64, f64, f64)> {
    let (eps, loss, gain) = m.eval_lab_split(omega, k)?;
    let den = (eps + 1.0).norm_sqr();
    if !(den > 0.0) {
        return Err(Error::Singular(format!("ε = -1 exactly at ω = {omega:e}")));
    }
    Ok(((eps - 1.0) / (eps + 1.0), 2.0 * loss / den, 2.0 * gain.abs() / den))
}

/// Drift velocities entering the Doppler shifts of a body's channels.
fn shift_velocities(m: &MaterialResponse) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = m
        .channels
        .iter()
        .map(|c| {
            let u = m.carrier_drift(c);
            [m.velocity[0] + u[0], m.velocity[1] + u[1]]
        })
        .collect();
    out.push(m.velocity);
    out.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    out.dedup();
    out
}

impl HalfSpacePair {
    pub fn new(first: MaterialResponse, second: MaterialResponse) -> Self {
        Self { first, second }
    }

    pub fn validate(&self) -> Result<()> {
        self.first.validate()?;
        self.second.validate()
    }

    fn is_static(&self) -> bool {
        [&self.first, &self.second]
            .iter()
            .all(|m| m.is_passive() && !m.is_moving() && !m.is_biased())
    }

    /// Direction of the drive: relative velocity, else any drift.
    fn drive(&self) -> [f64; 2] {
        let rel = [
            self.second.velocity[0] - self.first.velocity[0],
            self.second.velocity[1] - self.first.velocity[1],
        ];
        let cands = [rel, self.second.drift_bias, self.first.drift_bias];
        for v in cands {
            let n = v[0].hypot(v[1]);
            if n > 0.0 {
                return [v[0] / n, v[1] / n];
            }
        }
        [1.0, 0.0]
    }
}

/// Per-pair data that is expensive to recompute inside integrands.
#[derive(Debug, Clone)]
struct Features {
    modes: [Vec<f64>; 2],
    shifts: [Vec<[f64; 2]>; 2],
    scales: Vec<f64>,
    gain_channels: bool,
}

impl Features {
    fn new(pair: &HalfSpacePair) -> Self {
        let modes = [pair.first.surface_modes(), pair.second.surface_modes()];
        let mut scales = pair.first.frequency_scales();
        scales.extend(pair.second.frequency_scales());
        scales.extend(modes.iter().flatten());
        scales.sort_by(f64::total_cmp);
        Self {
            shifts: [shift_velocities(&pair.first), shift_velocities(&pair.second)],
            modes,
            scales,
            gain_channels: !(pair.first.is_passive() && pair.second.is_passive()),
        }
    }

    fn all_modes(&self) -> Vec<f64> {
        self.modes.iter().flatten().copied().collect()
    }

    fn max_speed(&self) -> f64 {
        self.shifts
            .iter()
            .flatten()
            .map(|v| v[0].hypot(v[1]))
            .fold(0.0, f64::max)
    }

    /// Wavevectors along `dir` where surface-mode branches of the two
    /// bodies (or of two channels) are Doppler shifted onto each other.
    fn crossings(&self, dir: [f64; 2]) -> Vec<f64> {
        let modes: Vec<f64> = self.all_modes();
        let speeds: Vec<f64> = self.shifts.iter().flatten().map(|&w| dot(w, dir)).collect();
        let mut out = Vec::new();
        for &ua in &speeds {
            for &ub in &speeds {
                let du = ub - ua;
                if du.abs() == 0.0 {
                    continue;
                }
                for &sa in &modes {
                    for &sb in &modes {
                        for num in [sa + sb, sa - sb] {
                            let k = num / du;
                            if k > 0.0 {
                                out.push(k);
                            }
                        }
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Real frequencies where the spectrum can be sharp at wavevector `k`:
    /// Doppler-shifted surface modes and Doppler band edges.
    fn omega_breaks(&self, k: [f64; 2]) -> Vec<f64> {
        let mut out = Vec::new();
        for b in 0..2 {
            for &w in &self.shifts[b] {
                let h = dot(k, w);
                out.push(h);
                for &s in &self.modes[b] {
                    out.push(h + s);
                    out.push(h - s);
                }
            }
        }
        out
    }
}

/// Coupled surface-mode function of the pair,
/// `[(ε₁ + 1)(ε₂ + 1) - (ε₁ - 1)(ε₂ - 1)e^{-2kd}]` multiplied by every
/// channel denominator, so that it is entire in ω and its zeros are
/// exactly the coupled modes.
#[derive(Debug, Clone)]
pub struct PairModes {
    pub pair: HalfSpacePair,
    pub gap: f64,
    features: Features,
}

impl PairModes {
    pub fn new(pair: HalfSpacePair, gap: f64) -> Self {
        let features = Features::new(&pair);
        Self { pair, gap, features }
    }
}

impl ModalSystem for PairModes {
    fn denominator(&self, omega: Complex64, k: [f64; 2]) -> Complex64 {
        let q = k[0].hypot(k[1]);
        let (n1, d1) = self.pair.first.eval_lab_rational(omega, k);
        let (n2, d2) = self.pair.second.eval_lab_rational(omega, k);
        (n1 + d1) * (n2 + d2) - (n1 - d1) * (n2 - d2) * (-2.0 * q * self.gap).exp()
    }

    fn scale(&self, omega: Complex64, k: [f64; 2]) -> f64 {
        let (n1, d1) = self.pair.first.eval_lab_rational(omega, k);
        let (n2, d2) = self.pair.second.eval_lab_rational(omega, k);
        ((n1.norm() + d1.norm()) * (n2.norm() + d2.norm())).max(f64::MIN_POSITIVE)
    }

    fn hint_frequencies(&self, k: [f64; 2]) -> Vec<f64> {
        let mut v = self.features.omega_breaks(k);
        v.extend(v.clone().iter().map(|x| -x));
        v
    }
}

fn pair_is_stable(pair: &HalfSpacePair, d: f64) -> Result<bool> {
    let sys = PairModes::new(pair.clone(), d);
    let f = &sys.features;
    let (w_lo, w_hi) = match (f.scales.first(), f.scales.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Ok(true),
    };
    // Coupling across the gap is e^{-2kd}; beyond k ~ 15/d it is below
    // 1e-13 and cannot destabilise anything.
    let k_max = 15.0 / d;
    let w_max = 2.0 * (w_hi + k_max * f.max_speed());
    let contour = Contour {
        re_min: -w_max,
        re_max: w_max,
        im_min: 1e-4 * w_lo,
        im_max: 2.0 * w_hi,
        samples_per_edge: 512,
    };
    // A log line along the drive plus every wavevector where two
    // Doppler-shifted surface-mode branches cross: near threshold the
    // unstable band shrinks onto these crossings.
    let dir = pair.drive();
    let (k_min, n) = (0.05 / d, 48);
    let mut ks: Vec<f64> = (0..n)
        .map(|i| k_min * (k_max / k_min).powf(i as f64 / (n - 1) as f64))
        .collect();
    ks.extend(f.crossings(dir).into_iter().filter(|&k| k < k_max));
    let grid = KGrid::Points(ks.into_iter().map(|k| [k * dir[0], k * dir[1]]).collect());
    Ok(stability_scan(&sys, &contour, &grid)?.stable)
}

/// Bracket of the speed of the second body (along its current direction
/// of motion) at which the pair first develops a growing mode, or `None`
/// if it stays stable up to `v_max`.
pub fn friction_threshold(pair: &HalfSpacePair, d: f64, v_max: f64, rel_width: f64) -> Result<Option<(f64, f64)>> {
    pair.validate()?;
    let v = pair.second.velocity;
    let n = v[0].hypot(v[1]);
    if !(n > 0.0) {
        return Err(Error::InvalidInput(
            "second body must move to define a friction threshold".into(),
        ));
    }
    let dir = [v[0] / n, v[1] / n];
    let at = |s: f64| {
        let mut p = pair.clone();
        p.second.velocity = [dir[0] * s, dir[1] * s];
        p
    };
    if pair_is_stable(&at(v_max), d)? {
        return Ok(None);
    }
    bisect_threshold(|s| Ok(!pair_is_stable(&at(s), d)?), 0.0, v_max, rel_width).map(Some)
}

/// `∫_0^∞ dω N(ω, k)` and whether any gain was met.
fn spectral(
    pair: &HalfSpacePair,
    feat: &Features,
    d: f64,
    k: [f64; 2],
    spec: &QuadratureSpec,
    trap: &Trap,
    gain: &Cell<bool>,
) -> f64 {
    let q = k[0].hypot(k[1]);
    let e = (-2.0 * q * d).exp();
    if e == 0.0 {
        return 0.0;
    }
    let n = |w: f64| -> f64 {
        let r = response(&pair.first, w, k).and_then(|a| Ok((a, response(&pair.second, w, k)?)));
        let ((r1, l1, g1), (r2, l2, g2)) = match r {
            Ok(v) => v,
            Err(err) => {
                trap.take::<f64>(Err(err));
                return 0.0;
            }
        };
        if g1 > 0.0 || g2 > 0.0 {
            gain.set(true);
        }
        let den = (1.0 - r1 * r2 * e).norm_sqr();
        4.0 * e * ((l1 - g1) * g2 - (l2 - g2) * g1) / den
    };
    let mut breaks = feat.omega_breaks(k);
    breaks.retain(|x| *x > 0.0);
    let est = if feat.gain_channels {
        let top = 2.0 * breaks.iter().chain(&feat.scales).copied().fold(0.0, f64::max);
        let mut pts = vec![0.0, top];
        pts.extend(breaks.iter().copied().filter(|&b| b < top));
        let body = integrate_breaks(n, &pts, spec);
        integrate_semi_infinite(n, top, top, &[], spec).map(|t| body.plus(t))
    } else {
        // Passive channels only gain inside the anomalous Doppler band
        // 0 < ω < k·w.
        let edge = feat.shifts.iter().flatten().map(|&w| dot(k, w)).fold(0.0, f64::max);
        if edge <= 0.0 {
            return 0.0;
        }
        let mut pts = vec![0.0, edge];
        pts.extend(breaks.iter().copied().filter(|&b| b < edge));
        Ok(integrate_breaks(n, &pts, spec))
    };
    trap.take(
        est.and_then(|e| e.into_result("friction frequency integral"))
            .map(|e| e.value),
    )
}

/// Lateral force per area on the second body (N/m², in-plane vector)
/// together with quadrature diagnostics.
fn lateral_force(pair: &HalfSpacePair, d: f64, opts: &ObservableOptions) -> Result<(Estimate<[f64; 2]>, bool)> {
    let e1 = pair.drive();
    let e2 = [-e1[1], e1[0]];
    // Relative errors of nested levels add up linearly; a factor 3 per
    // level keeps their sum below the outer tolerance.
    let mid = QuadratureSpec {
        rel_tol: opts.spec_2d.rel_tol / 3.0,
        ..opts.spec_2d
    };
    let inner = QuadratureSpec {
        rel_tol: opts.spec_2d.rel_tol / 10.0,
        ..opts.spec_2d
    };
    let counter = Cell::new(0usize);
    let trap = Trap::new();
    let gain = Cell::new(false);
    let kvec = |a: f64, b: f64| [a * e1[0] + b * e2[0], a * e1[1] + b * e2[1]];
    let feat = Features::new(pair);
    let m = |a: f64, b: f64| {
        counter.set(counter.get() + 1);
        spectral(pair, &feat, d, kvec(a, b), &inner, &trap, &gain)
    };
    // q₂ > 0 and q₂ < 0 are folded together so that mirror symmetry in q₂
    // holds exactly.
    let row = |a: f64| -> [f64; 2] {
        if trap.tripped() {
            return [0.0; 2];
        }
        let est = integrate_semi_infinite(
            |b: f64| {
                let (p, n) = (m(a, b), m(a, -b));
                [a * (p + n), b * (p - n)]
            },
            0.0,
            0.5 / d,
            &[],
            &mid,
        )
        .and_then(|e| e.into_result("friction transverse wavevector integral"));
        trap.take(est.map(|e| e.value))
    };
    // Wavevectors along the drive where a body-1 mode meets a Doppler-shifted
    // body-2 mode.
    let mut qb = Vec::new();
    let modes = feat.all_modes();
    for shifts in &feat.shifts {
        for &w in shifts {
            let s = dot(w, e1).abs();
            if s > 0.0 {
                for &a in &modes {
                    for &b in &modes {
                        qb.push((a + b) / s);
                    }
                }
            }
        }
    }
    qb.retain(|&x| x < 200.0 / d);
    let pos = integrate_semi_infinite(row, 0.0, 0.5 / d, &qb, &opts.spec_2d)?;
    let neg = integrate_semi_infinite(|a: f64| row(-a), 0.0, 0.5 / d, &qb, &opts.spec_2d)?;
    trap.finish()?;
    let est = pos.plus(neg).into_result("friction wavevector integral")?;
    let s = -HBAR / (8.0 * std::f64::consts::PI.powi(3));
    let f = [
        s * (est.value[0] * e1[0] + est.value[1] * e2[0]),
        s * (est.value[0] * e1[1] + est.value[1] * e2[1]),
    ];
    let out = Estimate {
        value: f,
        error: s.abs() * est.error,
        evaluations: counter.get(),
        ..est
    };
    Ok((out, gain.get()))
}

fn guard_pair(pair: &HalfSpacePair, d: f64, opts: &ObservableOptions) -> Result<bool> {
    if pair.is_static() {
        return Ok(true);
    }
    if pair_is_stable(pair, d)? {
        return Ok(true);
    }
    if opts.allow_unstable {
        return Ok(false);
    }
    let v = pair.second.velocity;
    let speed = v[0].hypot(v[1]);
    let bracket = if speed > 0.0 {
        let mut rest = pair.clone();
        rest.second.velocity = [0.0; 2];
        if pair_is_stable(&rest, d)? {
            friction_threshold(pair, d, speed, opts.threshold_width)?
        } else {
            None
        }
    } else {
        None
    };
    Err(Error::Unstable {
        reason: format!("pair at gap {d:e} m has a growing coupled surface mode"),
        threshold_bracket: bracket,
    })
}

fn check(pair: &HalfSpacePair, d: f64, opts: &ObservableOptions) -> Result<()> {
    opts.validate()?;
    pair.validate()?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidInput(format!("gap must be positive, got {d}")));
    }
    Ok(())
}

/// Quantum friction: lateral force per area (N/m², `[F_x, F_y]`) on the
/// second body. Refused with the threshold bracket when the relative
/// motion has made the pair unstable.
pub fn quantum_friction_force(pair: &HalfSpacePair, d: f64, opts: &ObservableOptions) -> Result<ObservableResult> {
    check(pair, d, opts)?;
    let stable = guard_pair(pair, d, opts)?;
    let (est, gain) = lateral_force(pair, d, opts)?;
    let mut out = ObservableResult::new(est.value.to_vec(), "N/m^2");
    out.abs_error = est.error;
    out.subdivisions = est.subdivisions;
    out.evaluations = est.evaluations;
    out.stable = stable;
    out.gain = gain;
    Ok(out)
}

/// Lateral force per area on a drift-biased conductor (the second body)
/// transverse to the bias, for drift speed `v_d` along x and Hall
/// conductivity `σ_xy` (S/m) set on all of its conductivity channels.
/// The longitudinal component is reported in the extras.
pub fn hall_lateral_force(
    pair: &HalfSpacePair,
    d: f64,
    v_d: f64,
    sigma_xy: f64,
    opts: &ObservableOptions,
) -> Result<ObservableResult> {
    let mut p = pair.clone();
    let mut any = false;
    for c in p
        .second
        .channels
        .iter_mut()
        .filter(|c| c.kind == ChannelKind::Conductivity)
    {
        c.sigma_xy = sigma_xy;
        any = true;
    }
    if !any {
        return Err(Error::InvalidInput(
            "Hall force needs a conductivity channel on the second body".into(),
        ));
    }
    p.second.drift_bias = [v_d, 0.0];
    let mut out = quantum_friction_force(&p, d, opts)?;
    let f = out.value.clone();
    out.value = vec![f[1]];
    out.extras.insert("longitudinal".into(), f[0]);
    Ok(out)
}

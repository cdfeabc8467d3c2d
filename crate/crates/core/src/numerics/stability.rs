use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A family of modal denominators `D(ω; k∥)` whose zeros are the poles of
/// the Green tensor. `D` must be analytic in ω inside the scanned contour.
pub trait ModalSystem: Sync {
    fn denominator(&self, omega: Complex64, k: [f64; 2]) -> Complex64;

    /// Real frequencies near which `D` has sharp structure (resonances);
    /// the contour sampling is densified around them.
    fn hint_frequencies(&self, _k: [f64; 2]) -> Vec<f64> {
        Vec::new()
    }

    /// Positive scale of the denominator's constituent terms, so that
    /// `|D| / scale` measures closeness to a mode comparably across k.
    fn scale(&self, _omega: Complex64, _k: [f64; 2]) -> f64 {
        1.0
    }
}

/// Rectangle in the complex frequency plane, traversed counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contour {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    /// Initial samples per edge before adaptive refinement.
    #[serde(default = "default_samples")]
    pub samples_per_edge: usize,
}

fn default_samples() -> usize {
    256
}

impl Contour {
    /// Upper-half-plane box `[0, re_max] × [im_min, im_max]`.
    pub fn upper_half(re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self {
            re_min: 0.0,
            re_max,
            im_min,
            im_max,
            samples_per_edge: default_samples(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.re_max > self.re_min && self.im_max > self.im_min) || self.samples_per_edge < 4 {
            return Err(Error::InvalidInput(format!("degenerate contour {self:?}")));
        }
        Ok(())
    }

    fn nudged(&self, attempt: usize) -> Self {
        let f = 1.0 + 0.0137 * attempt as f64;
        let wr = self.re_max - self.re_min;
        Self {
            re_min: self.re_min - 1e-4 * wr * attempt as f64,
            re_max: self.re_max + 1.3e-4 * wr * attempt as f64,
            im_min: self.im_min * f,
            im_max: self.im_max * (1.0 + 0.011 * attempt as f64),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum KGrid {
    Points(Vec<[f64; 2]>),
    /// Points along `direction` (normalised internally), optionally
    /// log-spaced, with golden-section refinement around the sharpest
    /// resonance found on the line.
    Line {
        direction: [f64; 2],
        k_min: f64,
        k_max: f64,
        points: usize,
        log: bool,
        refine: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuspectZero {
    pub omega: Complex64,
    pub k: [f64; 2],
    pub winding: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub zeros: Vec<SuspectZero>,
    pub contour: Contour,
    pub k_evaluated: usize,
    pub nudges: usize,
}

const MAX_DEPTH: u32 = 48;

fn seg_phase(
    f: &impl Fn(Complex64) -> Complex64,
    za: Complex64,
    fa: Complex64,
    zb: Complex64,
    fb: Complex64,
    depth: u32,
) -> Result<f64> {
    let zm = 0.5 * (za + zb);
    let fm = f(zm);
    if !(fm.norm() > 0.0) || !fm.is_finite() {
        return Err(Error::Singular(format!("denominator vanishes on contour near {zm}")));
    }
    let dab = (fb / fa).arg();
    let dam = (fm / fa).arg();
    let dmb = (fb / fm).arg();
    let consistent = (dam + dmb - dab).abs() < 1e-9;
    if consistent && dam.abs() + dmb.abs() < PI / 3.0 {
        return Ok(dab);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Singular(format!("unresolved phase on contour near {zm}")));
    }
    Ok(seg_phase(f, za, fa, zm, fm, depth + 1)? + seg_phase(f, zm, fm, zb, fb, depth + 1)?)
}

fn edge_nodes(a: f64, b: f64, n: usize, hints: &[f64]) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    xs.push(b);
    let w = (b - a).abs();
    for &h in hints {
        if h > a.min(b) && h < a.max(b) {
            let mut d = w * 1e-9;
            while d < w / n as f64 {
                xs.push(h - d);
                xs.push(h + d);
                d *= 2.0;
            }
            xs.push(h);
        }
    }
    xs.retain(|x| *x >= a.min(b) && *x <= a.max(b));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if b < a {
        xs.reverse();
    }
    xs
}

/// Winding number of `f` around the rectangle `contour`, i.e. the number of
/// zeros minus poles enclosed.
pub fn winding_number(f: impl Fn(Complex64) -> Complex64, contour: &Contour, hints: &[f64]) -> Result<i64> {
    contour.validate()?;
    let c = contour;
    let n = c.samples_per_edge;
    let mut path: Vec<Complex64> = Vec::new();
    for x in edge_nodes(c.re_min, c.re_max, n, hints) {
        path.push(Complex64::new(x, c.im_min));
    }
    for y in edge_nodes(c.im_min, c.im_max, n / 4 + 4, &[]).into_iter().skip(1) {
        path.push(Complex64::new(c.re_max, y));
    }
    for x in edge_nodes(c.re_max, c.re_min, n, hints).into_iter().skip(1) {
        path.push(Complex64::new(x, c.im_max));
    }
    for y in edge_nodes(c.im_max, c.im_min, n / 4 + 4, &[]).into_iter().skip(1) {
        path.push(Complex64::new(c.re_min, y));
    }
    let vals: Vec<Complex64> = path.iter().map(|&z| f(z)).collect();
    if let Some(i) = vals.iter().position(|v| !(v.norm() > 0.0) || !v.is_finite()) {
        return Err(Error::Singular(format!(
            "denominator vanishes on contour at {}",
            path[i]
        )));
    }
    let mut total = 0.0;
    for i in 0..path.len() - 1 {
        total += seg_phase(&f, path[i], vals[i], path[i + 1], vals[i + 1], 0)?;
    }
    let w = total / (2.0 * PI);
    let r = w.round();
    if (w - r).abs() > 1e-3 {
        return Err(Error::Singular(format!("non-integer winding {w}")));
    }
    Ok(r as i64)
}

fn winding_with_nudge(
    f: impl Fn(Complex64) -> Complex64 + Copy,
    contour: &Contour,
    hints: &[f64],
) -> Result<(i64, Contour, usize)> {
    let mut last = None;
    for attempt in 0..4 {
        let c = if attempt == 0 {
            *contour
        } else {
            contour.nudged(attempt)
        };
        match winding_number(f, &c, hints) {
            Ok(w) => return Ok((w, c, attempt)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Locate the zeros inside `contour` by recursive bisection of the region
/// followed by Newton polishing.
pub fn locate_zeros(
    f: impl Fn(Complex64) -> Complex64 + Copy,
    contour: &Contour,
    hints: &[f64],
    depth: u32,
) -> Result<Vec<(Complex64, i64)>> {
    let w = winding_number(f, contour, hints)?;
    if w == 0 {
        return Ok(Vec::new());
    }
    let wr = contour.re_max - contour.re_min;
    let wi = contour.im_max - contour.im_min;
    let small = wr.max(wi) < 1e-10 * contour.re_max.abs().max(contour.im_max.abs()).max(1e-300);
    if (w == 1 && depth >= 6) || depth >= 40 || small {
        let z0 = Complex64::new(
            0.5 * (contour.re_min + contour.re_max),
            0.5 * (contour.im_min + contour.im_max),
        );
        let z = newton(f, z0, wr.max(wi)).unwrap_or(z0);
        let inside =
            z.re >= contour.re_min && z.re <= contour.re_max && z.im >= contour.im_min && z.im <= contour.im_max;
        return Ok(vec![(if inside { z } else { z0 }, w)]);
    }
    let halves = if wr >= wi {
        let m = 0.5 * (contour.re_min + contour.re_max);
        [Contour { re_max: m, ..*contour }, Contour { re_min: m, ..*contour }]
    } else {
        let m = 0.5 * (contour.im_min + contour.im_max);
        [Contour { im_max: m, ..*contour }, Contour { im_min: m, ..*contour }]
    };
    let mut out = Vec::new();
    for h in halves {
        let h = Contour {
            samples_per_edge: (h.samples_per_edge / 2).max(16),
            ..h
        };
        match locate_zeros(f, &h, hints, depth + 1) {
            Ok(v) => out.extend(v),
            // A zero sitting on the split line: shift the split slightly.
            Err(_) => {
                let c2 = contour.nudged(1);
                return locate_zeros(
                    f,
                    &Contour {
                        re_min: contour.re_min,
                        im_min: contour.im_min,
                        ..c2
                    },
                    hints,
                    depth + 1,
                );
            }
        }
    }
    Ok(out)
}

/// Newton iteration with a central-difference derivative.
pub fn newton(f: impl Fn(Complex64) -> Complex64, z0: Complex64, scale: f64) -> Option<Complex64> {
    let mut z = z0;
    let h = (scale * 1e-4).max(z0.norm() * 1e-12);
    for _ in 0..60 {
        let fz = f(z);
        let d = (f(z + h) - f(z - h)) / (2.0 * h);
        if !(d.norm() > 0.0) {
            return None;
        }
        let step = fz / d;
        z -= step;
        if !z.is_finite() {
            return None;
        }
        if step.norm() <= 1e-14 * z.norm().max(1e-300) {
            return Some(z);
        }
    }
    Some(z)
}

fn sharpness<S: ModalSystem + ?Sized>(sys: &S, k: [f64; 2], contour: &Contour) -> f64 {
    let hints = sys.hint_frequencies(k);
    let xs = edge_nodes(contour.re_min, contour.re_max, contour.samples_per_edge * 4, &hints);
    let eval = |x: f64| {
        let w = Complex64::new(x, contour.im_min);
        -(sys.denominator(w, k).norm() / sys.scale(w, k)).ln()
    };
    let (mut best_x, mut best) = (xs[0], f64::NEG_INFINITY);
    for &x in &xs {
        let v = eval(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let step = (contour.re_max - contour.re_min) / (contour.samples_per_edge * 4) as f64;
    let (_, v) = golden_max(
        eval,
        (best_x - step).max(contour.re_min),
        (best_x + step).min(contour.re_max),
        60,
    );
    v.max(best)
}

/// Golden-section maximisation on `[a, b]`; returns (argmax, max).
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn grid_points<S: ModalSystem + ?Sized>(sys: &S, grid: &KGrid, contour: &Contour) -> Vec<[f64; 2]> {
    match grid {
        KGrid::Points(p) => p.clone(),
        KGrid::Line {
            direction,
            k_min,
            k_max,
            points,
            log,
            refine,
        } => {
            let n = (*points).max(2);
            let norm = direction[0].hypot(direction[1]).max(1e-300);
            let dir = [direction[0] / norm, direction[1] / norm];
            let at = |t: f64| [dir[0] * t, dir[1] * t];
            let ts: Vec<f64> = (0..n)
                .map(|i| {
                    let s = i as f64 / (n - 1) as f64;
                    if *log {
                        k_min * (k_max / k_min).powf(s)
                    } else {
                        k_min + (k_max - k_min) * s
                    }
                })
                .collect();
            let mut pts: Vec<[f64; 2]> = ts.iter().map(|&t| at(t)).collect();
            if *refine {
                let sharp: Vec<f64> = ts.par_iter().map(|&t| sharpness(sys, at(t), contour)).collect();
                let i = sharp
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                let lo = ts[i.saturating_sub(1)];
                let hi = ts[(i + 1).min(n - 1)];
                let (t, _) = golden_max(|t| sharpness(sys, at(t), contour), lo, hi, 48);
                pts.push(at(t));
            }
            pts
        }
    }
}

/// Count upper-half-plane zeros of every modal denominator on the k grid.
/// The system is stable iff every winding number is zero.
pub fn stability_scan<S: ModalSystem + ?Sized>(sys: &S, contour: &Contour, grid: &KGrid) -> Result<StabilityReport> {
    contour.validate()?;
    if contour.im_min <= 0.0 {
        return Err(Error::InvalidInput(
            "stability contour must lie strictly in the upper half plane".into(),
        ));
    }
    let ks = grid_points(sys, grid, contour);
    let results: Vec<Result<(Vec<SuspectZero>, usize)>> = ks
        .par_iter()
        .map(|&k| {
            let hints = sys.hint_frequencies(k);
            let f = |w: Complex64| sys.denominator(w, k);
            let (w, c, nudges) = winding_with_nudge(f, contour, &hints)?;
            if w == 0 {
                return Ok((Vec::new(), nudges));
            }
            let zeros =
                locate_zeros(f, &c, &hints, 0).unwrap_or_else(|_| vec![(Complex64::new(f64::NAN, f64::NAN), w)]);
            Ok((
                zeros
                    .into_iter()
                    .map(|(omega, winding)| SuspectZero { omega, k, winding })
                    .collect(),
                nudges,
            ))
        })
        .collect();
    let mut zeros = Vec::new();
    let mut nudges = 0;
    for r in results {
        let (z, n) = r?;
        zeros.extend(z);
        nudges += n;
    }
    Ok(StabilityReport {
        stable: zeros.iter().all(|z| z.winding == 0),
        zeros,
        contour: *contour,
        k_evaluated: ks.len(),
        nudges,
    })
}

/// Bisection for the threshold of a monotone instability predicate
/// (`true` = unstable). Returns a bracket `[lo, hi]` with
/// `hi - lo <= rel_width * hi`.
pub fn bisect_threshold(
    mut unstable: impl FnMut(f64) -> Result<bool>,
    mut lo: f64,
    mut hi: f64,
    rel_width: f64,
) -> Result<(f64, f64)> {
    if unstable(lo)? {
        return Err(Error::InvalidInput(format!("lower bracket {lo:e} is already unstable")));
    }
    if !unstable(hi)? {
        return Err(Error::InvalidInput(format!("upper bracket {hi:e} is stable")));
    }
    while hi - lo > rel_width * hi.abs() {
        let mid = 0.5 * (lo + hi);
        if unstable(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(roots: &'static [Complex64]) -> impl Fn(Complex64) -> Complex64 + Copy {
        move |z| roots.iter().fold(Complex64::new(1.0, 0.0), |acc, r| acc * (z - r))
    }

    static ROOTS: [Complex64; 3] = [
        Complex64::new(1.0, 0.5),
        Complex64::new(2.0, -0.5),
        Complex64::new(3.0, 0.25),
    ];

    #[test]
    fn counts_polynomial_zeros() {
        let c = Contour::upper_half(4.0, 0.3, 1.0);
        assert_eq!(winding_number(poly(&ROOTS), &c, &[]).unwrap(), 1);
        let c = Contour::upper_half(4.0, 0.01, 1.0);
        assert_eq!(winding_number(poly(&ROOTS), &c, &[]).unwrap(), 2);
    }

    #[test]
    fn perturbing_contour_without_crossing_keeps_winding() {
        let a = Contour::upper_half(4.0, 0.1, 1.0);
        let b = Contour {
            re_min: -0.3,
            re_max: 3.7,
            im_min: 0.05,
            im_max: 0.9,
            samples_per_edge: 64,
        };
        assert_eq!(
            winding_number(poly(&ROOTS), &a, &[]).unwrap(),
            winding_number(poly(&ROOTS), &b, &[]).unwrap()
        );
    }

    #[test]
    fn locates_and_polishes() {
        let c = Contour::upper_half(4.0, 0.01, 1.0);
        let z = locate_zeros(poly(&ROOTS), &c, &[], 0).unwrap();
        assert_eq!(z.len(), 2);
        for (zz, w) in z {
            assert_eq!(w, 1);
            assert!((zz - ROOTS[0]).norm() < 1e-10 || (zz - ROOTS[2]).norm() < 1e-10, "{zz}");
        }
    }

    #[test]
    fn zero_on_contour_is_reported() {
        const ON_EDGE: [Complex64; 1] = [Complex64::new(1.0, 0.5)];
        let c = Contour::upper_half(2.0, 0.5, 1.0);
        assert!(winding_number(poly(&ON_EDGE), &c, &[]).is_err());
    }

    #[test]
    fn narrow_resonance_needs_hint() {
        // Lorentzian of width 1e-5 with an amplifying residue.
        let (w0, g) = (1.0, 1e-5);
        let f = move |z: Complex64| 1.0 + Complex64::new(0.0, 2.0 * g) / (w0 - z - Complex64::new(0.0, g));
        // zero at w0 + i g (upper half plane), pole below the axis
        let c = Contour {
            samples_per_edge: 16,
            ..Contour::upper_half(2.0, 1e-7, 1.0)
        };
        assert_eq!(winding_number(f, &c, &[w0]).unwrap(), 1);
    }

    #[test]
    fn bisection_brackets_threshold() {
        let (lo, hi) = bisect_threshold(|x| Ok(x > 0.7317), 0.0, 1.0, 1e-3).unwrap();
        assert!(lo <= 0.7317 && hi > 0.7317 && hi - lo <= 1e-3);
    }

    #[test]
    fn golden_section_finds_peak() {
        let (x, _) = golden_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 80);
        assert!((x - 0.3).abs() < 1e-8);
    }
}

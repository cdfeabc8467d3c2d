use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Tensor3;

use super::pairwise_sum;

/// Values that can be integrated: a real vector space with a norm used for
/// error control.
pub trait Integrand: Clone {
    fn zero() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn scale(&self, s: f64) -> Self;
    fn norm(&self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
}

impl Integrand for Tensor3 {
    fn zero() -> Self {
        Tensor3::zeros()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn scale(&self, s: f64) -> Self {
        self * Complex64::new(s, 0.0)
    }
    fn norm(&self) -> f64 {
        self.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl<A: Integrand, B: Integrand> Integrand for (A, B) {
    fn zero() -> Self {
        (A::zero(), B::zero())
    }
    fn add(&self, o: &Self) -> Self {
        (self.0.add(&o.0), self.1.add(&o.1))
    }
    fn scale(&self, s: f64) -> Self {
        (self.0.scale(s), self.1.scale(s))
    }
    fn norm(&self) -> f64 {
        self.0.norm().max(self.1.norm())
    }
}

impl<const N: usize> Integrand for [f64; N] {
    fn zero() -> Self {
        [0.0; N]
    }
    fn add(&self, o: &Self) -> Self {
        let mut r = *self;
        r.iter_mut().zip(o).for_each(|(a, b)| *a += b);
        r
    }
    fn scale(&self, s: f64) -> Self {
        self.map(|a| a * s)
    }
    fn norm(&self) -> f64 {
        self.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

/// Change of variables used to map a semi-infinite range onto `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMap {
    /// `x = a - L ln(1 - t)`; suited to exponentially decaying integrands.
    ExpMap,
    /// `x = a + L t / (1 - t)`; suited to algebraic decay.
    AlgebraicMap,
    /// No mapping: semi-infinite ranges are rejected.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub tail: TailMap,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 0.0,
            max_subdivisions: 400,
            tail: TailMap::ExpMap,
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    /// Default for two-dimensional (nested) integrals.
    pub fn two_dim() -> Self {
        Self::with_rel_tol(1e-4)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) || self.max_subdivisions < 1 {
            return Err(Error::InvalidInput(format!(
                "quadrature spec needs rel_tol > 0, abs_tol >= 0, max_subdivisions >= 1 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// Spec for an integral nested inside another, tightened so that inner
    /// errors stay below the outer tolerance.
    pub fn inner(&self) -> Self {
        Self {
            rel_tol: (self.rel_tol * 0.1).max(1e-13),
            abs_tol: self.abs_tol * 0.1,
            ..*self
        }
    }
}

#[derive(Debug, Clone)]
pub struct Estimate<V> {
    pub value: V,
    pub error: f64,
    pub subdivisions: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl<V: Integrand> Estimate<V> {
    pub fn into_result(self, what: &str) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                message: what.to_string(),
                value: self.value.norm(),
                error: self.error,
                subdivisions: self.subdivisions,
            })
        }
    }

    /// Sum of two estimates over disjoint ranges.
    pub fn plus(self, other: Self) -> Self {
        Estimate {
            value: self.value.add(&other.value),
            error: self.error + other.error,
            subdivisions: self.subdivisions + other.subdivisions,
            evaluations: self.evaluations + other.evaluations,
            converged: self.converged && other.converged,
        }
    }

    pub fn map<W>(self, f: impl FnOnce(V) -> W) -> Estimate<W> {
        Estimate {
            value: f(self.value),
            error: self.error,
            subdivisions: self.subdivisions,
            evaluations: self.evaluations,
            converged: self.converged,
        }
    }
}

/// Integration domain for [`adaptive_integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Finite(f64, f64),
    /// `[start, ∞)` with a characteristic decay length used by the tail map.
    SemiInfinite {
        start: f64,
        scale: f64,
    },
}

// Gauss–Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One 15-point Kronrod panel on `[a, b]`: (Kronrod value, |K - G|).
pub fn gk15<V: Integrand>(f: &mut impl FnMut(f64) -> V, a: f64, b: f64) -> (V, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc.scale(WGK[7]);
    let mut gauss = fc.scale(WG[3]);
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        let s = f1.add(&f2);
        kron = kron.add(&s.scale(WGK[j]));
        if j % 2 == 1 {
            gauss = gauss.add(&s.scale(WG[j / 2]));
        }
    }
    let kron = kron.scale(h);
    let gauss = gauss.scale(h);
    let err = kron.add(&gauss.scale(-1.0)).norm();
    (kron, err)
}

struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    err: f64,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err && self.a == other.a
    }
}
impl<V> Eq for Panel<V> {}
impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Panel<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err).then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Globally adaptive integration over `[a, b]`, never failing: the returned
/// estimate carries a `converged` flag.
pub fn integrate<V: Integrand>(mut f: impl FnMut(f64) -> V, a: f64, b: f64, spec: &QuadratureSpec) -> Estimate<V> {
    integrate_breaks(&mut f, &[a, b], spec)
}

/// Like [`integrate`] with the range split at every given point (sorted,
/// duplicates removed). Breakpoints are hard nodes.
pub fn integrate_breaks<V: Integrand>(
    mut f: impl FnMut(f64) -> V,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Estimate<V> {
    let mut pts: Vec<f64> = points.iter().copied().filter(|x| x.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.len() < 2 {
        return Estimate {
            value: V::zero(),
            error: 0.0,
            subdivisions: 0,
            evaluations: 0,
            converged: true,
        };
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in pts.windows(2) {
        if w[1] > w[0] {
            let (value, err) = gk15(&mut f, w[0], w[1]);
            evaluations += 15;
            heap.push(Panel {
                a: w[0],
                b: w[1],
                value,
                err,
            });
        }
    }
    let mut subdivisions = heap.len();
    let total = |heap: &BinaryHeap<Panel<V>>| -> (V, f64) {
        let mut panels: Vec<&Panel<V>> = heap.iter().collect();
        panels.sort_by(|p, q| p.a.total_cmp(&q.a));
        let vals: Vec<V> = panels.iter().map(|p| p.value.clone()).collect();
        let errs: Vec<f64> = panels.iter().map(|p| p.err).collect();
        (pairwise_sum(&vals), pairwise_sum(&errs))
    };
    let (mut value, mut err) = total(&heap);
    let mut converged = err <= spec.abs_tol.max(spec.rel_tol * value.norm());
    let mut since_refresh = 0;
    while !converged && subdivisions < spec.max_subdivisions {
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) <= 1e-14 * mid.abs().max(1e-300) {
            // Cannot be split further; accept the panel as it is.
            heap.push(Panel { err: 0.0, ..worst });
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        subdivisions += 1;
        // Running update; refreshed periodically to avoid drift.
        value = value.add(&worst.value.scale(-1.0)).add(&v1).add(&v2);
        err = err - worst.err + e1 + e2;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        since_refresh += 1;
        if since_refresh >= 16 || err <= spec.abs_tol.max(spec.rel_tol * value.norm()) {
            since_refresh = 0;
            let (v, e) = total(&heap);
            value = v;
            err = e;
        }
        converged = err <= spec.abs_tol.max(spec.rel_tol * value.norm());
    }
    let (value, err_final) = total(&heap);
    let err = err_final.max(if converged { 0.0 } else { err });
    let converged = err <= spec.abs_tol.max(spec.rel_tol * value.norm());
    Estimate {
        value,
        error: err,
        subdivisions,
        evaluations,
        converged,
    }
}

/// Integration over `[a, ∞)` through the tail map selected in `spec`.
/// `breaks` are extra hard nodes beyond `a`.
pub fn integrate_semi_infinite<V: Integrand>(
    mut f: impl FnMut(f64) -> V,
    a: f64,
    scale: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<Estimate<V>> {
    if !(scale > 0.0) {
        return Err(Error::InvalidInput(format!("tail scale must be positive, got {scale}")));
    }
    type Forward = Box<dyn Fn(f64) -> f64>;
    type Inverse = Box<dyn Fn(f64) -> (f64, f64)>;
    let (to_t, from_t): (Forward, Inverse) = match spec.tail {
        TailMap::ExpMap => (
            Box::new(move |x: f64| -(-(x - a) / scale).exp_m1()),
            Box::new(move |t: f64| (a - scale * (-t).ln_1p(), scale / (1.0 - t))),
        ),
        TailMap::AlgebraicMap => (
            Box::new(move |x: f64| (x - a) / (x - a + scale)),
            Box::new(move |t: f64| (a + scale * t / (1.0 - t), scale / ((1.0 - t) * (1.0 - t)))),
        ),
        TailMap::None => {
            return Err(Error::InvalidInput(
                "semi-infinite range requested with tail map `none`".into(),
            ))
        }
    };
    let mut nodes = vec![0.0, 1.0];
    nodes.extend(breaks.iter().filter(|&&x| x > a && x.is_finite()).map(|&x| to_t(x)));
    let est = integrate_breaks(
        |t| {
            let (x, jac) = from_t(t);
            if !jac.is_finite() {
                return V::zero();
            }
            f(x).scale(jac)
        },
        &nodes,
        spec,
    );
    Ok(est)
}

/// Strict adaptive integration: non-convergence is an error.
pub fn adaptive_integrate<V: Integrand>(
    f: impl FnMut(f64) -> V,
    domain: Domain,
    spec: &QuadratureSpec,
) -> Result<Estimate<V>> {
    spec.validate()?;
    let est = match domain {
        Domain::Finite(a, b) => integrate(f, a, b, spec),
        Domain::SemiInfinite { start, scale } => integrate_semi_infinite(f, start, scale, &[], spec)?,
    };
    est.into_result("adaptive_integrate")
}

/// `∫_a^∞ f` for oscillatory integrands that are only conditionally
/// convergent: per-period partial sums are accelerated with Wynn's epsilon
/// algorithm. `half_period` is the spacing between successive sign changes.
pub fn integrate_oscillatory(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    half_period: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate<f64>> {
    spec.validate()?;
    let inner = spec.inner();
    let mut partial = 0.0;
    let mut sums = Vec::new();
    let mut evaluations = 0;
    let mut subdivisions = 0;
    let mut last = f64::NAN;
    for n in 0..spec.max_subdivisions.max(8) {
        let lo = a + n as f64 * half_period;
        let est = integrate(&mut f, lo, lo + half_period, &inner);
        evaluations += est.evaluations;
        subdivisions += est.subdivisions;
        partial += est.value;
        sums.push(partial);
        if sums.len() >= 6 {
            let acc = wynn_epsilon(&sums);
            let err = (acc - last).abs();
            if err <= spec.abs_tol.max(spec.rel_tol * acc.abs()) {
                return Ok(Estimate {
                    value: acc,
                    error: err,
                    subdivisions,
                    evaluations,
                    converged: true,
                });
            }
            last = acc;
        }
    }
    Err(Error::NonConvergence {
        message: "oscillatory tail".into(),
        value: last,
        error: f64::NAN,
        subdivisions,
    })
}

/// Wynn's epsilon extrapolation of a sequence of partial sums; returns the
/// highest even-order estimate available.
pub fn wynn_epsilon(s: &[f64]) -> f64 {
    let n = s.len();
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut best = *s.last().unwrap_or(&0.0);
    for k in 1..n {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            let val = if d == 0.0 { f64::INFINITY } else { prev[i + 1] + 1.0 / d };
            next.push(val);
        }
        prev = cur;
        cur = next;
        if k % 2 == 0 {
            if let Some(&v) = cur.last() {
                if v.is_finite() {
                    best = v;
                }
            }
        }
        if cur.len() < 2 {
            break;
        }
    }
    best
}

/// Fixed composite rule: `panels` equal 15-point Kronrod panels on `[a, b]`.
pub fn fixed_panels<V: Integrand>(mut f: impl FnMut(f64) -> V, a: f64, b: f64, panels: usize) -> V {
    let h = (b - a) / panels as f64;
    let vals: Vec<V> = (0..panels)
        .map(|i| gk15(&mut f, a + i as f64 * h, a + (i + 1) as f64 * h).0)
        .collect();
    pairwise_sum(&vals)
}

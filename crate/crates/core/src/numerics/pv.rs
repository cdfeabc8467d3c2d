use crate::error::{Error, Result};

use super::quadrature::{integrate_breaks, Estimate, Integrand, QuadratureSpec};

/// Principal value of `∫_a^b f(x) / (pole - x) dx`.
///
/// On `[pole - w, pole + w]` the integrand is folded onto itself,
/// `∫_0^w [f(pole - u) - f(pole + u)] / u du`, which is regular whenever `f`
/// is smooth at the pole. The remainder of the range is integrated directly.
pub fn principal_value<V: Integrand>(
    f: impl FnMut(f64) -> V,
    a: f64,
    b: f64,
    pole: f64,
    window: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate<V>> {
    principal_value_breaks(f, a, b, pole, window, &[], spec)
}

/// [`principal_value`] with extra hard nodes (narrow features of `f`).
pub fn principal_value_breaks<V: Integrand>(
    mut f: impl FnMut(f64) -> V,
    a: f64,
    b: f64,
    pole: f64,
    window: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<Estimate<V>> {
    spec.validate()?;
    if !(window > 0.0) {
        return Err(Error::InvalidInput(format!("PV window must be positive, got {window}")));
    }
    if pole - window < a || pole + window > b {
        return Err(Error::InvalidInput(format!(
            "PV window [{:e}, {:e}] exceeds integration range [{a:e}, {b:e}]",
            pole - window,
            pole + window
        )));
    }
    let part = QuadratureSpec {
        rel_tol: spec.rel_tol,
        abs_tol: spec.abs_tol / 3.0,
        ..*spec
    };
    let mut fold_pts = vec![0.0, window];
    fold_pts.extend(
        breaks
            .iter()
            .map(|x| (x - pole).abs())
            .filter(|&u| u > 0.0 && u < window),
    );
    let mut left_pts = vec![a, pole - window];
    left_pts.extend(breaks.iter().copied().filter(|&x| x > a && x < pole - window));
    let mut right_pts = vec![pole + window, b];
    right_pts.extend(breaks.iter().copied().filter(|&x| x > pole + window && x < b));
    let folded = integrate_breaks(
        |u| f(pole - u).add(&f(pole + u).scale(-1.0)).scale(1.0 / u),
        &fold_pts,
        &part,
    );
    let left = integrate_breaks(|x| f(x).scale(1.0 / (pole - x)), &left_pts, &part);
    let right = integrate_breaks(|x| f(x).scale(1.0 / (pole - x)), &right_pts, &part);
    let value = folded.value.add(&left.value).add(&right.value);
    let est = Estimate {
        error: folded.error + left.error + right.error,
        subdivisions: folded.subdivisions + left.subdivisions + right.subdivisions,
        evaluations: folded.evaluations + left.evaluations + right.evaluations,
        converged: folded.converged && left.converged && right.converged,
        value,
    };
    est.into_result("principal value")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;

    /// Closed-form PV of a Lorentzian numerator over [a, b].
    fn lorentzian_pv(amp: f64, center: f64, width: f64, pole: f64, a: f64, b: f64) -> f64 {
        let y = pole - center;
        let anti = |x: f64| {
            let u = x - center;
            -(y - u).abs().ln() + 0.5 * (u * u + width * width).ln() + (y / width) * (u / width).atan()
        };
        amp * width * width / (y * y + width * width) * (anti(b) - anti(a))
    }

    #[test]
    fn odd_kernel_vanishes() {
        let est = principal_value(|_| 2.5, 0.0, 2.0, 1.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!(est.value.abs() < 1e-13);
    }

    #[test]
    fn lorentzian_matches_closed_form() {
        let (amp, c, g) = (1.7, 3.0, 0.4);
        let f = |x: f64| amp * g * g / ((x - c).powi(2) + g * g);
        for &(pole, w) in &[(2.5, 0.3), (3.2, 0.1), (4.0, 1.0)] {
            let est = principal_value(f, 0.0, 10.0, pole, w, &QuadratureSpec::with_rel_tol(1e-10)).unwrap();
            let exact = lorentzian_pv(amp, c, g, pole, 0.0, 10.0);
            assert!(
                (est.value - exact).abs() < 1e-8 * exact.abs().max(1.0),
                "{} vs {exact}",
                est.value
            );
        }
    }

    #[test]
    fn regular_numerator_matches_plain_integral() {
        // f(x) = (pole - x) g(x) has no pole at all.
        let pole = 0.7;
        let g = |x: f64| (x * 3.0).cos();
        let est = principal_value(
            |x| (pole - x) * g(x),
            0.0,
            2.0,
            pole,
            0.2,
            &QuadratureSpec::with_rel_tol(1e-12),
        )
        .unwrap();
        let plain = integrate(g, 0.0, 2.0, &QuadratureSpec::with_rel_tol(1e-12)).value;
        assert!((est.value - plain).abs() < 1e-9);
    }

    #[test]
    fn window_halving_invariance() {
        let f = |x: f64| 1.0 / (1.0 + x * x);
        let spec = QuadratureSpec::with_rel_tol(1e-9);
        let a = principal_value(f, 0.0, 5.0, 1.3, 0.8, &spec).unwrap().value;
        let b = principal_value(f, 0.0, 5.0, 1.3, 0.4, &spec).unwrap().value;
        assert!((a - b).abs() <= 10.0 * spec.rel_tol * a.abs());
    }

    #[test]
    fn window_outside_range_is_error() {
        assert!(principal_value(|_| 1.0, 0.0, 1.0, 0.1, 0.2, &QuadratureSpec::default()).is_err());
    }
}

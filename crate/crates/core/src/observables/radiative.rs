//! Emitter observables: decay rates, Purcell factor, Lamb shift and the
//! Casimir–Polder force.

use std::f64::consts::PI;

use crate::constants::{C, EPS0, HBAR};
use crate::error::{Error, Result};
use crate::layered::{imag_green, scattered_imag_green, scattered_imag_green_dz, volume_terms, LayerStack};
use crate::numerics::{principal_value_breaks, Estimate, QuadratureSpec};
use crate::Tensor3;

use super::{guard_stack, Emitter, ObservableOptions, ObservableResult, Trap};

/// `d·T·d` for a real dipole.
fn project(t: &Tensor3, d: &[f64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += d[i] * t[(i, j)].re * d[j];
        }
    }
    s
}

/// Spontaneous emission rate in vacuum, `ω³|d|²/(3πε₀ħc³)`.
pub fn free_space_rate(omega0: f64, dipole_sq: f64) -> f64 {
    omega0.powi(3) * dipole_sq / (3.0 * PI * EPS0 * HBAR * C.powi(3))
}

fn check_placement(stack: &LayerStack, e: &Emitter, opts: &ObservableOptions) -> Result<()> {
    opts.validate()?;
    e.validate()?;
    stack.validate()
}

fn k_range(e: &Emitter) -> f64 {
    30.0 / e.position[2] + 4.0 * e.omega0 / C
}

/// Downward transition rate of the emitter (1/s).
///
/// Passive stacks: `Γ = (2/ħε₀) d·Im Ḡ(r₀, r₀, ω₀)·d`. With gain the
/// antinormally ordered field correlator drives downward transitions and
/// the normally ordered one upward transitions; both are reported (extras
/// `gamma_down`, `gamma_up`, `gamma_net`).
pub fn decay_rate(stack: &LayerStack, e: &Emitter, opts: &ObservableOptions) -> Result<ObservableResult> {
    check_placement(stack, e, opts)?;
    let stable = guard_stack(stack, k_range(e), opts)?;
    let r = e.position;
    let pref = 2.0 / (HBAR * EPS0);
    let d2 = e.dipole_sq();
    let mut out;
    if stack.is_passive() && stack.is_reciprocal() {
        let est = imag_green(stack, r, r, e.omega0, &opts.spec)?;
        let g = pref * project(&est.value, &e.dipole);
        out = ObservableResult::new(vec![g], "1/s");
        out.abs_error = pref * d2 * est.error;
        out.subdivisions = est.subdivisions;
        out.evaluations = est.evaluations;
        out.extras.insert("gamma_down".into(), g);
        out.extras.insert("gamma_up".into(), 0.0);
        out.extras.insert("gamma_net".into(), g);
    } else {
        let v = volume_terms(stack, r, r, e.omega0, &opts.spec)?;
        let down = pref * project(&(v.loss + v.escape), &e.dipole);
        let up = pref * project(&v.gain.map(|z| z.conj()), &e.dipole);
        out = ObservableResult::new(vec![down], "1/s");
        out.abs_error = pref * d2 * v.error;
        out.evaluations = v.evaluations;
        out.gain = up > 0.0 || stack.has_gain();
        out.extras.insert("gamma_down".into(), down);
        out.extras.insert("gamma_up".into(), up);
        out.extras.insert("gamma_net".into(), down - up);
    }
    out.stable = stable;
    Ok(out)
}

/// `Γ / Γ_vac` with the vacuum rate of the same dipole.
pub fn purcell_factor(stack: &LayerStack, e: &Emitter, opts: &ObservableOptions) -> Result<ObservableResult> {
    let mut out = decay_rate(stack, e, opts)?;
    let g0 = free_space_rate(e.omega0, e.dipole_sq());
    let g = out.value[0];
    out.extras.insert("gamma".into(), g);
    out.extras.insert("gamma_vacuum".into(), g0);
    out.value = vec![g / g0];
    out.abs_error /= g0;
    out.unit = "1".into();
    Ok(out)
}

/// `(1/πε₀ħ) PV ∫_0^{ω_max} f(ω) / (ω₀ - ω) dω` for a spectral density
/// `f = d·Im Ḡ·d` (C²/m). `breaks` marks narrow features of `f`.
pub fn lamb_shift_spectral(
    f: impl FnMut(f64) -> f64,
    omega0: f64,
    omega_max: f64,
    window: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<Estimate<f64>> {
    if !(omega_max > omega0 && omega0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need 0 < ω₀ < ω_max, got ω₀ = {omega0:e}, ω_max = {omega_max:e}"
        )));
    }
    let est = principal_value_breaks(f, 0.0, omega_max, omega0, window, breaks, spec)?;
    let s = 1.0 / (PI * EPS0 * HBAR);
    Ok(est.map(|v| v * s)).map(|mut e| {
        e.error *= s;
        e
    })
}

/// PV integral of a projected scattered-Green quantity against
/// `1/(ω₀ - ω)`; `dz` selects the height derivative.
fn shift_integral(stack: &LayerStack, e: &Emitter, opts: &ObservableOptions, dz: bool) -> Result<(Estimate<f64>, f64)> {
    let w0 = e.omega0;
    let mut scales = stack.frequency_scales();
    scales.push(w0);
    let w_top = scales.iter().copied().fold(0.0, f64::max);
    let w_max = opts.omega_max_factor * w_top;
    let window = 0.5 * w0.min(w_max - w0);
    let mut breaks = stack.surface_modes();
    breaks.extend(stack.frequency_scales());
    breaks.retain(|&b| b > 0.0 && b < w_max && (b - w0).abs() > 1e-9 * w0);
    let r = e.position;
    let inner = opts.spec.inner();
    let trap = Trap::new();
    let f = |w: f64| -> f64 {
        if trap.tripped() {
            return 0.0;
        }
        let g = if dz {
            scattered_imag_green_dz(stack, r[2], w, &inner)
        } else {
            scattered_imag_green(stack, r, r, w, &inner)
        };
        trap.take(g.map(|g| project(&g.value, &e.dipole)))
    };
    let est = lamb_shift_spectral(f, w0, w_max, window, &breaks, &opts.spec);
    trap.finish()?;
    Ok((est?, w_max))
}

/// Level shift of the transition frequency (rad/s) due to the stack:
/// `δω = (1/πε₀ħ) PV ∫_0^{ω_max} d·Im Ḡ_sc(r₀, r₀, ω)·d / (ω₀ - ω) dω`.
/// Only the scattered part enters; the free-space shift is taken as
/// already included in ω₀. `ω_max` is `omega_max_factor` times the largest
/// frequency scale and is reported in the extras.
pub fn lamb_shift(stack: &LayerStack, e: &Emitter, opts: &ObservableOptions) -> Result<ObservableResult> {
    check_placement(stack, e, opts)?;
    let stable = guard_stack(stack, k_range(e), opts)?;
    let (est, w_max) = shift_integral(stack, e, opts, false)?;
    let mut out = ObservableResult::new(vec![est.value], "rad/s");
    out.abs_error = est.error;
    out.subdivisions = est.subdivisions;
    out.evaluations = est.evaluations;
    out.stable = stable;
    out.gain = stack.has_gain();
    out.extras.insert("omega_max".into(), w_max);
    Ok(out)
}

/// Casimir–Polder force on the emitter (N), `F = -ħ ∇δω`, by central
/// differences of the level shift in height with step `fd_step·z`.
/// In-plane components vanish identically: the stack is translation
/// invariant. A step whose difference drowns in quadrature noise is
/// refused with a recommended larger step.
pub fn casimir_polder_force(stack: &LayerStack, e: &Emitter, opts: &ObservableOptions) -> Result<ObservableResult> {
    check_placement(stack, e, opts)?;
    let z = e.position[2];
    let h = opts.fd_step * z;
    let at = |zz: f64| {
        let mut e2 = *e;
        e2.position[2] = zz;
        lamb_shift(stack, &e2, opts)
    };
    let up = at(z + h)?;
    let dn = at(z - h)?;
    let diff = up.value[0] - dn.value[0];
    let noise = up.abs_error + dn.abs_error;
    if !(diff.abs() > 10.0 * noise) {
        let ratio = (10.0 * noise / diff.abs().max(f64::MIN_POSITIVE)).max(2.0);
        return Err(Error::StepTooSmall {
            step: h,
            recommended: (h * ratio.cbrt() * 2.0).min(0.4 * z),
        });
    }
    let fz = -HBAR * diff / (2.0 * h);
    let mut out = ObservableResult::new(vec![0.0, 0.0, fz], "N");
    out.abs_error = HBAR * noise / (2.0 * h);
    out.subdivisions = up.subdivisions + dn.subdivisions;
    out.evaluations = up.evaluations + dn.evaluations;
    out.stable = up.stable && dn.stable;
    out.gain = up.gain;
    out.extras.insert("step".into(), h);
    out.extras.insert("lamb_shift_above".into(), up.value[0]);
    out.extras.insert("lamb_shift_below".into(), dn.value[0]);
    Ok(out)
}

/// Casimir–Polder force with the height derivative taken under the
/// frequency and wavevector integrals instead of by finite differences.
pub fn casimir_polder_force_direct(
    stack: &LayerStack,
    e: &Emitter,
    opts: &ObservableOptions,
) -> Result<ObservableResult> {
    check_placement(stack, e, opts)?;
    let stable = guard_stack(stack, k_range(e), opts)?;
    let (est, w_max) = shift_integral(stack, e, opts, true)?;
    let mut out = ObservableResult::new(vec![0.0, 0.0, -HBAR * est.value], "N");
    out.abs_error = HBAR * est.error;
    out.subdivisions = est.subdivisions;
    out.evaluations = est.evaluations;
    out.stable = stable;
    out.gain = stack.has_gain();
    out.extras.insert("omega_max".into(), w_max);
    Ok(out)
}

//! Browser bindings for three small demos: the Purcell factor of an emitter
//! above a Drude metal, the Casimir pressure between two Drude plates, and
//! the Doppler-shifted permittivity of a moving Drude half-space.
//!
//! Each export takes SI inputs and returns a flat `Float64Array`.

use fluctua::layered::LayerStack;
use fluctua::material::{MaterialResponse, PermittivityChannel};
use fluctua::observables::{
    casimir_pressure, ideal_mirror_pressure, purcell_factor, Emitter, ObservableOptions, StackPair,
};
use fluctua::{Complex64, Result};
use wasm_bindgen::prelude::*;

fn drude(omega_p: f64, gamma: f64) -> MaterialResponse {
    MaterialResponse::new(1.0, vec![PermittivityChannel::drude(1.0, gamma, omega_p)])
}

fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect(),
    }
}

fn fast() -> ObservableOptions {
    let mut o = ObservableOptions::default();
    o.spec.rel_tol = 1e-4;
    o.spec_2d.rel_tol = 1e-3;
    o
}

/// `[z₀, P₀, z₁, P₁, ...]` for heights on a log grid from `z_min` to
/// `z_max` (m).
pub fn purcell_curve(
    omega_p: f64,
    gamma: f64,
    omega0: f64,
    perpendicular: bool,
    z_min: f64,
    z_max: f64,
    n: usize,
) -> Result<Vec<f64>> {
    let stack = LayerStack::interface(drude(omega_p, gamma))?;
    let dipole = if perpendicular {
        [0.0, 0.0, 1e-29]
    } else {
        [1e-29, 0.0, 0.0]
    };
    let mut out = Vec::with_capacity(2 * n);
    for z in log_grid(z_min, z_max, n) {
        let p = purcell_factor(&stack, &Emitter::new([0.0, 0.0, z], omega0, dipole), &fast())?;
        out.extend([z, p.value[0]]);
    }
    Ok(out)
}

/// `[d₀, P₀, P₀/P_ideal, ...]` for gaps on a log grid (m, Pa).
pub fn casimir_curve(omega_p: f64, gamma: f64, d_min: f64, d_max: f64, n: usize) -> Result<Vec<f64>> {
    let plate = LayerStack::interface(drude(omega_p, gamma))?;
    let pair = StackPair::new(plate.clone(), plate);
    let mut out = Vec::with_capacity(3 * n);
    for d in log_grid(d_min, d_max, n) {
        let p = casimir_pressure(&pair, d, &fast())?.value[0];
        out.extend([d, p, p / ideal_mirror_pressure(d)]);
    }
    Ok(out)
}

/// `[ω₀, Re ε₀, Im ε₀, ...]` of a Drude half-space moving at `v` (m/s),
/// seen at in-plane wavevector `k` (1/m) for `0 < ω < omega_max`. Inside
/// the band `ω < k v` the imaginary part is negative: the moving body
/// amplifies. Samples sit at bin centres, which avoids the Doppler-shifted
/// Drude pole at `ω = k v` for even `n`.
pub fn doppler_permittivity(omega_p: f64, gamma: f64, v: f64, k: f64, omega_max: f64, n: usize) -> Result<Vec<f64>> {
    let m = drude(omega_p, gamma).with_velocity([v, 0.0]);
    m.validate()?;
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let w = omega_max * (i as f64 + 0.5) / n as f64;
        let e = m.eval_lab(Complex64::new(w, 0.0), [k, 0.0])?;
        out.extend([w, e.re, e.im]);
    }
    Ok(out)
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = purcellCurve)]
pub fn purcell_curve_js(
    omega_p: f64,
    gamma: f64,
    omega0: f64,
    perpendicular: bool,
    z_min: f64,
    z_max: f64,
    n: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    js(purcell_curve(omega_p, gamma, omega0, perpendicular, z_min, z_max, n))
}

#[wasm_bindgen(js_name = casimirCurve)]
pub fn casimir_curve_js(
    omega_p: f64,
    gamma: f64,
    d_min: f64,
    d_max: f64,
    n: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    js(casimir_curve(omega_p, gamma, d_min, d_max, n))
}

#[wasm_bindgen(js_name = dopplerPermittivity)]
pub fn doppler_permittivity_js(
    omega_p: f64,
    gamma: f64,
    v: f64,
    k: f64,
    omega_max: f64,
    n: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    js(doppler_permittivity(omega_p, gamma, v, k, omega_max, n))
}

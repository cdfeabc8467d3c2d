//! Physical observables built on the layered Green tensor and the
//! fluctuation correlators: emitter rates and level shifts, Casimir–Polder
//! and Casimir forces, quantum friction and the Hall-drag lateral force.
//!
//! Every entry point returns an [`ObservableResult`] carrying the value in
//! SI units, an absolute error estimate, quadrature diagnostics and the
//! stability flag. Systems with gain or motion are checked for growing
//! modes first and refused when unstable unless explicitly overridden.

mod casimir;
mod friction;
mod radiative;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constants::C;
use crate::error::{Error, Result};
use crate::layered::{LayerStack, StackModes};
use crate::numerics::{stability_scan, Contour, KGrid, QuadratureSpec, StabilityReport};

pub use casimir::{casimir_pressure, casimir_pressure_real_frequency, ideal_mirror_pressure, StackPair};
pub use friction::{friction_threshold, hall_lateral_force, quantum_friction_force, HalfSpacePair, PairModes};
pub use radiative::{
    casimir_polder_force, casimir_polder_force_direct, decay_rate, free_space_rate, lamb_shift, lamb_shift_spectral,
    purcell_factor,
};

/// A two-level emitter: position above the stack (m), transition
/// frequency (rad/s) and real transition dipole (C·m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emitter {
    pub position: [f64; 3],
    pub omega0: f64,
    pub dipole: [f64; 3],
}

impl Emitter {
    pub fn new(position: [f64; 3], omega0: f64, dipole: [f64; 3]) -> Self {
        Self {
            position,
            omega0,
            dipole,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "emitter ω₀ must be positive, got {}",
                self.omega0
            )));
        }
        if !self.position.iter().chain(&self.dipole).all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("emitter position and dipole must be finite".into()));
        }
        if self.dipole.iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidInput("emitter dipole is zero".into()));
        }
        if !(self.position[2] > 0.0) {
            return Err(Error::InvalidInput(format!(
                "emitter must sit above the stack (z > 0), got z = {:e}",
                self.position[2]
            )));
        }
        Ok(())
    }

    pub fn dipole_sq(&self) -> f64 {
        self.dipole.iter().map(|x| x * x).sum()
    }
}

/// Result of an observable evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableResult {
    /// Scalar observables have one component; forces have two or three.
    pub value: Vec<f64>,
    pub unit: String,
    pub abs_error: f64,
    pub subdivisions: usize,
    pub evaluations: usize,
    /// False when the system was found unstable and evaluated anyway.
    pub stable: bool,
    /// True when any evaluation involved a gain-dominated response
    /// (inverted channel or anomalous Doppler band).
    pub gain: bool,
    /// Secondary quantities (component rates, alternative routes).
    pub extras: BTreeMap<String, f64>,
}

impl ObservableResult {
    fn new(value: Vec<f64>, unit: &str) -> Self {
        Self {
            value,
            unit: unit.into(),
            abs_error: 0.0,
            subdivisions: 0,
            evaluations: 0,
            stable: true,
            gain: false,
            extras: BTreeMap::new(),
        }
    }

    /// First component.
    pub fn scalar(&self) -> f64 {
        self.value[0]
    }
}

/// Numerical controls shared by the observables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservableOptions {
    /// Tolerance for one-dimensional integrals; nested levels tighten it.
    pub spec: QuadratureSpec,
    /// Tolerance for the outermost level of multidimensional integrals.
    pub spec_2d: QuadratureSpec,
    /// Evaluate systems found unstable instead of refusing them.
    pub allow_unstable: bool,
    /// Central-difference step relative to the emitter height.
    pub fd_step: f64,
    /// Upper frequency cutoff of level-shift integrals in units of the
    /// largest frequency scale (emitter or material).
    pub omega_max_factor: f64,
    /// Angle above the real axis of the frequency ray used by the
    /// real-frequency Casimir route (rad).
    pub tilt: f64,
    /// Relative width of stability threshold brackets.
    pub threshold_width: f64,
}

impl Default for ObservableOptions {
    fn default() -> Self {
        Self {
            spec: QuadratureSpec::default(),
            spec_2d: QuadratureSpec::two_dim(),
            allow_unstable: false,
            fd_step: 1e-2,
            omega_max_factor: 10.0,
            tilt: 0.1,
            threshold_width: 1e-2,
        }
    }
}

impl ObservableOptions {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.spec_2d.validate()?;
        if !(self.fd_step > 0.0 && self.fd_step < 0.5) {
            return Err(Error::InvalidInput(format!(
                "fd_step must lie in (0, 0.5), got {}",
                self.fd_step
            )));
        }
        if !(self.omega_max_factor > 1.0) {
            return Err(Error::InvalidInput("omega_max_factor must exceed 1".into()));
        }
        if !(self.tilt > 0.0 && self.tilt <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidInput(format!(
                "tilt must lie in (0, π/2], got {}",
                self.tilt
            )));
        }
        if !(self.threshold_width > 0.0 && self.threshold_width < 1.0) {
            return Err(Error::InvalidInput("threshold_width must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Contour enclosing both quadrants of the upper half plane up to `w_max`,
/// starting a small distance above the real axis.
pub(crate) fn scan_contour(w_min: f64, w_max: f64) -> Contour {
    Contour {
        re_min: -w_max,
        re_max: w_max,
        im_min: 1e-6 * w_min,
        im_max: w_max,
        samples_per_edge: 512,
    }
}

/// Growing-mode scan of a single stack over in-plane wavevectors up to
/// `k_max`, along the direction of any in-plane motion.
pub fn stack_stability(stack: &LayerStack, k_max: f64) -> Result<StabilityReport> {
    let scales = stack.frequency_scales();
    let (w_lo, w_hi) = match (scales.first(), scales.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InvalidInput("stack has no frequency scale to scan".into())),
    };
    let mut dir = [1.0, 0.0];
    let mut v_max: f64 = 0.0;
    for l in &stack.layers {
        let m = &l.material;
        for c in &m.channels {
            let u = m.carrier_drift(c);
            let v = [m.velocity[0] + u[0], m.velocity[1] + u[1]];
            let s = v[0].hypot(v[1]);
            if s > v_max {
                v_max = s;
                dir = [v[0] / s, v[1] / s];
            }
        }
    }
    let w_max = 4.0 * (w_hi + k_max * v_max);
    let grid = KGrid::Line {
        direction: dir,
        k_min: 1e-3 * w_lo / C,
        k_max,
        points: 48,
        log: true,
        refine: true,
    };
    let sys = StackModes { stack: stack.clone() };
    stability_scan(&sys, &scan_contour(w_lo, w_max), &grid)
}

/// Refuse or flag an unstable stack.
pub(crate) fn guard_stack(stack: &LayerStack, k_max: f64, opts: &ObservableOptions) -> Result<bool> {
    if stack.is_passive()
        && !stack
            .layers
            .iter()
            .any(|l| l.material.is_moving() || l.material.is_biased())
    {
        return Ok(true);
    }
    let report = stack_stability(stack, k_max)?;
    if !report.stable && !opts.allow_unstable {
        let z = report.zeros.iter().find(|z| z.winding != 0);
        return Err(Error::Unstable {
            reason: match z {
                Some(z) => format!("growing mode near ω = {:.6e} rad/s at k = {:?} rad/m", z.omega, z.k),
                None => "growing mode detected".into(),
            },
            threshold_bracket: None,
        });
    }
    Ok(report.stable)
}

/// Holds the first error raised inside an integrand closure, which must
/// itself return a plain value.
pub(crate) struct Trap(std::cell::RefCell<Option<Error>>);

impl Trap {
    pub(crate) fn new() -> Self {
        Self(std::cell::RefCell::new(None))
    }

    pub(crate) fn take<T: Default>(&self, r: Result<T>) -> T {
        match r {
            Ok(v) => v,
            Err(e) => {
                let mut slot = self.0.borrow_mut();
                if slot.is_none() {
                    *slot = Some(e);
                }
                T::default()
            }
        }
    }

    pub(crate) fn tripped(&self) -> bool {
        self.0.borrow().is_some()
    }

    pub(crate) fn finish(self) -> Result<()> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

//! Declarative scenario files.
//!
//! A scenario is a JSON object with the top-level keys `materials`,
//! `stacks`, `emitters`, `sweeps`, `observables` and `numerics`. Every
//! dimensional input is a string `"<value> <unit>"` with the unit spelled
//! out (`"1e-8 m"`, `"2.5e15 rad/s"`); dimensionless inputs are bare
//! numbers. Parsing fills in every default, so serializing a parsed
//! scenario yields a file that reproduces the run exactly.
//!
//! ```json
//! {
//!   "materials": { "silver": { "channels": [
//!       { "kind": "drude", "f": 1.0, "gamma": "3e13 rad/s", "omega_p": "1.4e16 rad/s" } ] } },
//!   "stacks": { "mirror": { "layers": [ { "material": "vacuum" }, { "material": "silver" } ] } },
//!   "emitters": [ { "name": "atom", "z": "2e-8 m", "omega0": "3e15 rad/s",
//!                   "dipole": ["0 C*m", "0 C*m", "1e-29 C*m"] } ],
//!   "sweeps": [ { "axis": "z", "from": "0.01 c/omega0", "to": "10 c/omega0",
//!                 "points": 50, "spacing": "log" } ],
//!   "observables": [ { "kind": "purcell", "stack": "mirror", "emitter": "atom" } ]
//! }
//! ```

mod run;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::constants::C;
use crate::error::{Error, Result};
use crate::layered::LayerStack;
use crate::material::{ChannelKind, MaterialResponse, PermittivityChannel};
use crate::numerics::{QuadratureSpec, TailMap};
use crate::observables::{Emitter, HalfSpacePair, ObservableOptions, StackPair};

pub use run::{format_value, run, threads_from_env, OutputRecord, PointError, RunOptions, RunReport, RunStatus};

/// A value with an explicit unit string. Serialized as `"<value> <unit>"`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: &str) -> Self {
        Self {
            value,
            unit: unit.into(),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `{:e}` prints the shortest representation that round-trips.
        write!(f, "{:e} {}", self.value, self.unit)
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            // Accepted here so that a missing unit is reported together
            // with every other problem instead of aborting the parse.
            Bare(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Bare(value) => Ok(Self::new(value, "")),
            Raw::Text(s) => {
                let s = s.trim();
                let (num, unit) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
                let value = num
                    .parse::<f64>()
                    .map_err(|_| serde::de::Error::custom(format!("'{s}' is not of the form \"<number> <unit>\"")))?;
                Ok(Self::new(value, unit.trim()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDef {
    pub kind: ChannelKind,
    /// Oscillator strength; negative for an inverted channel.
    pub f: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<Quantity>,
    pub gamma: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_p: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_xx: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_xy: Option<Quantity>,
}

fn one() -> f64 {
    1.0
}

fn zero_velocity() -> [Quantity; 2] {
    [Quantity::new(0.0, "m/s"), Quantity::new(0.0, "m/s")]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialDef {
    #[serde(default = "one")]
    pub background: f64,
    #[serde(default)]
    pub channels: Vec<ChannelDef>,
    /// In-plane body velocity.
    #[serde(default = "zero_velocity")]
    pub v: [Quantity; 2],
    /// In-plane carrier drift of the conductivity channels.
    #[serde(default = "zero_velocity")]
    pub v_d: [Quantity; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDef {
    pub material: String,
    /// Required for interior slabs, absent for the two half-spaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness: Option<Quantity>,
}

/// Layers from the top half-space (where emitters sit) down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackDef {
    pub layers: Vec<LayerDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterDef {
    pub name: String,
    /// Height above the top interface, in `m` or `c/omega0`.
    pub z: Quantity,
    pub omega0: Quantity,
    pub dipole: [Quantity; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Emitter height.
    Z,
    /// Gap between the two bodies.
    D,
    /// Speed of the second body (friction) or carrier drift (Hall).
    V,
    /// Emitter transition frequency.
    Omega0,
    /// Hall conductivity.
    SigmaXy,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Z => "z",
            Axis::D => "d",
            Axis::V => "v",
            Axis::Omega0 => "omega0",
            Axis::SigmaXy => "sigma_xy",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Axis::Z | Axis::D => "m",
            Axis::V => "m/s",
            Axis::Omega0 => "rad/s",
            Axis::SigmaXy => "S/m",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    #[serde(default)]
    pub name: String,
    pub axis: Axis,
    pub from: Quantity,
    pub to: Quantity,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
    /// Observables this sweep applies to; empty means all of them.
    #[serde(default)]
    pub observables: Vec<String>,
}

impl Sweep {
    /// Axis values in the unit they were given in.
    pub fn values(&self) -> Vec<f64> {
        let (a, b, n) = (self.from.value, self.to.value, self.points);
        if n == 1 {
            return vec![a];
        }
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => a + (b - a) * t,
                    Spacing::Log => a * (b / a).powf(t),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    DecayRate,
    Purcell,
    LambShift,
    CpForce,
    CasimirPressure,
    Friction,
    Hall,
}

impl ObservableKind {
    pub fn name(self) -> &'static str {
        match self {
            ObservableKind::DecayRate => "decay_rate",
            ObservableKind::Purcell => "purcell",
            ObservableKind::LambShift => "lamb_shift",
            ObservableKind::CpForce => "cp_force",
            ObservableKind::CasimirPressure => "casimir_pressure",
            ObservableKind::Friction => "friction",
            ObservableKind::Hall => "hall",
        }
    }

    fn is_emitter(self) -> bool {
        matches!(
            self,
            ObservableKind::DecayRate | ObservableKind::Purcell | ObservableKind::LambShift | ObservableKind::CpForce
        )
    }

    pub fn accepts(self, axis: Axis) -> bool {
        match axis {
            Axis::Z | Axis::Omega0 => self.is_emitter(),
            Axis::D => !self.is_emitter(),
            Axis::V => matches!(self, ObservableKind::Friction | ObservableKind::Hall),
            Axis::SigmaXy => self == ObservableKind::Hall,
        }
    }
}

/// Alternative evaluation routes for observables that have two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Imaginary-frequency Casimir, finite-difference Casimir–Polder.
    #[default]
    Default,
    /// Tilted real-frequency Casimir, direct gradient Casimir–Polder.
    Alternative,
}

/// One requested observable. Which fields are required depends on `kind`:
/// emitter observables take `stack` and `emitter`; `casimir_pressure` takes
/// the stacks `lower`, `upper` and a `gap`; `friction` and `hall` take the
/// materials `first`, `second` and a `gap`, and `hall` also `v_d` and
/// `sigma_xy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableDef {
    #[serde(default)]
    pub name: String,
    pub kind: ObservableKind,
    #[serde(default)]
    pub route: Route,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_d: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_xy: Option<Quantity>,
}

/// Numerical controls; every field has a default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Numerics {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub tail: TailMap,
    /// Outer tolerance of nested (2D) integrals.
    pub rel_tol_2d: f64,
    pub fd_step: f64,
    pub omega_max_factor: f64,
    pub tilt: f64,
    pub threshold_width: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self::from_options(&ObservableOptions::default())
    }
}

impl Numerics {
    fn from_options(o: &ObservableOptions) -> Self {
        Self {
            rel_tol: o.spec.rel_tol,
            abs_tol: o.spec.abs_tol,
            max_subdivisions: o.spec.max_subdivisions,
            tail: o.spec.tail,
            rel_tol_2d: o.spec_2d.rel_tol,
            fd_step: o.fd_step,
            omega_max_factor: o.omega_max_factor,
            tilt: o.tilt,
            threshold_width: o.threshold_width,
        }
    }

    pub fn options(&self, allow_unstable: bool) -> ObservableOptions {
        let spec = QuadratureSpec {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_subdivisions: self.max_subdivisions,
            tail: self.tail,
        };
        ObservableOptions {
            spec,
            spec_2d: QuadratureSpec {
                rel_tol: self.rel_tol_2d,
                ..spec
            },
            allow_unstable,
            fd_step: self.fd_step,
            omega_max_factor: self.omega_max_factor,
            tilt: self.tilt,
            threshold_width: self.threshold_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub materials: BTreeMap<String, MaterialDef>,
    #[serde(default)]
    pub stacks: BTreeMap<String, StackDef>,
    #[serde(default)]
    pub emitters: Vec<EmitterDef>,
    #[serde(default)]
    pub sweeps: Vec<Sweep>,
    pub observables: Vec<ObservableDef>,
    #[serde(default)]
    pub numerics: Numerics,
}

/// Read, default and validate a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_json(&text)
}

impl Scenario {
    /// Parse from JSON text. Unknown keys, unit violations and dangling
    /// references are collected and reported together.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut unknown = Vec::new();
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut s: Scenario = serde_ignored::deserialize(de, |p| unknown.push(format!("{p}: unknown key")))
            .map_err(|e| Error::Scenario(vec![e.to_string()]))?;
        s.apply_defaults();
        let mut problems = unknown;
        problems.extend(s.problems());
        if problems.is_empty() {
            Ok(s)
        } else {
            Err(Error::Scenario(problems))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn apply_defaults(&mut self) {
        for (i, o) in self.observables.iter_mut().enumerate() {
            if o.name.is_empty() {
                o.name = format!("{}_{i}", o.kind.name());
            }
        }
        for (i, s) in self.sweeps.iter_mut().enumerate() {
            if s.name.is_empty() {
                s.name = format!("{}_{i}", s.axis.name());
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Scenario(p))
        }
    }

    /// Every problem with the scenario, each prefixed with its location.
    pub fn problems(&self) -> Vec<String> {
        let mut r = Resolver {
            s: self,
            errs: Vec::new(),
        };
        r.plan();
        r.errs
    }

    /// Observable jobs with every reference resolved.
    pub fn resolve(&self) -> Result<Vec<Job>> {
        let mut r = Resolver {
            s: self,
            errs: Vec::new(),
        };
        let jobs = r.plan();
        if r.errs.is_empty() {
            Ok(jobs)
        } else {
            Err(Error::Scenario(r.errs))
        }
    }

    /// Sweeps applying to an observable; a single fixed point if none do.
    pub fn sweeps_for(&self, name: &str) -> Vec<&Sweep> {
        self.sweeps
            .iter()
            .filter(|s| s.observables.is_empty() || s.observables.iter().any(|o| o == name))
            .collect()
    }
}

/// The physical system behind a resolved observable.
#[derive(Debug, Clone)]
pub enum System {
    Emitter {
        stack: LayerStack,
        emitter: Emitter,
    },
    Plates {
        pair: StackPair,
        gap: f64,
    },
    Bodies {
        pair: HalfSpacePair,
        gap: f64,
        v_d: f64,
        sigma_xy: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Job {
    pub name: String,
    pub kind: ObservableKind,
    pub route: Route,
    pub system: System,
}

struct Resolver<'a> {
    s: &'a Scenario,
    errs: Vec<String>,
}

impl Resolver<'_> {
    fn err(&mut self, at: &str, msg: impl fmt::Display) {
        self.errs.push(format!("{at}: {msg}"));
    }

    /// Value of `q` in the expected unit.
    fn quantity(&mut self, at: &str, q: &Quantity, unit: &str) -> f64 {
        if q.unit.is_empty() {
            self.err(at, format!("missing unit (expected \"{unit}\")"));
        } else if q.unit != unit {
            self.err(at, format!("unit \"{}\" where \"{unit}\" is required", q.unit));
        } else if !q.value.is_finite() {
            self.err(at, "value is not finite");
        }
        q.value
    }

    fn positive(&mut self, at: &str, q: &Quantity, unit: &str) -> f64 {
        let v = self.quantity(at, q, unit);
        if !(v > 0.0) {
            self.err(at, format!("must be positive, got {v}"));
        }
        v
    }

    fn material(&mut self, name: &str, at: &str) -> Option<MaterialResponse> {
        if let Some(def) = self.s.materials.get(name) {
            return self.build_material(name, def);
        }
        if name == "vacuum" {
            return Some(MaterialResponse::vacuum());
        }
        self.err(at, format!("undefined material \"{name}\""));
        None
    }

    fn build_material(&mut self, name: &str, def: &MaterialDef) -> Option<MaterialResponse> {
        let at = format!("materials.{name}");
        let before = self.errs.len();
        let mut chans = Vec::new();
        for (i, c) in def.channels.iter().enumerate() {
            let at = format!("{at}.channels[{i}]");
            let gamma = self.positive(&format!("{at}.gamma"), &c.gamma, "rad/s");
            let need = |r: &mut Self, field: &str, q: &Option<Quantity>, unit: &str| match q {
                Some(q) => r.quantity(&format!("{at}.{field}"), q, unit),
                None => {
                    r.err(&at, format!("{} channel needs \"{field}\"", kind_name(c.kind)));
                    0.0
                }
            };
            let ch = match c.kind {
                ChannelKind::Lorentz => {
                    let w0 = need(self, "omega0", &c.omega0, "rad/s");
                    let wp = need(self, "omega_p", &c.omega_p, "rad/s");
                    PermittivityChannel::lorentz(c.f, w0, gamma, wp)
                }
                ChannelKind::Drude => {
                    let wp = need(self, "omega_p", &c.omega_p, "rad/s");
                    PermittivityChannel::drude(c.f, gamma, wp)
                }
                ChannelKind::Conductivity => {
                    let sxx = need(self, "sigma_xx", &c.sigma_xx, "S/m");
                    let sxy = match &c.sigma_xy {
                        Some(q) => self.quantity(&format!("{at}.sigma_xy"), q, "S/m"),
                        None => 0.0,
                    };
                    PermittivityChannel::conductivity(c.f, gamma, sxx, sxy)
                }
            };
            let unused: &[(&str, bool)] = match c.kind {
                ChannelKind::Lorentz => &[("sigma_xx", c.sigma_xx.is_some()), ("sigma_xy", c.sigma_xy.is_some())],
                ChannelKind::Drude => &[
                    ("omega0", c.omega0.is_some()),
                    ("sigma_xx", c.sigma_xx.is_some()),
                    ("sigma_xy", c.sigma_xy.is_some()),
                ],
                ChannelKind::Conductivity => &[("omega0", c.omega0.is_some()), ("omega_p", c.omega_p.is_some())],
            };
            for (field, set) in unused {
                if *set {
                    self.err(
                        &at,
                        format!("\"{field}\" does not apply to a {} channel", kind_name(c.kind)),
                    );
                }
            }
            chans.push(ch);
        }
        let v = [
            self.quantity(&format!("{at}.v[0]"), &def.v[0], "m/s"),
            self.quantity(&format!("{at}.v[1]"), &def.v[1], "m/s"),
        ];
        let vd = [
            self.quantity(&format!("{at}.v_d[0]"), &def.v_d[0], "m/s"),
            self.quantity(&format!("{at}.v_d[1]"), &def.v_d[1], "m/s"),
        ];
        let m = MaterialResponse::new(def.background, chans)
            .with_velocity(v)
            .with_drift(vd);
        if self.errs.len() == before {
            if let Err(e) = m.validate() {
                self.err(&at, e);
            }
        }
        (self.errs.len() == before).then_some(m)
    }

    fn stack(&mut self, name: &str, at: &str) -> Option<LayerStack> {
        let Some(def) = self.s.stacks.get(name) else {
            self.err(at, format!("undefined stack \"{name}\""));
            return None;
        };
        let at = format!("stacks.{name}");
        let before = self.errs.len();
        let n = def.layers.len();
        if n < 2 {
            self.err(&at, "a stack needs at least two layers (the two half-spaces)");
            return None;
        }
        let mut mats = Vec::new();
        let mut thick = Vec::new();
        for (i, l) in def.layers.iter().enumerate() {
            let lat = format!("{at}.layers[{i}]");
            let m = self.material(&l.material, &format!("{lat}.material"));
            let outer = i == 0 || i == n - 1;
            match (&l.thickness, outer) {
                (Some(_), true) => self.err(&lat, "half-spaces take no thickness"),
                (None, false) => self.err(&lat, "interior layers need a thickness"),
                (Some(q), false) => thick.push(self.positive(&format!("{lat}.thickness"), q, "m")),
                (None, true) => {}
            }
            mats.extend(m);
        }
        if self.errs.len() != before {
            return None;
        }
        let bottom = mats.pop()?;
        let top = mats.remove(0);
        match LayerStack::new(top, mats.into_iter().zip(thick).collect(), bottom) {
            Ok(s) => Some(s),
            Err(e) => {
                self.err(&at, e);
                None
            }
        }
    }

    fn emitter(&mut self, name: &str, at: &str) -> Option<Emitter> {
        let Some((i, def)) = self.s.emitters.iter().enumerate().find(|(_, e)| e.name == name) else {
            self.err(at, format!("undefined emitter \"{name}\""));
            return None;
        };
        let at = format!("emitters[{i}]");
        let before = self.errs.len();
        let w0 = self.positive(&format!("{at}.omega0"), &def.omega0, "rad/s");
        let z = if def.z.unit == "c/omega0" {
            def.z.value * C / w0
        } else {
            self.quantity(&format!("{at}.z"), &def.z, "m")
        };
        if !(z > 0.0) {
            self.err(&format!("{at}.z"), "emitter must sit above the stack (z > 0)");
        }
        let mut d = [0.0; 3];
        for (k, q) in def.dipole.iter().enumerate() {
            d[k] = self.quantity(&format!("{at}.dipole[{k}]"), q, "C*m");
        }
        if d == [0.0; 3] {
            self.err(&format!("{at}.dipole"), "dipole is zero");
        }
        (self.errs.len() == before).then_some(Emitter::new([0.0, 0.0, z], w0, d))
    }

    fn required<'b>(&mut self, at: &str, field: &str, v: &'b Option<String>) -> Option<&'b str> {
        if v.is_none() {
            self.err(at, format!("missing \"{field}\""));
        }
        v.as_deref()
    }

    fn forbid(&mut self, at: &str, o: &ObservableDef, fields: &[&str]) {
        for &f in fields {
            let set = match f {
                "stack" => o.stack.is_some(),
                "emitter" => o.emitter.is_some(),
                "lower" => o.lower.is_some(),
                "upper" => o.upper.is_some(),
                "first" => o.first.is_some(),
                "second" => o.second.is_some(),
                "gap" => o.gap.is_some(),
                "v_d" => o.v_d.is_some(),
                "sigma_xy" => o.sigma_xy.is_some(),
                _ => false,
            };
            if set {
                self.err(at, format!("\"{f}\" does not apply to {}", o.kind.name()));
            }
        }
    }

    fn job(&mut self, i: usize, o: &ObservableDef) -> Option<Job> {
        let at = format!("observables[{i}]");
        let before = self.errs.len();
        let gap = |r: &mut Self| match &o.gap {
            Some(q) => Some(r.positive(&format!("{at}.gap"), q, "m")),
            None => {
                r.err(&at, "missing \"gap\"");
                None
            }
        };
        let system = match o.kind {
            k if k.is_emitter() => {
                self.forbid(&at, o, &["lower", "upper", "first", "second", "gap", "v_d", "sigma_xy"]);
                let s = self
                    .required(&at, "stack", &o.stack)
                    .and_then(|n| self.stack(n, &format!("{at}.stack")));
                let e = self
                    .required(&at, "emitter", &o.emitter)
                    .and_then(|n| self.emitter(n, &format!("{at}.emitter")));
                if o.route == Route::Alternative && k != ObservableKind::CpForce {
                    self.err(&at, format!("{} has no alternative route", k.name()));
                }
                System::Emitter { stack: s?, emitter: e? }
            }
            ObservableKind::CasimirPressure => {
                self.forbid(&at, o, &["stack", "emitter", "first", "second", "v_d", "sigma_xy"]);
                let lo = self
                    .required(&at, "lower", &o.lower)
                    .and_then(|n| self.stack(n, &format!("{at}.lower")));
                let up = self
                    .required(&at, "upper", &o.upper)
                    .and_then(|n| self.stack(n, &format!("{at}.upper")));
                let gap = gap(self);
                let pair = StackPair::new(lo?, up?);
                if let Err(e) = pair.validate() {
                    self.err(&at, e);
                }
                System::Plates { pair, gap: gap? }
            }
            _ => {
                let hall = o.kind == ObservableKind::Hall;
                self.forbid(&at, o, &["stack", "emitter", "lower", "upper"]);
                if !hall {
                    self.forbid(&at, o, &["v_d", "sigma_xy"]);
                }
                let a = self
                    .required(&at, "first", &o.first)
                    .and_then(|n| self.material(n, &format!("{at}.first")));
                let b = self
                    .required(&at, "second", &o.second)
                    .and_then(|n| self.material(n, &format!("{at}.second")));
                let gap = gap(self);
                let (mut v_d, mut sigma_xy) = (0.0, 0.0);
                if hall {
                    match (&o.v_d, &o.sigma_xy) {
                        (Some(v), Some(s)) => {
                            v_d = self.quantity(&format!("{at}.v_d"), v, "m/s");
                            sigma_xy = self.quantity(&format!("{at}.sigma_xy"), s, "S/m");
                        }
                        _ => self.err(&at, "hall needs \"v_d\" and \"sigma_xy\""),
                    }
                }
                System::Bodies {
                    pair: HalfSpacePair::new(a?, b?),
                    gap: gap?,
                    v_d,
                    sigma_xy,
                }
            }
        };
        (self.errs.len() == before).then(|| Job {
            name: o.name.clone(),
            kind: o.kind,
            route: o.route,
            system,
        })
    }

    fn sweep(&mut self, i: usize, s: &Sweep) {
        let at = format!("sweeps[{i}]");
        let z_relative = s.axis == Axis::Z && s.from.unit == "c/omega0" && s.to.unit == "c/omega0";
        let unit = if z_relative { "c/omega0" } else { s.axis.unit() };
        let a = self.quantity(&format!("{at}.from"), &s.from, unit);
        let b = self.quantity(&format!("{at}.to"), &s.to, unit);
        if s.points == 0 {
            self.err(&at, "points must be at least 1");
        }
        if s.spacing == Spacing::Log && !(a > 0.0 && b > 0.0) {
            self.err(&at, "log spacing needs a positive range");
        }
        if s.points > 1 && a == b {
            self.err(&at, "empty range");
        }
        let dup = self.s.sweeps[..i].iter().any(|o| o.name == s.name);
        if dup {
            self.err(&at, format!("duplicate sweep name \"{}\"", s.name));
        }
        let names: Vec<&str> = if s.observables.is_empty() {
            self.s.observables.iter().map(|o| o.name.as_str()).collect()
        } else {
            s.observables.iter().map(String::as_str).collect()
        };
        for n in names {
            match self.s.observables.iter().find(|o| o.name == n) {
                None => self.err(&format!("{at}.observables"), format!("undefined observable \"{n}\"")),
                Some(o) if !o.kind.accepts(s.axis) => self.err(
                    &at,
                    format!(
                        "axis \"{}\" does not apply to {} (\"{n}\")",
                        s.axis.name(),
                        o.kind.name()
                    ),
                ),
                Some(_) => {}
            }
        }
    }

    fn plan(&mut self) -> Vec<Job> {
        for (name, def) in &self.s.materials {
            self.build_material(name, def);
        }
        let s = self.s;
        if s.observables.is_empty() {
            self.err("observables", "nothing to compute");
        }
        let mut jobs = Vec::new();
        for (i, o) in s.observables.iter().enumerate() {
            if s.observables[..i].iter().any(|p| p.name == o.name) {
                self.err(&format!("observables[{i}]"), format!("duplicate name \"{}\"", o.name));
            }
            jobs.extend(self.job(i, o));
        }
        for (i, sw) in s.sweeps.iter().enumerate() {
            self.sweep(i, sw);
        }
        if let Err(e) = s.numerics.options(false).validate() {
            self.err("numerics", e);
        }
        // Material definitions are checked once above; references re-check
        // them, so drop repeats.
        let mut seen = std::collections::HashSet::new();
        self.errs.retain(|e| seen.insert(e.clone()));
        jobs
    }
}

fn kind_name(k: ChannelKind) -> &'static str {
    match k {
        ChannelKind::Lorentz => "lorentz",
        ChannelKind::Drude => "drude",
        ChannelKind::Conductivity => "conductivity",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "emitters": [ { "name": "atom", "z": "1e-7 m", "omega0": "2e15 rad/s",
                        "dipole": ["0 C*m", "0 C*m", "1e-29 C*m"] } ],
        "stacks": { "free": { "layers": [ { "material": "vacuum" }, { "material": "vacuum" } ] } },
        "observables": [ { "kind": "decay_rate", "stack": "free", "emitter": "atom" } ]
    }"#;

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.observables[0].name, "decay_rate_0");
        assert_eq!(s.numerics, Numerics::default());
        assert!(s.sweeps.is_empty());
        assert_eq!(s.resolve().unwrap().len(), 1);
    }

    #[test]
    fn quantity_round_trips_exactly() {
        for v in [1e-8, 0.1 + 0.2, -3.5e15, 5e-324] {
            let q = Quantity::new(v, "rad/s");
            let back: Quantity = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
            assert_eq!(back, q);
        }
    }

    #[test]
    fn log_axis_has_requested_points() {
        let sw = Sweep {
            name: "z".into(),
            axis: Axis::Z,
            from: Quantity::new(0.01, "c/omega0"),
            to: Quantity::new(10.0, "c/omega0"),
            points: 50,
            spacing: Spacing::Log,
            observables: vec![],
        };
        let v = sw.values();
        assert_eq!(v.len(), 50);
        assert_eq!(v[0], 0.01);
        assert!((v[49] - 10.0).abs() < 1e-12);
        assert!((v[1] / v[0] - v[49] / v[48]).abs() < 1e-12);
    }

    #[test]
    fn missing_unit_is_reported() {
        let text = MINIMAL.replace("\"1e-7 m\"", "1e-7");
        let Err(Error::Scenario(p)) = Scenario::from_json(&text) else {
            panic!("expected scenario error")
        };
        assert!(p[0].starts_with("emitters[0].z: missing unit"), "{p:?}");
    }
}

//! Dyadic Green tensor of planar multilayers.
//!
//! Geometry: the first layer is the upper half-space `z > 0` (where emitters
//! and observation points live), the top interface sits at `z = 0`, slabs
//! follow downward and the last layer is the lower half-space. Interface
//! depths below the top surface are therefore strictly increasing.
//!
//! Spectral conventions: `G(r, r') = (1/4π²) ∫d²k ĝ(k; z, z') e^{ik·(ρ-ρ')}`,
//! `Ḡ = (ω²/c²) G`.

mod fresnel;
mod green;
mod volume;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::C;
use crate::error::{Error, Result};
use crate::material::MaterialResponse;

pub use fresnel::{fresnel_coefficients, Fresnel, StackModes};
pub use green::{
    free_space_green, free_space_imag_green, homogeneous_green, homogeneous_imag_green, imag_green, layered_green,
    real_space_green, scattered_green, scattered_green_dz, scattered_imag_green, scattered_imag_green_dz,
    SpectralGreen,
};
pub use volume::{imag_green_identity_check, volume_terms, IdentityCheck, VolumeTerms};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub material: MaterialResponse,
    /// Thickness in m; `f64::INFINITY` for the two half-spaces.
    pub thickness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
}

impl LayerStack {
    /// Upper half-space, slabs `(material, thickness)` top to bottom, lower
    /// half-space.
    pub fn new(top: MaterialResponse, slabs: Vec<(MaterialResponse, f64)>, bottom: MaterialResponse) -> Result<Self> {
        let mut layers = vec![Layer {
            material: top,
            thickness: f64::INFINITY,
        }];
        layers.extend(
            slabs
                .into_iter()
                .map(|(material, thickness)| Layer { material, thickness }),
        );
        layers.push(Layer {
            material: bottom,
            thickness: f64::INFINITY,
        });
        let s = Self { layers };
        s.validate()?;
        Ok(s)
    }

    pub fn half_space(top: MaterialResponse, bottom: MaterialResponse) -> Result<Self> {
        Self::new(top, Vec::new(), bottom)
    }

    /// Vacuum above a half-space of `bottom`.
    pub fn interface(bottom: MaterialResponse) -> Result<Self> {
        Self::half_space(MaterialResponse::vacuum(), bottom)
    }

    pub fn vacuum() -> Self {
        Self::interface(MaterialResponse::vacuum()).expect("vacuum stack is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.layers.len();
        if n < 2 {
            return Err(Error::InvalidInput(
                "a stack needs an upper and a lower half-space".into(),
            ));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let edge = i == 0 || i == n - 1;
            if edge && l.thickness != f64::INFINITY {
                return Err(Error::InvalidInput(format!(
                    "layer {i} is a half-space and must have infinite thickness"
                )));
            }
            if !edge && !(l.thickness > 0.0 && l.thickness.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "interior layer {i} needs a finite positive thickness, got {}",
                    l.thickness
                )));
            }
            l.material.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Depths of the interfaces below `z = 0`, strictly increasing.
    pub fn interface_depths(&self) -> Vec<f64> {
        let mut d = vec![0.0];
        for l in &self.layers[1..self.layers.len() - 1] {
            d.push(d.last().unwrap() + l.thickness);
        }
        d
    }

    /// Layer index and depth below that layer's top interface for height `z`
    /// (`z > 0` is the upper half-space, where the returned "depth" is `-z`).
    pub fn locate(&self, z: f64) -> (usize, f64) {
        if z > 0.0 {
            return (0, -z);
        }
        let depth = -z;
        let ds = self.interface_depths();
        for (i, w) in ds.windows(2).enumerate() {
            if depth <= w[1] {
                return (i + 1, depth - w[0]);
            }
        }
        (self.layers.len() - 1, depth - ds.last().unwrap())
    }

    pub fn top(&self) -> &MaterialResponse {
        &self.layers[0].material
    }

    pub fn is_passive(&self) -> bool {
        self.layers.iter().all(|l| l.material.is_passive())
    }

    pub fn has_gain(&self) -> bool {
        self.layers
            .iter()
            .any(|l| l.material.channels.iter().any(|c| c.is_gain()))
    }

    /// No moving or biased layer: the Green tensor is reciprocal and its
    /// spectral form depends on `|k∥|` only.
    pub fn is_reciprocal(&self) -> bool {
        self.layers
            .iter()
            .all(|l| !l.material.is_moving() && !l.material.is_biased())
    }

    /// Lab-frame permittivities of every layer for the mode (ω, k∥).
    pub fn permittivities(&self, omega: Complex64, k: [f64; 2]) -> Result<Vec<Complex64>> {
        self.layers.iter().map(|l| l.material.eval_lab(omega, k)).collect()
    }

    /// Frequency scales of all materials.
    pub fn frequency_scales(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.layers.iter().flat_map(|l| l.material.frequency_scales()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Frequencies with `Re ε = -1` in any layer.
    pub fn surface_modes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.layers.iter().flat_map(|l| l.material.surface_modes()).collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Normal wavevector `k_z = √(ε ω²/c² - k∥²)` on the branch `Im k_z ≥ 0`,
/// with `Re k_z ≥ 0` when `k_z` is real.
pub fn kz(eps: Complex64, omega: Complex64, q: f64) -> Complex64 {
    let k0 = omega / C;
    let arg = Complex64::new(q * q, 0.0) - eps * k0 * k0;
    let mut v = Complex64::i() * arg.sqrt();
    if v.im < 0.0 || (v.im == 0.0 && v.re < 0.0) {
        v = -v;
    }
    v
}

/// In-plane unit vector and magnitude of k∥ (`x̂` for k∥ = 0).
pub(crate) fn in_plane(k: [f64; 2]) -> ([f64; 2], f64) {
    let q = k[0].hypot(k[1]);
    if q > 0.0 {
        ([k[0] / q, k[1] / q], q)
    } else {
        ([1.0, 0.0], 0.0)
    }
}

//! Synthetic antenna patterns and perturbation fields built from Gaussian
//! lobes on the sphere.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beamspace::{compute_basis, PerturbationField, StatePatternSet};
use crate::constellation::RatioSet;
use crate::error::{Error, Result};
use crate::sphere::{integrate_power, ComplexAngularMap, SphericalGrid, VectorPattern};

/// Great-circle angle between two directions, in radians.
pub fn angular_distance(theta1: f64, phi1: f64, theta2: f64, phi2: f64) -> f64 {
    let u = unit_vector(theta1, phi1);
    let v = unit_vector(theta2, phi2);
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let cn = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    cn.atan2(dot)
}

pub fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

#[inline]
fn gaussian(distance: f64, width: f64) -> f64 {
    (-(distance * distance) / (2.0 * width * width)).exp()
}

/// One lobe of the free-space `+1` state pattern. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternLobe {
    pub theta: f64,
    pub phi: f64,
    pub width: f64,
    pub amp_theta: Complex64,
    pub amp_phi: Complex64,
}

/// Sum of lobes describing the `+1` state; the `-1` state is its mirror
/// image through the `phi = 0` plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaProfile {
    pub lobes: Vec<PatternLobe>,
}

impl AntennaProfile {
    /// Profile whose free-space basis imbalance sits at about 0.8 dB.
    pub fn calibrated_default() -> Self {
        let deg = f64::to_radians;
        Self {
            lobes: vec![
                PatternLobe {
                    theta: deg(60.0),
                    phi: deg(75.0),
                    width: deg(37.5),
                    amp_theta: Complex64::new(1.0, 0.0),
                    amp_phi: Complex64::new(0.0, 0.0),
                },
                PatternLobe {
                    theta: deg(110.0),
                    phi: deg(150.0),
                    width: deg(30.0),
                    amp_theta: Complex64::from_polar(0.3, deg(60.0)),
                    amp_phi: Complex64::new(0.4, 0.0),
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lobes.is_empty() {
            return Err(Error::InvalidArgument("antenna profile has no lobes".into()));
        }
        for l in &self.lobes {
            if !(l.width > 0.0) || !l.width.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "lobe width must be positive, got {}",
                    l.width
                )));
            }
            if !(l.theta.is_finite() && l.phi.is_finite() && l.amp_theta.is_finite() && l.amp_phi.is_finite()) {
                return Err(Error::InvalidArgument("non-finite lobe parameter".into()));
            }
        }
        Ok(())
    }

    /// `+1` state pattern sampled on `grid`, unnormalized.
    pub fn sample(&self, grid: &Arc<SphericalGrid>) -> Result<VectorPattern> {
        self.validate()?;
        VectorPattern::from_fn(Arc::clone(grid), |t, p| {
            self.lobes.iter().fold([Complex64::new(0.0, 0.0); 2], |[et, ep], l| {
                let g = gaussian(angular_distance(t, p, l.theta, l.phi), l.width);
                [et + l.amp_theta * g, ep + l.amp_phi * g]
            })
        })
    }
}

/// Mirror image through the `phi = 0` plane: `phi -> 2π - phi`, φ̂ flips sign.
pub fn mirror_pattern(p: &VectorPattern) -> VectorPattern {
    let grid = Arc::clone(p.grid());
    let n = grid.len();
    let mut e_theta = Vec::with_capacity(n);
    let mut e_phi = Vec::with_capacity(n);
    for k in 0..n {
        let m = grid.mirror_index(k);
        e_theta.push(p.e_theta()[m]);
        e_phi.push(-p.e_phi()[m]);
    }
    VectorPattern::from_parts_unchecked(grid, e_theta, e_phi)
}

/// Free-space state set of a mirror-symmetric antenna.
///
/// The `+1` state is the profile normalized to 4π radiated power, `-1` is its
/// mirror image, and every other ratio is synthesized as `B1 + x̄ B2` from
/// the exact basis so that the set decomposes without error.
pub fn generate_mirror_pair(
    profile: &AntennaProfile,
    grid: &Arc<SphericalGrid>,
    ratios: &RatioSet,
) -> Result<StatePatternSet> {
    let plus_idx = ratios.plus_one().ok_or_else(|| Error::MissingState("+1".into()))?;
    let minus_idx = ratios.minus_one().ok_or_else(|| Error::MissingState("-1".into()))?;

    let raw = profile.sample(grid)?;
    let power = integrate_power(&raw);
    if !(power > 0.0) {
        return Err(Error::InvalidArgument("antenna profile radiates no power".into()));
    }
    let e_plus = raw.scale(Complex64::new((4.0 * PI / power).sqrt(), 0.0));
    let e_minus = mirror_pattern(&e_plus);
    let basis = compute_basis(&e_plus, &e_minus)?;

    let one = Complex64::new(1.0, 0.0);
    let patterns = (0..ratios.len())
        .map(|k| {
            if k == plus_idx {
                Ok(e_plus.clone())
            } else if k == minus_idx {
                Ok(e_minus.clone())
            } else {
                crate::sphere::lincomb(one, &basis.b1, ratios.get(k), &basis.b2)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    StatePatternSet::new(ratios.clone(), patterns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PolarizationSelector {
    Theta,
    Phi,
    #[default]
    Both,
}

impl PolarizationSelector {
    fn covers(self, component: usize) -> bool {
        match self {
            PolarizationSelector::Theta => component == 0,
            PolarizationSelector::Phi => component == 1,
            PolarizationSelector::Both => true,
        }
    }
}

/// `a · exp(jδ) · exp(-d²/(2σ²))` added to `Ψ` for the selected states and
/// polarizations. `states == None` means every state. Angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationLobe {
    pub states: Option<Vec<usize>>,
    pub polarization: PolarizationSelector,
    pub theta: f64,
    pub phi: f64,
    pub width: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// `Ψ^{x̄}(Ω) = 1 + Σ_k a_k exp(-d(Ω, Ω_k)²/(2σ_k²)) exp(jδ_k)` per state and
/// polarization.
pub fn generate_perturbation(
    lobes: &[PerturbationLobe],
    grid: &Arc<SphericalGrid>,
    ratios: &RatioSet,
) -> Result<PerturbationField> {
    for l in lobes {
        if !(l.width > 0.0) || !l.width.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "perturbation lobe width must be positive, got {}",
                l.width
            )));
        }
        if let Some(states) = &l.states {
            if let Some(&bad) = states.iter().find(|&&s| s >= ratios.len()) {
                return Err(Error::InvalidArgument(format!("no antenna state #{bad}")));
            }
        }
    }

    let n = grid.len();
    let mut values = vec![[vec![Complex64::new(1.0, 0.0); n], vec![Complex64::new(1.0, 0.0); n]]; ratios.len()];
    for l in lobes {
        let coeff = Complex64::from_polar(l.amplitude, l.phase);
        let shape: Vec<f64> = (0..n)
            .map(|k| {
                let (t, p) = grid.coords(k);
                gaussian(angular_distance(t, p, l.theta, l.phi), l.width)
            })
            .collect();
        for (state, maps) in values.iter_mut().enumerate() {
            if l.states.as_ref().is_some_and(|s| !s.contains(&state)) {
                continue;
            }
            for (component, map) in maps.iter_mut().enumerate() {
                if !l.polarization.covers(component) {
                    continue;
                }
                for (v, g) in map.iter_mut().zip(&shape) {
                    *v += coeff * g;
                }
            }
        }
    }

    let factors = values
        .into_iter()
        .map(|[t, p]| {
            Ok([
                ComplexAngularMap::new(Arc::clone(grid), t)?,
                ComplexAngularMap::new(Arc::clone(grid), p)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    PerturbationField::new(ratios.clone(), factors)
}

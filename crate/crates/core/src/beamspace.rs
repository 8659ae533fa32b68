//! Beam-space pattern algebra.
//!
//! A single-feed antenna radiates `x1 * E_u^{x̄}` where `x̄ = x2 / x1` selects
//! the load state. The basis patterns are the half-sum and half-difference of
//! the `+1` and `-1` states, so the radiated field decomposes as
//! `x1 * B1 + x2 * B2` whenever every state obeys `E_u^{x̄} = B1 + x̄ B2`.
//! A near-field perturbation multiplies each state by its own angular factor
//! and breaks that identity for every state other than ±1; the EVM map
//! measures the damage per direction.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::constellation::RatioSet;
use crate::error::{Error, Result};
use crate::sphere::{
    inner_product, integrate_power, lincomb, same_grid, ComplexAngularMap, ScalarAngularMap, SphericalGrid,
    VectorPattern,
};

/// Relative power below which a basis member is treated as vanishing
/// (i.e. an imbalance beyond 240 dB).
const DEGENERATE_POWER_RATIO: f64 = 1e-24;

/// Normalized correlations at or below this level (-240 dB) are rounding
/// residue of the full-sphere sum and are reported as `-inf`.
pub const CORRELATION_FLOOR: f64 = 1e-12;

/// EVM values at or below this level are rounding residue of
/// `(E+ ± E-)/2` and are reported as exactly zero.
pub const EVM_FLOOR: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct BasisPair {
    pub b1: VectorPattern,
    pub b2: VectorPattern,
}

impl BasisPair {
    pub fn grid(&self) -> &Arc<SphericalGrid> {
        self.b1.grid()
    }

    /// Ideal field `B1 + x̄ B2` at grid point `k`.
    #[inline]
    pub fn ideal_at(&self, k: usize, ratio: Complex64) -> [Complex64; 2] {
        let [a1, a2] = self.b1.at(k);
        let [c1, c2] = self.b2.at(k);
        [a1 + ratio * c1, a2 + ratio * c2]
    }
}

/// Embedded pattern per antenna state, indexed like the ratio set.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePatternSet {
    ratios: RatioSet,
    patterns: Vec<VectorPattern>,
}

impl StatePatternSet {
    pub fn new(ratios: RatioSet, patterns: Vec<VectorPattern>) -> Result<Self> {
        if patterns.len() != ratios.len() {
            return Err(Error::KeyMismatch(format!(
                "{} patterns for {} ratios",
                patterns.len(),
                ratios.len()
            )));
        }
        let first = patterns.first().ok_or(Error::Empty("state pattern set"))?;
        for (k, p) in patterns.iter().enumerate() {
            first.check_same_grid(p)?;
            let power = integrate_power(p);
            if !(power > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "state {} radiates no power",
                    ratios.label(k)
                )));
            }
        }
        Ok(Self { ratios, patterns })
    }

    pub fn ratios(&self) -> &RatioSet {
        &self.ratios
    }

    pub fn patterns(&self) -> &[VectorPattern] {
        &self.patterns
    }

    pub fn pattern(&self, k: usize) -> &VectorPattern {
        &self.patterns[k]
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        self.patterns[0].grid()
    }

    pub fn for_ratio(&self, ratio: Complex64) -> Result<&VectorPattern> {
        Ok(&self.patterns[self.ratios.require(ratio)?])
    }

    fn state_index(&self, ratio: Option<usize>, label: &str) -> Result<usize> {
        ratio.ok_or_else(|| Error::MissingState(label.into()))
    }

    pub fn plus_one(&self) -> Result<&VectorPattern> {
        Ok(&self.patterns[self.state_index(self.ratios.plus_one(), "+1")?])
    }

    pub fn minus_one(&self) -> Result<&VectorPattern> {
        Ok(&self.patterns[self.state_index(self.ratios.minus_one(), "-1")?])
    }

    /// Multiplies every pattern by one complex constant.
    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            ratios: self.ratios.clone(),
            patterns: self.patterns.iter().map(|p| p.scale(c)).collect(),
        }
    }

    pub fn powers(&self) -> Vec<f64> {
        self.patterns.iter().map(integrate_power).collect()
    }
}

/// Per-state, per-polarization angular factor `Ψ^{x̄}(Ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationField {
    ratios: RatioSet,
    factors: Vec<[ComplexAngularMap; 2]>,
}

impl PerturbationField {
    pub fn new(ratios: RatioSet, factors: Vec<[ComplexAngularMap; 2]>) -> Result<Self> {
        if factors.len() != ratios.len() {
            return Err(Error::KeyMismatch(format!(
                "{} factors for {} ratios",
                factors.len(),
                ratios.len()
            )));
        }
        let grid = factors.first().ok_or(Error::Empty("perturbation field"))?[0]
            .grid()
            .clone();
        for pair in &factors {
            for map in pair {
                if !same_grid(&grid, map.grid()) {
                    return Err(Error::GridMismatch);
                }
                if map.values().iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite perturbation factor".into()));
                }
            }
        }
        Ok(Self { ratios, factors })
    }

    pub fn identity(grid: Arc<SphericalGrid>, ratios: RatioSet) -> Self {
        Self::uniform(grid, ratios, Complex64::new(1.0, 0.0))
    }

    /// The same constant factor for every state, direction and polarization.
    pub fn uniform(grid: Arc<SphericalGrid>, ratios: RatioSet, value: Complex64) -> Self {
        let map = ComplexAngularMap::filled(grid, value);
        let factors = (0..ratios.len()).map(|_| [map.clone(), map.clone()]).collect();
        Self { ratios, factors }
    }

    /// One factor pair applied to every state.
    pub fn state_independent(ratios: RatioSet, theta: ComplexAngularMap, phi: ComplexAngularMap) -> Result<Self> {
        let factors = (0..ratios.len()).map(|_| [theta.clone(), phi.clone()]).collect();
        Self::new(ratios, factors)
    }

    pub fn ratios(&self) -> &RatioSet {
        &self.ratios
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        self.factors[0][0].grid()
    }

    /// `[Ψ_θ, Ψ_φ]` for state `k`.
    pub fn factors(&self, k: usize) -> &[ComplexAngularMap; 2] {
        &self.factors[k]
    }
}

/// `B1 = (E+ + E-)/2`, `B2 = (E+ - E-)/2`.
pub fn compute_basis(e_plus: &VectorPattern, e_minus: &VectorPattern) -> Result<BasisPair> {
    let half = Complex64::new(0.5, 0.0);
    Ok(BasisPair {
        b1: lincomb(half, e_plus, half, e_minus)?,
        b2: lincomb(half, e_plus, -half, e_minus)?,
    })
}

/// Radiated field `x1 B1 + x2 B2` for one symbol pair.
pub fn synthesize_pattern(basis: &BasisPair, x1: Complex64, x2: Complex64) -> Result<VectorPattern> {
    if x1 == Complex64::new(0.0, 0.0) {
        return Err(Error::UndefinedRatio);
    }
    lincomb(x1, &basis.b1, x2, &basis.b2)
}

/// State set that satisfies the beam-space decomposition exactly:
/// `E^{x̄} = B1 + x̄ B2` for every ratio.
pub fn states_from_basis(basis: &BasisPair, ratios: &RatioSet) -> Result<StatePatternSet> {
    let one = Complex64::new(1.0, 0.0);
    let patterns = ratios
        .ratios()
        .iter()
        .map(|&r| lincomb(one, &basis.b1, r, &basis.b2))
        .collect::<Result<Vec<_>>>()?;
    StatePatternSet::new(ratios.clone(), patterns)
}

/// `Ê^{x̄} = Ψ^{x̄} · E^{x̄}` per state and polarization.
pub fn apply_perturbation(s: &StatePatternSet, psi: &PerturbationField) -> Result<StatePatternSet> {
    if s.ratios() != psi.ratios() {
        return Err(Error::KeyMismatch(
            "perturbation states differ from pattern states".into(),
        ));
    }
    if !same_grid(s.grid(), psi.grid()) {
        return Err(Error::GridMismatch);
    }
    let patterns = s
        .patterns()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let [ft, fp] = psi.factors(k);
            let e_theta = p.e_theta().iter().zip(ft.values()).map(|(e, f)| f * e).collect();
            let e_phi = p.e_phi().iter().zip(fp.values()).map(|(e, f)| f * e).collect();
            VectorPattern::new(Arc::clone(p.grid()), e_theta, e_phi)
        })
        .collect::<Result<Vec<_>>>()?;
    StatePatternSet::new(s.ratios().clone(), patterns)
}

/// Basis recomputed from the perturbed `±1` states.
pub fn perturbed_basis(s_hat: &StatePatternSet) -> Result<BasisPair> {
    compute_basis(s_hat.plus_one()?, s_hat.minus_one()?)
}

fn check_ratios_present(s_hat: &StatePatternSet, ratios: &RatioSet) -> Result<Vec<usize>> {
    ratios
        .ratios()
        .iter()
        .map(|&r| {
            s_hat
                .ratios()
                .index_of(r)
                .ok_or_else(|| Error::MissingState(crate::constellation::ratio_label(r)))
        })
        .collect()
}

#[inline]
fn evm_from_terms(num: f64, den: f64) -> f64 {
    let evm = (num / den).sqrt();
    if evm <= EVM_FLOOR {
        0.0
    } else {
        evm
    }
}

#[inline]
fn evm_terms(
    basis_hat: &BasisPair,
    s_hat: &StatePatternSet,
    ratios: &RatioSet,
    states: &[usize],
    k: usize,
) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&r, &state) in ratios.ratios().iter().zip(states) {
        let ideal = basis_hat.ideal_at(k, r);
        let actual = s_hat.pattern(state).at(k);
        num += (ideal[0] - actual[0]).norm_sqr() + (ideal[1] - actual[1]).norm_sqr();
        den += ideal[0].norm_sqr() + ideal[1].norm_sqr();
    }
    (num, den)
}

/// Transmit EVM at grid point `omega`:
/// `sqrt(Σ_S ‖B̂1 + x̄_S B̂2 − Ê^{x̄_S}‖² / Σ_S ‖B̂1 + x̄_S B̂2‖²)`.
pub fn evm_at_angle(basis_hat: &BasisPair, s_hat: &StatePatternSet, ratios: &RatioSet, omega: usize) -> Result<f64> {
    basis_hat.b1.check_same_grid(s_hat.pattern(0))?;
    if omega >= s_hat.grid().len() {
        return Err(Error::InvalidArgument(format!("grid index {omega} out of range")));
    }
    let states = check_ratios_present(s_hat, ratios)?;
    let (num, den) = evm_terms(basis_hat, s_hat, ratios, &states, omega);
    if !(den > f64::MIN_POSITIVE) {
        return Err(Error::DegenerateAngle(omega));
    }
    Ok(evm_from_terms(num, den))
}

/// EVM over the whole grid. Degenerate directions hold 0 and are flagged in
/// `masked`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvmMap {
    pub evm: ScalarAngularMap,
    pub masked: Vec<bool>,
}

/// Solid-angle averages of an EVM map (uniform field distribution), computed
/// over unmasked directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageEvm {
    /// `Σ w·EVM / Σ w`.
    pub mean_linear: f64,
    /// `sqrt(Σ w·EVM² / Σ w)`: mean error power relative to mean ideal power.
    pub rms_linear: f64,
    /// `Σ w·20 log10(EVM) / Σ w`; `-inf` if any direction is error-free.
    pub mean_of_db: f64,
    pub masked_fraction: f64,
}

pub fn to_db_amplitude(x: f64) -> f64 {
    20.0 * x.log10()
}

impl AverageEvm {
    pub fn mean_db(&self) -> f64 {
        to_db_amplitude(self.mean_linear)
    }

    pub fn rms_db(&self) -> f64 {
        to_db_amplitude(self.rms_linear)
    }
}

impl EvmMap {
    pub fn grid(&self) -> &Arc<SphericalGrid> {
        self.evm.grid()
    }

    pub fn masked_fraction(&self) -> f64 {
        self.masked.iter().filter(|&&m| m).count() as f64 / self.masked.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.evm
            .values()
            .iter()
            .zip(&self.masked)
            .filter(|(_, &m)| !m)
            .map(|(&v, _)| v)
            .fold(0.0, f64::max)
    }

    pub fn average(&self) -> AverageEvm {
        let weights = self.grid().weights();
        let (mut sw, mut s1, mut s2, mut sdb) = (0.0, 0.0, 0.0, 0.0);
        for ((&w, &e), &m) in weights.iter().zip(self.evm.values()).zip(&self.masked) {
            if m {
                continue;
            }
            sw += w;
            s1 += w * e;
            s2 += w * e * e;
            sdb += w * to_db_amplitude(e);
        }
        AverageEvm {
            mean_linear: s1 / sw,
            rms_linear: (s2 / sw).sqrt(),
            mean_of_db: sdb / sw,
            masked_fraction: self.masked_fraction(),
        }
    }
}

/// EVM at every grid point, evaluated in parallel. Output does not depend on
/// the number of worker threads.
pub fn evm_map(basis_hat: &BasisPair, s_hat: &StatePatternSet, ratios: &RatioSet) -> Result<EvmMap> {
    basis_hat.b1.check_same_grid(s_hat.pattern(0))?;
    let states = check_ratios_present(s_hat, ratios)?;
    let grid = Arc::clone(s_hat.grid());
    let (values, masked): (Vec<f64>, Vec<bool>) = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (num, den) = evm_terms(basis_hat, s_hat, ratios, &states, k);
            if den > f64::MIN_POSITIVE {
                (evm_from_terms(num, den), false)
            } else {
                (0.0, true)
            }
        })
        .unzip();
    Ok(EvmMap {
        evm: ScalarAngularMap::new(grid, values)?,
        masked,
    })
}

fn basis_powers(basis: &BasisPair) -> Result<(f64, f64)> {
    let p1 = integrate_power(&basis.b1);
    let p2 = integrate_power(&basis.b2);
    let peak = p1.max(p2);
    if !(p1 > DEGENERATE_POWER_RATIO * peak) || peak == 0.0 {
        return Err(Error::DegenerateBasis(1));
    }
    if !(p2 > DEGENERATE_POWER_RATIO * peak) {
        return Err(Error::DegenerateBasis(2));
    }
    Ok((p1, p2))
}

/// Normalized full-sphere correlation `|⟨B1,B2⟩| / sqrt(P1 P2)` in dB
/// (20 log10). Orthogonal bases give `-inf`, see [`CORRELATION_FLOOR`].
pub fn basis_correlation_db(basis: &BasisPair) -> Result<f64> {
    let (p1, p2) = basis_powers(basis)?;
    let rho = inner_product(&basis.b1, &basis.b2)?.norm() / (p1 * p2).sqrt();
    if rho <= CORRELATION_FLOOR {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(to_db_amplitude(rho.min(1.0)))
}

/// `|10 log10(P1 / P2)|`.
pub fn power_imbalance_db(basis: &BasisPair) -> Result<f64> {
    let (p1, p2) = basis_powers(basis)?;
    Ok((10.0 * (p1 / p2).log10()).abs())
}

/// Perturbed over free-space radiated power per state.
pub fn state_power_ratios(free: &StatePatternSet, perturbed: &StatePatternSet) -> Result<Vec<f64>> {
    if free.ratios() != perturbed.ratios() {
        return Err(Error::KeyMismatch("state sets differ".into()));
    }
    Ok(free
        .powers()
        .iter()
        .zip(perturbed.powers())
        .map(|(p, q)| q / p)
        .collect())
}

//! Single-path line-of-sight link with a two-element receiver.
//!
//! Each receive antenna samples the transmitted far field in one direction
//! through a fixed polarization. The receiver's channel matrix is
//! `h[m][n] = p_m^H · B_n(Ω_m)` while the signal actually received is
//! `p_m^H · x1 Ê^{x̄}(Ω_m)`. Zero-forcing with that matrix recovers the
//! symbols exactly only when the state pattern decomposes over the basis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamspace::{BasisPair, StatePatternSet};
use crate::constellation::PskConstellation;
use crate::error::{Error, Result};
use crate::generate::unit_vector;
use crate::sphere::Stencil;
use crate::stats::EmpiricalCdf;

/// Channels with a larger 2-norm condition number are rejected.
pub const DEFAULT_CONDITION_CAP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolidAngle {
    pub theta: f64,
    pub phi: f64,
}

impl SolidAngle {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn from_degrees(theta: f64, phi: f64) -> Self {
        Self::new(theta.to_radians(), phi.to_radians())
    }

    pub fn to_degrees(self) -> (f64, f64) {
        (self.theta.to_degrees(), self.phi.to_degrees())
    }

    /// Direction at great-circle `distance` from `self` along `bearing`,
    /// where bearing 0 points along +θ̂ and π/2 along +φ̂.
    pub fn offset(self, distance: f64, bearing: f64) -> Self {
        let u = unit_vector(self.theta, self.phi);
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        let e_theta = [ct * cp, ct * sp, -st];
        let e_phi = [-sp, cp, 0.0];
        let (sd, cd) = distance.sin_cos();
        let (sb, cb) = bearing.sin_cos();
        let v: [f64; 3] = std::array::from_fn(|i| cd * u[i] + sd * (cb * e_theta[i] + sb * e_phi[i]));
        let theta = v[0].hypot(v[1]).atan2(v[2]);
        let phi = v[1].atan2(v[0]).rem_euclid(2.0 * PI);
        Self { theta, phi }
    }
}

/// Unit-norm receive polarization in the (θ̂, φ̂) basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxPolarization([Complex64; 2]);

impl RxPolarization {
    /// Normalizes `(a, b)`; the zero vector is rejected.
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument(
                "receive polarization must be a nonzero finite vector".into(),
            ));
        }
        Ok(Self([a / n, b / n]))
    }

    pub fn theta() -> Self {
        Self([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
    }

    pub fn phi() -> Self {
        Self([Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
    }

    pub fn components(&self) -> [Complex64; 2] {
        self.0
    }

    /// `p^H · field`.
    #[inline]
    pub fn project(&self, field: [Complex64; 2]) -> Complex64 {
        self.0[0].conj() * field[0] + self.0[1].conj() * field[1]
    }
}

impl Default for RxPolarization {
    fn default() -> Self {
        Self::theta()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub rx: [SolidAngle; 2],
    pub polarization: [RxPolarization; 2],
}

impl LinkGeometry {
    pub fn new(rx1: SolidAngle, rx2: SolidAngle) -> Self {
        Self {
            rx: [rx1, rx2],
            polarization: [RxPolarization::default(); 2],
        }
    }

    pub fn with_polarization(mut self, polarization: [RxPolarization; 2]) -> Self {
        self.polarization = polarization;
        self
    }
}

/// 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix2(pub [[Complex64; 2]; 2]);

impl Matrix2 {
    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn mul_vec(&self, x: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.0;
        [m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]]
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        Some(Self([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]))
    }

    /// Ratio of largest to smallest singular value; infinite when singular.
    pub fn condition_number(&self) -> f64 {
        let m = &self.0;
        let a = m[0][0].norm_sqr() + m[1][0].norm_sqr();
        let d = m[0][1].norm_sqr() + m[1][1].norm_sqr();
        let b = m[0][0].conj() * m[0][1] + m[1][0].conj() * m[1][1];
        let half = 0.5 * (a - d);
        let lambda_max = 0.5 * (a + d) + (half * half + b.norm_sqr()).sqrt();
        let det = self.det().norm();
        if det == 0.0 || !(lambda_max > 0.0) {
            return f64::INFINITY;
        }
        // σ_max / σ_min = λ_max / |det|.
        lambda_max / det
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinkScenario {
    pub geometry: LinkGeometry,
    pub h: Matrix2,
    pub condition_number: f64,
    pub condition_cap: f64,
    stencils: [Stencil; 2],
}

impl LinkScenario {
    /// Whether zero-forcing will accept this channel.
    pub fn is_invertible(&self) -> bool {
        self.condition_number.is_finite() && self.condition_number <= self.condition_cap
    }

    pub fn with_condition_cap(mut self, cap: f64) -> Self {
        self.condition_cap = cap;
        self
    }
}

/// Channel seen by a receiver calibrated on `basis`.
pub fn build_channel(basis: &BasisPair, geometry: LinkGeometry) -> Result<LinkScenario> {
    let grid = basis.grid();
    let stencils = [
        grid.stencil(geometry.rx[0].theta, geometry.rx[0].phi)?,
        grid.stencil(geometry.rx[1].theta, geometry.rx[1].phi)?,
    ];
    let h = Matrix2(std::array::from_fn(|m| {
        let p = geometry.polarization[m];
        [
            p.project(basis.b1.sample(&stencils[m])),
            p.project(basis.b2.sample(&stencils[m])),
        ]
    }));
    if !h.is_finite() {
        return Err(Error::InvalidArgument("non-finite channel entry".into()));
    }
    Ok(LinkScenario {
        geometry,
        condition_number: h.condition_number(),
        condition_cap: DEFAULT_CONDITION_CAP,
        h,
        stencils,
    })
}

/// Receive noise on each branch: circular complex Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseModel {
    #[default]
    Disabled,
    Circular {
        variance: f64,
    },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Circular { variance } if !(variance >= 0.0) || !variance.is_finite() => Err(
                Error::InvalidArgument(format!("noise variance must be nonnegative, got {variance}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match *self {
            NoiseModel::Disabled => Complex64::new(0.0, 0.0),
            NoiseModel::Circular { variance } => {
                let s = (0.5 * variance).sqrt();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(s * re, s * im)
            }
        }
    }
}

/// Noiseless received vector `y_m = p_m^H · x1 Ê^{x̄}(Ω_m)`.
pub fn receive(
    s_hat: &StatePatternSet,
    x1: Complex64,
    x2: Complex64,
    scenario: &LinkScenario,
) -> Result<[Complex64; 2]> {
    if x1 == Complex64::new(0.0, 0.0) {
        return Err(Error::UndefinedRatio);
    }
    let pattern = s_hat.for_ratio(x2 / x1)?;
    Ok(std::array::from_fn(|m| {
        x1 * scenario.geometry.polarization[m].project(pattern.sample(&scenario.stencils[m]))
    }))
}

/// [`receive`] plus one noise draw per branch.
pub fn transmit_and_receive<R: Rng + ?Sized>(
    s_hat: &StatePatternSet,
    x1: Complex64,
    x2: Complex64,
    scenario: &LinkScenario,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<[Complex64; 2]> {
    let mut y = receive(s_hat, x1, x2, scenario)?;
    for v in &mut y {
        *v += noise.sample(rng);
    }
    Ok(y)
}

/// `x̂ = H⁻¹ y`. No quantization; see [`quantize`].
pub fn zf_equalize(y: [Complex64; 2], scenario: &LinkScenario) -> Result<[Complex64; 2]> {
    if !scenario.is_invertible() {
        return Err(Error::IllConditioned(scenario.condition_number));
    }
    let inv = scenario
        .h
        .inverse()
        .ok_or(Error::IllConditioned(scenario.condition_number))?;
    Ok(inv.mul_vec(y))
}

/// Component-wise nearest-point decision.
pub fn quantize(x_hat: [Complex64; 2], constellation: &PskConstellation) -> [Complex64; 2] {
    x_hat.map(|z| constellation.quantize(z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    /// 1 or 2.
    pub stream: u8,
    pub ratio: Complex64,
    pub error: Complex64,
    pub magnitude: f64,
}

/// Noiseless equalization error for every symbol pair of the constellation.
pub fn evaluate_scenario(
    s_hat: &StatePatternSet,
    scenario: &LinkScenario,
    constellation: &PskConstellation,
) -> Result<Vec<ErrorRecord>> {
    let ratios = s_hat.ratios();
    let mut out = Vec::with_capacity(2 * constellation.order().pow(2));
    for pair in constellation.symbol_pairs() {
        let y = receive(s_hat, pair.x1, pair.x2, scenario)?;
        let x_hat = zf_equalize(y, scenario)?;
        let ratio = ratios.get(pair.ratio_index);
        for (stream, (est, sent)) in x_hat.iter().zip([pair.x1, pair.x2]).enumerate() {
            let error = est - sent;
            out.push(ErrorRecord {
                stream: stream as u8 + 1,
                ratio,
                error,
                magnitude: error.norm(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub scenarios: usize,
    /// Receive-antenna separation interval in degrees.
    pub separation_deg: (f64, f64),
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Results do not depend
    /// on this value.
    pub threads: Option<usize>,
    pub polarization: [RxPolarization; 2],
    pub condition_cap: f64,
    pub noise: NoiseModel,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            scenarios: 10_000,
            separation_deg: (3.0, 5.0),
            seed: 0,
            threads: None,
            polarization: [RxPolarization::default(); 2],
            condition_cap: DEFAULT_CONDITION_CAP,
            noise: NoiseModel::Disabled,
        }
    }
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios == 0 {
            return Err(Error::InvalidArgument("scenario count must be at least 1".into()));
        }
        let (lo, hi) = self.separation_deg;
        if !(lo > 0.0 && lo <= hi && hi <= 180.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid separation interval [{lo}, {hi}] degrees"
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("thread count must be at least 1".into()));
        }
        if !(self.condition_cap >= 1.0) {
            return Err(Error::InvalidArgument("condition cap must be at least 1".into()));
        }
        self.noise.validate()
    }
}

/// Per-stream equalization error magnitudes over all accepted scenarios,
/// sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub errors: [Vec<f64>; 2],
    pub accepted: usize,
    pub rejected: usize,
}

impl MonteCarloResult {
    /// Empirical CDF of stream 1 or 2.
    pub fn cdf(&self, stream: usize) -> Result<EmpiricalCdf> {
        EmpiricalCdf::from_sorted(self.errors[stream - 1].clone())
    }
}

/// Random geometry: first direction area-uniform on the sphere, second at a
/// uniform great-circle distance within `separation` (radians) along a
/// uniform bearing.
pub fn draw_geometry<R: Rng + ?Sized>(rng: &mut R, separation: (f64, f64)) -> [SolidAngle; 2] {
    let cos_theta: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let rx1 = SolidAngle::new(cos_theta.clamp(-1.0, 1.0).acos(), phi);
    let distance = if separation.0 == separation.1 {
        separation.0
    } else {
        rng.random_range(separation.0..=separation.1)
    };
    let bearing: f64 = rng.random_range(0.0..2.0 * PI);
    [rx1, rx1.offset(distance, bearing)]
}

/// Substream for scenario `index`, independent of evaluation order.
pub fn scenario_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

enum Outcome {
    Accepted(Vec<f64>, Vec<f64>),
    Rejected,
}

fn run_one(
    s_hat: &StatePatternSet,
    basis: &BasisPair,
    pairs: &[crate::constellation::SymbolPair],
    cfg: &MonteCarloConfig,
    index: usize,
) -> Result<Outcome> {
    let mut rng = scenario_rng(cfg.seed, index as u64);
    let sep = (cfg.separation_deg.0.to_radians(), cfg.separation_deg.1.to_radians());
    let rx = draw_geometry(&mut rng, sep);
    let geometry = LinkGeometry {
        rx,
        polarization: cfg.polarization,
    };
    let scenario = build_channel(basis, geometry)?.with_condition_cap(cfg.condition_cap);
    if !scenario.is_invertible() {
        return Ok(Outcome::Rejected);
    }
    let inv = match scenario.h.inverse() {
        Some(inv) => inv,
        None => return Ok(Outcome::Rejected),
    };

    // Projected response of every state at both receivers.
    let responses: Vec<[Complex64; 2]> = s_hat
        .patterns()
        .iter()
        .map(|p| std::array::from_fn(|m| geometry.polarization[m].project(p.sample(&scenario.stencils[m]))))
        .collect();

    let mut e1 = Vec::with_capacity(pairs.len());
    let mut e2 = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let r = responses[pair.ratio_index];
        let y = [
            pair.x1 * r[0] + cfg.noise.sample(&mut rng),
            pair.x1 * r[1] + cfg.noise.sample(&mut rng),
        ];
        let x_hat = inv.mul_vec(y);
        e1.push((x_hat[0] - pair.x1).norm());
        e2.push((x_hat[1] - pair.x2).norm());
    }
    Ok(Outcome::Accepted(e1, e2))
}

/// Seeded sweep over random single-path LOS geometries. Every scenario
/// evaluates all symbol pairs; the output is bitwise identical for any
/// worker count.
pub fn run_monte_carlo(
    s_hat: &StatePatternSet,
    channel_basis: &BasisPair,
    constellation: &PskConstellation,
    cfg: &MonteCarloConfig,
) -> Result<MonteCarloResult> {
    cfg.validate()?;
    channel_basis.b1.check_same_grid(s_hat.pattern(0))?;
    if s_hat.ratios() != &constellation.ratio_set() {
        return Err(Error::KeyMismatch(
            "constellation ratios differ from antenna states".into(),
        ));
    }
    let pairs = constellation.symbol_pairs();

    let work = || -> Result<Vec<Outcome>> {
        (0..cfg.scenarios)
            .into_par_iter()
            .map(|i| run_one(s_hat, channel_basis, &pairs, cfg, i))
            .collect()
    };
    let outcomes = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::ThreadPool(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let mut errors = [Vec::new(), Vec::new()];
    let (mut accepted, mut rejected) = (0, 0);
    for o in outcomes {
        match o {
            Outcome::Accepted(a, b) => {
                accepted += 1;
                errors[0].extend(a);
                errors[1].extend(b);
            }
            Outcome::Rejected => rejected += 1,
        }
    }
    for e in &mut errors {
        e.sort_by(f64::total_cmp);
    }
    Ok(MonteCarloResult {
        errors,
        accepted,
        rejected,
    })
}

//! Complex vector fields sampled on an equiangular spherical grid.
//!
//! Grid points are stored theta-major: point `k = i_theta * n_phi + i_phi`.
//! Polar angles run from pole to pole inclusive, azimuths cover `[0, 2π)`
//! uniformly. Quadrature weights are solid angles in steradians and sum to
//! 4π to rounding.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MIN_THETA_SAMPLES: usize = 3;
pub const MIN_PHI_SAMPLES: usize = 4;

/// Default resolution: 2° in theta (poles included), 2° in phi.
pub const DEFAULT_N_THETA: usize = 91;
pub const DEFAULT_N_PHI: usize = 180;

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalGrid {
    theta: Vec<f64>,
    phi: Vec<f64>,
    weights: Vec<f64>,
}

/// Builds the equiangular grid shared by every pattern in a run.
pub fn build_grid(n_theta: usize, n_phi: usize) -> Result<Arc<SphericalGrid>> {
    SphericalGrid::new(n_theta, n_phi).map(Arc::new)
}

impl SphericalGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < MIN_THETA_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "n_theta = {n_theta}, need at least {MIN_THETA_SAMPLES}"
            )));
        }
        if n_phi < MIN_PHI_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "n_phi = {n_phi}, need at least {MIN_PHI_SAMPLES}"
            )));
        }
        let intervals = n_theta - 1;
        let theta: Vec<f64> = (0..n_theta).map(|i| PI * i as f64 / intervals as f64).collect();
        let phi: Vec<f64> = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();

        let d_phi = 2.0 * PI / n_phi as f64;
        let theta_weights = clenshaw_curtis_weights(intervals);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for wt in &theta_weights {
            weights.extend(std::iter::repeat_n(wt * d_phi, n_phi));
        }
        Ok(Self { theta, phi, weights })
    }

    pub fn default_resolution() -> Self {
        Self::new(DEFAULT_N_THETA, DEFAULT_N_PHI).expect("default grid is valid")
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn theta_samples(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi_samples(&self) -> &[f64] {
        &self.phi
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    #[inline]
    pub fn index(&self, i_theta: usize, i_phi: usize) -> usize {
        i_theta * self.phi.len() + i_phi
    }

    /// `(theta, phi)` in radians of flat index `k`.
    #[inline]
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let n_phi = self.phi.len();
        (self.theta[k / n_phi], self.phi[k % n_phi])
    }

    pub fn theta_step(&self) -> f64 {
        PI / (self.theta.len() - 1) as f64
    }

    pub fn phi_step(&self) -> f64 {
        2.0 * PI / self.phi.len() as f64
    }

    /// Index of the sample obtained by reflecting point `k` through the
    /// `phi = 0` plane (`phi -> 2π - phi`).
    #[inline]
    pub fn mirror_index(&self, k: usize) -> usize {
        let n_phi = self.phi.len();
        let (i, j) = (k / n_phi, k % n_phi);
        self.index(i, (n_phi - j) % n_phi)
    }

    /// Bilinear interpolation stencil at an arbitrary direction. Azimuth wraps,
    /// polar angle must lie in `[0, π]`.
    pub fn stencil(&self, theta: f64, phi: f64) -> Result<Stencil> {
        if !theta.is_finite() || !phi.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::AngleOutOfRange { theta, phi });
        }
        let n_theta = self.theta.len();
        let n_phi = self.phi.len();

        let t = theta / self.theta_step();
        let i0 = (t.floor() as usize).min(n_theta - 2);
        let ft = (t - i0 as f64).clamp(0.0, 1.0);

        let p = phi.rem_euclid(2.0 * PI) / self.phi_step();
        let j0 = (p.floor() as usize) % n_phi;
        let fp = (p - p.floor()).clamp(0.0, 1.0);
        let j1 = (j0 + 1) % n_phi;

        Ok(Stencil {
            points: [
                (self.index(i0, j0), (1.0 - ft) * (1.0 - fp)),
                (self.index(i0, j1), (1.0 - ft) * fp),
                (self.index(i0 + 1, j0), ft * (1.0 - fp)),
                (self.index(i0 + 1, j1), ft * fp),
            ],
        })
    }
}

/// Clenshaw–Curtis weights for `∫ f(θ) sin θ dθ` over `[0, π]` at the nodes
/// `θ_k = kπ/N`, `k = 0..=N`. Exact for polynomials in `cos θ` of degree ≤ N.
fn clenshaw_curtis_weights(intervals: usize) -> Vec<f64> {
    let n = intervals;
    let nf = n as f64;
    (0..=n)
        .map(|k| {
            let theta = PI * k as f64 / nf;
            let edge = if k == 0 || k == n { 1.0 } else { 2.0 };
            let series: f64 = (1..=n / 2)
                .map(|j| {
                    let b = if 2 * j == n { 1.0 } else { 2.0 };
                    let jf = j as f64;
                    b / (4.0 * jf * jf - 1.0) * (2.0 * jf * theta).cos()
                })
                .sum();
            edge / nf * (1.0 - series)
        })
        .collect()
}

/// Four grid points and their bilinear weights.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub points: [(usize, f64); 4],
}

impl Stencil {
    #[inline]
    pub fn apply(&self, values: &[Complex64]) -> Complex64 {
        self.points.iter().map(|&(k, w)| values[k] * w).sum()
    }
}

/// True when both handles refer to the same sampling.
pub fn same_grid(a: &Arc<SphericalGrid>, b: &Arc<SphericalGrid>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// A two-component (θ̂, φ̂) complex far field sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPattern {
    grid: Arc<SphericalGrid>,
    e_theta: Vec<Complex64>,
    e_phi: Vec<Complex64>,
}

impl VectorPattern {
    pub fn new(grid: Arc<SphericalGrid>, e_theta: Vec<Complex64>, e_phi: Vec<Complex64>) -> Result<Self> {
        if e_theta.len() != grid.len() || e_phi.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "pattern has {}/{} samples, grid has {}",
                e_theta.len(),
                e_phi.len(),
                grid.len()
            )));
        }
        if let Some(k) = e_theta
            .iter()
            .zip(&e_phi)
            .position(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "non-finite field sample at grid point {k}"
            )));
        }
        Ok(Self { grid, e_theta, e_phi })
    }

    pub fn zeros(grid: Arc<SphericalGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            e_theta: vec![Complex64::new(0.0, 0.0); n],
            e_phi: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Samples `f(theta, phi) -> [e_theta, e_phi]` at every grid point.
    pub fn from_fn<F>(grid: Arc<SphericalGrid>, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, f64) -> [Complex64; 2],
    {
        let (e_theta, e_phi) = (0..grid.len())
            .map(|k| {
                let (t, p) = grid.coords(k);
                let [a, b] = f(t, p);
                (a, b)
            })
            .unzip();
        Self::new(grid, e_theta, e_phi)
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn e_theta(&self) -> &[Complex64] {
        &self.e_theta
    }

    pub fn e_phi(&self) -> &[Complex64] {
        &self.e_phi
    }

    #[inline]
    pub fn at(&self, k: usize) -> [Complex64; 2] {
        [self.e_theta[k], self.e_phi[k]]
    }

    pub fn sample(&self, stencil: &Stencil) -> [Complex64; 2] {
        [stencil.apply(&self.e_theta), stencil.apply(&self.e_phi)]
    }

    /// Bilinearly interpolated field at `(theta, phi)` in radians.
    pub fn interpolate(&self, theta: f64, phi: f64) -> Result<[Complex64; 2]> {
        Ok(self.sample(&self.grid.stencil(theta, phi)?))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            e_theta: self.e_theta.iter().map(|v| v * c).collect(),
            e_phi: self.e_phi.iter().map(|v| v * c).collect(),
        }
    }

    pub fn integrate_power(&self) -> f64 {
        integrate_power(self)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub(crate) fn map_with<F>(&self, other: &Self, mut f: F) -> Result<Self>
    where
        F: FnMut(Complex64, Complex64) -> Complex64,
    {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: Arc::clone(&self.grid),
            e_theta: self
                .e_theta
                .iter()
                .zip(&other.e_theta)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            e_phi: self.e_phi.iter().zip(&other.e_phi).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub(crate) fn from_parts_unchecked(
        grid: Arc<SphericalGrid>,
        e_theta: Vec<Complex64>,
        e_phi: Vec<Complex64>,
    ) -> Self {
        debug_assert_eq!(e_theta.len(), grid.len());
        debug_assert_eq!(e_phi.len(), grid.len());
        Self { grid, e_theta, e_phi }
    }
}

/// `Σ w (|e_θ|² + |e_φ|²)`, the radiated power in field²·sr.
pub fn integrate_power(p: &VectorPattern) -> f64 {
    p.grid
        .weights()
        .iter()
        .zip(p.e_theta.iter().zip(&p.e_phi))
        .map(|(w, (a, b))| w * (a.norm_sqr() + b.norm_sqr()))
        .sum()
}

/// `Σ w (conj(a_θ) b_θ + conj(a_φ) b_φ)`: conjugate-linear in `a`.
pub fn inner_product(a: &VectorPattern, b: &VectorPattern) -> Result<Complex64> {
    a.check_same_grid(b)?;
    Ok(a.grid
        .weights()
        .iter()
        .enumerate()
        .map(|(k, w)| (a.e_theta[k].conj() * b.e_theta[k] + a.e_phi[k].conj() * b.e_phi[k]) * w)
        .sum())
}

/// Pointwise `alpha * a + beta * b`.
pub fn lincomb(alpha: Complex64, a: &VectorPattern, beta: Complex64, b: &VectorPattern) -> Result<VectorPattern> {
    a.map_with(b, |x, y| alpha * x + beta * y)
}

/// One scalar per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularMap<T> {
    grid: Arc<SphericalGrid>,
    values: Vec<T>,
}

pub type ScalarAngularMap = AngularMap<f64>;
pub type ComplexAngularMap = AngularMap<Complex64>;

impl<T: Copy> AngularMap<T> {
    pub fn new(grid: Arc<SphericalGrid>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "map has {} values, grid has {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn filled(grid: Arc<SphericalGrid>, value: T) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![value; n],
        }
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, k: usize) -> T {
        self.values[k]
    }
}

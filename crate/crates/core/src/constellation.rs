//! PSK symbol alphabets and the set of symbol ratios `x2 / x1` that select
//! the antenna state.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance used to match a computed ratio to a member of the set.
pub const RATIO_TOLERANCE: f64 = 1e-9;

/// `exp(j * angle)`, snapping exact quarter turns so that ±1 and ±j carry no
/// rounding residue.
pub fn unit_phasor(angle: f64) -> Complex64 {
    let quarters = angle / (PI / 2.0);
    let nearest = quarters.round();
    if (quarters - nearest).abs() < 1e-12 {
        match (nearest as i64).rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    } else {
        Complex64::from_polar(1.0, angle)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PskConstellation {
    order: usize,
    offset: f64,
    points: Vec<Complex64>,
}

impl PskConstellation {
    /// `order` unit-magnitude points `exp(j(2πk/order + offset))`.
    pub fn new(order: usize, offset: f64) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument(format!(
                "PSK order must be at least 2, got {order}"
            )));
        }
        if !offset.is_finite() {
            return Err(Error::InvalidArgument("PSK offset must be finite".into()));
        }
        let step = 2.0 * PI / order as f64;
        let points = (0..order).map(|k| unit_phasor(step * k as f64 + offset)).collect();
        Ok(Self { order, offset, points })
    }

    /// QPSK with points on the diagonals, `(±1 ± j)/√2`.
    pub fn qpsk() -> Self {
        Self::new(4, PI / 4.0).expect("valid QPSK")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// All `x2 / x1` quotients. For PSK these are the `order` roots of unity,
    /// independent of the offset.
    pub fn ratio_set(&self) -> RatioSet {
        RatioSet::roots_of_unity(self.order)
    }

    /// Every `(x1, x2)` symbol pair together with the index of its ratio.
    pub fn symbol_pairs(&self) -> Vec<SymbolPair> {
        let ratios = self.ratio_set();
        let mut pairs = Vec::with_capacity(self.order * self.order);
        for &x1 in &self.points {
            for &x2 in &self.points {
                let ratio_index = ratios.index_of(x2 / x1).expect("PSK quotients are roots of unity");
                pairs.push(SymbolPair { x1, x2, ratio_index });
            }
        }
        pairs
    }

    /// Nearest constellation point (minimum Euclidean distance).
    pub fn quantize(&self, z: Complex64) -> Complex64 {
        *self
            .points
            .iter()
            .min_by(|a, b| (*a - z).norm_sqr().total_cmp(&(*b - z).norm_sqr()))
            .expect("non-empty constellation")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolPair {
    pub x1: Complex64,
    pub x2: Complex64,
    pub ratio_index: usize,
}

/// Ordered set of distinct symbol ratios; member `k` is `exp(j2πk/M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSet {
    ratios: Vec<Complex64>,
}

impl RatioSet {
    pub fn roots_of_unity(order: usize) -> Self {
        let step = 2.0 * PI / order as f64;
        Self {
            ratios: (0..order).map(|k| unit_phasor(step * k as f64)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratios.is_empty()
    }

    pub fn ratios(&self) -> &[Complex64] {
        &self.ratios
    }

    pub fn get(&self, k: usize) -> Complex64 {
        self.ratios[k]
    }

    pub fn index_of(&self, ratio: Complex64) -> Option<usize> {
        let tol = RATIO_TOLERANCE * ratio.norm().max(1.0);
        self.ratios.iter().position(|r| (r - ratio).norm() <= tol)
    }

    pub fn require(&self, ratio: Complex64) -> Result<usize> {
        self.index_of(ratio).ok_or(Error::RatioNotInSet(ratio))
    }

    pub fn plus_one(&self) -> Option<usize> {
        self.index_of(Complex64::new(1.0, 0.0))
    }

    pub fn minus_one(&self) -> Option<usize> {
        self.index_of(Complex64::new(-1.0, 0.0))
    }

    /// True for the ±1 states, the two that define the basis.
    pub fn is_basis_state(&self, k: usize) -> bool {
        Some(k) == self.plus_one() || Some(k) == self.minus_one()
    }

    /// Short label: `+1`, `-1`, `+j`, `-j` for quarter turns, otherwise the
    /// phase in degrees as `e^j<deg>`.
    pub fn label(&self, k: usize) -> String {
        ratio_label(self.ratios[k])
    }

    /// Inverse of [`RatioSet::label`]. Also accepts a bare index `#k`.
    pub fn parse_label(&self, label: &str) -> Result<usize> {
        let s = label.trim();
        let found = if let Some(idx) = s.strip_prefix('#') {
            idx.parse::<usize>().ok().filter(|&k| k < self.len())
        } else if let Some(deg) = s.strip_prefix("e^j") {
            deg.parse::<f64>()
                .ok()
                .and_then(|d| self.index_of(unit_phasor(d.to_radians())))
        } else {
            let z = match s {
                "+1" | "1" => Some(Complex64::new(1.0, 0.0)),
                "-1" => Some(Complex64::new(-1.0, 0.0)),
                "+j" | "j" => Some(Complex64::new(0.0, 1.0)),
                "-j" => Some(Complex64::new(0.0, -1.0)),
                _ => None,
            };
            z.and_then(|z| self.index_of(z))
        };
        found.ok_or_else(|| Error::Config(format!("unknown antenna state label `{label}`")))
    }
}

pub fn ratio_label(z: Complex64) -> String {
    let quarter = [
        (Complex64::new(1.0, 0.0), "+1"),
        (Complex64::new(0.0, 1.0), "+j"),
        (Complex64::new(-1.0, 0.0), "-1"),
        (Complex64::new(0.0, -1.0), "-j"),
    ];
    for (q, name) in quarter {
        if (z - q).norm() <= RATIO_TOLERANCE {
            return name.to_string();
        }
    }
    format!("e^j{}", z.arg().to_degrees().rem_euclid(360.0))
}

//! End-to-end evaluation driven by a [`RunConfig`].

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::beamspace::{
    apply_perturbation, basis_correlation_db, compute_basis, evm_map, perturbed_basis, power_imbalance_db,
    state_power_ratios, BasisPair, EvmMap, PerturbationField, StatePatternSet,
};
use crate::config::{AntennaConfig, ChannelBasis, RunConfig};
use crate::constellation::PskConstellation;
use crate::error::{Error, Result};
use crate::generate::{generate_mirror_pair, generate_perturbation};
use crate::io::{load_pattern_file, JsonF64};
use crate::link::{build_channel, receive, zf_equalize, LinkGeometry, Matrix2, MonteCarloResult, SolidAngle};
use crate::sphere::{build_grid, SphericalGrid};

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: RunConfig,
    pub grid: Arc<SphericalGrid>,
    pub constellation: PskConstellation,
    pub free: StatePatternSet,
    pub free_basis: BasisPair,
    pub perturbation: PerturbationField,
    pub perturbed: StatePatternSet,
    pub perturbed_basis: BasisPair,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatePower {
    pub state: String,
    pub power_ratio: JsonF64,
    pub power_ratio_db: JsonF64,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub correlation_db: JsonF64,
    pub imbalance_db: JsonF64,
    pub free_space_correlation_db: JsonF64,
    pub free_space_imbalance_db: JsonF64,
    /// `10 log10` of the mean error power over the mean ideal power.
    pub average_evm_db: JsonF64,
    /// `20 log10` of the solid-angle mean of the linear EVM.
    pub mean_evm_db: JsonF64,
    /// Solid-angle mean of the per-direction EVM in dB.
    pub mean_of_evm_db: JsonF64,
    pub max_evm_db: JsonF64,
    pub masked_fraction: JsonF64,
    pub state_power: Vec<StatePower>,
}

/// One line of `constellation.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstellationRow {
    pub side: Side,
    pub x1: Complex64,
    pub x2: Complex64,
    pub ratio_index: usize,
    pub actual: [Complex64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Transmit,
    Receive,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Transmit => "tx",
            Side::Receive => "rx",
        }
    }
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let grid = build_grid(config.grid.n_theta, config.grid.n_phi)?;
        let constellation = config.constellation()?;
        let ratios = constellation.ratio_set();

        let free = match &config.antenna {
            AntennaConfig::PatternFiles(files) => {
                let mut patterns = vec![None; ratios.len()];
                for (label, path) in files {
                    let (_, p) = load_pattern_file(path)?;
                    if p.grid().n_theta() != grid.n_theta() || p.grid().n_phi() != grid.n_phi() {
                        return Err(Error::Config(format!(
                            "{}: grid {}x{} differs from configured {}x{}",
                            path.display(),
                            p.grid().n_theta(),
                            p.grid().n_phi(),
                            grid.n_theta(),
                            grid.n_phi()
                        )));
                    }
                    let p =
                        crate::sphere::VectorPattern::new(Arc::clone(&grid), p.e_theta().to_vec(), p.e_phi().to_vec())?;
                    patterns[ratios.parse_label(label)?] = Some(p);
                }
                let patterns = patterns
                    .into_iter()
                    .enumerate()
                    .map(|(k, p)| p.ok_or_else(|| Error::MissingState(ratios.label(k))))
                    .collect::<Result<Vec<_>>>()?;
                StatePatternSet::new(ratios.clone(), patterns)?
            }
            _ => {
                let profile = config.antenna_profile().expect("generated antenna");
                generate_mirror_pair(&profile, &grid, &ratios)?
            }
        };
        let free_basis = compute_basis(free.plus_one()?, free.minus_one()?)?;
        let perturbation = generate_perturbation(&config.perturbation_lobes(&ratios)?, &grid, &ratios)?;
        let perturbed = apply_perturbation(&free, &perturbation)?;
        let perturbed_basis = perturbed_basis(&perturbed)?;
        Ok(Self {
            config,
            grid,
            constellation,
            free,
            free_basis,
            perturbation,
            perturbed,
            perturbed_basis,
        })
    }

    pub fn evm_map(&self) -> Result<EvmMap> {
        evm_map(&self.perturbed_basis, &self.perturbed, self.perturbed.ratios())
    }

    pub fn metrics(&self) -> Result<Metrics> {
        self.metrics_with(&self.evm_map()?)
    }

    pub fn metrics_with(&self, map: &EvmMap) -> Result<Metrics> {
        let avg = map.average();
        let ratios = self.free.ratios();
        let state_power = state_power_ratios(&self.free, &self.perturbed)?
            .into_iter()
            .enumerate()
            .map(|(k, r)| StatePower {
                state: ratios.label(k),
                power_ratio: r.into(),
                power_ratio_db: (10.0 * r.log10()).into(),
            })
            .collect();
        Ok(Metrics {
            correlation_db: basis_correlation_db(&self.perturbed_basis)?.into(),
            imbalance_db: power_imbalance_db(&self.perturbed_basis)?.into(),
            free_space_correlation_db: basis_correlation_db(&self.free_basis)?.into(),
            free_space_imbalance_db: power_imbalance_db(&self.free_basis)?.into(),
            average_evm_db: avg.rms_db().into(),
            mean_evm_db: avg.mean_db().into(),
            mean_of_evm_db: avg.mean_of_db.into(),
            max_evm_db: (20.0 * map.max().log10()).into(),
            masked_fraction: avg.masked_fraction.into(),
            state_power,
        })
    }

    /// Basis the receiver calibrates its channel on.
    pub fn channel_basis(&self) -> &BasisPair {
        match self.config.receiver.channel_basis {
            ChannelBasis::Perturbed => &self.perturbed_basis,
            ChannelBasis::FreeSpace => &self.free_basis,
        }
    }

    pub fn geometry(&self) -> Result<LinkGeometry> {
        self.config.receiver.geometry()
    }

    /// Radiated field at `omega` expressed in the perturbed basis: solves
    /// `[B̂1(Ω) B̂2(Ω)] x̃ = x1 Ê^{x̄}(Ω)` on the `(θ̂, φ̂)` components.
    /// `x̃ = (x1, x2)` exactly when the state maps onto the basis.
    pub fn transmit_constellation(&self, omega: SolidAngle) -> Result<Vec<ConstellationRow>> {
        let stencil = self.grid.stencil(omega.theta, omega.phi)?;
        let b1 = self.perturbed_basis.b1.sample(&stencil);
        let b2 = self.perturbed_basis.b2.sample(&stencil);
        let a = Matrix2([[b1[0], b2[0]], [b1[1], b2[1]]]);
        let cond = a.condition_number();
        if !(cond < self.config.receiver.condition_cap) {
            return Err(Error::IllConditioned(cond));
        }
        let inv = a.inverse().ok_or(Error::IllConditioned(cond))?;
        self.constellation
            .symbol_pairs()
            .into_iter()
            .map(|pair| {
                let field = self.perturbed.pattern(pair.ratio_index).sample(&stencil);
                Ok(ConstellationRow {
                    side: Side::Transmit,
                    x1: pair.x1,
                    x2: pair.x2,
                    ratio_index: pair.ratio_index,
                    actual: inv.mul_vec([pair.x1 * field[0], pair.x1 * field[1]]),
                })
            })
            .collect()
    }

    /// Zero-forcing estimates at the configured two-antenna geometry.
    pub fn receive_constellation(&self, geometry: LinkGeometry) -> Result<Vec<ConstellationRow>> {
        let scenario =
            build_channel(self.channel_basis(), geometry)?.with_condition_cap(self.config.receiver.condition_cap);
        self.constellation
            .symbol_pairs()
            .into_iter()
            .map(|pair| {
                let y = receive(&self.perturbed, pair.x1, pair.x2, &scenario)?;
                Ok(ConstellationRow {
                    side: Side::Receive,
                    x1: pair.x1,
                    x2: pair.x2,
                    ratio_index: pair.ratio_index,
                    actual: zf_equalize(y, &scenario)?,
                })
            })
            .collect()
    }

    /// Transmit side at rx1 followed by the receive side, `M²` rows each.
    pub fn constellation_rows(&self) -> Result<Vec<ConstellationRow>> {
        let geometry = self.geometry()?;
        let mut rows = self.transmit_constellation(geometry.rx[0])?;
        rows.extend(self.receive_constellation(geometry)?);
        Ok(rows)
    }

    pub fn monte_carlo(&self) -> Result<MonteCarloResult> {
        let cfg = self.config.monte_carlo_config()?;
        let result = crate::link::run_monte_carlo(&self.perturbed, self.channel_basis(), &self.constellation, &cfg)?;
        if result.accepted == 0 {
            return Err(Error::Empty("every Monte Carlo scenario was rejected"));
        }
        Ok(result)
    }
}

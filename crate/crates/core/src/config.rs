//! `config.json` schema. Angles are in degrees here and converted to radians
//! when the pipeline is built. Every section is optional; missing fields take
//! the documented defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::{PskConstellation, RatioSet};
use crate::error::{Error, Result};
use crate::generate::{AntennaProfile, PatternLobe, PerturbationLobe, PolarizationSelector};
use crate::link::{LinkGeometry, MonteCarloConfig, NoiseModel, RxPolarization, SolidAngle, DEFAULT_CONDITION_CAP};
use crate::sphere::{DEFAULT_N_PHI, DEFAULT_N_THETA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub constellation: ConstellationConfig,
    pub antenna: AntennaConfig,
    pub perturbation: PerturbationConfig,
    pub receiver: ReceiverConfig,
    pub monte_carlo: MonteCarloSection,
    pub noise: NoiseModel,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            constellation: ConstellationConfig::default(),
            antenna: AntennaConfig::Default,
            perturbation: PerturbationConfig::default(),
            receiver: ReceiverConfig::default(),
            monte_carlo: MonteCarloSection::default(),
            noise: NoiseModel::Disabled,
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_theta: DEFAULT_N_THETA,
            n_phi: DEFAULT_N_PHI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationConfig {
    pub order: usize,
    pub offset_deg: f64,
}

impl Default for ConstellationConfig {
    fn default() -> Self {
        Self {
            order: 4,
            offset_deg: 45.0,
        }
    }
}

/// `[re, im]`.
pub type ComplexPair = [f64; 2];

fn cx(p: ComplexPair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntennaConfig {
    /// Built-in calibrated mirror-pair profile.
    Default,
    /// Custom `+1`-state lobes; `-1` is the mirror image.
    Lobes(Vec<PatternLobeConfig>),
    /// One pattern CSV per state label (`+1`, `-1`, `+j`, `-j`, ...).
    /// Relative paths resolve against the config file's directory.
    PatternFiles(BTreeMap<String, PathBuf>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternLobeConfig {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub width_deg: f64,
    #[serde(default)]
    pub amp_theta: ComplexPair,
    #[serde(default)]
    pub amp_phi: ComplexPair,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub lobes: Vec<PerturbationLobeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationLobeConfig {
    /// State labels; omitted means every state.
    #[serde(default)]
    pub states: Option<Vec<String>>,
    #[serde(default)]
    pub polarization: PolarizationSelector,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub width_deg: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationConfig {
    Theta,
    Phi,
    /// Arbitrary `(θ̂, φ̂)` components, normalized on load.
    Custom {
        theta: ComplexPair,
        phi: ComplexPair,
    },
}

impl PolarizationConfig {
    pub fn build(&self) -> Result<RxPolarization> {
        match *self {
            PolarizationConfig::Theta => Ok(RxPolarization::theta()),
            PolarizationConfig::Phi => Ok(RxPolarization::phi()),
            PolarizationConfig::Custom { theta, phi } => RxPolarization::new(cx(theta), cx(phi)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelBasis {
    /// Receiver calibrated on the perturbed basis.
    #[default]
    Perturbed,
    /// Receiver assumes the free-space basis.
    FreeSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub polarization: PolarizationConfig,
    pub rx1_theta_deg: f64,
    pub rx1_phi_deg: f64,
    pub rx2_theta_deg: f64,
    pub rx2_phi_deg: f64,
    pub channel_basis: ChannelBasis,
    pub condition_cap: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            polarization: PolarizationConfig::Theta,
            rx1_theta_deg: 45.0,
            rx1_phi_deg: 294.0,
            rx2_theta_deg: 45.0,
            rx2_phi_deg: 298.0,
            channel_basis: ChannelBasis::Perturbed,
            condition_cap: DEFAULT_CONDITION_CAP,
        }
    }
}

impl ReceiverConfig {
    pub fn geometry(&self) -> Result<LinkGeometry> {
        let p = self.polarization.build()?;
        Ok(LinkGeometry::new(
            SolidAngle::from_degrees(self.rx1_theta_deg, self.rx1_phi_deg),
            SolidAngle::from_degrees(self.rx2_theta_deg, self.rx2_phi_deg),
        )
        .with_polarization([p, p]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub scenarios: usize,
    pub separation_deg: [f64; 2],
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self {
            scenarios: 10_000,
            separation_deg: [3.0, 5.0],
            seed: 1,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Parses `path`, resolves relative pattern paths against its directory
    /// and validates the result.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: RunConfig = crate::io::load_json(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if let AntennaConfig::PatternFiles(files) = &mut cfg.antenna {
            for p in files.values_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|source| Error::Json {
            path: PathBuf::from("<inline>"),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn constellation(&self) -> Result<PskConstellation> {
        PskConstellation::new(self.constellation.order, self.constellation.offset_deg.to_radians())
    }

    pub fn antenna_profile(&self) -> Option<AntennaProfile> {
        match &self.antenna {
            AntennaConfig::Default => Some(AntennaProfile::calibrated_default()),
            AntennaConfig::Lobes(lobes) => Some(AntennaProfile {
                lobes: lobes
                    .iter()
                    .map(|l| PatternLobe {
                        theta: l.theta_deg.to_radians(),
                        phi: l.phi_deg.to_radians(),
                        width: l.width_deg.to_radians(),
                        amp_theta: cx(l.amp_theta),
                        amp_phi: cx(l.amp_phi),
                    })
                    .collect(),
            }),
            AntennaConfig::PatternFiles(_) => None,
        }
    }

    pub fn perturbation_lobes(&self, ratios: &RatioSet) -> Result<Vec<PerturbationLobe>> {
        self.perturbation
            .lobes
            .iter()
            .map(|l| {
                let states = match &l.states {
                    None => None,
                    Some(labels) => Some(
                        labels
                            .iter()
                            .map(|s| ratios.parse_label(s))
                            .collect::<Result<Vec<_>>>()?,
                    ),
                };
                Ok(PerturbationLobe {
                    states,
                    polarization: l.polarization,
                    theta: l.theta_deg.to_radians(),
                    phi: l.phi_deg.to_radians(),
                    width: l.width_deg.to_radians(),
                    amplitude: l.amplitude,
                    phase: l.phase_deg.to_radians(),
                })
            })
            .collect()
    }

    pub fn monte_carlo_config(&self) -> Result<MonteCarloConfig> {
        let p = self.receiver.polarization.build()?;
        Ok(MonteCarloConfig {
            scenarios: self.monte_carlo.scenarios,
            separation_deg: (self.monte_carlo.separation_deg[0], self.monte_carlo.separation_deg[1]),
            seed: self.monte_carlo.seed,
            threads: self.monte_carlo.threads,
            polarization: [p, p],
            condition_cap: self.receiver.condition_cap,
            noise: self.noise,
        })
    }

    /// Checks parameter ranges and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.grid.n_theta < crate::sphere::MIN_THETA_SAMPLES || self.grid.n_phi < crate::sphere::MIN_PHI_SAMPLES {
            return bad(format!(
                "grid {}x{} is below the 3x4 minimum",
                self.grid.n_theta, self.grid.n_phi
            ));
        }
        let constellation = self.constellation().map_err(|e| Error::Config(e.to_string()))?;
        let ratios = constellation.ratio_set();
        if ratios.plus_one().is_none() || ratios.minus_one().is_none() {
            return bad(format!(
                "constellation order {} has no -1 ratio; the basis needs both ±1 states",
                self.constellation.order
            ));
        }
        match &self.antenna {
            AntennaConfig::Default => {}
            AntennaConfig::Lobes(_) => {
                self.antenna_profile()
                    .expect("lobes profile")
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            AntennaConfig::PatternFiles(files) => {
                let mut seen = vec![false; ratios.len()];
                for (label, p) in files {
                    let k = ratios.parse_label(label)?;
                    if seen[k] {
                        return bad(format!("state {label} given twice"));
                    }
                    seen[k] = true;
                    if !p.is_file() {
                        return bad(format!("pattern file not found: {}", p.display()));
                    }
                }
                if let Some(k) = seen.iter().position(|s| !s) {
                    return bad(format!("no pattern file for state {}", ratios.label(k)));
                }
            }
        }
        for l in self.perturbation_lobes(&ratios)? {
            if !(l.width > 0.0) {
                return bad(format!(
                    "perturbation lobe width must be positive, got {} deg",
                    l.width.to_degrees()
                ));
            }
        }
        self.receiver
            .polarization
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        for (name, t) in [
            ("rx1_theta_deg", self.receiver.rx1_theta_deg),
            ("rx2_theta_deg", self.receiver.rx2_theta_deg),
        ] {
            if !(0.0..=180.0).contains(&t) {
                return bad(format!("{name} = {t} is outside [0, 180]"));
            }
        }
        self.monte_carlo_config()?
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }
}

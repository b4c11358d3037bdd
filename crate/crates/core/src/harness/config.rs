//! Experiment configuration: a TOML file with `[scenario]`, `[array]`,
//! `[pso]` and `[experiment]` tables. Optional keys fall back to the
//! defaults below; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelModel, Wavelength};
use crate::error::{Error, Result};
use crate::geometry::{LocalArray, MovementConstraints, SiteSpace};
use crate::pattern::PatternKind;
use crate::pso::{PenaltyWeight, PositionUpdate, PsoParams};
use crate::scenario::{build_targets, make_probe, ProbeMode, SensingProblem, SensingRegion, Target};
use crate::schemes::SchemeKind;

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    /// `S_X = (P/NB)·I`.
    Ideal,
    /// Realized Gaussian waveform from `probe_seed`.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    /// Bearing of the region centre from the base station, degrees.
    pub bearing_deg: f64,
    /// Distance of the region centre, metres.
    pub distance: f64,
    pub radius: f64,
    /// Number of typical targets (subregions).
    pub targets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub frequency_hz: f64,
    /// Snapshots per frame; `4·NB` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<usize>,
    #[serde(default = "default_noise_dbm")]
    pub noise_dbm: f64,
    #[serde(default = "default_rcs")]
    pub rcs: f64,
    #[serde(default = "default_probe")]
    pub probe: ProbeKind,
    #[serde(default)]
    pub probe_seed: u64,
    pub regions: Vec<RegionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub surfaces: usize,
    pub antennas_per_surface: usize,
    /// Side of the cubic site, metres.
    pub site_side: f64,
    /// Minimum centre distance; `(√2/2 + 1/2)λ` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_min: Option<f64>,
    /// Side of each FA/MA sector panel; `8λ` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel_extent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoConfig {
    pub particles: usize,
    pub iterations: usize,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
    #[serde(default = "default_acceleration")]
    pub cognitive: f64,
    #[serde(default = "default_acceleration")]
    pub social: f64,
    /// Penalty per violation; calibrated from the initial swarm when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    #[serde(default)]
    pub lagged_position_update: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_schemes")]
    pub schemes: Vec<String>,
    #[serde(default = "default_patterns")]
    pub patterns: Vec<String>,
    #[serde(default = "default_powers")]
    pub powers_dbm: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Re-run the optimizers at every power instead of rescaling one layout.
    #[serde(default)]
    pub reoptimize_per_power: bool,
    /// Fill the CSV wall-clock column (makes results non-reproducible).
    #[serde(default)]
    pub record_wallclock: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub array: ArrayConfig,
    pub pso: PsoConfig,
    pub experiment: ExperimentSection,
}

fn default_noise_dbm() -> f64 {
    -90.0
}
fn default_rcs() -> f64 {
    1.0
}
fn default_probe() -> ProbeKind {
    ProbeKind::Ideal
}
fn default_inertia() -> f64 {
    0.729
}
fn default_acceleration() -> f64 {
    1.49445
}
fn default_schemes() -> Vec<String> {
    SchemeKind::ALL.iter().map(|s| s.name().to_string()).collect()
}
fn default_patterns() -> Vec<String> {
    vec!["directive".into(), "isotropic".into()]
}
fn default_powers() -> Vec<f64> {
    vec![20.0, 25.0, 30.0, 35.0, 40.0]
}
fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

pub fn parse_pattern(name: &str) -> Result<PatternKind> {
    match name {
        "directive" => Ok(PatternKind::directive()),
        "isotropic" => Ok(PatternKind::HalfSpaceIsotropic),
        other => Err(Error::Config(format!(
            "unknown pattern '{other}' (expected directive or isotropic)"
        ))),
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Canonical serialization; the basis of [`Self::hash`].
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn wavelength(&self) -> Result<Wavelength> {
        Wavelength::from_frequency(self.scenario.frequency_hz).map_err(config_err)
    }

    pub fn total_antennas(&self) -> usize {
        self.array.surfaces * self.array.antennas_per_surface
    }

    pub fn snapshots(&self) -> usize {
        self.scenario.snapshots.unwrap_or(4 * self.total_antennas())
    }

    pub fn noise_var(&self) -> f64 {
        dbm_to_watts(self.scenario.noise_dbm)
    }

    pub fn d_min(&self) -> Result<f64> {
        let l = self.wavelength()?.meters();
        Ok(self.array.d_min.unwrap_or((0.5f64.sqrt() + 0.5) * l))
    }

    pub fn panel_extent(&self) -> Result<f64> {
        Ok(self.array.panel_extent.unwrap_or(8.0 * self.wavelength()?.meters()))
    }

    pub fn site(&self) -> Result<SiteSpace> {
        SiteSpace::new(self.array.site_side).map_err(config_err)
    }

    pub fn constraints(&self) -> Result<MovementConstraints> {
        MovementConstraints::new(self.d_min()?).map_err(config_err)
    }

    /// Half-wavelength ULA carried by every 6DMA surface.
    pub fn surface_array(&self) -> Result<LocalArray> {
        LocalArray::ula(self.array.antennas_per_surface, self.wavelength()?.meters() / 2.0).map_err(config_err)
    }

    pub fn schemes(&self) -> Result<Vec<SchemeKind>> {
        self.experiment
            .schemes
            .iter()
            .map(|s| s.parse().map_err(config_err))
            .collect()
    }

    pub fn patterns(&self) -> Result<Vec<PatternKind>> {
        self.experiment.patterns.iter().map(|p| parse_pattern(p)).collect()
    }

    pub fn regions(&self) -> Result<Vec<SensingRegion>> {
        self.scenario
            .regions
            .iter()
            .map(|r| {
                let b = r.bearing_deg.to_radians();
                SensingRegion::new([r.distance * b.cos(), r.distance * b.sin()], r.radius, r.targets)
                    .map_err(config_err)
            })
            .collect()
    }

    pub fn targets(&self) -> Result<Vec<Target>> {
        build_targets(&self.regions()?, [0.0, 0.0], self.scenario.rcs, self.wavelength()?).map_err(config_err)
    }

    pub fn pso_params(&self) -> PsoParams {
        PsoParams {
            particles: self.pso.particles,
            iterations: self.pso.iterations,
            inertia: self.pso.inertia,
            cognitive: self.pso.cognitive,
            social: self.pso.social,
            penalty: self.pso.penalty.map_or(PenaltyWeight::Auto, PenaltyWeight::Fixed),
            position_update: if self.pso.lagged_position_update {
                PositionUpdate::Lagged
            } else {
                PositionUpdate::Fresh
            },
        }
    }

    /// Scoring problem for one pattern at one transmit power.
    pub fn problem(&self, pattern: PatternKind, power_dbm: f64) -> Result<SensingProblem> {
        let nb = self.total_antennas();
        let mode = match self.scenario.probe {
            ProbeKind::Ideal => ProbeMode::IdealIdentity,
            ProbeKind::Gaussian => ProbeMode::Gaussian {
                seed: self.scenario.probe_seed,
            },
        };
        Ok(SensingProblem {
            model: ChannelModel::new(pattern, self.wavelength()?),
            targets: self.targets()?,
            probe: make_probe(dbm_to_watts(power_dbm), self.snapshots(), nb, mode).map_err(config_err)?,
            noise_var: self.noise_var(),
            site: self.site()?,
            cons: self.constraints()?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let s = &self.scenario;
        if !(s.frequency_hz > 0.0 && s.frequency_hz.is_finite()) {
            return bad(format!("scenario.frequency_hz must be > 0, got {}", s.frequency_hz));
        }
        if !s.noise_dbm.is_finite() {
            return bad("scenario.noise_dbm must be finite".into());
        }
        if !(s.rcs > 0.0 && s.rcs.is_finite()) {
            return bad(format!("scenario.rcs must be > 0, got {}", s.rcs));
        }
        if s.regions.is_empty() {
            return bad("scenario.regions must not be empty".into());
        }
        for (i, r) in s.regions.iter().enumerate() {
            if !(r.distance > r.radius && r.radius > 0.0 && r.bearing_deg.is_finite()) {
                return bad(format!(
                    "scenario.regions[{i}]: need 0 < radius < distance and a finite bearing"
                ));
            }
            if r.targets == 0 {
                return bad(format!("scenario.regions[{i}].targets must be ≥ 1"));
            }
        }
        let a = &self.array;
        if a.surfaces == 0 || a.antennas_per_surface == 0 {
            return bad("array.surfaces and array.antennas_per_surface must be ≥ 1".into());
        }
        if !(a.site_side > 0.0 && a.site_side.is_finite()) {
            return bad(format!("array.site_side must be > 0, got {}", a.site_side));
        }
        if let Some(d) = a.d_min {
            if !(d > 0.0) {
                return bad(format!("array.d_min must be > 0, got {d}"));
            }
        }
        if let Some(e) = a.panel_extent {
            if !(e > 0.0) {
                return bad(format!("array.panel_extent must be > 0, got {e}"));
            }
        }
        if self.snapshots() <= self.total_antennas() {
            return bad(format!(
                "scenario.snapshots ({}) must exceed the antenna count ({})",
                self.snapshots(),
                self.total_antennas()
            ));
        }
        self.pso_params().validate().map_err(config_err)?;
        let schemes = self.schemes()?;
        self.patterns()?;
        if schemes.iter().any(|k| *k != SchemeKind::SixDma)
            && crate::schemes::sector_sizes(self.total_antennas()).is_err()
        {
            return bad(format!(
                "{} antennas cannot form the three-sector baselines",
                self.total_antennas()
            ));
        }
        let e = &self.experiment;
        if e.powers_dbm.is_empty() || e.powers_dbm.iter().any(|p| !p.is_finite()) {
            return bad("experiment.powers_dbm must be a non-empty list of finite values".into());
        }
        if e.seeds.is_empty() {
            return bad("experiment.seeds must not be empty".into());
        }
        Ok(())
    }
}

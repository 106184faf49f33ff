//! TOML run configuration.

use std::path::{Path, PathBuf};

use qlink::atmosphere::{AtmosphereProfile, LinkGeometry};
use qlink::ensemble::GridSettings;
use qlink::keyrate::{AepEpsilon, DetectorModel, FiniteSizeParams};
use qlink::protocol::{ClassicalLayer, SqueezingParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::realizations")]
    pub realizations: usize,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub atmosphere: AtmosphereConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub squeezing: SqueezingConfig,
    #[serde(default)]
    pub classical: ClassicalConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub finite_size: FiniteSizeConfig,
    #[serde(default)]
    pub verification: VerificationConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

mod defaults {
    use std::path::PathBuf;

    pub fn seed() -> u64 {
        1
    }
    pub fn realizations() -> usize {
        10_000
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub ground_altitude: f64,
    pub satellite_altitude: f64,
    pub zenith_deg: f64,
    pub wavelength: f64,
    pub beam_waist: f64,
    pub aperture_radius: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            ground_altitude: 0.0,
            satellite_altitude: 500e3,
            zenith_deg: 0.0,
            wavelength: 1064e-9,
            beam_waist: 0.15,
            aperture_radius: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtmosphereConfig {
    pub ground_turbulence: f64,
    pub ground_wind: f64,
    pub outer_scale: f64,
    pub inner_scale: f64,
    pub cn2_scale: f64,
}

impl Default for AtmosphereConfig {
    fn default() -> Self {
        Self {
            ground_turbulence: 9.6e-14,
            ground_wind: 3.0,
            outer_scale: 5.0,
            inner_scale: 0.01,
            cn2_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub size: usize,
    /// Receiver window side in meters; derived from the beam when absent.
    pub receiver_window: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            size: 512,
            receiver_window: None,
        }
    }
}

/// Zenith angles and aperture radii swept by `simulate-channel`. Empty
/// lists fall back to the single `[link]` value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub zenith_deg: Vec<f64>,
    pub aperture_radius: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SqueezingConfig {
    pub squeezing_db: Vec<f64>,
    /// Anti-squeezed variance; pure squeezing (`1 / Vs`) when absent.
    pub anti_squeezed: Option<f64>,
}

impl Default for SqueezingConfig {
    fn default() -> Self {
        Self {
            squeezing_db: vec![6.0, 10.0],
            anti_squeezed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalConfig {
    pub alpha: f64,
    pub carrier_amplitude: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            alpha: 6.0,
            carrier_amplitude: 1e3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub electronic_noise: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            efficiency: 0.61,
            electronic_noise: 0.12,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AepPolicy {
    #[default]
    Composed,
    Bar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiniteSizeConfig {
    pub security: f64,
    pub block_size: f64,
    /// `N' / N`.
    pub kept_fraction: f64,
    pub recon_efficiency: f64,
    pub discretisation: f64,
    pub aep_epsilon: AepPolicy,
}

impl Default for FiniteSizeConfig {
    fn default() -> Self {
        Self {
            security: 1e-9,
            block_size: 1e10,
            kept_fraction: 0.5,
            recon_efficiency: 0.98,
            discretisation: 5.0,
            aep_epsilon: AepPolicy::Composed,
        }
    }
}

/// Synthetic fading and shot budget of `protocol-verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerificationConfig {
    pub synthetic_realizations: usize,
    pub synthetic_mean_loss_db: f64,
    pub synthetic_std_loss_db: f64,
    pub shots_per_eta: u64,
    pub direct_detection: bool,
    /// Pass threshold in standard errors.
    pub threshold: f64,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self {
            synthetic_realizations: 100,
            synthetic_mean_loss_db: 5.0,
            synthetic_std_loss_db: 1.5,
            shots_per_eta: 10_000,
            direct_detection: true,
            threshold: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub histogram_bin_db: f64,
    /// Length of the coherence-time step series in seconds.
    pub step_duration: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            histogram_bin_db: 0.25,
            step_duration: 0.5,
        }
    }
}

impl RunConfig {
    /// Reference LEO downlink with the default detector and finite-size settings.
    pub fn reference(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed: defaults::seed(),
            realizations: defaults::realizations(),
            output_dir: defaults::output_dir(),
            link: LinkConfig::default(),
            atmosphere: AtmosphereConfig::default(),
            grid: GridConfig::default(),
            sweep: SweepConfig::default(),
            squeezing: SqueezingConfig::default(),
            classical: ClassicalConfig::default(),
            detector: DetectorConfig::default(),
            finite_size: FiniteSizeConfig::default(),
            verification: VerificationConfig::default(),
            outputs: OutputConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the rendered config with the output directory blanked, so
    /// the same run written elsewhere hashes identically.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(canonical.render().as_bytes()))
    }

    /// Checks every derived physics object once.
    pub fn validate(&self) -> Result<(), CliError> {
        let domain = |msg: String| Err(CliError::Config(msg));
        if self.realizations == 0 {
            return domain("realizations must be at least 1".into());
        }
        if !self.grid.size.is_power_of_two() || self.grid.size < 64 {
            return domain(format!("grid size {} must be a power of two >= 64", self.grid.size));
        }
        if let Some(w) = self.grid.receiver_window {
            if !(w > 0.0 && w.is_finite()) {
                return domain(format!("receiver window {w} must be positive"));
            }
        }
        if !(self.outputs.histogram_bin_db > 0.0) {
            return domain("histogram bin width must be positive".into());
        }
        if !(self.outputs.step_duration >= 0.0) {
            return domain("step duration must be >= 0".into());
        }
        if !(self.verification.threshold > 0.0) {
            return domain("verification threshold must be positive".into());
        }
        if self.verification.synthetic_realizations == 0 || self.verification.shots_per_eta == 0 {
            return domain("verification needs at least one realization and one shot".into());
        }
        if self.squeezing.squeezing_db.is_empty() {
            return domain("at least one squeezing level is required".into());
        }
        for (z, ra) in self.sweep_points() {
            self.geometry(z, ra)?;
        }
        self.profile()?;
        for &db in &self.squeezing.squeezing_db {
            self.squeezing_params(db)?;
        }
        self.classical()?;
        self.detector()?;
        self.finite_size()?;
        Ok(())
    }

    pub fn zenith_angles(&self) -> Vec<f64> {
        if self.sweep.zenith_deg.is_empty() {
            vec![self.link.zenith_deg]
        } else {
            self.sweep.zenith_deg.clone()
        }
    }

    pub fn aperture_radii(&self) -> Vec<f64> {
        if self.sweep.aperture_radius.is_empty() {
            vec![self.link.aperture_radius]
        } else {
            self.sweep.aperture_radius.clone()
        }
    }

    fn sweep_points(&self) -> Vec<(f64, f64)> {
        let radii = self.aperture_radii();
        self.zenith_angles()
            .into_iter()
            .flat_map(|z| radii.iter().map(move |&ra| (z, ra)))
            .collect()
    }

    pub fn geometry(&self, zenith_deg: f64, aperture_radius: f64) -> Result<LinkGeometry, CliError> {
        let l = &self.link;
        Ok(LinkGeometry::new(
            l.ground_altitude,
            l.satellite_altitude,
            zenith_deg,
            l.wavelength,
            l.beam_waist,
            aperture_radius,
        )?)
    }

    pub fn profile(&self) -> Result<AtmosphereProfile, CliError> {
        let a = &self.atmosphere;
        Ok(AtmosphereProfile::with_scale(
            a.ground_turbulence,
            a.ground_wind,
            a.outer_scale,
            a.inner_scale,
            a.cn2_scale,
        )?)
    }

    pub fn grid_settings(&self) -> GridSettings {
        GridSettings {
            size: self.grid.size,
            receiver_window: self.grid.receiver_window,
        }
    }

    pub fn squeezing_params(&self, squeezing_db: f64) -> Result<SqueezingParams, CliError> {
        Ok(SqueezingParams::from_squeezing_db(squeezing_db, self.squeezing.anti_squeezed)?)
    }

    pub fn classical(&self) -> Result<ClassicalLayer, CliError> {
        Ok(ClassicalLayer::new(self.classical.alpha, self.classical.carrier_amplitude)?)
    }

    pub fn detector(&self) -> Result<DetectorModel, CliError> {
        Ok(DetectorModel::new(self.detector.efficiency, self.detector.electronic_noise)?)
    }

    pub fn finite_size(&self) -> Result<FiniteSizeParams, CliError> {
        let f = &self.finite_size;
        let mut p = FiniteSizeParams::from_security(f.security, f.block_size, f.recon_efficiency, f.discretisation)?;
        p.kept_length = f.block_size * f.kept_fraction;
        p.aep_epsilon = match f.aep_epsilon {
            AepPolicy::Composed => AepEpsilon::Composed,
            AepPolicy::Bar => AepEpsilon::Bar,
        };
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trips() {
        let mut c = RunConfig::reference("reference");
        c.sweep.zenith_deg = vec![0.0, 15.0, 30.0, 45.0, 60.0];
        c.sweep.aperture_radius = vec![0.15, 0.3, 0.5];
        c.grid.receiver_window = Some(1.2345678901234567);
        let back = RunConfig::parse(&c.render()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let c = RunConfig::parse("scenario = \"x\"\n").unwrap();
        assert_eq!(c, RunConfig::reference("x"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("scenario = \"x\"\n[link]\nzenith = 3.0\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        let err = RunConfig::parse("scenario = \"x\"\ncolour = 1\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn invalid_physics_is_a_config_error() {
        let err = RunConfig::parse("scenario = \"x\"\n[link]\nzenith_deg = 95.0\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = RunConfig::parse("scenario = \"x\"\n[grid]\nsize = 500\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = RunConfig::reference("x");
        let mut b = a.clone();
        b.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn kept_fraction_sets_kept_length() {
        let mut c = RunConfig::reference("x");
        c.finite_size.kept_fraction = 0.25;
        assert_eq!(c.finite_size().unwrap().kept_length, 2.5e9);
    }
}

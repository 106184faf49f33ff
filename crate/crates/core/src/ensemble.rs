//! Monte Carlo channel ensembles: parallel split-step realizations, fading
//! statistics and a checksummed text file format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::atmosphere::{greenwood_and_coherence, AtmosphereProfile, LinkGeometry, Turbulence};
use crate::rng::{substream, StreamId};
use crate::optics::{aperture_transmissivities, gaussian_source, receiver_window, Realization, SplitStepModel};
use crate::screens::{plan_slabs, sampling_warning};
use crate::{loss_db, Error, Result, TOOL_VERSION};

pub const SCHEMA_VERSION: u32 = 1;
const MAGIC: &str = "# qlink channel ensemble";
const SEPARATOR: &str = "---";

/// Grid and sampling choices of a channel simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSettings {
    /// Samples per side; a power of two.
    pub size: usize,
    /// Receiver window in meters; `None` resolves to [`receiver_window`].
    pub receiver_window: Option<f64>,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            size: 512,
            receiver_window: None,
        }
    }
}

/// Everything needed to regenerate an ensemble bit-identically.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleMetadata {
    pub tool_version: String,
    pub seed: u64,
    pub realizations: usize,
    pub grid_size: usize,
    pub receiver_window: f64,
    pub zenith_deg: f64,
    pub aperture_radius: f64,
    pub ground_altitude: f64,
    pub satellite_altitude: f64,
    pub wavelength: f64,
    pub beam_waist: f64,
    pub ground_turbulence: f64,
    pub ground_wind: f64,
    pub outer_scale: f64,
    pub inner_scale: f64,
    pub cn2_scale: f64,
    pub slab_count: usize,
    /// Seconds; `None` for a calm atmosphere.
    pub coherence_time: Option<f64>,
}

impl EnsembleMetadata {
    pub fn geometry(&self) -> Result<LinkGeometry> {
        LinkGeometry::new(
            self.ground_altitude,
            self.satellite_altitude,
            self.zenith_deg,
            self.wavelength,
            self.beam_waist,
            self.aperture_radius,
        )
    }

    pub fn profile(&self) -> Result<AtmosphereProfile> {
        AtmosphereProfile::with_scale(
            self.ground_turbulence,
            self.ground_wind,
            self.outer_scale,
            self.inner_scale,
            self.cn2_scale,
        )
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |t| t.to_string());
        vec![
            ("tool_version", self.tool_version.clone()),
            ("seed", self.seed.to_string()),
            ("realizations", self.realizations.to_string()),
            ("grid_size", self.grid_size.to_string()),
            ("receiver_window", self.receiver_window.to_string()),
            ("zenith_deg", self.zenith_deg.to_string()),
            ("aperture_radius", self.aperture_radius.to_string()),
            ("ground_altitude", self.ground_altitude.to_string()),
            ("satellite_altitude", self.satellite_altitude.to_string()),
            ("wavelength", self.wavelength.to_string()),
            ("beam_waist", self.beam_waist.to_string()),
            ("ground_turbulence", self.ground_turbulence.to_string()),
            ("ground_wind", self.ground_wind.to_string()),
            ("outer_scale", self.outer_scale.to_string()),
            ("inner_scale", self.inner_scale.to_string()),
            ("cn2_scale", self.cn2_scale.to_string()),
            ("slab_count", self.slab_count.to_string()),
            ("coherence_time", opt(self.coherence_time)),
        ]
    }

    fn from_entries(map: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
            let raw = map
                .get(key)
                .ok_or_else(|| Error::Format(format!("ensemble header lacks `{key}`")))?;
            raw.parse()
                .map_err(|_| Error::Format(format!("ensemble header `{key}` has invalid value `{raw}`")))
        }
        let coherence_time = match map.get("coherence_time").map(String::as_str) {
            Some("none") => None,
            _ => Some(get(map, "coherence_time")?),
        };
        Ok(Self {
            tool_version: get(map, "tool_version")?,
            seed: get(map, "seed")?,
            realizations: get(map, "realizations")?,
            grid_size: get(map, "grid_size")?,
            receiver_window: get(map, "receiver_window")?,
            zenith_deg: get(map, "zenith_deg")?,
            aperture_radius: get(map, "aperture_radius")?,
            ground_altitude: get(map, "ground_altitude")?,
            satellite_altitude: get(map, "satellite_altitude")?,
            wavelength: get(map, "wavelength")?,
            beam_waist: get(map, "beam_waist")?,
            ground_turbulence: get(map, "ground_turbulence")?,
            ground_wind: get(map, "ground_wind")?,
            outer_scale: get(map, "outer_scale")?,
            inner_scale: get(map, "inner_scale")?,
            cn2_scale: get(map, "cn2_scale")?,
            slab_count: get(map, "slab_count")?,
            coherence_time,
        })
    }
}

/// Per-realization transmissivities, ordered by realization index.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelEnsemble {
    etas: Vec<f64>,
    metadata: EnsembleMetadata,
    warnings: Vec<String>,
}

impl ChannelEnsemble {
    pub fn new(etas: Vec<f64>, metadata: EnsembleMetadata) -> Result<Self> {
        check_etas(&etas)?;
        Ok(Self {
            etas,
            metadata,
            warnings: Vec::new(),
        })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }
    pub fn metadata(&self) -> &EnsembleMetadata {
        &self.metadata
    }
    /// Non-fatal sampling notes raised while simulating; not persisted.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
    pub fn len(&self) -> usize {
        self.etas.len()
    }
    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }
}

fn check_etas(etas: &[f64]) -> Result<()> {
    if etas.is_empty() {
        return Err(Error::Domain("an ensemble needs at least one transmissivity".into()));
    }
    if let Some((i, v)) = etas.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Integrity(format!("transmissivity #{i} = {v} lies outside [0, 1]")));
    }
    Ok(())
}

/// Runs `realizations` independent split-step realizations for one aperture.
pub fn run_ensemble(
    geom: &LinkGeometry,
    profile: &AtmosphereProfile,
    grid: GridSettings,
    realizations: usize,
    master_seed: u64,
) -> Result<ChannelEnsemble> {
    let mut out = run_ensembles(geom, profile, grid, realizations, master_seed, &[geom.aperture_radius()])?;
    Ok(out.remove(0))
}

/// Runs one set of realizations and collects every aperture radius in
/// `radii` from the same received fields. Realization `i` of every
/// returned ensemble therefore shares its phase screens.
pub fn run_ensembles(
    geom: &LinkGeometry,
    profile: &AtmosphereProfile,
    grid: GridSettings,
    realizations: usize,
    master_seed: u64,
    radii: &[f64],
) -> Result<Vec<ChannelEnsemble>> {
    if realizations == 0 {
        return Err(Error::Domain("realization count must be at least 1".into()));
    }
    if radii.is_empty() {
        return Err(Error::Domain("at least one aperture radius is required".into()));
    }
    let diagnostics = greenwood_and_coherence(geom, profile)?;
    let plan = plan_slabs(geom, profile, &diagnostics)?;
    let source = gaussian_source(geom, grid.size)?;
    let max_radius = radii.iter().copied().fold(0.0, f64::max);
    let window = grid.receiver_window.unwrap_or_else(|| receiver_window(geom, max_radius));
    let spacing = window / grid.size as f64;
    let mut warnings = Vec::new();
    if plan.screen_count() > 0 {
        warnings.extend(sampling_warning(grid.size, spacing, profile.outer_scale()));
    }

    let model = SplitStepModel::new(&source, &plan, geom, profile, spacing)?;
    let results: Vec<Result<Vec<f64>>> = (0..realizations)
        .into_par_iter()
        .map(|index| {
            let realization = Realization {
                seed: master_seed,
                index: index as u64,
            };
            let field = model.run(realization)?;
            aperture_transmissivities(&field, radii)
        })
        .collect();
    let mut per_radius = vec![Vec::with_capacity(realizations); radii.len()];
    for (index, r) in results.into_iter().enumerate() {
        let etas = r.map_err(|e| Error::Realization {
            index,
            source: Box::new(e),
        })?;
        for (col, eta) in per_radius.iter_mut().zip(etas) {
            col.push(eta);
        }
    }

    let coherence_time = match diagnostics {
        Turbulence::Active(d) => Some(d.coherence_time),
        Turbulence::Calm => None,
    };
    radii
        .iter()
        .zip(per_radius)
        .map(|(&ra, etas)| {
            let metadata = EnsembleMetadata {
                tool_version: TOOL_VERSION.to_string(),
                seed: master_seed,
                realizations,
                grid_size: grid.size,
                receiver_window: window,
                zenith_deg: geom.zenith_deg(),
                aperture_radius: ra,
                ground_altitude: geom.ground_altitude(),
                satellite_altitude: geom.satellite_altitude(),
                wavelength: geom.wavelength(),
                beam_waist: geom.beam_waist(),
                ground_turbulence: profile.ground_turbulence(),
                ground_wind: profile.ground_wind(),
                outer_scale: profile.outer_scale(),
                inner_scale: profile.inner_scale(),
                cn2_scale: profile.cn2_scale(),
                slab_count: plan.screen_count(),
                coherence_time,
            };
            let mut ens = ChannelEnsemble::new(etas, metadata)?;
            ens.warnings = warnings.clone();
            Ok(ens)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FadingStats {
    pub mean_eta: f64,
    /// `<sqrt(eta)>^2`.
    pub eta_f: f64,
    /// `Var(sqrt(eta)) = <eta> - eta_f`.
    pub var_sqrt: f64,
    pub mean_loss_db: f64,
    pub std_loss_db: f64,
}

impl FadingStats {
    /// Statistics of a channel with fixed transmissivity.
    pub fn constant(eta: f64) -> Result<Self> {
        fading_stats(&[eta])
    }
}

/// Sample moments of a transmissivity ensemble.
pub fn fading_stats(etas: &[f64]) -> Result<FadingStats> {
    check_etas(etas)?;
    let n = etas.len() as f64;
    // shifted sums keep constant ensembles exact
    let (e0, s0) = (etas[0], etas[0].sqrt());
    let mean_eta = e0 + etas.iter().map(|e| e - e0).sum::<f64>() / n;
    let shift_mean = etas.iter().map(|e| e.sqrt() - s0).sum::<f64>() / n;
    let var_sqrt = (etas.iter().map(|e| (e.sqrt() - s0).powi(2)).sum::<f64>() / n - shift_mean * shift_mean)
        .max(0.0)
        .min(mean_eta);
    let losses: Vec<f64> = etas.iter().map(|&e| loss_db(e)).collect();
    let mean_loss_db = losses.iter().sum::<f64>() / n;
    let std_loss_db = if losses.len() > 1 && mean_loss_db.is_finite() {
        (losses.iter().map(|l| (l - mean_loss_db).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(FadingStats {
        mean_eta,
        // <sqrt(eta)>^2 = <eta> - Var(sqrt(eta))
        eta_f: mean_eta - var_sqrt,
        var_sqrt,
        mean_loss_db,
        std_loss_db,
    })
}

/// Histogram of per-realization loss in dB on bins `[k w, (k+1) w)`.
/// Returns `(bin_center_db, density)` for occupied bins, ascending.
pub fn loss_histogram(etas: &[f64], bin_width_db: f64) -> Result<Vec<(f64, f64)>> {
    if !(bin_width_db > 0.0 && bin_width_db.is_finite()) {
        return Err(Error::Domain(format!("bin width {bin_width_db} dB must be positive")));
    }
    let losses: Vec<f64> = etas.iter().map(|&e| loss_db(e)).filter(|l| l.is_finite()).collect();
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for l in &losses {
        *counts.entry((l / bin_width_db).floor() as i64).or_default() += 1;
    }
    let norm = 1.0 / (losses.len() as f64 * bin_width_db);
    Ok(counts
        .into_iter()
        .map(|(k, c)| ((k as f64 + 0.5) * bin_width_db, c as f64 * norm))
        .collect())
}

/// Step series holding successive transmissivities for one coherence time
/// each: `(t_start, eta)` for `floor(duration / tau0)` steps.
pub fn coherence_step_series(ens: &ChannelEnsemble, duration: f64) -> Result<Vec<(f64, f64)>> {
    let tau0 = ens
        .metadata
        .coherence_time
        .ok_or_else(|| Error::Domain("coherence time is undefined for a calm atmosphere".into()))?;
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::Domain(format!("duration {duration} s must be finite and >= 0")));
    }
    let steps = (duration / tau0).floor() as usize;
    if steps > ens.len() {
        return Err(Error::Domain(format!(
            "{duration} s spans {steps} coherence times but the ensemble holds {} realizations",
            ens.len()
        )));
    }
    Ok(ens.etas[..steps]
        .iter()
        .enumerate()
        .map(|(i, &eta)| (i as f64 * tau0, eta))
        .collect())
}

fn render_body(etas: &[f64]) -> String {
    let mut body = String::with_capacity(etas.len() * 24);
    for eta in etas {
        writeln!(body, "{eta:.16e}").expect("write to string");
    }
    body
}

/// Renders the text form written by [`save_ensemble`].
pub fn render_ensemble(ens: &ChannelEnsemble) -> String {
    render_ensemble_annotated(ens, &[])
}

/// Like [`render_ensemble`] with extra `key=value` header lines, which
/// [`parse_ensemble`] accepts and ignores.
pub fn render_ensemble_annotated(ens: &ChannelEnsemble, extra: &[(&str, &str)]) -> String {
    let body = render_body(&ens.etas);
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "schema_version={SCHEMA_VERSION}").unwrap();
    for (k, v) in extra {
        writeln!(out, "{k}={v}").unwrap();
    }
    for (k, v) in ens.metadata.entries() {
        writeln!(out, "{k}={v}").unwrap();
    }
    writeln!(out, "eta_count={}", ens.etas.len()).unwrap();
    writeln!(out, "eta_sha256={}", hex::encode(Sha256::digest(body.as_bytes()))).unwrap();
    writeln!(out, "{SEPARATOR}").unwrap();
    out.push_str(&body);
    out
}

/// Parses the text form, verifying schema, count and checksum.
pub fn parse_ensemble(text: &str) -> Result<ChannelEnsemble> {
    let (header, body) = text
        .split_once(&format!("\n{SEPARATOR}\n"))
        .ok_or_else(|| Error::Integrity("ensemble file lacks the header separator (truncated?)".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Format("not an ensemble file".into()));
    }
    let mut map = BTreeMap::new();
    for line in lines {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed header line `{line}`")))?;
        map.insert(k.to_string(), v.to_string());
    }
    match map.get("schema_version").map(String::as_str) {
        Some(v) if v == SCHEMA_VERSION.to_string() => {}
        other => {
            return Err(Error::Format(format!(
                "unsupported ensemble schema version {other:?} (expected {SCHEMA_VERSION})"
            )))
        }
    }
    let expected = map
        .get("eta_sha256")
        .ok_or_else(|| Error::Format("ensemble header lacks `eta_sha256`".into()))?;
    let actual = hex::encode(Sha256::digest(body.as_bytes()));
    if &actual != expected {
        return Err(Error::Integrity(format!(
            "ensemble checksum mismatch: header {expected}, data {actual}"
        )));
    }
    let count: usize = map
        .get("eta_count")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format("ensemble header lacks a valid `eta_count`".into()))?;
    let etas = body
        .lines()
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| Error::Format(format!("invalid transmissivity `{l}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if etas.len() != count {
        return Err(Error::Integrity(format!(
            "ensemble holds {} values, header says {count}",
            etas.len()
        )));
    }
    ChannelEnsemble::new(etas, EnsembleMetadata::from_entries(&map)?)
}

pub fn save_ensemble(ens: &ChannelEnsemble, path: &Path) -> Result<()> {
    std::fs::write(path, render_ensemble(ens))?;
    Ok(())
}

pub fn load_ensemble(path: &Path) -> Result<ChannelEnsemble> {
    parse_ensemble(&std::fs::read_to_string(path)?)
}

/// Log-normal fading draws: loss in dB is normal with the given mean and
/// standard deviation, truncated at 0 dB.
pub fn synthetic_etas(count: usize, mean_loss_db: f64, std_loss_db: f64, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Domain("synthetic ensemble needs at least one value".into()));
    }
    if !(std_loss_db >= 0.0) {
        return Err(Error::Domain(format!("loss spread {std_loss_db} dB must be >= 0")));
    }
    let normal = Normal::new(mean_loss_db, std_loss_db)
        .map_err(|e| Error::Domain(format!("synthetic loss distribution: {e}")))?;
    let mut rng = substream(seed, StreamId::synthetic(0));
    Ok((0..count)
        .map(|_| crate::eta_from_loss_db(normal.sample(&mut rng).max(0.0)))
        .collect())
}

#[cfg(test)]
pub(crate) fn test_metadata() -> EnsembleMetadata {
    EnsembleMetadata {
        tool_version: TOOL_VERSION.to_string(),
        seed: 42,
        realizations: 3,
        grid_size: 512,
        receiver_window: 9.04,
        zenith_deg: 60.0,
        aperture_radius: 0.15,
        ground_altitude: 0.0,
        satellite_altitude: 5e5,
        wavelength: 1.064e-6,
        beam_waist: 0.15,
        ground_turbulence: 9.6e-14,
        ground_wind: 3.0,
        outer_scale: 5.0,
        inner_scale: 0.01,
        cn2_scale: 1.0,
        slab_count: 12,
        coherence_time: Some(0.00229),
    }
}

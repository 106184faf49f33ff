//! Configuration-driven driver for channel simulation, protocol
//! verification, link budgets and key-rate sweeps.

pub mod config;
mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qlink::ensemble::{
    coherence_step_series, fading_stats, load_ensemble, loss_histogram, render_ensemble_annotated, run_ensembles,
    synthetic_etas, ChannelEnsemble,
};
use qlink::keyrate::{key_rates, max_tolerable_loss};
use qlink::protocol::{
    classical_ber, classical_snr, mc_quadrature_sim, verify, zero_leakage_epsilon, ShotOptions, SqueezingParams,
};
use qlink::TOOL_VERSION;
use thiserror::Error;

pub use config::RunConfig;
use output::{fmt_opt, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] qlink::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Core(_) => 1,
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "qlink", version, about = "Satellite-to-ground dual classical/quantum link simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the ensemble size.
    #[arg(long, global = true)]
    pub realizations: Option<usize>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Runs channel ensembles over the configured zenith/aperture sweep.
    SimulateChannel,
    /// Key rates from saved ensembles for every configured squeezing level.
    KeyRate {
        /// Ensemble files; defaults to every ensemble in the output directory.
        #[arg(long)]
        ensemble: Vec<PathBuf>,
    },
    /// Shot-level Monte Carlo of the protocol against closed forms.
    ProtocolVerify {
        /// Uses half the zero-leakage beamsplitter ratio (negative control).
        #[arg(long)]
        sabotage: bool,
    },
    /// Per-realization SNR and BER of the classical layer.
    LinkBudget {
        #[arg(long)]
        ensemble: Vec<PathBuf>,
    },
}

/// Files written by a command plus text for the terminal.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub warnings: Vec<String>,
    /// Set when a verification ran to completion but did not pass.
    pub failure: Option<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failure.is_some() {
            3
        } else {
            0
        }
    }
}

pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let path = global
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(n) = global.realizations {
        config.realizations = n;
    }
    if let Some(out) = &global.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

/// Runs a parsed command line on a pool of the requested size.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let config = resolve_config(&cli.global)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    std::fs::create_dir_all(&config.output_dir).map_err(|e| io_error(&config.output_dir, e))?;
    pool.install(|| match &cli.command {
        Command::SimulateChannel => simulate_channel(&config),
        Command::KeyRate { ensemble } => key_rate(&config, ensemble),
        Command::ProtocolVerify { sabotage } => protocol_verify(&config, *sabotage),
        Command::LinkBudget { ensemble } => link_budget(&config, ensemble),
    })
}

fn point_tag(zenith_deg: f64, aperture_radius: f64) -> String {
    format!("z{zenith_deg}_r{aperture_radius}")
}

fn write_file(path: &Path, text: &str, outcome: &mut Outcome) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))?;
    outcome.files.push(path.to_path_buf());
    Ok(())
}

pub fn simulate_channel(config: &RunConfig) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let hash = config.hash();
    let profile = config.profile()?;
    let radii = config.aperture_radii();
    let mut stats_table = Table::new(
        config,
        &[
            "zenith_deg",
            "aperture_radius_m",
            "realizations",
            "mean_eta",
            "eta_f",
            "var_sqrt_eta",
            "mean_loss_db",
            "std_loss_db",
            "coherence_time_s",
        ],
    );
    for zenith in config.zenith_angles() {
        let geom = config.geometry(zenith, radii[0])?;
        let ensembles = run_ensembles(
            &geom,
            &profile,
            config.grid_settings(),
            config.realizations,
            config.seed,
            &radii,
        )?;
        for ens in &ensembles {
            for w in ens.warnings() {
                if !outcome.warnings.contains(w) {
                    outcome.warnings.push(w.clone());
                }
            }
            let meta = ens.metadata();
            let tag = point_tag(zenith, meta.aperture_radius);
            let dir = &config.output_dir;
            write_file(
                &dir.join(format!("ensemble_{tag}.txt")),
                &render_ensemble_annotated(ens, &[("config_hash", &hash)]),
                &mut outcome,
            )?;

            let s = fading_stats(ens.etas())?;
            stats_table.row(vec![
                zenith.to_string(),
                meta.aperture_radius.to_string(),
                ens.len().to_string(),
                s.mean_eta.to_string(),
                s.eta_f.to_string(),
                s.var_sqrt.to_string(),
                s.mean_loss_db.to_string(),
                s.std_loss_db.to_string(),
                fmt_opt(meta.coherence_time),
            ]);

            let mut hist = Table::new(config, &["bin_center_db", "density"]);
            for (c, d) in loss_histogram(ens.etas(), config.outputs.histogram_bin_db)? {
                hist.row(vec![c.to_string(), d.to_string()]);
            }
            write_file(&dir.join(format!("histogram_{tag}.csv")), &hist.render(), &mut outcome)?;

            if let Some(table) = step_table(config, ens, &mut outcome.warnings)? {
                write_file(&dir.join(format!("steps_{tag}.csv")), &table.render(), &mut outcome)?;
            }
        }
    }
    let stats_path = config.output_dir.join("channel_stats.csv");
    let rendered = stats_table.render();
    write_file(&stats_path, &rendered, &mut outcome)?;
    outcome.summary = rendered;
    Ok(outcome)
}

/// Coherence-time step series, clamped to the ensemble size.
fn step_table(config: &RunConfig, ens: &ChannelEnsemble, warnings: &mut Vec<String>) -> Result<Option<Table>, CliError> {
    let Some(tau0) = ens.metadata().coherence_time else {
        warnings.push("calm atmosphere: coherence time undefined, no step series written".into());
        return Ok(None);
    };
    let mut duration = config.outputs.step_duration;
    let available = ens.len() as f64 * tau0;
    let mut table = Table::new(config, &["t_start_s", "eta", "loss_db"]);
    if (duration / tau0).floor() > ens.len() as f64 {
        let note = format!(
            "step series clamped to {} coherence times ({available} s of {duration} s requested)",
            ens.len()
        );
        table.note(&note);
        warnings.push(note);
        // half a step of slack so the floor lands on the ensemble length
        duration = (ens.len() as f64 + 0.5) * tau0;
    }
    for (t, eta) in coherence_step_series(ens, duration)? {
        table.row(vec![t.to_string(), eta.to_string(), qlink::loss_db(eta).to_string()]);
    }
    Ok(Some(table))
}

/// Ensemble files given on the command line, or every `ensemble_*.txt` in
/// the output directory ordered by zenith angle then aperture radius.
fn collect_ensembles(config: &RunConfig, explicit: &[PathBuf]) -> Result<Vec<ChannelEnsemble>, CliError> {
    let paths: Vec<PathBuf> = if explicit.is_empty() {
        let dir = &config.output_dir;
        let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| io_error(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("ensemble_") && n.ends_with(".txt"))
            })
            .collect();
        found.sort();
        found
    } else {
        explicit.to_vec()
    };
    if paths.is_empty() {
        return Err(CliError::Usage(format!(
            "no ensemble files given and none found in {}",
            config.output_dir.display()
        )));
    }
    let mut ensembles = Vec::with_capacity(paths.len());
    for p in &paths {
        let ens = load_ensemble(p).map_err(|e| match e {
            qlink::Error::Io(io) => io_error(p, io),
            other => CliError::Core(other),
        })?;
        check_compatible(config, &ens, p)?;
        ensembles.push(ens);
    }
    ensembles.sort_by(|a, b| {
        let (ma, mb) = (a.metadata(), b.metadata());
        ma.zenith_deg
            .total_cmp(&mb.zenith_deg)
            .then(ma.aperture_radius.total_cmp(&mb.aperture_radius))
    });
    Ok(ensembles)
}

fn check_compatible(config: &RunConfig, ens: &ChannelEnsemble, path: &Path) -> Result<(), CliError> {
    let m = ens.metadata();
    let (l, a) = (&config.link, &config.atmosphere);
    let pairs = [
        ("ground_altitude", m.ground_altitude, l.ground_altitude),
        ("satellite_altitude", m.satellite_altitude, l.satellite_altitude),
        ("wavelength", m.wavelength, l.wavelength),
        ("beam_waist", m.beam_waist, l.beam_waist),
        ("ground_turbulence", m.ground_turbulence, a.ground_turbulence),
        ("ground_wind", m.ground_wind, a.ground_wind),
        ("outer_scale", m.outer_scale, a.outer_scale),
        ("inner_scale", m.inner_scale, a.inner_scale),
        ("cn2_scale", m.cn2_scale, a.cn2_scale),
    ];
    for (name, file, cfg) in pairs {
        if file != cfg {
            return Err(CliError::Config(format!(
                "{}: ensemble {name} = {file} does not match config value {cfg}",
                path.display()
            )));
        }
    }
    Ok(())
}

pub fn key_rate(config: &RunConfig, explicit: &[PathBuf]) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let ensembles = collect_ensembles(config, explicit)?;
    let det = config.detector()?;
    let fsp = config.finite_size()?;
    let mut table = Table::new(
        config,
        &[
            "zenith_deg",
            "aperture_radius_m",
            "squeezing_db",
            "realizations",
            "eta_f",
            "mean_loss_db",
            "mutual_information",
            "k_asymptotic",
            "k_finite_raw",
            "k_finite",
            "k_ideal",
            "plob",
        ],
    );
    for ens in &ensembles {
        let stats = fading_stats(ens.etas())?;
        let m = ens.metadata();
        for &db in &config.squeezing.squeezing_db {
            let params = config.squeezing_params(db)?;
            let r = key_rates(&params, &stats, &det, &fsp)?;
            let ordered = r.finite_clamped() <= r.asymptotic && r.asymptotic <= r.ideal && r.ideal <= r.plob;
            if !ordered {
                return Err(qlink::Error::Physicality(format!(
                    "rate ordering violated at zenith {} deg, ra {} m, {db} dB: {r:?}",
                    m.zenith_deg, m.aperture_radius
                ))
                .into());
            }
            table.row(vec![
                m.zenith_deg.to_string(),
                m.aperture_radius.to_string(),
                db.to_string(),
                ens.len().to_string(),
                stats.eta_f.to_string(),
                stats.mean_loss_db.to_string(),
                r.mutual_information.to_string(),
                r.asymptotic.to_string(),
                r.finite.to_string(),
                r.finite_clamped().to_string(),
                r.ideal.to_string(),
                r.plob.to_string(),
            ]);
        }
    }
    let rendered = table.render();
    write_file(&config.output_dir.join("key_rates.csv"), &rendered, &mut outcome)?;

    let mut tolerable = Table::new(config, &["squeezing_db", "max_tolerable_loss_db"]);
    for &db in &config.squeezing.squeezing_db {
        let value = match max_tolerable_loss(&fsp, &det, db) {
            Ok(loss) => loss.to_string(),
            Err(qlink::Error::Numerical(msg)) => {
                outcome.warnings.push(format!("{db} dB: {msg}"));
                "none".to_string()
            }
            Err(e) => return Err(e.into()),
        };
        tolerable.row(vec![db.to_string(), value]);
    }
    write_file(
        &config.output_dir.join("tolerable_loss.csv"),
        &tolerable.render(),
        &mut outcome,
    )?;
    outcome.summary = rendered;
    Ok(outcome)
}

pub fn protocol_verify(config: &RunConfig, sabotage: bool) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let v = &config.verification;
    let db = config.squeezing.squeezing_db[0];
    let honest = config.squeezing_params(db)?;
    let params = if sabotage {
        let eps = 0.5 * zero_leakage_epsilon(honest.vs(), honest.va())?;
        SqueezingParams::new(honest.vs(), honest.va(), eps)?
    } else {
        honest
    };
    let classical = config.classical()?;
    outcome.warnings.extend(classical.carrier_warning());
    let etas = synthetic_etas(
        v.synthetic_realizations,
        v.synthetic_mean_loss_db,
        v.synthetic_std_loss_db,
        config.seed,
    )?;
    let options = ShotOptions {
        shots_per_eta: v.shots_per_eta,
        master_seed: config.seed,
        direct_detection: v.direct_detection,
    };
    let moments = mc_quadrature_sim(&params, &classical, &etas, options)?;
    let report = verify(&moments, &params, &classical, &etas)?;
    let passed = report.passes(v.threshold);

    let mut text = output::header(config);
    let mut kv = |k: &str, val: String| text.push_str(&format!("{k}={val}\n"));
    kv("squeezing_db", db.to_string());
    kv("vs", params.vs().to_string());
    kv("va", params.va().to_string());
    kv("epsilon_bs", params.epsilon().to_string());
    kv("zero_leakage", params.is_zero_leakage().to_string());
    kv("sabotage", sabotage.to_string());
    kv("alpha", classical.alpha().to_string());
    kv("realizations", etas.len().to_string());
    kv("shots", moments.shots.to_string());
    kv("max_moment_z", report.max_moment_z().to_string());
    kv("eve_bob_q_empirical", moments.eve_bob_q.mean.to_string());
    kv("eve_bob_q_z", report.eve_bob_z.to_string());
    kv("ber_empirical", report.ber_empirical.to_string());
    kv("ber_predicted", report.ber_predicted.to_string());
    kv("ber_z", report.ber_z().to_string());
    kv("threshold_sigma", v.threshold.to_string());
    kv("result", if passed { "pass" } else { "fail" }.to_string());
    text.push_str("moment,empirical,predicted,z\n");
    for (name, emp, pred, z) in &report.moments {
        text.push_str(&format!("{name},{emp},{pred},{z}\n"));
    }
    write_file(&config.output_dir.join("protocol_verify.txt"), &text, &mut outcome)?;
    outcome.summary = text;
    if !passed {
        outcome.failure = Some(format!(
            "max moment z {:.2}, <X_E X_B> z {:.2}, BER z {:.2} (threshold {})",
            report.max_moment_z(),
            report.eve_bob_z,
            report.ber_z(),
            v.threshold
        ));
    }
    Ok(outcome)
}

pub fn link_budget(config: &RunConfig, explicit: &[PathBuf]) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let ensembles = collect_ensembles(config, explicit)?;
    let alpha = config.classical.alpha;
    let mut summary = Table::new(
        config,
        &["zenith_deg", "aperture_radius_m", "realizations", "mean_snr", "ensemble_ber"],
    );
    for ens in &ensembles {
        let m = ens.metadata();
        let mut rows = Table::new(config, &["realization", "eta", "snr", "ber"]);
        let (mut snr_sum, mut ber_sum) = (0.0, 0.0);
        for (i, &eta) in ens.etas().iter().enumerate() {
            let snr = classical_snr(alpha, eta);
            let ber = classical_ber(snr);
            snr_sum += snr;
            ber_sum += ber;
            rows.row(vec![i.to_string(), eta.to_string(), snr.to_string(), ber.to_string()]);
        }
        let n = ens.len() as f64;
        let tag = point_tag(m.zenith_deg, m.aperture_radius);
        write_file(
            &config.output_dir.join(format!("link_budget_{tag}.csv")),
            &rows.render(),
            &mut outcome,
        )?;
        summary.row(vec![
            m.zenith_deg.to_string(),
            m.aperture_radius.to_string(),
            ens.len().to_string(),
            (snr_sum / n).to_string(),
            (ber_sum / n).to_string(),
        ]);
    }
    let rendered = summary.render();
    write_file(&config.output_dir.join("link_budget.csv"), &rendered, &mut outcome)?;
    outcome.summary = rendered;
    Ok(outcome)
}

/// Tool version line shared by every artifact.
pub fn tool_line() -> String {
    format!("# tool={TOOL_VERSION}")
}

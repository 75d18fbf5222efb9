//! Configuration loading and experiment dispatch for the `srcloc` binary.
//!
//! A run reads one JSON config, applies command-line overrides and writes
//! its artifacts plus a `manifest.json` into the output directory. Every CSV
//! starts with `#` comment lines carrying the tool version, master seed and
//! the resolved config, so each file is reproducible on its own.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::crlb::{crlb_sgle, CrlbResult};
use crate::error::Error;
use crate::geometry::{NetworkGeometry, SourceParams};
use crate::likelihood::{EstimatorOptions, LocationEstimator, MlEstimator};
use crate::montecarlo::{
    choose_thresholds, conditioned_ccdf, empirical_sgle, ensemble_geometry, fmt_float, log_grid, outage_ccdf,
    trials_to_csv, validate_gamma_grid, with_workers, EnsembleConfig, KtPredicate, ThresholdPolicy,
};
use crate::rng::{derive_seed, derived_stream, TAG_GEOMETRY, TAG_ROUND};
use crate::signal_model::{simulate_round, PerSensor, SensorEnsembleConfig};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SRCLOC_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "srcloc-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Geometry,
    Estimate,
    Crlb,
    SweepSnr,
    Outage,
    ConditionedOutage,
}

/// Trial-count defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// 100 geometries, 200 rounds each.
    #[default]
    Desk,
    /// 500 geometries, 1000 rounds each.
    Paper,
}

impl Profile {
    fn counts(self) -> (usize, usize) {
        match self {
            Profile::Desk => (100, 200),
            Profile::Paper => (500, 1000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdSpec {
    /// `"common"` or `"per-sensor"`.
    Named(String),
    /// Explicit thresholds.
    Fixed(PerSensor),
}

impl ThresholdSpec {
    fn policy(&self) -> ThresholdPolicy {
        match self {
            ThresholdSpec::Named(s) if s == "per-sensor" => ThresholdPolicy::PerSensor,
            ThresholdSpec::Named(_) => ThresholdPolicy::Common,
            ThresholdSpec::Fixed(_) => ThresholdPolicy::Fixed,
        }
    }

    fn initial_beta(&self) -> PerSensor {
        match self {
            ThresholdSpec::Fixed(b) => b.clone(),
            ThresholdSpec::Named(_) => PerSensor::Homogeneous(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum GammaSpec {
    Grid(GammaGrid),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct GammaGrid {
    min: f64,
    max: f64,
    points: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

/// Config file as written, before defaults and validation.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Mode>,
    #[serde(rename = "K")]
    k: Option<usize>,
    #[serde(rename = "R")]
    radius: Option<f64>,
    #[serde(rename = "R_ex")]
    r_ex: Option<f64>,
    source: Option<[f64; 2]>,
    #[serde(rename = "P0")]
    p0: Option<f64>,
    d0: Option<f64>,
    alpha: Option<f64>,
    mu_db: Option<f64>,
    eta_db: Option<OneOrMany>,
    eb_db: Option<f64>,
    #[serde(rename = "N_geom")]
    n_geom: Option<usize>,
    #[serde(rename = "N_MC")]
    n_mc: Option<usize>,
    gamma: Option<GammaSpec>,
    r_t: Option<Vec<f64>>,
    k_t_exact: Option<Vec<usize>>,
    k_t_at_least: Option<usize>,
    threshold: Option<ThresholdSpec>,
    seed: Option<u64>,
    profile: Option<Profile>,
    geometry_file: Option<PathBuf>,
    max_attempts: Option<usize>,
    out_dir: Option<PathBuf>,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "R_ex")]
    pub r_ex: f64,
    pub source: [f64; 2],
    #[serde(rename = "P0")]
    pub p0: f64,
    pub d0: f64,
    pub alpha: f64,
    pub mu_db: f64,
    /// One value except in `sweep-snr` mode.
    pub eta_db: Vec<f64>,
    pub eb_db: f64,
    pub profile: Profile,
    #[serde(rename = "N_geom")]
    pub n_geom: usize,
    #[serde(rename = "N_MC")]
    pub n_mc: usize,
    pub gamma_grid: Vec<f64>,
    pub r_t: Vec<f64>,
    pub k_t_exact: Vec<usize>,
    pub k_t_at_least: Option<usize>,
    pub threshold: ThresholdSpec,
    pub seed: u64,
    pub geometry_file: Option<PathBuf>,
    pub max_attempts: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
    #[serde(skip)]
    pub workers: Option<usize>,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub profile: Option<Profile>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Parse { line: usize, column: usize, message: String },
    Validation { field: String, message: String },
    Io { path: PathBuf, message: String },
    Simulation(Error),
}

impl CliError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 2,
            CliError::Simulation(Error::PackingFailure { .. }) => 3,
            CliError::Simulation(Error::InvalidInput(_)) => 2,
            CliError::Simulation(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    pub fn class(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "packing",
            4 => "numerical",
            _ => "io",
        }
    }

    /// Machine-readable error record.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.class(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Parse { line, column, .. } => {
                v["line"] = json!(line);
                v["column"] = json!(column);
            }
            CliError::Validation { field, .. } => v["field"] = json!(field),
            CliError::Io { path, .. } => v["path"] = json!(path),
            CliError::Simulation(_) => {}
        }
        v
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse { line, column, message } => write!(f, "config parse error at {line}:{column}: {message}"),
            CliError::Validation { field, message } => write!(f, "invalid config field {field}: {message}"),
            CliError::Io { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::Simulation(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Simulation(e)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    load_config_with(path, &Overrides::default())
}

pub fn load_config_with(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = parse_config(&text, overrides)?;
    if let Some(file) = &cfg.geometry_file {
        if file.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.geometry_file = Some(dir.join(file));
            }
        }
    }
    Ok(cfg)
}

/// Parses and validates config text, applying `overrides` and defaults.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    resolve(raw, overrides)
}

fn require<T>(value: Option<T>, field: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::invalid(field, "required field is missing"))
}

fn positive(value: f64, field: &str) -> Result<f64, CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::invalid(field, format!("must be positive and finite, got {value}")))
    }
}

fn finite(value: f64, field: &str) -> Result<f64, CliError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::invalid(field, "must be finite"))
    }
}

fn at_least_one(value: usize, field: &str) -> Result<usize, CliError> {
    if value >= 1 {
        Ok(value)
    } else {
        Err(CliError::invalid(field, "must be at least 1"))
    }
}

fn resolve(raw: RawConfig, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mode = require(overrides.mode.or(raw.mode), "mode")?;
    let k = at_least_one(require(raw.k, "K")?, "K")?;
    let radius = positive(require(raw.radius, "R")?, "R")?;
    let source = require(raw.source, "source")?;
    let p0 = positive(require(raw.p0, "P0")?, "P0")?;
    let mu_db = finite(require(raw.mu_db, "mu_db")?, "mu_db")?;
    let eta_db = match require(raw.eta_db, "eta_db")? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) if mode == Mode::SweepSnr && !v.is_empty() => v,
        OneOrMany::Many(v) if v.len() == 1 => v,
        OneOrMany::Many(_) => return Err(CliError::invalid("eta_db", "a list of values is only accepted in sweep-snr mode")),
    };
    for &e in &eta_db {
        finite(e, "eta_db")?;
    }

    let r_ex = raw.r_ex.unwrap_or(0.0);
    if !(r_ex >= 0.0 && r_ex.is_finite()) {
        return Err(CliError::invalid("R_ex", "must be non-negative"));
    }
    for &v in &source {
        finite(v, "source")?;
    }
    if source[0].hypot(source[1]) > radius {
        return Err(CliError::invalid("source", "must lie inside the disk of radius R"));
    }
    let d0 = positive(raw.d0.unwrap_or(1.0), "d0")?;
    let alpha = positive(raw.alpha.unwrap_or(2.0), "alpha")?;
    let eb_db = finite(raw.eb_db.unwrap_or(1.0), "eb_db")?;

    let profile = overrides.profile.or(raw.profile).unwrap_or_default();
    let (geom_default, mc_default) = profile.counts();
    let n_geom = at_least_one(raw.n_geom.unwrap_or(geom_default), "N_geom")?;
    let n_mc = at_least_one(raw.n_mc.unwrap_or(mc_default), "N_MC")?;

    let gamma_grid = match raw.gamma {
        None => log_grid(0.1, 2.0 * radius, 64),
        Some(GammaSpec::List(v)) => v,
        Some(GammaSpec::Grid(g)) => {
            if !(g.min > 0.0 && g.max > g.min && g.points >= 2) {
                return Err(CliError::invalid("gamma", "grid needs 0 < min < max and at least 2 points"));
            }
            log_grid(g.min, g.max, g.points)
        }
    };
    validate_gamma_grid(&gamma_grid).map_err(|e| CliError::invalid("gamma", e.to_string()))?;

    let r_t = raw.r_t.unwrap_or_else(|| vec![14.0]);
    for &r in &r_t {
        positive(r, "r_t")?;
    }
    let (k_t_exact, k_t_at_least) = match (raw.k_t_exact, raw.k_t_at_least) {
        (None, None) => (vec![1, 2], Some(3)),
        (exact, at_least) => (exact.unwrap_or_default(), at_least),
    };
    if mode == Mode::ConditionedOutage && k_t_exact.is_empty() && k_t_at_least.is_none() {
        return Err(CliError::invalid("k_t_exact", "conditioned-outage needs at least one K_T bucket"));
    }

    let threshold = raw.threshold.unwrap_or_else(|| ThresholdSpec::Named("common".into()));
    match &threshold {
        ThresholdSpec::Named(s) if s == "common" || s == "per-sensor" => {}
        ThresholdSpec::Named(s) => {
            return Err(CliError::invalid("threshold", format!("expected \"common\", \"per-sensor\" or numbers, got \"{s}\"")))
        }
        ThresholdSpec::Fixed(b) => {
            if !b.len_matches(k) {
                return Err(CliError::invalid("threshold", format!("needs K={k} values")));
            }
        }
    }

    let out_dir = overrides
        .out_dir
        .clone()
        .or(raw.out_dir)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));

    Ok(ExperimentConfig {
        mode,
        k,
        radius,
        r_ex,
        source,
        p0,
        d0,
        alpha,
        mu_db,
        eta_db,
        eb_db,
        profile,
        n_geom,
        n_mc,
        gamma_grid,
        r_t,
        k_t_exact,
        k_t_at_least,
        threshold,
        seed: overrides.seed.or(raw.seed).unwrap_or(0),
        geometry_file: raw.geometry_file,
        max_attempts: at_least_one(raw.max_attempts.unwrap_or(crate::geometry::DEFAULT_MAX_ATTEMPTS), "max_attempts")?,
        out_dir,
        workers: overrides.workers,
    })
}

impl ExperimentConfig {
    pub fn source_params(&self) -> SourceParams {
        SourceParams::new(self.p0, self.source[0], self.source[1])
    }

    pub fn sensors(&self, eta_db: f64) -> SensorEnsembleConfig {
        SensorEnsembleConfig::from_snr_db(self.p0, self.d0, self.alpha, self.mu_db, eta_db, self.eb_db, 0.0)
            .with_beta(self.threshold.initial_beta())
    }

    pub fn ensemble(&self) -> EnsembleConfig {
        EnsembleConfig {
            k: self.k,
            radius: self.radius,
            r_ex: self.r_ex,
            source: self.source_params(),
            sensors: self.sensors(self.eta_db[0]),
            n_geom: self.n_geom,
            n_mc: self.n_mc,
            gamma_grid: self.gamma_grid.clone(),
            r_t: self.r_t.clone(),
            threshold: self.threshold.policy(),
            max_attempts: self.max_attempts,
        }
    }

    fn estimator(&self) -> MlEstimator {
        MlEstimator::new(EstimatorOptions::new(self.radius, self.p0))
    }

    fn config_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Comment lines prepended to every CSV.
    fn csv_preamble(&self) -> String {
        format!(
            "# srcloc {}\n# seed={}\n# config={}\n",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.config_json()
        )
    }
}

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub artifacts: Vec<String>,
}

struct Artifacts<'a> {
    cfg: &'a ExperimentConfig,
    files: Vec<(String, String)>,
}

impl<'a> Artifacts<'a> {
    fn csv(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), format!("{}{}", self.cfg.csv_preamble(), body)));
    }

    fn json(&mut self, name: &str, mut value: serde_json::Value) {
        value["seed"] = json!(self.cfg.seed);
        value["config"] = serde_json::to_value(self.cfg).expect("config serializes");
        let mut text = serde_json::to_string_pretty(&value).expect("json serializes");
        text.push('\n');
        self.files.push((name.to_string(), text));
    }

    fn raw(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }
}

fn timestamp() -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return epoch;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs the experiment and writes its artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let started = timestamp();
    let mut artifacts = Artifacts { cfg, files: Vec::new() };
    with_workers(cfg.workers, || dispatch(cfg, &mut artifacts))??;
    let finished = timestamp();

    fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    let mut names = Vec::new();
    for (name, body) in &artifacts.files {
        let path = cfg.out_dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        names.push(name.clone());
    }
    let manifest = json!({
        "tool": "srcloc",
        "version": env!("CARGO_PKG_VERSION"),
        "mode": cfg.mode,
        "seed": cfg.seed,
        "started_unix": started,
        "finished_unix": finished,
        "artifacts": names,
        "config": cfg,
    });
    let path = cfg.out_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("json serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    names.push("manifest.json".into());
    Ok(RunSummary {
        out_dir: cfg.out_dir.clone(),
        artifacts: names,
    })
}

/// Writes `error.json` into the output directory when possible.
pub fn write_error_record(out_dir: &Path, err: &CliError) {
    if fs::create_dir_all(out_dir).is_ok() {
        let _ = fs::write(out_dir.join("error.json"), format!("{}\n", err.to_json()));
    }
}

fn dispatch(cfg: &ExperimentConfig, out: &mut Artifacts<'_>) -> Result<(), CliError> {
    match cfg.mode {
        Mode::Geometry => run_geometry(cfg, out),
        Mode::Estimate => run_estimate(cfg, out),
        Mode::Crlb => run_crlb(cfg, out),
        Mode::SweepSnr => run_sweep(cfg, out),
        Mode::Outage => run_outage(cfg, out),
        Mode::ConditionedOutage => run_conditioned(cfg, out),
    }
}

/// Geometry for single-network modes: the configured file, or geometry 0 of
/// the ensemble. Rounds use the seed of ensemble geometry 0 either way.
fn single_geometry(cfg: &ExperimentConfig) -> Result<(u64, NetworkGeometry), CliError> {
    let seed = derive_seed(cfg.seed, &[TAG_GEOMETRY, 0]);
    match &cfg.geometry_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let geom = if text.trim_start().starts_with('{') {
                NetworkGeometry::from_json(&text)
            } else {
                NetworkGeometry::from_text(&text)
            }
            .map_err(|e| CliError::invalid("geometry_file", e.to_string()))?;
            if geom.k() != cfg.k {
                return Err(CliError::invalid("K", format!("geometry file holds {} sensors", geom.k())));
            }
            Ok((seed, geom))
        }
        None => Ok(ensemble_geometry(&cfg.ensemble(), cfg.seed, 0)?),
    }
}

fn run_geometry(cfg: &ExperimentConfig, out: &mut Artifacts<'_>) -> Result<(), CliError> {
    let (_, geom) = ensemble_geometry(&cfg.ensemble(), cfg.seed, 0)?;
    out.raw("geometry.txt", geom.to_text());
    out.raw("geometry.json", geom.to_json());
    Ok(())
}

fn beta_cell(beta: &PerSensor) -> String {
    match beta {
        PerSensor::Homogeneous(b) => fmt_float(*b),
        PerSensor::Individual(_) => String::new(),
    }
}

fn run_estimate(cfg: &ExperimentConfig, out: &mut Artifacts<'_>) -> Result<(), CliError> {
    let (seed, geom) = single_geometry(cfg)?;
    let source = cfg.source_params();
    let base = cfg.sensors(cfg.eta_db[0]);
    let (beta, fallback) = choose_thresholds(&cfg.threshold.policy(), &geom, &source, &base)?;
    let sensors = base.with_beta(beta.clone());
    sensors.validate(geom.k())?;
    let estimator = cfg.estimator();
    let rounds: Vec<_> = (0..cfg.n_mc)
        .into_par_iter()
        .map(|m| {
            let mut rng = derived_stream(seed, &[TAG_ROUND, m as u64]);
            let t = simulate_round(&geom, &source, &sensors, &mut rng);
            estimator.estimate(&t, &geom, &sensors)
        })
        .collect();

    let mut csv = String::from("round,p0_hat,x_hat,y_hat,log_likelihood,converged,sgle\n");
    let mut sum = 0.0;
    for (m, est) in rounds.iter().enumerate() {
        let th = est.theta_hat;
        let sgle = (th.x - source.x).powi(2) + (th.y - source.y).powi(2);
        sum += sgle;
        let _ = writeln!(
            csv,
            "{m},{},{},{},{},{},{}",
            fmt_float(th.p0),
            fmt_float(th.x),
            fmt_float(th.y),
            fmt_float(est.log_likelihood),
            u8::from(est.converged),
            fmt_float(sgle)
        );
    }
    let mean = sum / cfg.n_mc as f64;
    let crlb = crlb_sgle(&source, &geom, &sensors).ok().map(|r| r.sgle_bound);
    out.csv("estimates.csv", csv);
    out.json(
        "estimate_summary.json",
        json!({
            "empirical_sgle": mean,
            "rmse": mean.sqrt(),
            "crlb_sgle": crlb,
            "beta": beta,
            "threshold_fallback": fallback,
            "geometry": geom,
        }),
    );
    Ok(())
}

fn run_crlb(cfg: &ExperimentConfig, out: &mut Artifacts<'_>) -> Result<(), CliError> {
    let (_, geom) = single_geometry(cfg)?;
    let source = cfg.source_params();
    let base = cfg.sensors(cfg.eta_db[0]);
    let (beta, fallback) = choose_thresholds(&cfg.threshold.policy(), &geom, &source, &base)?;
    let result: CrlbResult = crlb_sgle(&source, &geom, &base.with_beta(beta.clone()))?;
    out.json(
        "crlb.json",
        json!({
            "crlb": result,
            "crlb_rmse": result.sgle_bound.sqrt(),
            "beta": beta,
            "threshold_fallback": fallback,
            "geometry": geom,
        }),
    );
    Ok(())
}

fn run_sweep(cfg: &ExperimentConfig, out: &mut Artifacts<'_>) -> Result<(), CliError> {
    let (seed, geom) = single_geometry(cfg)?;
    let source = cfg.source_params();
    let estimator = cfg.estimator();
    let mut csv = String::from("eta_db,beta,empirical_sgle,empirical_std_error,rmse,crlb_sgle,crlb_rmse,unconverged\n");
    for &eta in &cfg.eta_db {
        let base = cfg.sensors(eta);
        let (beta, _) = choose_thresholds(&cfg.threshold.policy(), &geom, &source, &base)?;
        let sensors = base.with_beta(beta.clone());
        // Same round seeds at every eta: common random numbers across the sweep.
        let trial = empirical_sgle(&geom, &source, &sensors, cfg.n_mc, seed, &estimator, &cfg.r_t)?;
        let (crlb, crlb_rmse) = match trial.crlb_sgle {
            Some(c) => (fmt_float(c), fmt_float(c.sqrt())),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            fmt_float(eta),
            beta_cell(&beta),
            fmt_float(trial.empirical_sgle),
            fmt_float(trial.empirical_std_error),
            fmt_float(trial.empirical_sgle.sqrt()),
            crlb,
            crlb_rmse,
            trial.unconverged
        );
    }
    out.csv("sweep.csv", csv);
    Ok(())
}

fn run_outage(cfg: &ExperimentConfig, out: &mut Artifacts<'_>) -> Result<(), CliError> {
    let (curve, trials) = outage_ccdf(&cfg.ensemble(), cfg.seed, &cfg.estimator())?;
    out.csv("outage_curve.csv", curve.to_csv());
    out.csv("trials.csv", trials_to_csv(&trials));
    out.json("outage_curve.json", json!({ "curve": curve }));
    Ok(())
}

fn run_conditioned(cfg: &ExperimentConfig, out: &mut Artifacts<'_>) -> Result<(), CliError> {
    let (curve, trials) = outage_ccdf(&cfg.ensemble(), cfg.seed, &cfg.estimator())?;
    let mut predicates: Vec<KtPredicate> = cfg.k_t_exact.iter().map(|&k| KtPredicate::Exact(k)).collect();
    predicates.extend(cfg.k_t_at_least.map(KtPredicate::AtLeast));

    let mut csv = String::from("r_t,predicate,n_geometries,gamma,ccdf_empirical,ccdf_crlb\n");
    let mut curves = Vec::new();
    for &r_t in &cfg.r_t {
        for &p in &predicates {
            let label = match p {
                KtPredicate::Exact(k) => format!("K_T={k}"),
                KtPredicate::AtLeast(k) => format!("K_T>={k}"),
            };
            match conditioned_ccdf(&trials, r_t, p, &cfg.gamma_grid) {
                Ok(c) => {
                    for i in 0..c.gamma_grid.len() {
                        let _ = writeln!(
                            csv,
                            "{},{label},{},{},{},{}",
                            fmt_float(r_t),
                            c.n_geometries,
                            fmt_float(c.gamma_grid[i]),
                            fmt_float(c.ccdf_empirical[i]),
                            fmt_float(c.ccdf_crlb[i])
                        );
                    }
                    curves.push(json!({ "r_t": r_t, "predicate": p, "curve": c }));
                }
                Err(Error::EmptySubset) => curves.push(json!({ "r_t": r_t, "predicate": p, "curve": null })),
                Err(e) => return Err(e.into()),
            }
        }
    }
    out.csv("outage_curve.csv", curve.to_csv());
    out.csv("conditioned_curves.csv", csv);
    out.csv("trials.csv", trials_to_csv(&trials));
    out.json("conditioned_curves.json", json!({ "unconditioned": curve, "conditioned": curves }));
    Ok(())
}

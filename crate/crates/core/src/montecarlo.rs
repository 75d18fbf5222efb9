//! Two-level Monte-Carlo experiments: noise and fading rounds per geometry,
//! geometries per ensemble.
//!
//! Every random quantity comes from a stream derived from the master seed
//! and its position in the experiment, and all reductions run in index order,
//! so results do not depend on the number of worker threads.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crlb::{crlb_sgle, optimize_thresholds, ThresholdMode};
use crate::error::{Error, Result};
use crate::geometry::{count_within, distance, has_sensor_within, sample_geometry_with, GeometrySpec, NetworkGeometry, SourceParams};
use crate::likelihood::{EstimatorOptions, LocationEstimator, MlEstimator};
use crate::rng::{derive_seed, derived_stream, stream, TAG_GEOMETRY, TAG_ROUND};
use crate::signal_model::{received_power, simulate_round, PerSensor, SensorEnsembleConfig};

/// Outcome of the inner loop for one geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryTrialResult {
    pub geometry_id: usize,
    /// Seed of the geometry's stream; rounds derive from it.
    pub seed: u64,
    /// Mean squared location error over the rounds.
    pub empirical_sgle: f64,
    /// Standard error of `empirical_sgle` (zero for a single round).
    pub empirical_std_error: f64,
    /// `None` when the Fisher information is singular.
    pub crlb_sgle: Option<f64>,
    /// Radii at which `k_t` was counted.
    pub r_t: Vec<f64>,
    /// Sensors within each radius of the source.
    pub k_t: Vec<usize>,
    pub has_sub_d0_sensor: bool,
    pub beta: PerSensor,
    /// True when no threshold gave an invertible FIM and a heuristic was used.
    pub threshold_fallback: bool,
    pub n_mc: usize,
    /// Rounds in which the estimator reported non-convergence.
    pub unconverged: usize,
}

impl GeometryTrialResult {
    pub fn crlb_singular(&self) -> bool {
        self.crlb_sgle.is_none()
    }

    pub fn k_t_at(&self, r_t: f64) -> Option<usize> {
        self.r_t.iter().position(|&r| r == r_t).map(|i| self.k_t[i])
    }
}

/// Which geometries a conditioned curve is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "k")]
pub enum KtPredicate {
    Exact(usize),
    AtLeast(usize),
}

impl KtPredicate {
    pub fn accepts(&self, k_t: usize) -> bool {
        match *self {
            KtPredicate::Exact(k) => k_t == k,
            KtPredicate::AtLeast(k) => k_t >= k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    pub r_t: f64,
    pub predicate: KtPredicate,
}

/// Empirical complementary CDFs of the per-geometry RMSE and CRLB root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageCurve {
    pub gamma_grid: Vec<f64>,
    pub ccdf_empirical: Vec<f64>,
    pub ccdf_crlb: Vec<f64>,
    pub n_geometries: usize,
    /// Geometries with `empirical_sgle > gamma^2`, per grid point.
    pub exceed_empirical: Vec<usize>,
    /// Geometries with `crlb_sgle > gamma^2` or a singular FIM, per grid point.
    pub exceed_crlb: Vec<usize>,
    pub n_crlb_singular: usize,
    pub conditioning: Option<Conditioning>,
}

impl OutageCurve {
    pub fn from_trials(trials: &[&GeometryTrialResult], gamma_grid: &[f64], conditioning: Option<Conditioning>) -> Self {
        let n = trials.len();
        let mut exceed_empirical = Vec::with_capacity(gamma_grid.len());
        let mut exceed_crlb = Vec::with_capacity(gamma_grid.len());
        for &g in gamma_grid {
            let g2 = g * g;
            exceed_empirical.push(trials.iter().filter(|t| t.empirical_sgle > g2).count());
            exceed_crlb.push(trials.iter().filter(|t| t.crlb_sgle.is_none_or(|c| c > g2)).count());
        }
        let frac = |c: &Vec<usize>| c.iter().map(|&v| v as f64 / n as f64).collect();
        Self {
            gamma_grid: gamma_grid.to_vec(),
            ccdf_empirical: frac(&exceed_empirical),
            ccdf_crlb: frac(&exceed_crlb),
            n_geometries: n,
            exceed_empirical,
            exceed_crlb,
            n_crlb_singular: trials.iter().filter(|t| t.crlb_singular()).count(),
            conditioning,
        }
    }

    /// `gamma,ccdf_empirical,ccdf_crlb` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,ccdf_empirical,ccdf_crlb\n");
        for i in 0..self.gamma_grid.len() {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_float(self.gamma_grid[i]),
                fmt_float(self.ccdf_empirical[i]),
                fmt_float(self.ccdf_crlb[i])
            );
        }
        out
    }
}

/// How thresholds are chosen for each geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    /// Use the thresholds already in the sensor configuration.
    Fixed,
    /// Minimize the bound at the true parameters with one shared threshold.
    Common,
    /// Minimize the bound with one threshold per sensor.
    PerSensor,
}

/// Parameters of an outage experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub k: usize,
    pub radius: f64,
    pub r_ex: f64,
    pub source: SourceParams,
    pub sensors: SensorEnsembleConfig,
    pub n_geom: usize,
    pub n_mc: usize,
    pub gamma_grid: Vec<f64>,
    pub r_t: Vec<f64>,
    pub threshold: ThresholdPolicy,
    pub max_attempts: usize,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_geom == 0 || self.n_mc == 0 {
            return Err(Error::InvalidInput("N_geom and N_MC must be at least 1".into()));
        }
        validate_gamma_grid(&self.gamma_grid)?;
        self.sensors.validate(self.k)
    }

    pub fn estimator(&self) -> MlEstimator {
        MlEstimator::new(EstimatorOptions::new(self.radius, self.source.p0))
    }
}

pub fn validate_gamma_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || !grid.iter().all(|&g| g > 0.0 && g.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("gamma grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Thresholds for one geometry under `policy`, and whether the fallback fired.
pub fn choose_thresholds(
    policy: &ThresholdPolicy,
    geom: &NetworkGeometry,
    source: &SourceParams,
    cfg: &SensorEnsembleConfig,
) -> Result<(PerSensor, bool)> {
    let mode = match policy {
        ThresholdPolicy::Fixed => return Ok((cfg.beta.clone(), false)),
        ThresholdPolicy::Common => ThresholdMode::Common,
        ThresholdPolicy::PerSensor => ThresholdMode::PerSensor,
    };
    match optimize_thresholds(source, geom, cfg, mode) {
        Ok(sol) => Ok((sol.beta, false)),
        Err(Error::SingularFim { .. }) => {
            let mut amplitudes: Vec<f64> = geom
                .sensors
                .iter()
                .map(|s| received_power(source.p0, cfg.d0, cfg.alpha, distance(source, s)).sqrt())
                .collect();
            amplitudes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = match amplitudes.len() {
                0 => 0.0,
                n if n % 2 == 1 => amplitudes[n / 2],
                n => 0.5 * (amplitudes[n / 2 - 1] + amplitudes[n / 2]),
            };
            Ok((PerSensor::Homogeneous(median), true))
        }
        Err(e) => Err(e),
    }
}

/// Runs `n_mc` rounds on one geometry with thresholds already set in `cfg`.
///
/// Round `m` draws from the stream derived from `(seed, TAG_ROUND, m)`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_sgle(
    geom: &NetworkGeometry,
    source: &SourceParams,
    cfg: &SensorEnsembleConfig,
    n_mc: usize,
    seed: u64,
    estimator: &dyn LocationEstimator,
    r_t: &[f64],
) -> Result<GeometryTrialResult> {
    if n_mc == 0 {
        return Err(Error::InvalidInput("N_MC must be at least 1".into()));
    }
    cfg.validate(geom.k())?;
    let rounds: Vec<(f64, bool)> = (0..n_mc)
        .into_par_iter()
        .map(|m| {
            let mut rng = derived_stream(seed, &[TAG_ROUND, m as u64]);
            let t = simulate_round(geom, source, cfg, &mut rng);
            let est = estimator.estimate(&t, geom, cfg);
            let dx = est.theta_hat.x - source.x;
            let dy = est.theta_hat.y - source.y;
            (dx * dx + dy * dy, est.converged)
        })
        .collect();
    let n = n_mc as f64;
    let mean = rounds.iter().map(|r| r.0).sum::<f64>() / n;
    let std_error = if n_mc > 1 {
        let var = rounds.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let crlb = match crlb_sgle(source, geom, cfg) {
        Ok(res) => Some(res.sgle_bound),
        Err(Error::SingularFim { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(GeometryTrialResult {
        geometry_id: 0,
        seed,
        empirical_sgle: mean,
        empirical_std_error: std_error,
        crlb_sgle: crlb,
        r_t: r_t.to_vec(),
        k_t: r_t.iter().map(|&r| count_within(geom, source, r)).collect(),
        has_sub_d0_sensor: has_sensor_within(geom, source, cfg.d0),
        beta: cfg.beta.clone(),
        threshold_fallback: false,
        n_mc,
        unconverged: rounds.iter().filter(|r| !r.1).count(),
    })
}

/// Samples geometry `g` of an ensemble from its derived seed.
pub fn ensemble_geometry(cfg: &EnsembleConfig, master_seed: u64, g: usize) -> Result<(u64, NetworkGeometry)> {
    let seed = derive_seed(master_seed, &[TAG_GEOMETRY, g as u64]);
    let spec = GeometrySpec {
        max_attempts: cfg.max_attempts,
        ..GeometrySpec::new(cfg.k, cfg.radius, cfg.r_ex)
    };
    let mut geom = sample_geometry_with(&spec, &mut stream(seed))?;
    geom.seed = Some(seed);
    Ok((seed, geom))
}

/// Per-geometry trials of an ensemble, in geometry order.
pub fn ensemble_trials(
    cfg: &EnsembleConfig,
    master_seed: u64,
    estimator: &dyn LocationEstimator,
) -> Result<Vec<GeometryTrialResult>> {
    cfg.validate()?;
    let results: Vec<Result<GeometryTrialResult>> = (0..cfg.n_geom)
        .into_par_iter()
        .map(|g| {
            let (seed, geom) = ensemble_geometry(cfg, master_seed, g)?;
            let (beta, fallback) = choose_thresholds(&cfg.threshold, &geom, &cfg.source, &cfg.sensors)?;
            let sensors = cfg.sensors.with_beta(beta);
            let mut trial = empirical_sgle(&geom, &cfg.source, &sensors, cfg.n_mc, seed, estimator, &cfg.r_t)?;
            trial.geometry_id = g;
            trial.threshold_fallback = fallback;
            Ok(trial)
        })
        .collect();
    results.into_iter().collect()
}

/// Outage curves of an ensemble together with the per-geometry trials.
pub fn outage_ccdf(
    cfg: &EnsembleConfig,
    master_seed: u64,
    estimator: &dyn LocationEstimator,
) -> Result<(OutageCurve, Vec<GeometryTrialResult>)> {
    let trials = ensemble_trials(cfg, master_seed, estimator)?;
    let refs: Vec<&GeometryTrialResult> = trials.iter().collect();
    Ok((OutageCurve::from_trials(&refs, &cfg.gamma_grid, None), trials))
}

/// Outage curves over the geometries whose `K_T` at `r_t` satisfies `predicate`.
pub fn conditioned_ccdf(
    trials: &[GeometryTrialResult],
    r_t: f64,
    predicate: KtPredicate,
    gamma_grid: &[f64],
) -> Result<OutageCurve> {
    validate_gamma_grid(gamma_grid)?;
    let mut subset = Vec::new();
    for t in trials {
        let k_t = t
            .k_t_at(r_t)
            .ok_or_else(|| Error::InvalidInput(format!("trial {} has no K_T count for R_T={r_t}", t.geometry_id)))?;
        if predicate.accepts(k_t) {
            subset.push(t);
        }
    }
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    Ok(OutageCurve::from_trials(&subset, gamma_grid, Some(Conditioning { r_t, predicate })))
}

/// Runs `f` on a pool with `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Round-trippable float formatting with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-geometry CSV; one `K_T@r` column per radius.
pub fn trials_to_csv(trials: &[GeometryTrialResult]) -> String {
    let r_t: &[f64] = trials.first().map(|t| t.r_t.as_slice()).unwrap_or(&[]);
    let mut out = String::from(
        "geometry_id,seed,empirical_sgle,empirical_std_error,crlb_sgle,crlb_singular,threshold_fallback,has_sub_d0_sensor",
    );
    for r in r_t {
        let _ = write!(out, ",K_T@{r}");
    }
    out.push('\n');
    for t in trials {
        let crlb = t.crlb_sgle.map(fmt_float).unwrap_or_default();
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.geometry_id,
            t.seed,
            fmt_float(t.empirical_sgle),
            fmt_float(t.empirical_std_error),
            crlb,
            u8::from(t.crlb_singular()),
            u8::from(t.threshold_fallback),
            u8::from(t.has_sub_d0_sensor)
        );
        for k in &t.k_t {
            let _ = write!(out, ",{k}");
        }
        out.push('\n');
    }
    out
}

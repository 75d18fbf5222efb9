//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use srcloc::crlb::{g_matrix, position_bound_schur};
use srcloc::geometry::sample_geometry;
use srcloc::likelihood::marginal_energy_pdf;
use srcloc::montecarlo::{
    conditioned_ccdf, empirical_sgle, ensemble_trials, log_grid, EnsembleConfig, GeometryTrialResult, KtPredicate,
    OutageCurve, ThresholdPolicy,
};
use srcloc::rng::stream;
use srcloc::signal_model::{received_power, simulate_round, transmit_and_detect};
use srcloc::{
    crlb_sgle, fisher_information, log_likelihood, optimize_thresholds, MlEstimator, NetworkGeometry, Point,
    SensorEnsembleConfig, SourceParams, ThresholdMode,
};

use common::{gaussian_tail, ks_p_value, ks_statistic, reference_sensors, rotate, simpson, SOURCE};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Runs one criterion, failing it when it overruns its budget.
fn criterion(id: usize, title: &str, budget: Duration, f: impl FnOnce() -> Outcome, results: &mut Vec<bool>) -> Duration {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    let timing = if in_time {
        format!("{:.1}s of {}s", elapsed.as_secs_f64(), budget.as_secs())
    } else {
        format!("{:.1}s exceeds {}s budget", elapsed.as_secs_f64(), budget.as_secs())
    };
    println!(
        "criterion {id:>2}: {} | {title} | {} | {timing}",
        if pass { "PASS" } else { "FAIL" },
        out.detail
    );
    results.push(pass);
    elapsed
}

fn normalization() -> Outcome {
    let mut rng = stream(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let power = 10f64.powf(rng.random_range(-1.0..4.0));
        let sigma = 10f64.powf(rng.random_range(-1.0..1.5));
        let beta = rng.random_range(-2.0..(power.sqrt() + 3.0 * sigma));
        let eb = 10f64.powf(rng.random_range(-1.0..1.0));
        let tau2 = 10f64.powf(rng.random_range(-1.0..1.0));
        let ch = srcloc::signal_model::SensorChannel { sigma, beta, eb, tau2 };
        // Split at the faster component's scale so both exponentials are resolved.
        let split = 40.0 * tau2;
        let end = 60.0 * (eb + tau2);
        let pdf = |t: f64| marginal_energy_pdf(t, power, &ch).unwrap();
        let head = simpson(pdf, 0.0, split.min(end), 200_000);
        let tail = if end > split { simpson(pdf, split, end, 200_000) } else { 0.0 };
        worst = worst.max((head + tail - 1.0).abs());
    }
    outcome(worst <= 1e-8, format!("max |integral - 1| = {worst:.2e} over 100 draws (tol 1e-8)"))
}

fn distributional() -> Outcome {
    let n = 100_000;
    let eb = 10f64.powf(0.1);
    let tau2 = 0.7;
    let mut p_values = Vec::new();
    let mut rng = stream(202);
    for u in [0u8, 1] {
        let mean = eb * u as f64 + tau2;
        let mut t: Vec<f64> = (0..n).map(|_| transmit_and_detect(u, eb, tau2, &mut rng)).collect();
        let d = ks_statistic(&mut t, |x| 1.0 - (-x / mean).exp());
        p_values.push((format!("t|u={u}"), ks_p_value(d, n)));
    }

    let geom = NetworkGeometry::new(vec![Point::new(12.0, 14.0), Point::new(-3.0, 2.0)], 50.0, 0.0).unwrap();
    let cfg = SensorEnsembleConfig {
        d0: 1.0,
        alpha: 2.0,
        sigma2: 4.0.into(),
        beta: vec![12.0, 9.5].into(),
        eb: eb.into(),
        tau2: tau2.into(),
    };
    let mut rounds = stream(203);
    let mut energies = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for _ in 0..n {
        let t = simulate_round(&geom, &SOURCE, &cfg, &mut rounds);
        energies[0].push(t.0[0]);
        energies[1].push(t.0[1]);
    }
    for (i, samples) in energies.iter_mut().enumerate() {
        let d_i = srcloc::distance(&SOURCE, &geom.sensors[i]);
        let amp = received_power(SOURCE.p0, 1.0, 2.0, d_i).sqrt();
        let w1 = gaussian_tail((cfg.beta.get(i) - amp) / 2.0);
        let cdf = |x: f64| 1.0 - (1.0 - w1) * (-x / tau2).exp() - w1 * (-x / (eb + tau2)).exp();
        let d = ks_statistic(samples, cdf);
        p_values.push((format!("round sensor {i} (P(u=1)={w1:.3})"), ks_p_value(d, n)));
    }
    let pass = p_values.iter().all(|(_, p)| *p > 0.01);
    let detail = p_values
        .iter()
        .map(|(name, p)| format!("{name}: p={p:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, format!("KS at 1e5 samples, alpha 0.01; {detail}"))
}

fn random_scenario<R: Rng>(rng: &mut R) -> (SourceParams, NetworkGeometry, SensorEnsembleConfig) {
    let p0 = 10f64.powf(rng.random_range(3.0..5.0));
    let r = 40.0 * rng.random::<f64>().sqrt();
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let theta = SourceParams::new(p0, r * phi.cos(), r * phi.sin());
    let k = rng.random_range(3..30);
    let r_ex = if rng.random::<bool>() { 0.0 } else { 2.0 };
    let geom = sample_geometry(k, 50.0, r_ex, 10_000, rng).unwrap();
    let alpha = rng.random_range(2.0..4.0);
    let mu = rng.random_range(20.0..40.0);
    let eta = rng.random_range(0.0..20.0);
    let beta = rng.random_range(0.0..0.3) * p0.sqrt() * 0.1;
    let cfg = SensorEnsembleConfig::from_snr_db(p0, 1.0, alpha, mu, eta, 1.0, beta);
    (theta, geom, cfg)
}

fn fim_structure() -> Outcome {
    let mut rng = stream(303);
    let mut worst_minor: f64 = 0.0;
    let mut worst_rotation: f64 = 0.0;
    let mut problems = Vec::new();
    let mut invertible = 0;
    for draw in 0..100 {
        let (theta, geom, cfg) = random_scenario(&mut rng);
        for (i, s) in geom.sensors.iter().enumerate() {
            let g = g_matrix(&theta, s, i, cfg.alpha).unwrap();
            let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for r in 0..3 {
                for c in 0..3 {
                    if g[(r, c)] != g[(c, r)] {
                        problems.push(format!("draw {draw}: G asymmetric"));
                    }
                }
            }
            for (r1, r2) in [(0, 1), (0, 2), (1, 2)] {
                for (c1, c2) in [(0, 1), (0, 2), (1, 2)] {
                    let minor = g[(r1, c1)] * g[(r2, c2)] - g[(r1, c2)] * g[(r2, c1)];
                    worst_minor = worst_minor.max(minor.abs() / (scale * scale));
                }
            }
        }
        let fim = fisher_information(&theta, &geom, &cfg).unwrap();
        let e = fim.entries;
        if (0..3).any(|r| (0..3).any(|c| e[r][c] != e[c][r])) {
            problems.push(format!("draw {draw}: FIM asymmetric"));
        }
        if fim.eigenvalues()[0] < -1e-10 * fim.trace() {
            problems.push(format!("draw {draw}: FIM not PSD"));
        }
        let mut sum = srcloc::FisherMatrix::zero();
        for s in &geom.sensors {
            let one = NetworkGeometry::new(vec![*s], geom.radius, 0.0).unwrap();
            sum.add_scaled(&fisher_information(&theta, &one, &cfg).unwrap(), 1.0);
        }
        if sum != fim {
            problems.push(format!("draw {draw}: not additive"));
        }
        if let Ok(res) = crlb_sgle(&theta, &geom, &cfg) {
            invertible += 1;
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let rotated = geom.map_points(|p| rotate(p, phi));
            let loc = rotate(theta.location(), phi);
            let rtheta = SourceParams::new(theta.p0, loc.x, loc.y);
            match crlb_sgle(&rtheta, &rotated, &cfg) {
                Ok(r) => worst_rotation = worst_rotation.max((r.sgle_bound / res.sgle_bound - 1.0).abs()),
                Err(e) => problems.push(format!("draw {draw}: rotated FIM failed: {e}")),
            }
            if let Some(schur) = position_bound_schur(&res.fim) {
                if (schur / res.sgle_bound - 1.0).abs() > 1e-6 {
                    problems.push(format!("draw {draw}: inverse disagrees with Schur complement"));
                }
            }
        }
    }
    let pass = problems.is_empty() && worst_minor < 1e-10 && worst_rotation <= 1e-8 && invertible >= 50;
    outcome(
        pass,
        format!(
            "max minor {worst_minor:.1e}, max rotation change {worst_rotation:.1e} over {invertible} invertible draws{}",
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn fim_oracle() -> Outcome {
    let theta = SourceParams::new(1e4, 5.0, 10.0);
    let geom = NetworkGeometry::new(vec![Point::new(8.0, 14.0), Point::new(0.0, 4.0), Point::new(12.0, 6.0)], 50.0, 0.0).unwrap();
    let cfg = SensorEnsembleConfig::from_snr_db(1e4, 1.0, 2.0, 30.0, 10.0, 1.0, 15.0);
    let analytic = fisher_information(&theta, &geom, &cfg).unwrap().entries[1][1];

    let n = 1_000_000;
    let h = 1e-4;
    let plus = SourceParams::new(theta.p0, theta.x + h, theta.y);
    let minus = SourceParams::new(theta.p0, theta.x - h, theta.y);
    let mut rng = stream(404);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let t = simulate_round(&geom, &theta, &cfg, &mut rng);
        let score = (log_likelihood(&t, &plus, &geom, &cfg) - log_likelihood(&t, &minus, &geom, &cfg)) / (2.0 * h);
        let s2 = score * score;
        sum += s2;
        sum_sq += s2 * s2;
    }
    let mc = sum / n as f64;
    let se = ((sum_sq / n as f64 - mc * mc) / n as f64).sqrt();
    let ratio = analytic / mc;
    outcome(
        (ratio - 1.0).abs() <= 0.05,
        format!(
            "I_xx analytic {analytic:.6e} vs score variance {mc:.6e} (se {se:.1e}); ratio {ratio:.4}, implied calibration factor {:.4}",
            1.0 / ratio
        ),
    )
}

fn threshold_optimality() -> Outcome {
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut fails = Vec::new();
    for g in 0..10u64 {
        let geom = sample_geometry(50, 50.0, 0.0, 10_000, &mut stream(500 + g)).unwrap();
        let eta = [0.0, 10.0, 20.0][g as usize % 3];
        let cfg = reference_sensors(eta);
        let sol = match optimize_thresholds(&SOURCE, &geom, &cfg, ThresholdMode::Common) {
            Ok(s) => s,
            Err(e) => {
                fails.push(format!("geometry {g}: {e}"));
                continue;
            }
        };
        let grid_min = (0..200)
            .map(|i| SOURCE.p0.sqrt() * i as f64 / 199.0)
            .map(|b| crlb_sgle(&SOURCE, &geom, &cfg.with_beta(b)).map(|r| r.sgle_bound).unwrap_or(f64::INFINITY))
            .fold(f64::INFINITY, f64::min);
        let excess = sol.objective / grid_min - 1.0;
        worst = worst.max(excess);
        if excess > 1e-9 {
            fails.push(format!("geometry {g}: {} > grid {grid_min}", sol.objective));
        }
    }
    outcome(
        fails.is_empty(),
        format!("worst (objective / grid minimum - 1) = {worst:.2e} over 10 geometries{}", if fails.is_empty() { String::new() } else { format!("; {}", fails.join("; ")) }),
    )
}

struct SweepPoint {
    rmse: f64,
    rmse_se: f64,
    crlb_rmse: f64,
}

fn sweep(geom: &NetworkGeometry, etas: &[f64], n_mc: usize) -> Vec<SweepPoint> {
    let estimator = MlEstimator::new(srcloc::EstimatorOptions::new(50.0, SOURCE.p0));
    etas.iter()
        .map(|&eta| {
            let base = reference_sensors(eta);
            let beta = optimize_thresholds(&SOURCE, geom, &base, ThresholdMode::Common).unwrap().beta;
            let cfg = base.with_beta(beta);
            let r = empirical_sgle(geom, &SOURCE, &cfg, n_mc, geom.seed.unwrap_or(0), &estimator, &[14.0]).unwrap();
            let rmse = r.empirical_sgle.sqrt();
            SweepPoint {
                rmse,
                rmse_se: r.empirical_std_error / (2.0 * rmse),
                crlb_rmse: r.crlb_sgle.map_or(f64::INFINITY, f64::sqrt),
            }
        })
        .collect()
}

fn snr_trend() -> Outcome {
    let rich = common::fixture("network_rich.json");
    let sparse = common::fixture("network_sparse.json");
    let k_rich = srcloc::count_within(&rich, &SOURCE, 14.0);
    let k_sparse = srcloc::count_within(&sparse, &SOURCE, 14.0);
    let etas = [0.0, 10.0, 20.0];
    let a = sweep(&rich, &etas, 500);
    let b = sweep(&sparse, &etas, 500);

    let non_increasing = |s: &[SweepPoint]| {
        s.windows(2)
            .all(|w| w[1].rmse <= w[0].rmse + 2.0 * (w[0].rmse_se.powi(2) + w[1].rmse_se.powi(2)).sqrt())
    };
    let ratio_shrinks = |s: &[SweepPoint]| s.windows(2).all(|w| w[1].rmse / w[1].crlb_rmse < w[0].rmse / w[0].crlb_rmse);
    let rich_better = a.iter().zip(&b).all(|(r, s)| r.rmse < s.rmse);
    let checks = [
        ("RMSE non-increasing", non_increasing(&a) && non_increasing(&b)),
        ("RMSE/sqrt(CRLB) shrinking", ratio_shrinks(&a) && ratio_shrinks(&b)),
        ("rich network lower RMSE", rich_better),
    ];
    let fmt = |s: &[SweepPoint]| {
        s.iter()
            .zip(etas)
            .map(|(p, eta)| format!("{eta}dB rmse {:.2}+-{:.2} crlb {:.2}", p.rmse, p.rmse_se, p.crlb_rmse))
            .collect::<Vec<_>>()
            .join(", ")
    };
    outcome(
        checks.iter().all(|c| c.1),
        format!(
            "{}; rich (K_T={k_rich}): {}; sparse (K_T={k_sparse}): {}",
            checks.iter().map(|(n, ok)| format!("{n}: {}", if *ok { "yes" } else { "no" })).collect::<Vec<_>>().join(", "),
            fmt(&a),
            fmt(&b)
        ),
    )
}

fn outage_config(r_ex: f64) -> EnsembleConfig {
    EnsembleConfig {
        k: 50,
        radius: 50.0,
        r_ex,
        source: SOURCE,
        sensors: reference_sensors(0.0),
        n_geom: 100,
        n_mc: 200,
        gamma_grid: log_grid(0.1, 100.0, 64),
        r_t: vec![14.0],
        threshold: ThresholdPolicy::Common,
        max_attempts: 10_000,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn exclusion_trend(open: &[GeometryTrialResult], excluded: &[GeometryTrialResult]) -> Outcome {
    let gamma = median(open.iter().chain(excluded).map(|t| t.empirical_sgle.sqrt()).collect());
    let frac = |v: &[GeometryTrialResult]| v.iter().filter(|t| t.empirical_sgle > gamma * gamma).count() as f64 / v.len() as f64;
    let (p0, p5) = (frac(open), frac(excluded));
    let pooled = 0.5 * (p0 + p5);
    let z = (p5 - p0) / (pooled * (1.0 - pooled) * (1.0 / open.len() as f64 + 1.0 / excluded.len() as f64)).sqrt();
    // One-sided test at the 0.05 level.
    outcome(
        z > 1.6449,
        format!("gamma {gamma:.3} (pooled median RMSE): CCDF R_ex=5 {p5:.2} vs R_ex=0 {p0:.2}, z = {z:.2} (needs > 1.645)"),
    )
}

fn conditioning_trend(trials: &[GeometryTrialResult], grid: &[f64]) -> Outcome {
    let gamma = median(trials.iter().map(|t| t.empirical_sgle.sqrt()).collect());
    let mut points = Vec::new();
    for (label, pred) in [("1", KtPredicate::Exact(1)), ("2", KtPredicate::Exact(2)), ("3+", KtPredicate::AtLeast(3))] {
        match conditioned_ccdf(trials, 14.0, pred, &[gamma]) {
            Ok(c) => {
                let p = c.ccdf_empirical[0];
                let se = (p * (1.0 - p) / c.n_geometries as f64).sqrt();
                points.push((label, p, se, c.n_geometries));
            }
            Err(e) => return outcome(false, format!("K_T={label}: {e}")),
        }
    }
    let monotone = points.windows(2).all(|w| w[1].1 <= w[0].1 + 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());

    let refs: Vec<&GeometryTrialResult> = trials.iter().collect();
    let whole = OutageCurve::from_trials(&refs, grid, None);
    let max_k = trials.iter().filter_map(|t| t.k_t_at(14.0)).max().unwrap_or(0);
    let mut exceed = vec![0usize; grid.len()];
    let mut exceed_crlb = vec![0usize; grid.len()];
    let mut mixture = vec![0.0; grid.len()];
    for k in 0..=max_k {
        if let Ok(c) = conditioned_ccdf(trials, 14.0, KtPredicate::Exact(k), grid) {
            let weight = c.n_geometries as f64 / trials.len() as f64;
            for i in 0..grid.len() {
                exceed[i] += c.exceed_empirical[i];
                exceed_crlb[i] += c.exceed_crlb[i];
                mixture[i] += weight * c.ccdf_empirical[i];
            }
        }
    }
    let exact = exceed == whole.exceed_empirical && exceed_crlb == whole.exceed_crlb;
    let mixture_err = mixture
        .iter()
        .zip(&whole.ccdf_empirical)
        .fold(0.0f64, |a, (m, w)| a.max((m - w).abs()));
    outcome(
        monotone && exact && mixture_err < 1e-12,
        format!(
            "gamma {gamma:.3}: {}; monotone within 2 SE: {}; mixture reconstruction exact counts: {exact}, max float error {mixture_err:.1e}",
            points
                .iter()
                .map(|(l, p, se, n)| format!("K_T={l} {p:.3}+-{se:.3} (n={n})"))
                .collect::<Vec<_>>()
                .join(", "),
            if monotone { "yes" } else { "no" }
        ),
    )
}

fn run_cli(config: &Path, out: &Path, workers: usize) -> bool {
    Command::new(env!("CARGO_BIN_EXE_srcloc"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--workers")
        .arg(workers.to_string())
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = std::fs::read_dir(a).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let other = std::fs::read_dir(b).map_err(|e| e.to_string())?.count();
    if other != names.len() {
        return Err("different file sets".into());
    }
    for name in &names {
        let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{} differs", name.to_string_lossy()));
        }
    }
    Ok(names.len())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let rich = common::fixture_path("network_rich.json");
    let configs = [
        ("estimate", r#"{"mode": "estimate", "K": 20, "R": 30, "R_ex": 2, "source": [5, 10], "P0": 10000, "mu_db": 40, "eta_db": 10, "N_MC": 24, "seed": 11}"#.to_string()),
        ("outage", r#"{"mode": "outage", "K": 20, "R": 30, "source": [5, 10], "P0": 10000, "mu_db": 40, "eta_db": 0, "N_geom": 6, "N_MC": 5, "seed": 12}"#.to_string()),
        ("conditioned", r#"{"mode": "conditioned-outage", "K": 20, "R": 30, "source": [5, 10], "P0": 10000, "mu_db": 40, "eta_db": 0, "N_geom": 6, "N_MC": 4, "r_t": [10, 14], "seed": 13}"#.to_string()),
        ("sweep", format!(r#"{{"mode": "sweep-snr", "K": 50, "R": 50, "source": [5, 10], "P0": 10000, "mu_db": 40, "eta_db": [0, 20], "N_MC": 10, "geometry_file": {:?}, "seed": 14}}"#, rich)),
        ("crlb", format!(r#"{{"mode": "crlb", "K": 50, "R": 50, "source": [5, 10], "P0": 10000, "mu_db": 40, "eta_db": 10, "geometry_file": {:?}}}"#, rich)),
        ("geometry", r#"{"mode": "geometry", "K": 50, "R": 50, "R_ex": 5, "source": [5, 10], "P0": 10000, "mu_db": 40, "eta_db": 0, "seed": 15}"#.to_string()),
    ];
    let mut report = Vec::new();
    let mut pass = true;
    for (name, text) in &configs {
        let config = dir.path().join(format!("{name}.json"));
        std::fs::write(&config, text).unwrap();
        let a = dir.path().join(format!("{name}-w1"));
        let b = dir.path().join(format!("{name}-w4"));
        if !(run_cli(&config, &a, 1) && run_cli(&config, &b, 4)) {
            pass = false;
            report.push(format!("{name}: run failed"));
            continue;
        }
        match same_tree(&a, &b) {
            Ok(n) => report.push(format!("{name}: {n} files identical")),
            Err(e) => {
                pass = false;
                report.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(pass, format!("workers 1 vs 4; {}", report.join(", ")))
}

fn main() {
    let mut results = Vec::new();
    let mut total = Duration::ZERO;
    let minutes = |m: u64| Duration::from_secs(60 * m);

    total += criterion(1, "marginal pdf normalization", Duration::from_secs(10), normalization, &mut results);
    total += criterion(2, "energy distributions (KS)", Duration::from_secs(30), distributional, &mut results);
    total += criterion(3, "FIM structure", Duration::from_secs(30), fim_structure, &mut results);
    total += criterion(4, "FIM vs score-variance oracle", minutes(5), fim_oracle, &mut results);
    total += criterion(5, "threshold optimality", minutes(5), threshold_optimality, &mut results);
    total += criterion(6, "RMSE vs channel SNR on stored networks", minutes(10), snr_trend, &mut results);

    let mut trials = None;
    total += criterion(
        7,
        "outage grows with exclusion radius",
        minutes(15),
        || {
            let open_cfg = outage_config(0.0);
            let excl_cfg = outage_config(5.0);
            let open = ensemble_trials(&open_cfg, 7, &open_cfg.estimator());
            let excluded = ensemble_trials(&excl_cfg, 7, &excl_cfg.estimator());
            match (open, excluded) {
                (Ok(a), Ok(b)) => {
                    let out = exclusion_trend(&a, &b);
                    trials = Some(a);
                    out
                }
                (a, b) => outcome(false, format!("ensemble failed: {:?} {:?}", a.err(), b.err())),
            }
        },
        &mut results,
    );
    total += criterion(
        8,
        "outage conditioned on K_T",
        minutes(15),
        || match &trials {
            Some(t) => conditioning_trend(t, &outage_config(0.0).gamma_grid),
            None => outcome(false, "criterion 7 trials unavailable"),
        },
        &mut results,
    );
    total += criterion(9, "determinism across worker counts", minutes(10), determinism, &mut results);

    let within = total <= minutes(45);
    println!(
        "criterion 10: {} | full suite runtime | {:.1} min for criteria 1-9 on {} worker thread(s) (budget 45 min)",
        if within { "PASS" } else { "FAIL" },
        total.as_secs_f64() / 60.0,
        rayon::current_num_threads()
    );
    results.push(within);

    let failed = results.iter().filter(|&&p| !p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

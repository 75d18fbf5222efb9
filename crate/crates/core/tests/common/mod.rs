#![allow(dead_code)]

use std::path::PathBuf;

use srcloc::{NetworkGeometry, SensorEnsembleConfig, SourceParams};

pub const SOURCE: SourceParams = SourceParams::new(1e4, 5.0, 10.0);

/// Reference parameters: P0 = 1e4, d0 = 1, alpha = 2, mu = 40 dB, Eb = 1 dB.
pub fn reference_sensors(eta_db: f64) -> SensorEnsembleConfig {
    SensorEnsembleConfig::from_snr_db(1e4, 1.0, 2.0, 40.0, eta_db, 1.0, 0.0)
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture(name: &str) -> NetworkGeometry {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    NetworkGeometry::from_json(&text).expect("fixture parses")
}

/// Gaussian upper tail, independent of the crate's implementation.
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Two-sample-free Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the one-sample KS statistic (Stephens' correction).
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * k as f64);
    }
    acc * h / 3.0
}

pub fn rotate(p: srcloc::Point, phi: f64) -> srcloc::Point {
    let (s, c) = phi.sin_cos();
    srcloc::Point::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

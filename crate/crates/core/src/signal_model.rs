//! Forward model for one sensing round: power decay, noisy observation,
//! binary quantization, on-off keyed transmission over Rayleigh fading and
//! energy detection at the fusion center.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, NetworkGeometry, SourceParams};
use crate::special::db_to_linear;

/// A per-sensor quantity, either shared by every sensor or listed per sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSensor {
    Homogeneous(f64),
    Individual(Vec<f64>),
}

impl PerSensor {
    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            PerSensor::Homogeneous(v) => *v,
            PerSensor::Individual(v) => v[i],
        }
    }

    pub fn len_matches(&self, k: usize) -> bool {
        match self {
            PerSensor::Homogeneous(_) => true,
            PerSensor::Individual(v) => v.len() == k,
        }
    }

    fn all(&self, pred: impl Fn(f64) -> bool) -> bool {
        match self {
            PerSensor::Homogeneous(v) => pred(*v),
            PerSensor::Individual(v) => v.iter().all(|&x| pred(x)),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            PerSensor::Homogeneous(v) => *v,
            PerSensor::Individual(v) => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            PerSensor::Homogeneous(v) => *v,
            PerSensor::Individual(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

impl From<f64> for PerSensor {
    fn from(v: f64) -> Self {
        PerSensor::Homogeneous(v)
    }
}

impl From<Vec<f64>> for PerSensor {
    fn from(v: Vec<f64>) -> Self {
        PerSensor::Individual(v)
    }
}

/// Propagation constants and per-sensor noise, threshold and channel values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorEnsembleConfig {
    pub d0: f64,
    pub alpha: f64,
    /// Observation-noise variances.
    pub sigma2: PerSensor,
    /// Quantization thresholds (amplitude units).
    pub beta: PerSensor,
    /// Transmit energies for bit 1.
    pub eb: PerSensor,
    /// Channel-noise variances.
    pub tau2: PerSensor,
}

/// Per-sensor values resolved for one index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorChannel {
    pub sigma: f64,
    pub beta: f64,
    pub eb: f64,
    pub tau2: f64,
}

impl SensorEnsembleConfig {
    /// Homogeneous network specified by SNRs in dB: `sigma2 = P0 / mu`,
    /// `Eb = 10^(eb_db/10)`, `tau2 = Eb / eta`.
    pub fn from_snr_db(p0: f64, d0: f64, alpha: f64, mu_db: f64, eta_db: f64, eb_db: f64, beta: f64) -> Self {
        let eb = db_to_linear(eb_db);
        Self {
            d0,
            alpha,
            sigma2: PerSensor::Homogeneous(p0 / db_to_linear(mu_db)),
            beta: PerSensor::Homogeneous(beta),
            eb: PerSensor::Homogeneous(eb),
            tau2: PerSensor::Homogeneous(eb / db_to_linear(eta_db)),
        }
    }

    #[inline]
    pub fn channel(&self, i: usize) -> SensorChannel {
        SensorChannel {
            sigma: self.sigma2.get(i).sqrt(),
            beta: self.beta.get(i),
            eb: self.eb.get(i),
            tau2: self.tau2.get(i),
        }
    }

    pub fn with_beta(&self, beta: impl Into<PerSensor>) -> Self {
        Self {
            beta: beta.into(),
            ..self.clone()
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.d0) || !positive(self.alpha) {
            return Err(Error::InvalidInput("d0 and alpha must be positive".into()));
        }
        for (name, field) in [("sigma2", &self.sigma2), ("eb", &self.eb), ("tau2", &self.tau2)] {
            if !field.len_matches(k) {
                return Err(Error::InvalidInput(format!("{name} has wrong length for K={k}")));
            }
            if !field.all(positive) {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if !self.beta.len_matches(k) || !self.beta.all(|b| !b.is_nan()) {
            return Err(Error::InvalidInput(format!("beta must hold K={k} numbers")));
        }
        Ok(())
    }
}

/// Energies received at the fusion center in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyVector(pub Vec<f64>);

impl EnergyVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Power received at distance `d`; inside the reference distance the power
/// is held at `p0`.
#[inline]
pub fn received_power(p0: f64, d0: f64, alpha: f64, d: f64) -> f64 {
    if d < d0 {
        p0
    } else {
        p0 * (d0 / d).powf(alpha)
    }
}

/// Local observation `sqrt(P) + w` with `w ~ N(0, sigma^2)`.
pub fn sense<R: Rng + ?Sized>(power: f64, sigma: f64, rng: &mut R) -> f64 {
    let w: f64 = rng.sample(StandardNormal);
    power.sqrt() + sigma * w
}

/// Binary quantizer: 1 when `r >= beta`.
#[inline]
pub fn quantize(r: f64, beta: f64) -> u8 {
    u8::from(r >= beta)
}

/// Sends bit `u` with energy `eb` over a Rayleigh channel `h ~ CN(0, 1)` with
/// noise `n ~ CN(0, tau2)` and returns the detected energy `|h sqrt(eb) u + n|^2`.
pub fn transmit_and_detect<R: Rng + ?Sized>(u: u8, eb: f64, tau2: f64, rng: &mut R) -> f64 {
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let h_re: f64 = rng.sample::<f64, _>(StandardNormal) * half;
    let h_im: f64 = rng.sample::<f64, _>(StandardNormal) * half;
    let noise_scale = (0.5 * tau2).sqrt();
    let n_re: f64 = rng.sample::<f64, _>(StandardNormal) * noise_scale;
    let n_im: f64 = rng.sample::<f64, _>(StandardNormal) * noise_scale;
    let gain = if u == 1 { eb.sqrt() } else { 0.0 };
    let z_re = h_re * gain + n_re;
    let z_im = h_im * gain + n_im;
    z_re * z_re + z_im * z_im
}

/// Simulates the full sensing chain for every sensor, in index order.
pub fn simulate_round<R: Rng + ?Sized>(
    geom: &NetworkGeometry,
    source: &SourceParams,
    cfg: &SensorEnsembleConfig,
    rng: &mut R,
) -> EnergyVector {
    let energies = geom
        .sensors
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ch = cfg.channel(i);
            let p = received_power(source.p0, cfg.d0, cfg.alpha, distance(source, s));
            let r = sense(p, ch.sigma, rng);
            let u = quantize(r, ch.beta);
            transmit_and_detect(u, ch.eb, ch.tau2, rng)
        })
        .collect();
    EnergyVector(energies)
}

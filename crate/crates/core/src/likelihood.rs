//! Quantization probabilities, the marginal energy density at the fusion
//! center, the joint log-likelihood and the maximum-likelihood estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NetworkGeometry, Point, SourceParams};
use crate::nelder_mead::{self, NelderMeadOptions};
use crate::signal_model::{received_power, EnergyVector, SensorChannel, SensorEnsembleConfig};
use crate::special::{ln_q, log_add_exp, q_function};

/// `P(u = 1) = Q((beta - sqrt(P)) / sigma)`.
pub fn p_one(power: f64, beta: f64, sigma: f64) -> f64 {
    q_function((beta - power.sqrt()) / sigma)
}

/// `(ln P(u = 0), ln P(u = 1))`, each computed from a single tail evaluation.
#[inline]
fn ln_bit_probs(power: f64, beta: f64, sigma: f64) -> (f64, f64) {
    let z = (power.sqrt() - beta) / sigma;
    if z >= 0.0 {
        let ln_zero = ln_q(z);
        (ln_zero, (-ln_zero.exp()).ln_1p())
    } else {
        let ln_one = ln_q(-z);
        ((-ln_one.exp()).ln_1p(), ln_one)
    }
}

/// Mixture weights `(P(u = 0), P(u = 1))`.
pub fn bit_probs(power: f64, beta: f64, sigma: f64) -> (f64, f64) {
    let root = power.sqrt();
    (q_function((root - beta) / sigma), q_function((beta - root) / sigma))
}

#[inline]
fn ln_pdf_unchecked(t: f64, power: f64, ch: &SensorChannel) -> f64 {
    let (ln_zero, ln_one) = ln_bit_probs(power, ch.beta, ch.sigma);
    let on = ch.eb + ch.tau2;
    log_add_exp(ln_zero - t / ch.tau2 - ch.tau2.ln(), ln_one - t / on - on.ln())
}

/// Density of the received energy: a two-component exponential mixture with
/// means `tau2` (bit 0) and `eb + tau2` (bit 1).
pub fn marginal_energy_pdf(t: f64, power: f64, ch: &SensorChannel) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("energy must be non-negative, got {t}")));
    }
    let (w0, w1) = bit_probs(power, ch.beta, ch.sigma);
    let on = ch.eb + ch.tau2;
    Ok(w0 * (-t / ch.tau2).exp() / ch.tau2 + w1 * (-t / on).exp() / on)
}

/// Closed-form CDF of [`marginal_energy_pdf`].
pub fn marginal_energy_cdf(t: f64, power: f64, ch: &SensorChannel) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let (w0, w1) = bit_probs(power, ch.beta, ch.sigma);
    let on = ch.eb + ch.tau2;
    -(w0 * (-t / ch.tau2).exp_m1() + w1 * (-t / on).exp_m1())
}

/// `ln f(t)` for sensor `i` of `cfg` given the received power.
pub fn ln_marginal_energy_pdf(t: f64, power: f64, ch: &SensorChannel) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("energy must be non-negative, got {t}")));
    }
    Ok(ln_pdf_unchecked(t, power, ch))
}

/// Joint log-likelihood of the energies, summed over sensors in index order.
pub fn log_likelihood(
    t: &EnergyVector,
    theta: &SourceParams,
    geom: &NetworkGeometry,
    cfg: &SensorEnsembleConfig,
) -> f64 {
    debug_assert_eq!(t.len(), geom.k());
    let src = theta.location();
    geom.sensors
        .iter()
        .zip(t.as_slice())
        .enumerate()
        .map(|(i, (s, &ti))| {
            let p = received_power(theta.p0, cfg.d0, cfg.alpha, src.distance(s));
            ln_pdf_unchecked(ti, p, &cfg.channel(i))
        })
        .sum()
}

/// Per-sensor constants hoisted out of the optimizer's inner loop.
struct Term {
    at: Point,
    t: f64,
    beta: f64,
    inv_sigma: f64,
    off_rate: f64,
    off_ln_norm: f64,
    on_rate: f64,
    on_ln_norm: f64,
}

struct Objective {
    terms: Vec<Term>,
    d0: f64,
    half_alpha: f64,
}

impl Objective {
    fn new(t: &EnergyVector, geom: &NetworkGeometry, cfg: &SensorEnsembleConfig) -> Self {
        let terms = geom
            .sensors
            .iter()
            .zip(t.as_slice())
            .enumerate()
            .map(|(i, (s, &ti))| {
                let ch = cfg.channel(i);
                let on = ch.eb + ch.tau2;
                Term {
                    at: *s,
                    t: ti,
                    beta: ch.beta,
                    inv_sigma: 1.0 / ch.sigma,
                    off_rate: 1.0 / ch.tau2,
                    off_ln_norm: -ch.tau2.ln(),
                    on_rate: 1.0 / on,
                    on_ln_norm: -on.ln(),
                }
            })
            .collect();
        Self {
            terms,
            d0: cfg.d0,
            half_alpha: 0.5 * cfg.alpha,
        }
    }

    fn log_likelihood(&self, p0: f64, x: f64, y: f64) -> f64 {
        let root_p0 = p0.sqrt();
        let mut total = 0.0;
        for term in &self.terms {
            let d = (x - term.at.x).hypot(y - term.at.y);
            let root_p = if d < self.d0 {
                root_p0
            } else if self.half_alpha == 1.0 {
                root_p0 * self.d0 / d
            } else {
                root_p0 * (self.d0 / d).powf(self.half_alpha)
            };
            let z = (root_p - term.beta) * term.inv_sigma;
            let (ln_zero, ln_one) = if z >= 0.0 {
                let l = ln_q(z);
                (l, (-l.exp()).ln_1p())
            } else {
                let l = ln_q(-z);
                ((-l.exp()).ln_1p(), l)
            };
            total += log_add_exp(
                ln_zero + term.off_ln_norm - term.t * term.off_rate,
                ln_one + term.on_ln_norm - term.t * term.on_rate,
            );
        }
        total
    }
}

/// Search settings for [`ml_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    /// Radius of the disk (centered at the origin) the location is restricted to.
    pub search_radius: f64,
    /// Nominal source power; seeds and bounds are expressed relative to it.
    pub nominal_p0: f64,
    pub grid_radial: usize,
    pub grid_angular: usize,
    pub p0_factors: Vec<f64>,
    /// `P0` is confined to `[lo, hi] * nominal_p0`.
    pub p0_bounds: (f64, f64),
    /// Extra seeds placed at the sensors reporting the largest energies.
    pub energy_seeds: usize,
    /// Number of best-ranked seeds refined by Nelder-Mead.
    pub refine_starts: usize,
    /// Simplex diameter tolerance as a fraction of `search_radius`.
    pub diameter_tol: f64,
    pub rel_value_tol: f64,
    pub max_iterations: usize,
    /// When false, `P0` is held at `nominal_p0` and only the location is fitted.
    pub estimate_p0: bool,
}

impl EstimatorOptions {
    pub fn new(search_radius: f64, nominal_p0: f64) -> Self {
        Self {
            search_radius,
            nominal_p0,
            grid_radial: 7,
            grid_angular: 7,
            p0_factors: vec![0.1, 1.0, 10.0],
            p0_bounds: (1e-3, 1e3),
            energy_seeds: 3,
            refine_starts: 3,
            diameter_tol: 1e-6,
            rel_value_tol: 1e-9,
            max_iterations: 2000,
            estimate_p0: true,
        }
    }

    /// Polar grid seeds: radii at the midpoints of equal-width rings, evenly
    /// spaced angles, crossed with the `P0` factors.
    pub fn grid_seeds(&self) -> Vec<SourceParams> {
        let mut seeds = Vec::with_capacity(self.grid_radial * self.grid_angular * self.p0_factors.len());
        let factors: &[f64] = if self.estimate_p0 { &self.p0_factors } else { &[1.0] };
        for k in 0..self.grid_radial {
            let r = self.search_radius * (k as f64 + 0.5) / self.grid_radial as f64;
            for j in 0..self.grid_angular {
                let phi = std::f64::consts::TAU * j as f64 / self.grid_angular as f64;
                for &f in factors {
                    seeds.push(SourceParams::new(self.nominal_p0 * f, r * phi.cos(), r * phi.sin()));
                }
            }
        }
        seeds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub theta_hat: SourceParams,
    pub log_likelihood: f64,
    /// False when no refined start met the convergence tolerance.
    pub converged: bool,
    pub starts_used: usize,
}

/// Anything that maps one round of energies to a source estimate.
pub trait LocationEstimator: Sync {
    fn estimate(&self, t: &EnergyVector, geom: &NetworkGeometry, cfg: &SensorEnsembleConfig) -> EstimateResult;
}

/// Multi-start Nelder-Mead maximum-likelihood estimator.
#[derive(Debug, Clone)]
pub struct MlEstimator {
    pub options: EstimatorOptions,
}

impl MlEstimator {
    pub fn new(options: EstimatorOptions) -> Self {
        Self { options }
    }
}

impl LocationEstimator for MlEstimator {
    fn estimate(&self, t: &EnergyVector, geom: &NetworkGeometry, cfg: &SensorEnsembleConfig) -> EstimateResult {
        ml_estimate(t, geom, cfg, &self.options)
    }
}

/// Orders candidates by likelihood (higher first), then by `(x, y)`.
fn better(a: (f64, &SourceParams), b: (f64, &SourceParams)) -> bool {
    if a.0 != b.0 {
        return a.0 > b.0;
    }
    (a.1.x, a.1.y) < (b.1.x, b.1.y)
}

/// Maximum-likelihood estimate of `[P0, xT, yT]`.
///
/// Every grid (and energy) seed is scored; the `refine_starts` best seeds are
/// polished with Nelder-Mead over `(x, y, ln P0)`. Points outside the search
/// disk or the `P0` bounds are infeasible. The result is never worse than the
/// best seed. Ties between equally likely optima go to the smallest `(x, y)`.
pub fn ml_estimate(
    t: &EnergyVector,
    geom: &NetworkGeometry,
    cfg: &SensorEnsembleConfig,
    opts: &EstimatorOptions,
) -> EstimateResult {
    let objective = Objective::new(t, geom, cfg);
    let radius2 = opts.search_radius * opts.search_radius;
    let ln_lo = (opts.nominal_p0 * opts.p0_bounds.0).ln();
    let ln_hi = (opts.nominal_p0 * opts.p0_bounds.1).ln();

    let decode = |v: &[f64]| -> SourceParams {
        let p0 = if opts.estimate_p0 { v[2].exp() } else { opts.nominal_p0 };
        SourceParams::new(p0, v[0], v[1])
    };
    let negative_ll = |v: &[f64]| -> f64 {
        if v[0] * v[0] + v[1] * v[1] > radius2 {
            return f64::INFINITY;
        }
        if opts.estimate_p0 && !(v[2] >= ln_lo && v[2] <= ln_hi) {
            return f64::INFINITY;
        }
        let theta = decode(v);
        -objective.log_likelihood(theta.p0, theta.x, theta.y)
    };

    let mut seeds = opts.grid_seeds();
    if opts.energy_seeds > 0 {
        let mut by_energy: Vec<usize> = (0..t.len()).collect();
        by_energy.sort_by(|&a, &b| t.0[b].partial_cmp(&t.0[a]).unwrap().then(a.cmp(&b)));
        for &i in by_energy.iter().take(opts.energy_seeds) {
            let s = geom.sensors[i];
            if s.x * s.x + s.y * s.y <= radius2 {
                seeds.push(SourceParams::new(opts.nominal_p0, s.x, s.y));
            }
        }
    }
    let mut scored: Vec<(f64, SourceParams)> = seeds
        .into_iter()
        .map(|s| (objective.log_likelihood(s.p0, s.x, s.y), s))
        .collect();
    scored.sort_by(|a, b| {
        if better((a.0, &a.1), (b.0, &b.1)) {
            std::cmp::Ordering::Less
        } else if better((b.0, &b.1), (a.0, &a.1)) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });

    let step = opts.search_radius / (2.0 * opts.grid_radial as f64);
    let nm = NelderMeadOptions {
        initial_step: if opts.estimate_p0 { vec![step, step, 0.5] } else { vec![step, step] },
        diameter_tol: opts.diameter_tol * opts.search_radius,
        rel_value_tol: opts.rel_value_tol,
        max_iterations: opts.max_iterations,
    };

    let mut best: Option<(f64, SourceParams)> = None;
    let mut converged = false;
    let starts = opts.refine_starts.max(1).min(scored.len());
    for (seed_ll, seed) in scored.iter().take(starts) {
        let start: Vec<f64> = if opts.estimate_p0 {
            vec![seed.x, seed.y, seed.p0.ln()]
        } else {
            vec![seed.x, seed.y]
        };
        let m = nelder_mead::minimize(negative_ll, &start, &nm);
        converged |= m.converged;
        let (ll, theta) = if m.value.is_finite() && -m.value >= *seed_ll {
            (-m.value, decode(&m.point))
        } else {
            (*seed_ll, *seed)
        };
        if best.as_ref().is_none_or(|(bl, bt)| better((ll, &theta), (*bl, bt))) {
            best = Some((ll, theta));
        }
    }
    let (log_likelihood, theta_hat) = best.expect("at least one start");
    EstimateResult {
        theta_hat,
        log_likelihood,
        converged,
        starts_used: starts,
    }
}

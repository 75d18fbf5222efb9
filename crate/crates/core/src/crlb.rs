//! Fisher information of the received-energy likelihood, the Cramér-Rao
//! bound on the mean squared location error, and threshold selection that
//! minimizes that bound.
//!
//! Sensor `i` contributes
//!
//! ```text
//! I_i = G_i * P_i / (8 pi sigma_i^2 P0) * exp(-(sqrt(P_i) - beta_i)^2 / sigma_i^2) * J_i
//! ```
//!
//! where `G_i` is the rank-one geometry matrix and `J_i` is the exponential
//! mixture integral `int_0^inf g(t) / f(t) dt`. The constant is the product
//! of the squared Gaussian density `phi(z)^2 = exp(-z^2) / (2 pi)`, the chain
//! rule factor `P_i / (4 P0)` from `d sqrt(P_i)` and `1 / sigma_i^2`.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, NetworkGeometry, Point, SourceParams};
use crate::likelihood::bit_probs;
use crate::quadrature::{integrate_with_breaks, Tolerance};
use crate::signal_model::{received_power, PerSensor, SensorEnsembleConfig};

/// FIMs whose (Jacobi-scaled) eigenvalue spread exceeds this are singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Symmetric 3x3 information matrix indexed by `(P0, xT, yT)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix {
    pub entries: [[f64; 3]; 3],
}

impl FisherMatrix {
    pub fn zero() -> Self {
        Self { entries: [[0.0; 3]; 3] }
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let mut entries = [[0.0; 3]; 3];
        for (r, row) in entries.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[(r, c)];
            }
        }
        Self { entries }
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.entries[r][c])
    }

    pub fn add_scaled(&mut self, other: &FisherMatrix, scale: f64) {
        for r in 0..3 {
            for c in 0..3 {
                self.entries[r][c] += scale * other.entries[r][c];
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..3).map(|i| self.entries[i][i]).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_matrix()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        [ev[0], ev[1], ev[2]]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Ratio of extreme absolute eigenvalues after symmetric Jacobi scaling,
    /// so that the choice of units for `P0` does not affect it.
    pub fn condition_indicator(&self) -> f64 {
        match self.scaled() {
            None => f64::INFINITY,
            Some((_, m)) => {
                let ev = SymmetricEigen::new(m).eigenvalues;
                let max = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let min = ev.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
                if min == 0.0 {
                    f64::INFINITY
                } else {
                    max / min
                }
            }
        }
    }

    fn scaled(&self) -> Option<([f64; 3], Matrix3<f64>)> {
        let mut d = [0.0; 3];
        for (i, di) in d.iter_mut().enumerate() {
            let v = self.entries[i][i];
            if !(v > 0.0 && v.is_finite()) {
                return None;
            }
            *di = 1.0 / v.sqrt();
        }
        Some((d, Matrix3::from_fn(|r, c| self.entries[r][c] * d[r] * d[c])))
    }

    /// `[I^-1]_{xx} + [I^-1]_{yy}` together with the condition indicator.
    pub fn position_bound(&self) -> Result<(f64, f64)> {
        let condition = self.condition_indicator();
        if !(condition <= SINGULAR_CONDITION) {
            return Err(Error::SingularFim { condition });
        }
        let (d, m) = self.scaled().expect("finite condition implies positive diagonal");
        let inv = m
            .cholesky()
            .ok_or(Error::SingularFim { condition })?
            .inverse();
        let bound = inv[(1, 1)] * d[1] * d[1] + inv[(2, 2)] * d[2] * d[2];
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::SingularFim { condition });
        }
        Ok((bound, condition))
    }
}

/// Output of [`crlb_sgle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrlbResult {
    /// Lower bound on the mean squared location error.
    pub sgle_bound: f64,
    pub fim: FisherMatrix,
    pub condition_indicator: f64,
    pub eigenvalues: [f64; 3],
    /// Frobenius norm of every sensor's contribution, in index order.
    pub term_norms: Vec<f64>,
}

/// Rank-one geometry matrix for one sensor.
pub fn g_matrix(theta: &SourceParams, sensor: &Point, sensor_index: usize, alpha: f64) -> Result<Matrix3<f64>> {
    let d = distance(theta, sensor);
    if d == 0.0 {
        return Err(Error::DegenerateGeometry { sensor: sensor_index });
    }
    let d2 = d * d;
    let d4 = d2 * d2;
    let p0 = theta.p0;
    let dx = theta.x - sensor.x;
    let dy = theta.y - sensor.y;
    let pa2 = p0 * alpha * alpha / d4;
    Ok(Matrix3::new(
        1.0 / p0,
        -alpha * dx / d2,
        -alpha * dy / d2,
        -alpha * dx / d2,
        pa2 * dx * dx,
        pa2 * dx * dy,
        -alpha * dy / d2,
        pa2 * dx * dy,
        pa2 * dy * dy,
    ))
}

/// `int_0^inf g(t) / f(t) dt` for one sensor.
///
/// The integral is invariant under a common rescaling of `t`, `eb` and
/// `tau2`, so it is evaluated in units of `eb + tau2`. With
/// `s = t / (eb + tau2)`, `k = tau2 / (eb + tau2)` and
/// `r = e^{-s/k} / (k e^{-s})` the integrand is
/// `e^{-s} (1 - r)^2 / (P(u=0) r + P(u=1))`. Past the crossing `r <= 1` it is
/// bounded by `e^{-s} / P(u=1)`, which sets the truncation point.
pub fn mixture_integral(power: f64, beta: f64, sigma: f64, eb: f64, tau2: f64) -> Result<f64> {
    if !(sigma > 0.0 && tau2 > 0.0 && eb >= 0.0 && power >= 0.0) {
        return Err(Error::Domain(format!(
            "mixture integral needs sigma, tau2 > 0 and eb, P >= 0 (got sigma={sigma}, eb={eb}, tau2={tau2}, P={power})"
        )));
    }
    if eb == 0.0 {
        return Ok(0.0);
    }
    let (w0, w1) = bit_probs(power, beta, sigma);
    let k = tau2 / (eb + tau2);
    let excess = 1.0 / k - 1.0;
    if w1 == 0.0 {
        // Integrand behaves like e^{s (1/k - 2)} at infinity.
        return if k > 0.5 {
            integrate_normalized(w0, w1, k, excess, &[], 0.0)
        } else {
            Err(Error::Domain("mixture integral diverges when P(u=1) = 0 and eb >= tau2".into()))
        };
    }

    let tol = Tolerance::default();
    let mut upper = 50.0 + (-w1.ln()).max(0.0);
    // Crossing where the two weighted components are equal.
    let crossing = if w0 > 0.0 { ((w0 / (w1 * k)).ln() / excess).max(0.0) } else { 0.0 };
    let breaks = [40.0 * k, crossing];
    loop {
        let value = integrate_normalized(w0, w1, k, excess, &breaks, upper)?;
        let tail = (-upper).exp() / w1;
        if tail <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(value);
        }
        upper += 25.0;
    }
}

fn integrate_normalized(w0: f64, w1: f64, k: f64, excess: f64, breaks: &[f64], upper: f64) -> Result<f64> {
    let integrand = |s: f64| {
        let r = (-s * excess).exp() / k;
        let one_minus = 1.0 - r;
        (-s).exp() * one_minus * one_minus / (w0 * r + w1)
    };
    if upper > 0.0 {
        return Ok(integrate_with_breaks(integrand, 0.0, upper, breaks, Tolerance::default())?.value);
    }
    Ok(crate::quadrature::integrate_to_infinity(integrand, 0.0, Tolerance::default())?.value)
}

/// Scalar weight multiplying `G_i` for one sensor (zero when it underflows).
fn sensor_scale(theta: &SourceParams, power: f64, beta: f64, sigma: f64, eb: f64, tau2: f64) -> Result<f64> {
    let z = (power.sqrt() - beta) / sigma;
    let weight = power / (8.0 * std::f64::consts::PI * sigma * sigma * theta.p0) * (-z * z).exp();
    if weight == 0.0 {
        return Ok(0.0);
    }
    Ok(weight * mixture_integral(power, beta, sigma, eb, tau2)?)
}

/// Per-sensor FIM contributions in index order.
pub fn fisher_terms(
    theta: &SourceParams,
    geom: &NetworkGeometry,
    cfg: &SensorEnsembleConfig,
) -> Result<Vec<FisherMatrix>> {
    geom.sensors
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let g = g_matrix(theta, s, i, cfg.alpha)?;
            let ch = cfg.channel(i);
            let p = received_power(theta.p0, cfg.d0, cfg.alpha, distance(theta, s));
            let scale = sensor_scale(theta, p, ch.beta, ch.sigma, ch.eb, ch.tau2)?;
            Ok(FisherMatrix::from_matrix(&(g * scale)))
        })
        .collect()
}

/// Sum of the per-sensor contributions.
pub fn fisher_information(
    theta: &SourceParams,
    geom: &NetworkGeometry,
    cfg: &SensorEnsembleConfig,
) -> Result<FisherMatrix> {
    let mut fim = FisherMatrix::zero();
    for term in fisher_terms(theta, geom, cfg)? {
        fim.add_scaled(&term, 1.0);
    }
    Ok(fim)
}

/// Cramér-Rao bound on the mean squared location error for one geometry.
pub fn crlb_sgle(theta: &SourceParams, geom: &NetworkGeometry, cfg: &SensorEnsembleConfig) -> Result<CrlbResult> {
    let terms = fisher_terms(theta, geom, cfg)?;
    let mut fim = FisherMatrix::zero();
    for t in &terms {
        fim.add_scaled(t, 1.0);
    }
    let (sgle_bound, condition_indicator) = fim.position_bound()?;
    Ok(CrlbResult {
        sgle_bound,
        fim,
        condition_indicator,
        eigenvalues: fim.eigenvalues(),
        term_norms: terms.iter().map(FisherMatrix::frobenius_norm).collect(),
    })
}

/// Trace of the inverse of the position block's Schur complement; used to
/// cross-check [`FisherMatrix::position_bound`].
pub fn position_bound_schur(fim: &FisherMatrix) -> Option<f64> {
    let m = fim.to_matrix();
    let c = m[(0, 0)];
    if c <= 0.0 {
        return None;
    }
    let s = Matrix2::new(
        m[(1, 1)] - m[(1, 0)] * m[(0, 1)] / c,
        m[(1, 2)] - m[(1, 0)] * m[(0, 2)] / c,
        m[(2, 1)] - m[(2, 0)] * m[(0, 1)] / c,
        m[(2, 2)] - m[(2, 0)] * m[(0, 2)] / c,
    );
    let det = s.determinant();
    (det > 0.0).then(|| (s[(0, 0)] + s[(1, 1)]) / det)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// One threshold shared by every sensor.
    Common,
    /// Coordinate descent over individual thresholds, started from the common one.
    PerSensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSolution {
    pub beta: PerSensor,
    /// Bound attained at `beta`.
    pub objective: f64,
    /// Smallest objective seen among all probed points.
    pub best_probed: f64,
    pub evaluations: usize,
}

/// Pre-computed geometry for threshold searches at fixed `theta`.
struct ThresholdProblem<'a> {
    theta: SourceParams,
    cfg: &'a SensorEnsembleConfig,
    g: Vec<Matrix3<f64>>,
    powers: Vec<f64>,
}

impl<'a> ThresholdProblem<'a> {
    fn new(theta: &SourceParams, geom: &NetworkGeometry, cfg: &'a SensorEnsembleConfig) -> Result<Self> {
        let mut g = Vec::with_capacity(geom.k());
        let mut powers = Vec::with_capacity(geom.k());
        for (i, s) in geom.sensors.iter().enumerate() {
            g.push(g_matrix(theta, s, i, cfg.alpha)?);
            powers.push(received_power(theta.p0, cfg.d0, cfg.alpha, distance(theta, s)));
        }
        Ok(Self {
            theta: *theta,
            cfg,
            g,
            powers,
        })
    }

    fn term(&self, i: usize, beta: f64) -> Result<Matrix3<f64>> {
        let ch = self.cfg.channel(i);
        let scale = sensor_scale(&self.theta, self.powers[i], beta, ch.sigma, ch.eb, ch.tau2)?;
        Ok(self.g[i] * scale)
    }

    fn bound_of(fim: &Matrix3<f64>) -> f64 {
        FisherMatrix::from_matrix(fim)
            .position_bound()
            .map(|(b, _)| b)
            .unwrap_or(f64::INFINITY)
    }

    fn common(&self, beta: f64) -> Result<f64> {
        let mut fim = Matrix3::zeros();
        for i in 0..self.g.len() {
            fim += self.term(i, beta)?;
        }
        Ok(Self::bound_of(&fim))
    }

    fn full(&self, betas: &[f64]) -> Result<(Matrix3<f64>, Vec<Matrix3<f64>>)> {
        let terms: Vec<Matrix3<f64>> = betas.iter().enumerate().map(|(i, &b)| self.term(i, b)).collect::<Result<_>>()?;
        let mut fim = Matrix3::zeros();
        for t in &terms {
            fim += t;
        }
        Ok((fim, terms))
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Dense scan over `[lo, hi]` followed by golden-section refinement around
/// the best few local minima. Returns `(argmin, min, evaluations)` over every
/// probed point.
fn scan_and_refine<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    lo: f64,
    hi: f64,
    points: usize,
    refine: usize,
    tol: f64,
) -> Result<(f64, f64, usize)> {
    let step = (hi - lo) / (points - 1) as f64;
    let xs: Vec<f64> = (0..points).map(|k| lo + step * k as f64).collect();
    let mut ys = Vec::with_capacity(points);
    for &x in &xs {
        ys.push(f(x)?);
    }
    let mut evals = points;
    let mut best = (f64::NAN, f64::INFINITY);
    for (&x, &y) in xs.iter().zip(&ys) {
        if y < best.1 {
            best = (x, y);
        }
    }
    let mut minima: Vec<usize> = (0..points)
        .filter(|&k| {
            ys[k].is_finite()
                && (k == 0 || ys[k] <= ys[k - 1])
                && (k + 1 == points || ys[k] <= ys[k + 1])
        })
        .collect();
    minima.sort_by(|&a, &b| ys[a].partial_cmp(&ys[b]).unwrap().then(a.cmp(&b)));
    for &k in minima.iter().take(refine) {
        let (mut a, mut b) = (xs[k.saturating_sub(1)], xs[(k + 1).min(points - 1)]);
        let mut c = b - GOLDEN * (b - a);
        let mut d = a + GOLDEN * (b - a);
        let mut fc = f(c)?;
        let mut fd = f(d)?;
        evals += 2;
        while (b - a).abs() > tol {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - GOLDEN * (b - a);
                fc = f(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + GOLDEN * (b - a);
                fd = f(d)?;
            }
            evals += 1;
            for (x, y) in [(c, fc), (d, fd)] {
                if y < best.1 {
                    best = (x, y);
                }
            }
        }
    }
    Ok((best.0, best.1, evals))
}

/// Search bracket and scan density for thresholds.
fn bracket(theta: &SourceParams, cfg: &SensorEnsembleConfig) -> (f64, f64, usize) {
    let sigma_max = cfg.sigma2.max().sqrt();
    let sigma_min = cfg.sigma2.min().sqrt();
    let lo = -3.0 * sigma_max;
    let hi = theta.p0.sqrt() + 3.0 * sigma_max;
    // At least four samples per noise standard deviation: each sensor's
    // information is concentrated within a few sigma of its amplitude.
    let dense = ((hi - lo) / (0.25 * sigma_min)).ceil() as usize + 1;
    (lo, hi, dense.clamp(64, 4096))
}

/// Thresholds minimizing the position bound at the given (true) parameters.
pub fn optimize_thresholds(
    theta: &SourceParams,
    geom: &NetworkGeometry,
    cfg: &SensorEnsembleConfig,
    mode: ThresholdMode,
) -> Result<ThresholdSolution> {
    let problem = ThresholdProblem::new(theta, geom, cfg)?;
    let (lo, hi, points) = bracket(theta, cfg);
    let tol = 1e-4 * theta.p0.sqrt();
    let (beta, value, mut evaluations) = scan_and_refine(|b| problem.common(b), lo, hi, points, 3, tol)?;
    if !value.is_finite() {
        return Err(Error::SingularFim {
            condition: f64::INFINITY,
        });
    }
    if mode == ThresholdMode::Common {
        return Ok(ThresholdSolution {
            beta: PerSensor::Homogeneous(beta),
            objective: value,
            best_probed: value,
            evaluations,
        });
    }

    let k = geom.k();
    let mut betas = vec![beta; k];
    let mut current = value;
    let mut best_probed = value;
    for _sweep in 0..3 {
        let start = current;
        let (mut fim, mut terms) = problem.full(&betas)?;
        for i in 0..k {
            let rest = fim - terms[i];
            let ch = cfg.channel(i);
            let span = 3.0 * ch.sigma;
            let local_points = (((hi - lo) / (0.25 * ch.sigma)).ceil() as usize + 1).clamp(64, 4096);
            let (b_i, v_i, e) = scan_and_refine(
                |b| Ok(ThresholdProblem::bound_of(&(rest + problem.term(i, b)?))),
                lo.min(problem.powers[i].sqrt() - span),
                hi,
                local_points,
                2,
                tol,
            )?;
            evaluations += e;
            best_probed = best_probed.min(v_i);
            if v_i < current {
                betas[i] = b_i;
                terms[i] = problem.term(i, b_i)?;
                fim = rest + terms[i];
                current = v_i;
            }
        }
        let (fim_exact, _) = problem.full(&betas)?;
        current = ThresholdProblem::bound_of(&fim_exact);
        if start - current <= 1e-9 * start.abs() {
            break;
        }
    }
    Ok(ThresholdSolution {
        beta: PerSensor::Individual(betas),
        objective: current,
        best_probed: best_probed.min(current),
        evaluations,
    })
}

//! Derivative-free Nelder-Mead simplex minimizer.
//!
//! Non-finite objective values are treated as infeasible (worse than any
//! finite value), which is how box and disk constraints are expressed.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Per-coordinate offsets used to build the initial simplex.
    pub initial_step: Vec<f64>,
    /// Converged once every vertex lies within this distance of the best.
    pub diameter_tol: f64,
    /// ... and the objective spread is below this fraction of `|f_best|`.
    pub rel_value_tol: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn key(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn along(from: &[f64], to: &[f64], coef: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(c, w)| c + coef * (c - w)).collect()
}

/// Minimizes `objective` starting from `start`. The start itself is a simplex
/// vertex, so the returned value is never worse than `objective(start)`.
pub fn minimize<F: Fn(&[f64]) -> f64>(objective: F, start: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = start.len();
    assert_eq!(opts.initial_step.len(), n, "one initial step per coordinate");

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for (i, step) in opts.initial_step.iter().enumerate() {
        let mut v = start.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| key(objective(v))).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();
    while iterations < opts.max_iterations {
        // Stable sort keeps the earlier vertex first on ties.
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];

        let diameter = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread = values[worst] - values[best];
        if diameter < opts.diameter_tol
            && spread.is_finite()
            && spread <= opts.rel_value_tol * values[best].abs().max(f64::MIN_POSITIVE)
        {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for &idx in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += x / n as f64;
            }
        }

        let reflected = along(&centroid, &simplex[worst], REFLECT);
        let f_reflected = key(objective(&reflected));
        if f_reflected < values[best] {
            let expanded = along(&centroid, &simplex[worst], EXPAND);
            let f_expanded = key(objective(&expanded));
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[second] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
            continue;
        }

        let (contracted, f_contracted) = if f_reflected < values[worst] {
            let c: Vec<f64> = centroid
                .iter()
                .zip(&reflected)
                .map(|(m, r)| m + CONTRACT * (r - m))
                .collect();
            let fc = key(objective(&c));
            (c, fc)
        } else {
            let c: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(m, w)| m + CONTRACT * (w - m))
                .collect();
            let fc = key(objective(&c));
            (c, fc)
        };
        if f_contracted < values[worst].min(f_reflected) {
            simplex[worst] = contracted;
            values[worst] = f_contracted;
            continue;
        }

        let anchor = simplex[best].clone();
        for idx in 0..=n {
            if idx == best {
                continue;
            }
            let shrunk: Vec<f64> = anchor
                .iter()
                .zip(&simplex[idx])
                .map(|(b, x)| b + SHRINK * (x - b))
                .collect();
            values[idx] = key(objective(&shrunk));
            simplex[idx] = shrunk;
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap())
        .unwrap();
    Minimum {
        point: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

//! Projected gradient descent on the simplex with Barzilai-Borwein steps and
//! Armijo backtracking, finished by Newton steps on the face the iterate has
//! settled on. Used as an independent check on [`super::solve_kkt`].

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::SolveError;
use crate::model::{JammerAllocation, JammerBudget, RhoObjective, SystemConfig};
use crate::scenario::uniform_allocation;

use super::{
    certify, result_from_coords, solve_asymptotic, Method, SolveResult, ACTIVE_TOL, DEFAULT_TOL,
};

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
/// Residual below which Newton refinement is attempted.
const NEWTON_START: f64 = 1e-6;
const NEWTON_STEPS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct DescentOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Seed of the random start.
    pub seed: u64,
    /// Replaces the default starts (uniform, all-training, all-data,
    /// asymptotic, random) when set.
    pub starts: Option<Vec<JammerAllocation>>,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iterations: 20_000,
            seed: 0x5eed,
            starts: None,
        }
    }
}

/// Euclidean projection onto `{x >= 0, sum x = 1}`.
pub fn project_onto_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn default_starts(cfg: &SystemConfig, seed: u64) -> Vec<Vec<f64>> {
    let k = cfg.num_users();
    let mut starts = vec![uniform_allocation(cfg).coords()];
    let mut all_training = vec![1.0 / k as f64; k];
    all_training.push(0.0);
    starts.push(all_training);
    let mut all_data = vec![0.0; k];
    all_data.push(1.0);
    starts.push(all_data);
    if let Ok(a) = solve_asymptotic(cfg) {
        starts.push(a.coords());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..=k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    starts.push(draws.into_iter().map(|x| x / total).collect());
    starts
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direction `proj(x - step g) - x` and its slope `g . d`.
///
/// Both are formed in reduced form on the support of the projected point,
/// from `g_i - mean(g)` rather than from differences of nearly equal
/// coordinates; otherwise rounding stalls the descent around a relative
/// stationarity gap of `1e-8`.
fn projected_direction(x: &[f64], g: &[f64], step: f64) -> (Vec<f64>, f64) {
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    let trial: Vec<f64> = x
        .iter()
        .zip(g)
        .map(|(xi, gi)| xi - step * (gi - mean))
        .collect();
    let support: Vec<bool> = project_onto_simplex(&trial)
        .iter()
        .map(|&p| p > 0.0)
        .collect();
    let size = support.iter().filter(|&&s| s).count() as f64;
    let support_mean = g
        .iter()
        .zip(&support)
        .filter(|(_, &s)| s)
        .map(|(gi, _)| gi)
        .sum::<f64>()
        / size;
    let dropped: f64 = x
        .iter()
        .zip(&support)
        .filter(|(_, &s)| !s)
        .map(|(xi, _)| xi)
        .sum();
    let drift = x.iter().sum::<f64>() - 1.0;
    let shift = (dropped - drift) / size;
    let mut slope = 0.0;
    let d = x
        .iter()
        .zip(g)
        .zip(&support)
        .map(|((&xi, &gi), &kept)| {
            let di = if kept {
                -step * (gi - support_mean) + shift
            } else {
                -xi
            };
            slope += (gi - support_mean) * di;
            di
        })
        .collect();
    (d, slope)
}

/// Newton iterations restricted to the face `{x_i > ACTIVE_TOL}`, with the
/// Hessian taken from central differences of the analytic gradient. Returns
/// the point with the smallest KKT residual seen.
fn newton_refine(obj: &RhoObjective, start: &[f64], tol: f64) -> (Vec<f64>, f64) {
    let mut x = start.to_vec();
    let mut residual = certify(obj, &x, None).residual;
    for _ in 0..NEWTON_STEPS {
        if residual < tol {
            break;
        }
        let face: Vec<usize> = (0..x.len()).filter(|&i| x[i] > ACTIVE_TOL).collect();
        let m = face.len();
        if m < 2 {
            break;
        }
        let g = obj.gradient(&x);
        let mut system = DMatrix::zeros(m + 1, m + 1);
        for (col, &j) in face.iter().enumerate() {
            let h = 1e-6 * x[j];
            let (mut up, mut down) = (x.clone(), x.clone());
            up[j] += h;
            down[j] -= h;
            let (gu, gd) = (obj.gradient(&up), obj.gradient(&down));
            for (row, &i) in face.iter().enumerate() {
                system[(row, col)] = (gu[i] - gd[i]) / (2.0 * h);
            }
            system[(m, col)] = 1.0;
            system[(col, m)] = 1.0;
        }
        let system = 0.5 * (&system + system.transpose());
        let mut rhs = DVector::zeros(m + 1);
        for (row, &i) in face.iter().enumerate() {
            rhs[row] = -g[i];
        }
        rhs[m] = 1.0 - x.iter().sum::<f64>();
        let Some(delta) = system.lu().solve(&rhs) else {
            break;
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..MAX_BACKTRACKS {
            let mut y = x.clone();
            for (row, &i) in face.iter().enumerate() {
                y[i] += t * delta[row];
            }
            if y.iter().all(|&v| v >= 0.0) {
                let r = certify(obj, &y, None).residual;
                if r < residual {
                    x = y;
                    residual = r;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, residual)
}

/// Runs one descent; returns the final point, iteration count and whether the
/// KKT residual reached `tol`.
fn descend(obj: &RhoObjective, start: &[f64], opts: &DescentOptions) -> (Vec<f64>, usize, bool) {
    let mut x = project_onto_simplex(start);
    let mut fx = obj.value(&x);
    let mut g = obj.gradient(&x);
    let mut step = 1.0 / g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);

    let mut newton_at = 0;
    for iter in 0..opts.max_iterations {
        let residual = certify(obj, &x, None).residual;
        if residual < opts.tol {
            return (x, iter, true);
        }
        // Gradient steps crawl on badly scaled faces; once close, try to
        // finish with Newton, at most every hundred iterations.
        if residual < NEWTON_START && iter >= newton_at {
            newton_at = iter + 100;
            let (y, r) = newton_refine(obj, &x, opts.tol);
            if r < opts.tol {
                return (y, iter, true);
            }
        }
        let (d, slope) = projected_direction(&x, &g, step);
        if slope >= 0.0 {
            return (x, iter, false);
        }
        // Renormalized so that rounding drift in the sum, which lowers `rho`
        // for free, cannot masquerade as progress.
        let step_to = |t: f64| -> Vec<f64> {
            let y: Vec<f64> = x
                .iter()
                .zip(&d)
                .map(|(xi, di)| (xi + t * di).max(0.0))
                .collect();
            let total: f64 = y.iter().sum();
            y.into_iter().map(|v| v / total).collect()
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = step_to(t);
            let f_candidate = obj.value(&candidate);
            if f_candidate <= fx + ARMIJO_C * t * slope {
                accepted = Some((candidate, f_candidate));
                break;
            }
            t *= 0.5;
        }
        let (next, f_next) = match accepted {
            Some(found) => found,
            // Near the optimum the decrease falls below the resolution of
            // `rho` long before stationarity is reached; fall back to
            // accepting steps that shrink the KKT residual.
            None => {
                let candidate = step_to(1.0);
                let residual = certify(obj, &x, None).residual;
                if certify(obj, &candidate, None).residual >= residual {
                    return (x, iter, false);
                }
                let f_candidate = obj.value(&candidate);
                (candidate, f_candidate)
            }
        };
        let g_next = obj.gradient(&next);
        let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 {
            dot(&s, &s) / sy
        } else {
            step * 2.0
        };
        // Keep trial points at a scale the projection resolves exactly.
        let spread = g_next.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
            - g_next.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        step = step.clamp(1e-30, 1e6 / spread.max(1e-300));
        x = next;
        fx = f_next;
        g = g_next;
    }
    let converged = certify(obj, &x, None).residual < opts.tol;
    (x, opts.max_iterations, converged)
}

/// Multi-start projected gradient descent; returns the best converged run.
pub fn solve_projected_descent(
    cfg: &SystemConfig,
    budget: JammerBudget,
    opts: &DescentOptions,
) -> Result<SolveResult, SolveError> {
    if budget.avg_power() == 0.0 {
        return Err(SolveError::ZeroBudget);
    }
    let obj = RhoObjective::new(cfg, budget);
    let starts: Vec<Vec<f64>> = match &opts.starts {
        Some(list) => list.iter().map(JammerAllocation::coords).collect(),
        None => default_starts(cfg, opts.seed),
    };

    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    let mut worst_residual = 0.0f64;
    let mut total_iterations = 0;
    for start in &starts {
        let (x, iterations, converged) = descend(&obj, start, opts);
        total_iterations += iterations;
        if !converged {
            worst_residual = worst_residual.max(certify(&obj, &x, None).residual);
            continue;
        }
        let fx = obj.value(&x);
        if best.as_ref().is_none_or(|(fb, _, _)| fx < *fb) {
            best = Some((fx, x, iterations));
        }
    }
    match best {
        Some((_, x, iterations)) => {
            result_from_coords(&obj, &x, None, Method::ProjectedDescent, iterations)
        }
        None => Err(SolveError::NoConvergence {
            iterations: total_iterations,
            residual: worst_residual,
        }),
    }
}

//! Brute-force minimization of `rho`, for tests and diagnostics only.
//!
//! Up to three users the simplex is enumerated on a regular grid; above that a
//! Dirichlet random search is used. Either way the best point is then
//! polished by exact line searches along pairwise transfer directions
//! `e_i - e_j`, which keep the iterate on the simplex.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::SolveError;
use crate::model::{JammerBudget, RhoObjective, SystemConfig};

use super::{result_from_coords, Method, SolveResult};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub grid_step: f64,
    pub max_grid_points: u128,
    /// Largest user count enumerated on the grid.
    pub max_grid_users: usize,
    pub random_samples: usize,
    pub seed: u64,
    pub polish: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            grid_step: 1e-3,
            max_grid_points: 300_000_000,
            max_grid_users: 3,
            random_samples: 200_000,
            seed: 0x0_5ac1e,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub result: SolveResult,
    /// Largest minus smallest objective value seen. Zero means the objective
    /// is flat and every point is optimal.
    pub objective_spread: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, Copy)]
struct Scan {
    best: f64,
    best_index: u64,
    min: f64,
    max: f64,
}

impl Scan {
    fn empty() -> Self {
        Self {
            best: f64::INFINITY,
            best_index: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, value: f64, index: u64) {
        if value < self.best {
            self.best = value;
            self.best_index = index;
        }
        self.min = self.min.min(value);
        self.max = self.max.max(value);
    }

    fn merge(self, other: Scan) -> Scan {
        let (best, best_index) = if other.best < self.best
            || (other.best == self.best && other.best_index < self.best_index)
        {
            (other.best, other.best_index)
        } else {
            (self.best, self.best_index)
        };
        Scan {
            best,
            best_index,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Grid points are encoded as mixed-radix integers over `(n_0, ..., n_{K-1})`
/// with radix `steps + 1`; the data coordinate takes the remainder.
fn decode(index: u64, users: usize, steps: usize) -> Vec<usize> {
    let radix = steps as u64 + 1;
    let mut rest = index;
    (0..users)
        .map(|_| {
            let n = (rest % radix) as usize;
            rest /= radix;
            n
        })
        .collect()
}

struct GridTables {
    alpha: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    steps: usize,
}

impl GridTables {
    #[allow(clippy::too_many_arguments)]
    fn scan_from(
        &self,
        obj: &RhoObjective,
        user: usize,
        remaining: usize,
        alpha_acc: f64,
        index: u64,
        weight: u64,
        scan: &mut Scan,
    ) {
        if user == self.alpha.len() {
            scan.push(obj.combine(self.gamma[remaining], alpha_acc), index);
            return;
        }
        let radix = self.steps as u64 + 1;
        for n in 0..=remaining {
            self.scan_from(
                obj,
                user + 1,
                remaining - n,
                alpha_acc + self.alpha[user][n],
                index + n as u64 * weight,
                weight * radix,
                scan,
            );
        }
    }
}

fn grid_scan(obj: &RhoObjective, steps: usize) -> (Vec<f64>, Scan, u64) {
    let users = obj.num_users();
    let h = 1.0 / steps as f64;
    let tables = GridTables {
        alpha: (0..users)
            .map(|k| (0..=steps).map(|n| obj.alpha(k, n as f64 * h)).collect())
            .collect(),
        gamma: (0..=steps).map(|n| obj.gamma(n as f64 * h)).collect(),
        steps,
    };
    let radix = steps as u64 + 1;
    let scan = (0..=steps)
        .into_par_iter()
        .map(|n0| {
            let mut scan = Scan::empty();
            tables.scan_from(
                obj,
                1,
                steps - n0,
                tables.alpha[0][n0],
                n0 as u64,
                radix,
                &mut scan,
            );
            scan
        })
        .reduce(Scan::empty, Scan::merge);
    let counts = decode(scan.best_index, users, steps);
    let used: usize = counts.iter().sum();
    let mut coords: Vec<f64> = counts.iter().map(|&n| n as f64 * h).collect();
    coords.push((steps - used) as f64 * h);
    let evaluations = binomial((steps + users) as u128, users as u128) as u64;
    (coords, scan, evaluations)
}

fn random_scan(obj: &RhoObjective, samples: usize, seed: u64) -> (Vec<f64>, Scan) {
    let dim = obj.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scan = Scan::empty();
    let mut best = vec![1.0 / dim as f64; dim];
    let mut point = vec![0.0; dim];
    for i in 0..samples {
        for p in point.iter_mut() {
            *p = rng.sample(Exp1);
        }
        let total: f64 = point.iter().sum();
        point.iter_mut().for_each(|p| *p /= total);
        let value = obj.value(&point);
        if value < scan.best {
            best.copy_from_slice(&point);
        }
        scan.push(value, i as u64);
    }
    (best, scan)
}

/// Minimizes `rho` along `x + theta (e_i - e_j)`, `theta in [-x_i, x_j]`.
fn line_search(obj: &RhoObjective, x: &[f64], i: usize, j: usize) -> (f64, f64) {
    let eval = |theta: f64| {
        let mut y = x.to_vec();
        y[i] = (x[i] + theta).max(0.0);
        y[j] = (x[j] - theta).max(0.0);
        obj.value(&y)
    };
    let (mut a, mut b) = (-x[i], x[j]);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = eval(d);
        }
    }
    [
        (-x[i], eval(-x[i])),
        (x[j], eval(x[j])),
        (c, fc),
        (d, fd),
        (0.0, eval(0.0)),
    ]
    .into_iter()
    .fold((0.0, f64::INFINITY), |best, cand| {
        if cand.1 < best.1 {
            cand
        } else {
            best
        }
    })
}

fn polish(obj: &RhoObjective, start: Vec<f64>) -> Vec<f64> {
    let dim = start.len();
    let mut x = start;
    let mut fx = obj.value(&x);
    for _ in 0..500 {
        let before = fx;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (theta, value) = line_search(obj, &x, i, j);
                if value < fx {
                    x[i] = (x[i] + theta).max(0.0);
                    x[j] = (x[j] - theta).max(0.0);
                    fx = obj.value(&x);
                }
            }
        }
        if before - fx <= 1e-15 * before.abs() {
            break;
        }
    }
    x
}

/// Exhaustive (or random) search over the simplex followed by a local polish.
pub fn solve_oracle(
    cfg: &SystemConfig,
    budget: JammerBudget,
    opts: &OracleOptions,
) -> Result<OracleReport, SolveError> {
    let obj = RhoObjective::new(cfg, budget);
    let users = cfg.num_users();
    let (start, scan, evaluations) = if users <= opts.max_grid_users {
        let steps = (1.0 / opts.grid_step).round().max(1.0) as usize;
        let points = binomial((steps + users) as u128, users as u128);
        if points > opts.max_grid_points {
            return Err(SolveError::GridTooLarge {
                points,
                cap: opts.max_grid_points,
            });
        }
        grid_scan(&obj, steps)
    } else {
        let (best, scan) = random_scan(&obj, opts.random_samples, opts.seed);
        (best, scan, opts.random_samples as u64)
    };
    let coords = if opts.polish {
        polish(&obj, start)
    } else {
        start
    };
    let result = result_from_coords(&obj, &coords, None, Method::Oracle, 0)?;
    Ok(OracleReport {
        result,
        objective_spread: scan.max - scan.min,
        evaluations,
    })
}

//! Active-set solution of the KKT system.
//!
//! Writing `s_k = sqrt(w_k)` and introducing the scalar `t > 0`, the
//! stationarity conditions for the training coordinates become
//!
//! ```text
//! zeta_k(t) = (s_k t - c_k)^+ / E
//! ```
//!
//! and, after eliminating `gamma`, the data coordinate becomes
//!
//! ```text
//! zeta_d(t) = (t^2 sum_k alpha_k(t) - T_d (1 + D))^+ / E,
//! alpha_k(t) = min(w_k / c_k, s_k / t).
//! ```
//!
//! `t` absorbs the equality multiplier `nu` together with the common factors
//! `gamma (1 + gamma D) / (1 + gamma sum beta)^2`, so there is no inner fixed
//! point left to iterate. Every coordinate is nondecreasing in `t`, which makes
//! `sum zeta(t) = 1` a monotone scalar equation: bisection locates the active
//! set and a quadratic in `t` then gives the root to machine precision.

use crate::error::SolveError;
use crate::model::{JammerBudget, RhoObjective, SystemConfig};

use super::{result_from_coords, Method, SolveResult, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for KktOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iterations: 500,
        }
    }
}

/// `zeta(t)` in the shifted parameter `u = t - t0`, where `t0` is the first
/// activation point. Every excess is formed as `slope * (u - gap)` with the
/// gaps precomputed, so coordinates that are tiny next to the offsets `c_k`
/// (a weak jammer) do not cancel catastrophically.
struct Parametric<'a> {
    obj: &'a RhoObjective,
    roots: Vec<f64>,
    /// `T_d (1 + D)`.
    data_offset: f64,
    /// `sum_k w_k / c_k`.
    idle_alpha: f64,
    start: f64,
    /// `c_k / s_k - t0`, infinite for users with `w_k = 0`.
    user_gaps: Vec<f64>,
    /// Activation point of the data coordinate when no user is active.
    data_root: f64,
    data_gap: f64,
}

impl<'a> Parametric<'a> {
    fn new(obj: &'a RhoObjective) -> Self {
        let roots: Vec<f64> = obj.weights().iter().map(|w| w.sqrt()).collect();
        let data_offset = obj.data_len() * (1.0 + obj.total_data_power());
        let idle_alpha: f64 = obj
            .weights()
            .iter()
            .zip(obj.offsets())
            .map(|(w, c)| w / c)
            .sum();
        let user_roots: Vec<f64> = roots
            .iter()
            .zip(obj.offsets())
            .map(|(&s, &c)| if s > 0.0 { c / s } else { f64::INFINITY })
            .collect();
        let data_root = (data_offset / idle_alpha).sqrt();
        let start = user_roots.iter().cloned().fold(data_root, f64::min);
        Self {
            obj,
            roots,
            data_offset,
            idle_alpha,
            start,
            user_gaps: user_roots.iter().map(|r| r - start).collect(),
            data_root,
            data_gap: data_root - start,
        }
    }

    /// Unnormalized coordinates `E * zeta(t0 + u)`.
    fn scaled_coords(&self, u: f64) -> Vec<f64> {
        let t = self.start + u;
        let mut data = self.idle_alpha * (u - self.data_gap) * (t + self.data_root);
        let mut coords: Vec<f64> = self
            .roots
            .iter()
            .zip(self.obj.offsets())
            .zip(&self.user_gaps)
            .map(|((&s, &c), &gap)| {
                if u > gap {
                    let excess = s * (u - gap);
                    // Moving user k from w_k / c_k to s_k / t in sum alpha.
                    data -= s * t * excess / c;
                    excess
                } else {
                    0.0
                }
            })
            .collect();
        coords.push(data.max(0.0));
        coords
    }

    fn total(&self, u: f64) -> f64 {
        self.scaled_coords(u).iter().sum()
    }

    /// Solves `sum E zeta = E` exactly, assuming the active pattern seen at
    /// `u_hint` is the optimal one.
    fn exact_root(&self, u_hint: f64) -> f64 {
        let energy = self.obj.energy();
        let mut active_roots = 0.0;
        let mut active_offsets = 0.0;
        let mut weighted_gaps = 0.0;
        let mut idle_alpha = 0.0;
        for (((&s, &c), &w), &gap) in self
            .roots
            .iter()
            .zip(self.obj.offsets())
            .zip(self.obj.weights())
            .zip(&self.user_gaps)
        {
            if u_hint > gap {
                active_roots += s;
                active_offsets += c;
                weighted_gaps += s * gap;
            } else {
                idle_alpha += w / c;
            }
        }
        let data_active = *self.scaled_coords(u_hint).last().expect("data coordinate") > 0.0;
        if !data_active {
            return (energy + weighted_gaps) / active_roots;
        }
        // a t^2 + b t - r = 0 with a, b, r >= 0. The data phase only switches
        // on once E is comparable to the offsets, so no cancellation here.
        let (a, b, r) = (
            idle_alpha,
            2.0 * active_roots,
            energy + active_offsets + self.data_offset,
        );
        2.0 * r / (b + (b * b + 4.0 * a * r).sqrt()) - self.start
    }
}

/// Solves the KKT system by a monotone scalar search; see the module docs.
pub fn solve_kkt(
    cfg: &SystemConfig,
    budget: JammerBudget,
    opts: &KktOptions,
) -> Result<SolveResult, SolveError> {
    if budget.avg_power() == 0.0 {
        return Err(SolveError::ZeroBudget);
    }
    let obj = RhoObjective::new(cfg, budget);
    if obj.weights().iter().all(|&w| w == 0.0) {
        return Err(SolveError::FlatObjective);
    }
    let energy = obj.energy();
    let param = Parametric::new(&obj);

    let mut lo = 0.0;
    let mut hi = param.start.max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    while param.total(hi) < energy {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if iterations >= opts.max_iterations || !hi.is_finite() {
            return Err(SolveError::NoConvergence {
                iterations,
                residual: f64::NAN,
            });
        }
    }
    while iterations < opts.max_iterations {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if param.total(mid) < energy {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let u_bisect = 0.5 * (lo + hi);

    // The exact root is only valid if it reproduces the active pattern it
    // was derived from.
    let u_exact = param.exact_root(u_bisect);
    let u = if (param.total(u_exact) - energy).abs() <= 1e-12 * energy {
        u_exact
    } else {
        u_bisect
    };

    let coords: Vec<f64> = param.scaled_coords(u).iter().map(|x| x / energy).collect();
    let result = result_from_coords(&obj, &coords, None, Method::KktActiveSet, iterations)?;
    if result.kkt_residual < opts.tol {
        Ok(result)
    } else {
        Err(SolveError::NoConvergence {
            iterations,
            residual: result.kkt_residual,
        })
    }
}

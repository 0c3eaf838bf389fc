//! Minimizing `rho` over the jamming-energy simplex.
//!
//! [`solve_kkt`] is the primary solver. [`solve_closed_form`] covers the case
//! where every coordinate is strictly positive, [`solve_asymptotic`] gives the
//! infinite-budget limit, and [`solve_projected_descent`] and [`solve_oracle`]
//! are independent cross-checks.

mod closed_form;
mod corollary;
mod descent;
mod kkt;
mod oracle;

pub use closed_form::{solve_asymptotic, solve_closed_form, ClosedFormOutcome};
pub use corollary::{check_corollary_orderings, Corollary, OrderingVerdict};
pub use descent::{project_onto_simplex, solve_projected_descent, DescentOptions};
pub use kkt::{solve_kkt, KktOptions};
pub use oracle::{solve_oracle, OracleOptions, OracleReport};

use std::fmt;

use crate::error::SolveError;
use crate::model::{JammerAllocation, JammerBudget, RhoObjective, SystemConfig};

/// Coordinates at or below this value count as inactive.
pub const ACTIVE_TOL: f64 = 1e-9;

/// Default KKT residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    KktActiveSet,
    ClosedForm,
    Asymptotic,
    Oracle,
    ProjectedDescent,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::KktActiveSet => "kkt_active_set",
            Method::ClosedForm => "closed_form",
            Method::Asymptotic => "asymptotic",
            Method::Oracle => "oracle",
            Method::ProjectedDescent => "projected_descent",
        })
    }
}

/// Optimal allocation together with its optimality certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub alloc: JammerAllocation,
    pub rho_star: f64,
    /// Multiplier of the simplex equality constraint.
    pub nu_star: f64,
    /// Multipliers of the nonnegativity constraints, `[lambda_k..., lambda_d]`.
    pub lambdas: Vec<f64>,
    /// `true` for every coordinate pinned at zero, same layout as `lambdas`.
    pub active_set: Vec<bool>,
    pub method: Method,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl SolveResult {
    /// Indices of users whose pilots receive no jamming.
    pub fn inactive_users(&self) -> Vec<usize> {
        let k = self.alloc.num_users();
        (0..k).filter(|&i| self.active_set[i]).collect()
    }

    pub fn data_inactive(&self) -> bool {
        self.active_set[self.alloc.num_users()]
    }
}

/// KKT multipliers and the worst violation of the optimality conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub nu: f64,
    pub lambdas: Vec<f64>,
    pub active_set: Vec<bool>,
    pub residual: f64,
}

/// Evaluates the KKT system of `min rho s.t. zeta >= 0, sum zeta = 1` at
/// `coords`.
///
/// With `g_i = -d rho / d zeta_i`, stationarity reads `g_i = nu - lambda_i`.
/// The slack `lambda_i = max(nu - g_i, 0)` is eliminated, leaving primal
/// feasibility, dual feasibility `g_i <= nu` and complementary slackness
/// `lambda_i zeta_i = 0` to check. Gradient-valued terms are divided by
/// `nu`: the scale of `rho` and its gradient spans many decades across
/// jammer budgets, and an absolute threshold would be vacuous at high `P_w`.
///
/// When `nu` is `None` it is taken as the largest `g_i` over coordinates
/// above [`ACTIVE_TOL`].
pub fn certify(objective: &RhoObjective, coords: &[f64], nu: Option<f64>) -> Certificate {
    let neg_grad: Vec<f64> = objective.gradient(coords).into_iter().map(|g| -g).collect();
    let active_set: Vec<bool> = coords.iter().map(|&z| z <= ACTIVE_TOL).collect();
    let nu = nu.unwrap_or_else(|| {
        neg_grad
            .iter()
            .zip(&active_set)
            .filter(|(_, &at_zero)| !at_zero)
            .map(|(&g, _)| g)
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let scale = if nu > 0.0 { nu } else { 1.0 };
    let lambdas: Vec<f64> = neg_grad.iter().map(|&g| (nu - g).max(0.0)).collect();

    let sum: f64 = coords.iter().sum();
    let mut residual = (sum - 1.0).abs();
    for ((&z, &g), &lambda) in coords.iter().zip(&neg_grad).zip(&lambdas) {
        residual = residual
            .max(-z)
            .max((g - nu) / scale)
            .max(lambda * z / scale);
    }
    Certificate {
        nu,
        lambdas,
        active_set,
        residual,
    }
}

pub(crate) fn result_from_coords(
    objective: &RhoObjective,
    coords: &[f64],
    nu: Option<f64>,
    method: Method,
    iterations: usize,
) -> Result<SolveResult, SolveError> {
    let cert = certify(objective, coords, nu);
    let alloc = JammerAllocation::from_coords(coords)?;
    Ok(SolveResult {
        rho_star: objective.value(&alloc.coords()),
        alloc,
        nu_star: cert.nu,
        lambdas: cert.lambdas,
        active_set: cert.active_set,
        method,
        kkt_residual: cert.residual,
        iterations,
    })
}

/// Optimal allocation: closed form when every coordinate is positive,
/// otherwise the active-set KKT solver.
pub fn solve(cfg: &SystemConfig, budget: JammerBudget) -> Result<SolveResult, SolveError> {
    match solve_closed_form(cfg, budget)? {
        ClosedFormOutcome::Interior(result) if result.kkt_residual < DEFAULT_TOL => Ok(result),
        _ => solve_kkt(cfg, budget, &KktOptions::default()),
    }
}

//! Pairwise ordering checks on optimal training allocations.
//!
//! For two users that share two of the three parameters `(T_t, P_t, P_d)`,
//! the user with the larger third parameter is expected to receive at least
//! as much training-phase jamming energy.

use crate::model::SystemConfig;

use super::SolveResult;

/// Slack allowed in the `>=` comparison.
const ORDER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corollary {
    /// Equal `T_t` and `P_t`, larger `P_d`.
    DataPower,
    /// Equal `T_t` and `P_d`, larger `P_t`.
    TrainPower,
    /// Equal `P_t` and `P_d`, larger `T_t`.
    TrainLen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingVerdict {
    pub corollary: Corollary,
    /// User with the larger distinguishing parameter.
    pub larger: usize,
    pub smaller: usize,
    pub zeta_larger: f64,
    pub zeta_smaller: f64,
    pub holds: bool,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Emits a verdict for every ordered user pair that matches a hypothesis.
pub fn check_corollary_orderings(result: &SolveResult, cfg: &SystemConfig) -> Vec<OrderingVerdict> {
    let users = cfg.users();
    let zeta = result.alloc.zeta_t();
    let mut out = Vec::new();
    for (k, uk) in users.iter().enumerate() {
        for (j, uj) in users.iter().enumerate() {
            if j == k {
                continue;
            }
            let same_len = uk.train_len() == uj.train_len();
            let same_pt = same(uk.train_power(), uj.train_power());
            let same_pd = same(uk.data_power(), uj.data_power());
            let corollary = if same_len && same_pt && uk.data_power() > uj.data_power() && !same_pd
            {
                Some(Corollary::DataPower)
            } else if same_len && same_pd && uk.train_power() > uj.train_power() && !same_pt {
                Some(Corollary::TrainPower)
            } else if same_pt && same_pd && uk.train_len() > uj.train_len() {
                Some(Corollary::TrainLen)
            } else {
                None
            };
            if let Some(corollary) = corollary {
                out.push(OrderingVerdict {
                    corollary,
                    larger: k,
                    smaller: j,
                    zeta_larger: zeta[k],
                    zeta_smaller: zeta[j],
                    holds: zeta[k] >= zeta[j] - ORDER_TOL,
                });
            }
        }
    }
    out
}

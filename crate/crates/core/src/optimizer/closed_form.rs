use crate::error::SolveError;
use crate::model::{JammerAllocation, JammerBudget, RhoObjective, SystemConfig};

use super::{result_from_coords, Method, SolveResult};

#[derive(Debug, Clone, PartialEq)]
pub enum ClosedFormOutcome {
    /// Every coordinate is strictly positive; the formula is the optimum.
    Interior(SolveResult),
    /// Some coordinate came out `<= 0`. `raw` holds the unclipped values,
    /// `[zeta_t..., zeta_d]`.
    NotInterior { raw: Vec<f64> },
}

/// `(delta, eta) = (sum P_t T_t^2, sum T_t sqrt(P_d P_t))`.
fn delta_eta(cfg: &SystemConfig) -> (f64, f64) {
    cfg.users().iter().fold((0.0, 0.0), |(delta, eta), u| {
        let tt = f64::from(u.train_len());
        (
            delta + u.train_power() * tt * tt,
            eta + tt * (u.data_power() * u.train_power()).sqrt(),
        )
    })
}

/// Interior optimum in closed form, valid when the jammer is strong enough
/// that no coordinate is clipped at zero.
pub fn solve_closed_form(
    cfg: &SystemConfig,
    budget: JammerBudget,
) -> Result<ClosedFormOutcome, SolveError> {
    if budget.avg_power() == 0.0 {
        return Err(SolveError::ZeroBudget);
    }
    let energy = budget.block_energy(cfg);
    let block = f64::from(cfg.block_len());
    let train_total = f64::from(cfg.total_train_len());
    let data_len = f64::from(cfg.data_len());
    let data_power = cfg.total_data_power();
    let (delta, eta) = delta_eta(cfg);

    let numerator_common = energy + block + delta + data_len * data_power;
    let mut raw: Vec<f64> = cfg
        .users()
        .iter()
        .map(|u| {
            let tt = f64::from(u.train_len());
            let root = (u.data_power() * u.train_power()).sqrt();
            let numerator = numerator_common - (1.0 + u.train_power() * tt) / root * (2.0 * eta);
            numerator / (2.0 * energy * (eta / (tt * root)))
        })
        .collect();
    raw.push(0.5 + (train_total + delta - data_len * (1.0 + data_power)) / (2.0 * energy));

    if raw.iter().all(|&z| z.is_finite() && z > 0.0) {
        let obj = RhoObjective::new(cfg, budget);
        let result = result_from_coords(&obj, &raw, None, Method::ClosedForm, 0)?;
        Ok(ClosedFormOutcome::Interior(result))
    } else {
        Ok(ClosedFormOutcome::NotInterior { raw })
    }
}

/// Limit of the optimal allocation as the jamming budget grows without bound:
/// half the energy on data, the other half split in proportion to
/// `T_t sqrt(P_t P_d)`.
pub fn solve_asymptotic(cfg: &SystemConfig) -> Result<JammerAllocation, SolveError> {
    let (_, eta) = delta_eta(cfg);
    if eta == 0.0 {
        return Err(SolveError::FlatObjective);
    }
    let zeta_t = cfg
        .users()
        .iter()
        .map(|u| f64::from(u.train_len()) * (u.train_power() * u.data_power()).sqrt() / (2.0 * eta))
        .collect();
    Ok(JammerAllocation::new(zeta_t, 0.5)?)
}

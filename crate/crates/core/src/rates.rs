//! Ergodic sum-rate under a given jamming allocation.
//!
//! The achievable rate with Gaussian signalling and noisy CSI is an
//! expectation over the channel estimates, evaluated here by Monte Carlo.
//! Jensen's inequality applied in two directions gives closed-form upper and
//! lower bounds that both depend on the allocation only through `rho`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::ModelError;
use crate::model::{
    lmmse_quality, objective_rho, phase_jam_powers, JammerAllocation, JammerBudget, SystemConfig,
};

/// Euler-Mascheroni constant. `E[ln X] = -EULER_GAMMA` for `X ~ Exp(1)`.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Samples per independently seeded RNG stream. Part of the reproducibility
/// contract: changing it changes every estimate.
const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloSettings {
    pub samples: u64,
    pub seed: u64,
    pub confidence_z: f64,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self {
            samples: 200_000,
            seed: 0,
            confidence_z: 1.96,
        }
    }
}

/// Monte Carlo estimate with a normal-approximation confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub halfwidth: f64,
}

/// All rates in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub r_lb: f64,
    pub r_mc: f64,
    pub r_mc_halfwidth: f64,
    pub r_ub: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Moments {
            count,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * w,
        }
    }
}

/// Monte Carlo estimate of the achievable ergodic sum-rate.
///
/// Each draw samples `|h_hat_k|^2 ~ Exp(mean = est_var_k)` independently per
/// user. Sample `i` comes from stream `i / CHUNK` of a ChaCha8 generator
/// seeded with `mc.seed`, so the result is bit-identical for any number of
/// rayon workers.
pub fn sum_rate_mc(
    alloc: &JammerAllocation,
    cfg: &SystemConfig,
    budget: JammerBudget,
    mc: &MonteCarloSettings,
) -> Result<McEstimate, ModelError> {
    assert!(mc.samples >= 1, "Monte Carlo needs at least one sample");
    let powers = phase_jam_powers(alloc, cfg, budget)?;
    let mut noise = 1.0;
    let gains: Vec<f64> = cfg
        .users()
        .iter()
        .zip(&powers.train)
        .map(|(user, &jam)| {
            let q = lmmse_quality(user, jam);
            let scaled = user.data_power() / (1.0 + powers.data);
            noise += q.err_var * scaled;
            scaled * q.est_var
        })
        .collect();
    let gains: Vec<f64> = gains.into_iter().map(|g| g / noise).collect();
    let fraction = cfg.data_fraction();

    if gains.iter().all(|&g| g == 0.0) {
        return Ok(McEstimate {
            mean: 0.0,
            halfwidth: 0.0,
        });
    }

    let chunks = mc.samples.div_ceil(CHUNK);
    let partials: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            rng.set_stream(chunk);
            let n = CHUNK.min(mc.samples - chunk * CHUNK);
            let mut m = Moments::default();
            for _ in 0..n {
                let sinr: f64 = gains
                    .iter()
                    .map(|&g| {
                        let x: f64 = rng.sample(Exp1);
                        g * x
                    })
                    .sum();
                m.push(fraction * sinr.ln_1p() / std::f64::consts::LN_2);
            }
            m
        })
        .collect();
    let total = partials
        .into_iter()
        .fold(Moments::default(), Moments::merge);

    let halfwidth = if total.count > 1 {
        let var = total.m2 / (total.count - 1) as f64;
        mc.confidence_z * var.max(0.0).sqrt() / (total.count as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean: total.mean,
        halfwidth,
    })
}

/// Upper bound `((T - T_t)/T) log2(1 + rho)`.
pub fn sum_rate_ub(
    alloc: &JammerAllocation,
    cfg: &SystemConfig,
    budget: JammerBudget,
) -> Result<f64, ModelError> {
    let rho = objective_rho(alloc, cfg, budget)?;
    Ok(upper_bound_from_rho(rho, cfg))
}

/// Lower bound `((T - T_t)/T) log2(1 + rho e^-gamma_E)`.
pub fn sum_rate_lb(
    alloc: &JammerAllocation,
    cfg: &SystemConfig,
    budget: JammerBudget,
) -> Result<f64, ModelError> {
    let rho = objective_rho(alloc, cfg, budget)?;
    Ok(lower_bound_from_rho(rho, cfg))
}

pub fn upper_bound_from_rho(rho: f64, cfg: &SystemConfig) -> f64 {
    cfg.data_fraction() * rho.ln_1p() / std::f64::consts::LN_2
}

pub fn lower_bound_from_rho(rho: f64, cfg: &SystemConfig) -> f64 {
    cfg.data_fraction() * (rho * (-EULER_GAMMA).exp()).ln_1p() / std::f64::consts::LN_2
}

/// Both bounds plus the Monte Carlo estimate.
pub fn rate_report(
    alloc: &JammerAllocation,
    cfg: &SystemConfig,
    budget: JammerBudget,
    mc: &MonteCarloSettings,
) -> Result<RateReport, ModelError> {
    let rho = objective_rho(alloc, cfg, budget)?;
    let est = sum_rate_mc(alloc, cfg, budget, mc)?;
    Ok(RateReport {
        r_lb: lower_bound_from_rho(rho, cfg),
        r_mc: est.mean,
        r_mc_halfwidth: est.halfwidth,
        r_ub: upper_bound_from_rho(rho, cfg),
    })
}

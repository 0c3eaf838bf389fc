//! Domain types and closed-form building blocks of the jamming model.
//!
//! All powers are linear and normalized to unit receiver noise variance.
//! Channel coefficients are unit-variance Rayleigh, so every quantity here is
//! a second-order statistic: nothing in this module draws random samples.
//!
//! The objective that the jammer minimizes is
//!
//! ```text
//!            gamma * sum_k alpha_k
//! rho = ---------------------------
//!        1 + gamma * sum_k beta_k
//! ```
//!
//! with `gamma = 1 / (1 + zeta_d * Pw * T / Td)` and `alpha_k`, `beta_k` the
//! estimated-channel and estimation-error contributions of user `k` after its
//! pilots have been jammed with energy fraction `zeta_t[k]`.

use crate::error::ModelError;

/// Tolerance on `sum(zeta) == 1` accepted before renormalization.
pub const SIMPLEX_INPUT_TOL: f64 = 1e-6;

/// Converts a power in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power to dB. Zero maps to negative infinity.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Per-user transmission parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserParams {
    train_power: f64,
    data_power: f64,
    train_len: u32,
}

impl UserParams {
    /// `data_power` may be zero: such a user neither helps nor is worth jamming.
    pub fn new(train_power: f64, data_power: f64, train_len: u32) -> Result<Self, ModelError> {
        if !(train_power.is_finite() && train_power > 0.0) {
            return Err(ModelError::InvalidUser {
                field: "train_power",
                reason: format!("must be finite and > 0, got {train_power}"),
            });
        }
        if !(data_power.is_finite() && data_power >= 0.0) {
            return Err(ModelError::InvalidUser {
                field: "data_power",
                reason: format!("must be finite and >= 0, got {data_power}"),
            });
        }
        if train_len == 0 {
            return Err(ModelError::InvalidUser {
                field: "train_len",
                reason: "must be at least 1 symbol".into(),
            });
        }
        Ok(Self {
            train_power,
            data_power,
            train_len,
        })
    }

    pub fn train_power(&self) -> f64 {
        self.train_power
    }

    pub fn data_power(&self) -> f64 {
        self.data_power
    }

    pub fn train_len(&self) -> u32 {
        self.train_len
    }

    /// Pilot energy `P_t * T_t`.
    pub fn train_energy(&self) -> f64 {
        self.train_power * f64::from(self.train_len)
    }
}

/// Block structure and the set of legitimate users.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    block_len: u32,
    users: Vec<UserParams>,
    total_train_len: u32,
}

impl SystemConfig {
    pub fn new(block_len: u32, users: Vec<UserParams>) -> Result<Self, ModelError> {
        if users.is_empty() {
            return Err(ModelError::NoUsers);
        }
        let total_train_len = users
            .iter()
            .try_fold(0u32, |acc, u| acc.checked_add(u.train_len))
            .ok_or(ModelError::NoDataPhase {
                block_len,
                total_train_len: u32::MAX,
            })?;
        if total_train_len >= block_len {
            return Err(ModelError::NoDataPhase {
                block_len,
                total_train_len,
            });
        }
        Ok(Self {
            block_len,
            users,
            total_train_len,
        })
    }

    pub fn block_len(&self) -> u32 {
        self.block_len
    }

    pub fn users(&self) -> &[UserParams] {
        &self.users
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// `T_t`, the sum of all users' pilot lengths.
    pub fn total_train_len(&self) -> u32 {
        self.total_train_len
    }

    /// `T_d = T - T_t`, always at least 1.
    pub fn data_len(&self) -> u32 {
        self.block_len - self.total_train_len
    }

    /// Fraction of the block carrying data, `(T - T_t) / T`.
    pub fn data_fraction(&self) -> f64 {
        f64::from(self.data_len()) / f64::from(self.block_len)
    }

    pub fn total_data_power(&self) -> f64 {
        self.users.iter().map(|u| u.data_power).sum()
    }
}

/// Average jamming power `P_w`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct JammerBudget(f64);

impl JammerBudget {
    pub fn new(avg_power: f64) -> Result<Self, ModelError> {
        if avg_power.is_finite() && avg_power >= 0.0 {
            Ok(Self(avg_power))
        } else {
            Err(ModelError::InvalidBudget(avg_power))
        }
    }

    /// `-inf` dB is accepted and yields a zero budget.
    pub fn from_db(db: f64) -> Result<Self, ModelError> {
        Self::new(db_to_linear(db))
    }

    pub fn avg_power(&self) -> f64 {
        self.0
    }

    /// Total energy per block, `P_w * T`.
    pub fn block_energy(&self, cfg: &SystemConfig) -> f64 {
        self.0 * f64::from(cfg.block_len)
    }
}

/// A point on the jamming-energy simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct JammerAllocation {
    zeta_t: Vec<f64>,
    zeta_d: f64,
}

impl JammerAllocation {
    /// Builds an allocation, renormalizing so the entries sum to one.
    ///
    /// Inputs whose sum is further than [`SIMPLEX_INPUT_TOL`] from one are
    /// rejected rather than silently rescaled.
    pub fn new(zeta_t: Vec<f64>, zeta_d: f64) -> Result<Self, ModelError> {
        if zeta_t.is_empty() {
            return Err(ModelError::NoUsers);
        }
        for (index, &z) in zeta_t.iter().chain(std::iter::once(&zeta_d)).enumerate() {
            if !(z.is_finite() && z >= 0.0) {
                return Err(ModelError::NegativeRatio { index, value: z });
            }
        }
        let sum: f64 = zeta_t.iter().sum::<f64>() + zeta_d;
        if (sum - 1.0).abs() > SIMPLEX_INPUT_TOL {
            return Err(ModelError::NotOnSimplex { sum });
        }
        Ok(Self {
            zeta_t: zeta_t.into_iter().map(|z| z / sum).collect(),
            zeta_d: zeta_d / sum,
        })
    }

    /// Builds an allocation from `K + 1` coordinates, data ratio last.
    pub fn from_coords(coords: &[f64]) -> Result<Self, ModelError> {
        match coords.split_last() {
            Some((&zeta_d, zeta_t)) => Self::new(zeta_t.to_vec(), zeta_d),
            None => Err(ModelError::NoUsers),
        }
    }

    pub fn zeta_t(&self) -> &[f64] {
        &self.zeta_t
    }

    pub fn zeta_d(&self) -> f64 {
        self.zeta_d
    }

    /// `zeta_t = sum_k zeta_t[k]`, the share spent on training.
    pub fn training_share(&self) -> f64 {
        self.zeta_t.iter().sum()
    }

    pub fn num_users(&self) -> usize {
        self.zeta_t.len()
    }

    /// Coordinates as `[zeta_t..., zeta_d]`.
    pub fn coords(&self) -> Vec<f64> {
        let mut out = self.zeta_t.clone();
        out.push(self.zeta_d);
        out
    }

    fn check_dims(&self, cfg: &SystemConfig) -> Result<(), ModelError> {
        if self.zeta_t.len() != cfg.num_users() {
            return Err(ModelError::DimensionMismatch {
                expected: cfg.num_users(),
                got: self.zeta_t.len(),
            });
        }
        Ok(())
    }
}

/// Jamming powers actually radiated during each phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseJamPowers {
    /// `P_wt_k`, one per user's pilot window.
    pub train: Vec<f64>,
    /// `P_wd`, shared by the whole data phase.
    pub data: f64,
}

/// Converts energy ratios into per-phase jamming powers.
pub fn phase_jam_powers(
    alloc: &JammerAllocation,
    cfg: &SystemConfig,
    budget: JammerBudget,
) -> Result<PhaseJamPowers, ModelError> {
    alloc.check_dims(cfg)?;
    let energy = budget.block_energy(cfg);
    let data_len = cfg.data_len();
    if data_len == 0 {
        return Err(ModelError::NoDataPhase {
            block_len: cfg.block_len,
            total_train_len: cfg.total_train_len,
        });
    }
    let train = alloc
        .zeta_t
        .iter()
        .zip(&cfg.users)
        .map(|(z, u)| z * energy / f64::from(u.train_len))
        .collect();
    Ok(PhaseJamPowers {
        train,
        data: alloc.zeta_d * energy / f64::from(data_len),
    })
}

/// LMMSE channel-estimate statistics for one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationQuality {
    /// Variance of the channel estimate.
    pub est_var: f64,
    /// Variance of the estimation error.
    pub err_var: f64,
}

/// Estimate and error variances of a unit-variance channel observed through
/// `T_t` pilots of power `P_t`, each hit by jamming power `train_jam_power`.
pub fn lmmse_quality(user: &UserParams, train_jam_power: f64) -> EstimationQuality {
    debug_assert!(train_jam_power >= 0.0);
    let snr = user.train_power / (1.0 + train_jam_power) * f64::from(user.train_len);
    EstimationQuality {
        est_var: snr / (1.0 + snr),
        err_var: 1.0 / (1.0 + snr),
    }
}

/// Per-user `alpha_k`, `beta_k` and the data-phase factor `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constituents {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: f64,
}

pub fn alpha_beta_gamma(
    alloc: &JammerAllocation,
    cfg: &SystemConfig,
    budget: JammerBudget,
) -> Result<Constituents, ModelError> {
    alloc.check_dims(cfg)?;
    let energy = budget.block_energy(cfg);
    let data_len = f64::from(cfg.data_len());
    let (alpha, beta) = alloc
        .zeta_t
        .iter()
        .zip(&cfg.users)
        .map(|(&z, u)| {
            let train_len = f64::from(u.train_len);
            let effective = u.train_power * train_len / (1.0 + z * energy / train_len);
            (
                u.data_power * effective / (1.0 + effective),
                u.data_power / (1.0 + effective),
            )
        })
        .unzip();
    Ok(Constituents {
        alpha,
        beta,
        gamma: 1.0 / (1.0 + alloc.zeta_d * energy / data_len),
    })
}

/// The jamming objective `rho`, assembled from `alpha`, `beta` and `gamma`.
pub fn objective_rho(
    alloc: &JammerAllocation,
    cfg: &SystemConfig,
    budget: JammerBudget,
) -> Result<f64, ModelError> {
    let c = alpha_beta_gamma(alloc, cfg, budget)?;
    let alpha: f64 = c.alpha.iter().sum();
    let beta: f64 = c.beta.iter().sum();
    Ok(c.gamma * alpha / (1.0 + c.gamma * beta))
}

/// `rho` evaluated from the phase jamming powers and the LMMSE variances,
/// i.e. the ratio of mean useful received power to effective noise in the
/// data phase. Agrees with [`objective_rho`] up to rounding.
pub fn rho_from_estimation(
    alloc: &JammerAllocation,
    cfg: &SystemConfig,
    budget: JammerBudget,
) -> Result<f64, ModelError> {
    let powers = phase_jam_powers(alloc, cfg, budget)?;
    let mut signal = 0.0;
    let mut noise = 1.0;
    for (user, &jam) in cfg.users.iter().zip(&powers.train) {
        let q = lmmse_quality(user, jam);
        let scaled = user.data_power / (1.0 + powers.data);
        signal += scaled * q.est_var;
        noise += q.err_var * scaled;
    }
    Ok(signal / noise)
}

/// `rho` as a function of raw coordinates `[zeta_t..., zeta_d]`, in the
/// reduced form used by the solvers.
///
/// With `w_k = P_d P_t T_t^2`, `c_k = T_t (1 + P_t T_t)` and `E = P_w T`,
/// `alpha_k = w_k / (zeta_k E + c_k)` and `beta_k = P_d - alpha_k`. The
/// coordinates need not lie on the simplex, which lets tests probe
/// monotonicity along single axes.
#[derive(Debug, Clone)]
pub struct RhoObjective {
    energy: f64,
    data_len: f64,
    weights: Vec<f64>,
    offsets: Vec<f64>,
    total_data_power: f64,
}

impl RhoObjective {
    pub fn new(cfg: &SystemConfig, budget: JammerBudget) -> Self {
        let (weights, offsets) = cfg
            .users
            .iter()
            .map(|u| {
                let tt = f64::from(u.train_len);
                (
                    u.data_power * u.train_power * tt * tt,
                    tt * (1.0 + u.train_power * tt),
                )
            })
            .unzip();
        Self {
            energy: budget.block_energy(cfg),
            data_len: f64::from(cfg.data_len()),
            weights,
            offsets,
            total_data_power: cfg.total_data_power(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len() + 1
    }

    pub fn num_users(&self) -> usize {
        self.weights.len()
    }

    /// `E = P_w T`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn data_len(&self) -> f64 {
        self.data_len
    }

    /// `w_k = P_d P_t T_t^2`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `c_k = T_t (1 + P_t T_t)`.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `D = sum_k P_d`.
    pub fn total_data_power(&self) -> f64 {
        self.total_data_power
    }

    pub fn alpha(&self, k: usize, zeta: f64) -> f64 {
        self.weights[k] / (zeta * self.energy + self.offsets[k])
    }

    pub fn gamma(&self, zeta_d: f64) -> f64 {
        self.data_len / (self.data_len + zeta_d * self.energy)
    }

    /// `rho` from the data factor and the summed `alpha`.
    pub fn combine(&self, gamma: f64, alpha_sum: f64) -> f64 {
        gamma * alpha_sum / (1.0 + gamma * (self.total_data_power - alpha_sum))
    }

    pub fn value(&self, coords: &[f64]) -> f64 {
        debug_assert_eq!(coords.len(), self.dim());
        let (zeta_d, zeta_t) = coords.split_last().expect("non-empty coordinates");
        let alpha_sum: f64 = zeta_t
            .iter()
            .enumerate()
            .map(|(k, &z)| self.alpha(k, z))
            .sum();
        self.combine(self.gamma(*zeta_d), alpha_sum)
    }

    /// Partial derivatives of `rho` with respect to every coordinate.
    pub fn gradient(&self, coords: &[f64]) -> Vec<f64> {
        let (zeta_d, zeta_t) = coords.split_last().expect("non-empty coordinates");
        let gamma = self.gamma(*zeta_d);
        let alpha_sum: f64 = zeta_t
            .iter()
            .enumerate()
            .map(|(k, &z)| self.alpha(k, z))
            .sum();
        let beta_sum = self.total_data_power - alpha_sum;
        let denom = 1.0 + gamma * beta_sum;
        let denom_sq = denom * denom;
        let gain = gamma * (1.0 + gamma * self.total_data_power);
        let mut grad: Vec<f64> = zeta_t
            .iter()
            .enumerate()
            .map(|(k, &z)| {
                let shifted = z * self.energy + self.offsets[k];
                -self.energy * gain * self.weights[k] / (shifted * shifted * denom_sq)
            })
            .collect();
        let shifted_d = zeta_d * self.energy + self.data_len;
        grad.push(-self.energy * self.data_len * alpha_sum / (shifted_d * shifted_d * denom_sq));
        grad
    }
}

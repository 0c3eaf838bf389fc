//! Scenario files and experiment setup.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! block_len = 100
//! output = "fig2"
//!
//! [[users]]
//! train_len = 1
//! avg_power_db = 20.0          # or: train_power_db = ..., data_power_db = ...
//!
//! [jammer]
//! power_db = 10.0              # or a [jammer.sweep] table
//!
//! [jammer.sweep]
//! min_db = -10.0
//! max_db = 60.0
//! step_db = 1.0
//!
//! [mc]
//! samples = 200000
//! seed = 1
//! confidence_z = 1.96          # optional
//! ```
//!
//! Powers are in dB relative to the receiver noise; `-inf` is a valid value
//! and means zero power. Unknown keys are rejected.
//!
//! Users given in budget form (`avg_power_db`) are assigned training and data
//! powers by [`budget_split`], under the energy identity
//! `P_t T_t + P_d T_d = P_avg T`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::model::{db_to_linear, JammerAllocation, JammerBudget, SystemConfig, UserParams};
use crate::rates::{MonteCarloSettings, EULER_GAMMA};

#[derive(Debug, Clone, PartialEq)]
pub enum UserSpec {
    Explicit {
        train_len: u32,
        train_power_db: f64,
        data_power_db: f64,
    },
    Budget {
        train_len: u32,
        avg_power_db: f64,
    },
}

impl UserSpec {
    pub fn train_len(&self) -> u32 {
        match *self {
            UserSpec::Explicit { train_len, .. } | UserSpec::Budget { train_len, .. } => train_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub min_db: f64,
    pub max_db: f64,
    pub step_db: f64,
}

impl SweepRange {
    /// Grid points `min + i * step` up to `max` inclusive.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.max_db - self.min_db) / self.step_db + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.min_db + i as f64 * self.step_db)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JammerSpec {
    Fixed { power_db: f64 },
    Sweep(SweepRange),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub block_len: u32,
    pub users: Vec<UserSpec>,
    pub jammer: JammerSpec,
    pub mc: MonteCarloSettings,
    pub output: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    block_len: Option<u32>,
    output: Option<String>,
    users: Option<Vec<RawUser>>,
    jammer: Option<RawJammer>,
    mc: Option<RawMc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUser {
    train_len: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    train_power_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    data_power_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    avg_power_db: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJammer {
    #[serde(skip_serializing_if = "Option::is_none")]
    power_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<RawSweep>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    min_db: f64,
    max_db: f64,
    step_db: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMc {
    samples: Option<u64>,
    seed: Option<u64>,
    confidence_z: Option<f64>,
}

fn not_nan(field: &str, value: f64) -> Result<f64, ScenarioError> {
    if value.is_nan() || value == f64::INFINITY {
        Err(ScenarioError::invalid(
            field,
            format!("must be a finite dB value or -inf, got {value}"),
        ))
    } else {
        Ok(value)
    }
}

impl RawScenario {
    fn validate(self) -> Result<ScenarioSpec, ScenarioError> {
        let block_len = self
            .block_len
            .ok_or_else(|| ScenarioError::invalid("block_len", "required field is missing"))?;
        let raw_users = self
            .users
            .ok_or_else(|| ScenarioError::invalid("users", "required field is missing"))?;
        if raw_users.is_empty() {
            return Err(ScenarioError::invalid(
                "users",
                "at least one user is required",
            ));
        }
        let users = raw_users
            .into_iter()
            .enumerate()
            .map(|(i, u)| {
                let field = |name: &str| format!("users[{i}].{name}");
                let train_len = u.train_len.ok_or_else(|| {
                    ScenarioError::invalid(field("train_len"), "required field is missing")
                })?;
                if train_len == 0 {
                    return Err(ScenarioError::invalid(field("train_len"), "must be >= 1"));
                }
                match (u.train_power_db, u.data_power_db, u.avg_power_db) {
                    (Some(tp), Some(dp), None) => Ok(UserSpec::Explicit {
                        train_len,
                        train_power_db: not_nan(&field("train_power_db"), tp)?,
                        data_power_db: not_nan(&field("data_power_db"), dp)?,
                    }),
                    (None, None, Some(avg)) => {
                        let avg_power_db = not_nan(&field("avg_power_db"), avg)?;
                        if avg_power_db == f64::NEG_INFINITY {
                            return Err(ScenarioError::invalid(
                                field("avg_power_db"),
                                "must be > 0 in linear scale",
                            ));
                        }
                        Ok(UserSpec::Budget {
                            train_len,
                            avg_power_db,
                        })
                    }
                    _ => Err(ScenarioError::invalid(
                        format!("users[{i}]"),
                        "give either avg_power_db, or both train_power_db and data_power_db",
                    )),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;

        let total_train: u64 = users.iter().map(|u| u64::from(u.train_len())).sum();
        if total_train >= u64::from(block_len) {
            return Err(ScenarioError::invalid(
                "block_len",
                format!("must exceed the total training length {total_train}"),
            ));
        }

        let raw_jammer = self
            .jammer
            .ok_or_else(|| ScenarioError::invalid("jammer", "required field is missing"))?;
        let jammer = match (raw_jammer.power_db, raw_jammer.sweep) {
            (Some(p), None) => JammerSpec::Fixed {
                power_db: not_nan("jammer.power_db", p)?,
            },
            (None, Some(s)) => {
                if !(s.min_db.is_finite() && s.max_db.is_finite()) {
                    return Err(ScenarioError::invalid(
                        "jammer.sweep",
                        "bounds must be finite",
                    ));
                }
                if s.min_db > s.max_db {
                    return Err(ScenarioError::invalid(
                        "jammer.sweep",
                        "min_db must not exceed max_db",
                    ));
                }
                if !(s.step_db.is_finite() && s.step_db > 0.0) {
                    return Err(ScenarioError::invalid(
                        "jammer.sweep.step_db",
                        "must be > 0",
                    ));
                }
                JammerSpec::Sweep(SweepRange {
                    min_db: s.min_db,
                    max_db: s.max_db,
                    step_db: s.step_db,
                })
            }
            _ => {
                return Err(ScenarioError::invalid(
                    "jammer",
                    "give exactly one of power_db or sweep",
                ))
            }
        };

        let defaults = MonteCarloSettings::default();
        let mc = match self.mc {
            None => defaults,
            Some(m) => MonteCarloSettings {
                samples: m.samples.unwrap_or(defaults.samples),
                seed: m.seed.unwrap_or(defaults.seed),
                confidence_z: m.confidence_z.unwrap_or(defaults.confidence_z),
            },
        };
        if mc.samples == 0 {
            return Err(ScenarioError::invalid("mc.samples", "must be >= 1"));
        }
        if !(mc.confidence_z.is_finite() && mc.confidence_z > 0.0) {
            return Err(ScenarioError::invalid("mc.confidence_z", "must be > 0"));
        }

        Ok(ScenarioSpec {
            block_len,
            users,
            jammer,
            mc,
            output: self.output.unwrap_or_else(|| "scenario".to_string()),
        })
    }
}

impl ScenarioSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        Self::parse(text, "<string>")
    }

    fn parse(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        raw.validate()
    }

    pub fn to_toml_string(&self) -> String {
        let raw = RawScenario {
            block_len: Some(self.block_len),
            output: Some(self.output.clone()),
            users: Some(
                self.users
                    .iter()
                    .map(|u| match *u {
                        UserSpec::Explicit {
                            train_len,
                            train_power_db,
                            data_power_db,
                        } => RawUser {
                            train_len: Some(train_len),
                            train_power_db: Some(train_power_db),
                            data_power_db: Some(data_power_db),
                            avg_power_db: None,
                        },
                        UserSpec::Budget {
                            train_len,
                            avg_power_db,
                        } => RawUser {
                            train_len: Some(train_len),
                            train_power_db: None,
                            data_power_db: None,
                            avg_power_db: Some(avg_power_db),
                        },
                    })
                    .collect(),
            ),
            jammer: Some(match self.jammer {
                JammerSpec::Fixed { power_db } => RawJammer {
                    power_db: Some(power_db),
                    sweep: None,
                },
                JammerSpec::Sweep(s) => RawJammer {
                    power_db: None,
                    sweep: Some(RawSweep {
                        min_db: s.min_db,
                        max_db: s.max_db,
                        step_db: s.step_db,
                    }),
                },
            }),
            mc: Some(RawMc {
                samples: Some(self.mc.samples),
                seed: Some(self.mc.seed),
                confidence_z: Some(self.mc.confidence_z),
            }),
        };
        toml::to_string(&raw).expect("scenario serializes to TOML")
    }

    pub fn total_train_len(&self) -> u32 {
        self.users.iter().map(UserSpec::train_len).sum()
    }

    pub fn data_len(&self) -> u32 {
        self.block_len - self.total_train_len()
    }

    /// Builds the system, splitting budget-form users with
    /// [`SplitRule::MaxLowerBound`].
    pub fn system_config(&self) -> Result<SystemConfig, ScenarioError> {
        let data_len = self.data_len();
        let users = self
            .users
            .iter()
            .map(|u| match *u {
                UserSpec::Explicit {
                    train_len,
                    train_power_db,
                    data_power_db,
                } => Ok(UserParams::new(
                    db_to_linear(train_power_db),
                    db_to_linear(data_power_db),
                    train_len,
                )?),
                UserSpec::Budget {
                    train_len,
                    avg_power_db,
                } => {
                    let (pt, pd) = budget_split(
                        db_to_linear(avg_power_db),
                        train_len,
                        self.block_len,
                        data_len,
                        SplitRule::MaxLowerBound,
                    )?;
                    Ok(UserParams::new(pt, pd, train_len)?)
                }
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        Ok(SystemConfig::new(self.block_len, users)?)
    }

    /// Jammer powers in dB: the single fixed value or the sweep grid.
    pub fn jammer_points_db(&self) -> Vec<f64> {
        match self.jammer {
            JammerSpec::Fixed { power_db } => vec![power_db],
            JammerSpec::Sweep(s) => s.points(),
        }
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioSpec::parse(&text, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRule {
    /// Maximize the user's own jamming-free rate lower bound.
    MaxLowerBound,
    /// Same per-symbol power in both phases.
    EqualPower,
}

/// Splits an average power budget into training and data powers with
/// `P_t T_t + P_d T_d = P_avg T`.
///
/// [`SplitRule::MaxLowerBound`] maximizes the single-user, jamming-free lower
/// bound `(T_d / T) log2(1 + rho e^-gamma_E)`, `rho = alpha / (1 + beta)`, by
/// golden-section search on the training energy fraction. It is a
/// self-contained stand-in for a full multiuser training design, not a
/// reproduction of one.
pub fn budget_split(
    avg_power: f64,
    train_len: u32,
    block_len: u32,
    data_len: u32,
    rule: SplitRule,
) -> Result<(f64, f64), ScenarioError> {
    if !(avg_power.is_finite() && avg_power > 0.0) {
        return Err(ScenarioError::invalid(
            "avg_power",
            format!("must be > 0, got {avg_power}"),
        ));
    }
    if train_len == 0 || data_len == 0 {
        return Err(ScenarioError::invalid(
            "train_len",
            "training and data lengths must be >= 1",
        ));
    }
    let energy = avg_power * f64::from(block_len);
    let tt = f64::from(train_len);
    let td = f64::from(data_len);
    let powers = |fraction: f64| (fraction * energy / tt, (1.0 - fraction) * energy / td);
    match rule {
        SplitRule::EqualPower => {
            let p = energy / (tt + td);
            Ok((p, p))
        }
        SplitRule::MaxLowerBound => {
            let objective =
                |fraction: f64| split_lower_bound(powers(fraction), tt, td, f64::from(block_len));
            let fraction = golden_max(objective, 0.0, 1.0, 1e-13);
            Ok(powers(fraction))
        }
    }
}

/// Jamming-free single-user lower bound for a `(P_t, P_d)` split.
pub fn split_lower_bound(
    (pt, pd): (f64, f64),
    train_len: f64,
    data_len: f64,
    block_len: f64,
) -> f64 {
    let snr = pt * train_len;
    let alpha = pd * snr / (1.0 + snr);
    let beta = pd / (1.0 + snr);
    let rho = alpha / (1.0 + beta);
    data_len / block_len * (rho * (-EULER_GAMMA).exp()).ln_1p() / std::f64::consts::LN_2
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Constant jamming power over the whole block: `zeta_t[k] = T_t[k] / T`,
/// `zeta_d = T_d / T`.
pub fn uniform_allocation(cfg: &SystemConfig) -> JammerAllocation {
    let block = f64::from(cfg.block_len());
    let zeta_t = cfg
        .users()
        .iter()
        .map(|u| f64::from(u.train_len()) / block)
        .collect();
    JammerAllocation::new(zeta_t, f64::from(cfg.data_len()) / block)
        .expect("T_t + T_d = T puts the uniform allocation on the simplex")
}

/// Budget for one jammer power in dB.
pub fn budget_from_db(db: f64) -> Result<JammerBudget, ScenarioError> {
    Ok(JammerBudget::from_db(db)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::phase_jam_powers;
    use proptest::prelude::*;

    const SMALL: &str = r#"
block_len = 10
output = "small"

[[users]]
train_len = 1
train_power_db = 10.0
data_power_db = 10.0

[[users]]
train_len = 2
avg_power_db = 0.0

[jammer]
power_db = 3.0

[mc]
samples = 1000
seed = 7
"#;

    #[test]
    fn parses_mixed_user_forms() {
        let spec = ScenarioSpec::from_toml_str(SMALL).unwrap();
        assert_eq!(spec.block_len, 10);
        assert_eq!(spec.users.len(), 2);
        assert_eq!(spec.mc.samples, 1000);
        assert_eq!(spec.mc.confidence_z, 1.96);
        let cfg = spec.system_config().unwrap();
        assert_eq!(cfg.data_len(), 7);
        let u = cfg.users()[1];
        let energy = u.train_power() * 2.0 + u.data_power() * 7.0;
        assert!((energy - 10.0).abs() < 1e-9);
    }

    #[test]
    fn missing_block_len_is_named() {
        let text = SMALL.replace("block_len = 10", "");
        let err = ScenarioSpec::from_toml_str(&text).unwrap_err();
        assert!(
            matches!(&err, ScenarioError::Invalid { field, .. } if field == "block_len"),
            "{err}"
        );
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = SMALL.replace("seed = 7", "seed = 7\nsead = 8");
        let err = ScenarioSpec::from_toml_str(&text).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { .. }));
        assert!(err.to_string().contains("sead"));
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = ScenarioSpec::from_toml_str("block_len = \n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn rejects_bad_sweep_and_mixed_user() {
        let text = SMALL.replace(
            "power_db = 3.0",
            "[jammer.sweep]\nmin_db = 5.0\nmax_db = 1.0\nstep_db = 1.0",
        );
        assert!(ScenarioSpec::from_toml_str(&text).is_err());
        let text = SMALL.replace(
            "avg_power_db = 0.0",
            "avg_power_db = 0.0\ndata_power_db = 1.0",
        );
        assert!(matches!(
            ScenarioSpec::from_toml_str(&text),
            Err(ScenarioError::Invalid { .. })
        ));
    }

    #[test]
    fn negative_infinity_power_parses_to_zero() {
        let text = SMALL.replace("power_db = 3.0", "power_db = -inf");
        let spec = ScenarioSpec::from_toml_str(&text).unwrap();
        let db = spec.jammer_points_db()[0];
        assert_eq!(budget_from_db(db).unwrap().avg_power(), 0.0);
    }

    #[test]
    fn sweep_points_include_endpoint() {
        let s = SweepRange {
            min_db: -10.0,
            max_db: 60.0,
            step_db: 1.0,
        };
        let p = s.points();
        assert_eq!(p.len(), 71);
        assert_eq!(p[0], -10.0);
        assert_eq!(p[70], 60.0);
    }

    #[test]
    fn equal_power_split_is_degenerate_case() {
        let (pt, pd) = budget_split(3.0, 5, 10, 5, SplitRule::EqualPower).unwrap();
        assert_eq!((pt, pd), (3.0, 3.0));
    }

    #[test]
    fn split_matches_grid_scan() {
        for &(avg, tt, block, td) in &[(1.0, 1, 100, 96), (31.6, 1, 100, 96), (5.0, 3, 20, 14)] {
            let (pt, _) = budget_split(avg, tt, block, td, SplitRule::MaxLowerBound).unwrap();
            let energy = avg * f64::from(block);
            let fraction = pt * f64::from(tt) / energy;
            let objective = |f: f64| {
                split_lower_bound(
                    (
                        f * energy / f64::from(tt),
                        (1.0 - f) * energy / f64::from(td),
                    ),
                    f64::from(tt),
                    f64::from(td),
                    f64::from(block),
                )
            };
            let best = (1..10_000)
                .map(|i| i as f64 * 1e-4)
                .max_by(|a, b| objective(*a).total_cmp(&objective(*b)))
                .unwrap();
            assert!((fraction - best).abs() <= 1e-4, "{fraction} vs grid {best}");
        }
    }

    #[test]
    fn uniform_examples() {
        let spec = ScenarioSpec::from_toml_str(SMALL).unwrap();
        let cfg = spec.system_config().unwrap();
        let a = uniform_allocation(&cfg);
        assert_eq!(a.zeta_t(), &[0.1, 0.2]);
        assert!((a.zeta_d() - 0.7).abs() < 1e-15);
        // Constant per-symbol jamming power.
        let budget = JammerBudget::new(2.5).unwrap();
        let p = phase_jam_powers(&a, &cfg, budget).unwrap();
        for x in p.train.iter().chain(std::iter::once(&p.data)) {
            assert!((x - 2.5).abs() < 1e-12);
        }
        let one = SystemConfig::new(10, vec![UserParams::new(1.0, 1.0, 5).unwrap()]).unwrap();
        let a = uniform_allocation(&one);
        assert_eq!((a.zeta_t()[0], a.zeta_d()), (0.5, 0.5));
    }

    fn arb_spec() -> impl Strategy<Value = ScenarioSpec> {
        let user = prop_oneof![
            (1u32..4, -20.0f64..30.0, -20.0f64..30.0).prop_map(|(t, a, b)| UserSpec::Explicit {
                train_len: t,
                train_power_db: a,
                data_power_db: b,
            }),
            (1u32..4, -20.0f64..30.0).prop_map(|(t, a)| UserSpec::Budget {
                train_len: t,
                avg_power_db: a,
            }),
        ];
        let jammer = prop_oneof![
            (-30.0f64..60.0).prop_map(|p| JammerSpec::Fixed { power_db: p }),
            (-30.0f64..0.0, 0.0f64..60.0, 0.1f64..5.0).prop_map(|(a, b, s)| JammerSpec::Sweep(
                SweepRange {
                    min_db: a,
                    max_db: b,
                    step_db: s,
                }
            )),
        ];
        (
            prop::collection::vec(user, 1..5),
            jammer,
            1u64..1_000_000,
            any::<u64>(),
            "[a-z][a-z0-9_]{0,10}",
        )
            .prop_map(|(users, jammer, samples, seed, output)| ScenarioSpec {
                block_len: 20,
                users,
                jammer,
                mc: MonteCarloSettings {
                    samples,
                    seed: seed >> 1,
                    confidence_z: 1.96,
                },
                output,
            })
    }

    proptest! {
        #[test]
        fn toml_round_trip(spec in arb_spec()) {
            let text = spec.to_toml_string();
            let back = ScenarioSpec::from_toml_str(&text).unwrap();
            prop_assert_eq!(back, spec);
        }

        #[test]
        fn split_respects_energy_identity(avg_db in -20.0f64..40.0, tt in 1u32..10, td in 1u32..200) {
            let block = tt + td + 3;
            let avg = db_to_linear(avg_db);
            let (pt, pd) = budget_split(avg, tt, block, td, SplitRule::MaxLowerBound).unwrap();
            let energy = pt * f64::from(tt) + pd * f64::from(td);
            let expected = avg * f64::from(block);
            prop_assert!((energy - expected).abs() <= 1e-9 * expected);
            prop_assert!(pt > 0.0 && pd > 0.0);
        }
    }
}

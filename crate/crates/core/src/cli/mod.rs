//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a solver fails (or an oracle check finds
//! a discrepancy), 2 for configuration and usage errors.

mod sweep;

pub use sweep::{plot_script, run_sweep, write_csv, SweepRow, CSV_FIXED_COLUMNS};

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::error::{ModelError, ScenarioError, SolveError};
use crate::model::{linear_to_db, JammerAllocation, JammerBudget, SystemConfig};
use crate::optimizer::{solve, solve_kkt, solve_oracle, KktOptions, OracleOptions, SolveResult};
use crate::rates::{rate_report, RateReport};
use crate::scenario::{budget_from_db, load_scenario, uniform_allocation, ScenarioSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::Solver(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "jamalloc",
    version,
    about = "Optimal jamming energy allocation for training-based MAC systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal allocation at one jammer power.
    Optimize {
        scenario: PathBuf,
        /// Jammer power in dB, overriding the scenario.
        #[arg(long, allow_hyphen_values = true)]
        pw_db: Option<f64>,
        /// Also write the allocation to this file (readable by `rates --alloc file:PATH`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print R_LB, the Monte Carlo rate and R_UB for an allocation.
    Rates {
        scenario: PathBuf,
        /// `uniform`, `optimal` or `file:PATH`.
        #[arg(long, default_value = "optimal")]
        alloc: AllocChoice,
        #[arg(long, allow_hyphen_values = true)]
        pw_db: Option<f64>,
    },
    /// Solve and evaluate every point of the scenario's jammer sweep.
    Sweep {
        scenario: PathBuf,
        /// Directory for `<stem>.csv`, `<stem>.plot` and `<stem>.meta.toml`.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Compare the KKT solver against a brute-force grid search.
    OracleCheck {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        grid: f64,
        #[arg(long, allow_hyphen_values = true)]
        pw_db: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AllocChoice {
    Uniform,
    Optimal,
    File(PathBuf),
}

impl FromStr for AllocChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(AllocChoice::Uniform),
            "optimal" => Ok(AllocChoice::Optimal),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(AllocChoice::File(PathBuf::from(path))),
                _ => Err(format!("expected uniform, optimal or file:PATH, got `{s}`")),
            },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AllocationFile {
    zeta_t: Vec<f64>,
    zeta_d: f64,
}

pub fn read_allocation(path: &Path) -> Result<JammerAllocation, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: AllocationFile =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(JammerAllocation::new(file.zeta_t, file.zeta_d)?)
}

pub fn allocation_toml(alloc: &JammerAllocation) -> String {
    let zeta_t: Vec<String> = alloc.zeta_t().iter().map(|z| format!("{z:?}")).collect();
    format!(
        "zeta_t = [{}]\nzeta_d = {:?}\n",
        zeta_t.join(", "),
        alloc.zeta_d()
    )
}

/// Optimal allocation, or `None` when the objective is flat (zero budget or
/// no data power) and every allocation is optimal.
pub fn optimal_or_flat(
    cfg: &SystemConfig,
    budget: JammerBudget,
) -> Result<Option<SolveResult>, CliError> {
    match solve(cfg, budget) {
        Ok(r) => Ok(Some(r)),
        Err(SolveError::ZeroBudget | SolveError::FlatObjective) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn resolve_pw_db(spec: &ScenarioSpec, override_db: Option<f64>) -> Result<f64, CliError> {
    if let Some(db) = override_db {
        return Ok(db);
    }
    match spec.jammer {
        crate::scenario::JammerSpec::Fixed { power_db } => Ok(power_db),
        crate::scenario::JammerSpec::Sweep(_) => Err(CliError::Config(
            "scenario defines a sweep; pass --pw-db to pick one jammer power".into(),
        )),
    }
}

fn load(
    path: &Path,
    override_db: Option<f64>,
) -> Result<(ScenarioSpec, SystemConfig, f64, JammerBudget), CliError> {
    let spec = load_scenario(path)?;
    let cfg = spec.system_config()?;
    let pw_db = resolve_pw_db(&spec, override_db)?;
    let budget = budget_from_db(pw_db)?;
    Ok((spec, cfg, pw_db, budget))
}

fn format_result(result: &SolveResult, pw_db: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "pw_db         {pw_db}");
    let _ = writeln!(s, "method        {}", result.method);
    let _ = writeln!(s, "rho_star      {:.16e}", result.rho_star);
    let _ = writeln!(s, "nu_star       {:.16e}", result.nu_star);
    let _ = writeln!(s, "kkt_residual  {:.3e}", result.kkt_residual);
    let _ = writeln!(s, "iterations    {}", result.iterations);
    let k = result.alloc.num_users();
    for (i, z) in result.alloc.zeta_t().iter().enumerate() {
        let state = if result.active_set[i] {
            "inactive"
        } else {
            "jammed"
        };
        let _ = writeln!(s, "zeta_t[{}]     {:.16e}  {state}", i + 1, z);
    }
    let state = if result.active_set[k] {
        "inactive"
    } else {
        "jammed"
    };
    let _ = writeln!(s, "zeta_d        {:.16e}  {state}", result.alloc.zeta_d());
    s
}

fn format_report(label: &str, r: &RateReport) -> String {
    format!(
        "allocation    {label}\nr_lb          {:.16e}\nr_mc          {:.16e} +/- {:.3e}\nr_ub          {:.16e}\n",
        r.r_lb, r.r_mc, r.r_mc_halfwidth, r.r_ub
    )
}

/// Runs one command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Optimize {
            scenario,
            pw_db,
            out: alloc_out,
        } => {
            let (_, cfg, pw_db, budget) = load(&scenario, pw_db)?;
            let result = solve(&cfg, budget)?;
            out.write_all(format_result(&result, pw_db).as_bytes())?;
            if let Some(path) = alloc_out {
                std::fs::write(path, allocation_toml(&result.alloc))?;
            }
            Ok(())
        }
        Command::Rates {
            scenario,
            alloc,
            pw_db,
        } => {
            let (spec, cfg, pw_db, budget) = load(&scenario, pw_db)?;
            let (label, allocation) = match alloc {
                AllocChoice::Uniform => ("uniform".to_string(), uniform_allocation(&cfg)),
                AllocChoice::Optimal => match optimal_or_flat(&cfg, budget)? {
                    Some(r) => ("optimal".to_string(), r.alloc),
                    None => (
                        "optimal (flat objective, uniform used)".to_string(),
                        uniform_allocation(&cfg),
                    ),
                },
                AllocChoice::File(path) => {
                    (format!("file {}", path.display()), read_allocation(&path)?)
                }
            };
            let report = rate_report(&allocation, &cfg, budget, &spec.mc)?;
            writeln!(out, "pw_db         {pw_db}")?;
            out.write_all(format_report(&label, &report).as_bytes())?;
            Ok(())
        }
        Command::Sweep { scenario, out_dir } => {
            let spec = load_scenario(&scenario)?;
            if !matches!(spec.jammer, crate::scenario::JammerSpec::Sweep(_)) {
                return Err(CliError::Config(
                    "scenario has no [jammer.sweep] range".into(),
                ));
            }
            let rows = run_sweep(&spec)?;
            std::fs::create_dir_all(&out_dir)?;
            let stem = &spec.output;
            let csv_path = out_dir.join(format!("{stem}.csv"));
            let cfg = spec.system_config()?;
            let mut file = std::fs::File::create(&csv_path)?;
            write_csv(&mut file, &rows, cfg.num_users())?;
            std::fs::write(
                out_dir.join(format!("{stem}.plot")),
                plot_script(stem, cfg.num_users()),
            )?;
            std::fs::write(
                out_dir.join(format!("{stem}.meta.toml")),
                sweep_metadata(&spec, &cfg),
            )?;
            writeln!(out, "wrote {} rows to {}", rows.len(), csv_path.display())?;
            Ok(())
        }
        Command::OracleCheck {
            scenario,
            grid,
            pw_db,
        } => {
            let (_, cfg, pw_db, budget) = load(&scenario, pw_db)?;
            let kkt = solve_kkt(&cfg, budget, &KktOptions::default())?;
            let opts = OracleOptions {
                grid_step: grid,
                ..Default::default()
            };
            let oracle = solve_oracle(&cfg, budget, &opts)?;
            let rho_gap = kkt.rho_star - oracle.result.rho_star;
            let alloc_gap = kkt
                .alloc
                .coords()
                .iter()
                .zip(oracle.result.alloc.coords())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            writeln!(out, "pw_db         {pw_db}")?;
            writeln!(out, "rho_kkt       {:.16e}", kkt.rho_star)?;
            writeln!(out, "rho_oracle    {:.16e}", oracle.result.rho_star)?;
            writeln!(out, "rho_gap       {rho_gap:.3e}")?;
            writeln!(out, "alloc_gap     {alloc_gap:.3e}")?;
            writeln!(out, "evaluations   {}", oracle.evaluations)?;
            if rho_gap > 1e-4 {
                return Err(CliError::Solver(format!(
                    "oracle beats the KKT solver by {rho_gap:e}"
                )));
            }
            Ok(())
        }
    }
}

/// Sidecar describing how the sweep's user powers were obtained.
fn sweep_metadata(spec: &ScenarioSpec, cfg: &SystemConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# User powers used for this sweep. Budget-form users are split by"
    );
    let _ = writeln!(
        s,
        "# maximizing their own jamming-free rate lower bound (a stand-in for a"
    );
    let _ = writeln!(s, "# full multiuser training design).");
    let _ = writeln!(s, "block_len = {}", cfg.block_len());
    let _ = writeln!(s, "data_len = {}", cfg.data_len());
    let _ = writeln!(s, "mc_samples = {}", spec.mc.samples);
    let _ = writeln!(s, "mc_seed = {}", spec.mc.seed);
    for (user_spec, user) in spec.users.iter().zip(cfg.users()) {
        let _ = writeln!(s, "\n[[users]]");
        let source = match user_spec {
            crate::scenario::UserSpec::Explicit { .. } => "explicit",
            crate::scenario::UserSpec::Budget { .. } => "budget_split_max_lower_bound",
        };
        let _ = writeln!(s, "source = \"{source}\"");
        let _ = writeln!(s, "train_len = {}", user.train_len());
        let _ = writeln!(s, "train_power = {:?}", user.train_power());
        let _ = writeln!(s, "data_power = {:?}", user.data_power());
        let _ = writeln!(s, "train_power_db = {:?}", linear_to_db(user.train_power()));
        let _ = writeln!(s, "data_power_db = {:?}", linear_to_db(user.data_power()));
    }
    s
}

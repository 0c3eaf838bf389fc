use std::io::Write;

use rayon::prelude::*;

use crate::model::JammerBudget;
use crate::rates::{rate_report, RateReport};
use crate::scenario::{budget_from_db, uniform_allocation, ScenarioSpec};

use super::{optimal_or_flat, CliError};

/// One jammer power of a sweep: optimal allocation and rates under optimal
/// and uniform jamming.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub pw_db: f64,
    pub zeta_t: Vec<f64>,
    pub zeta_d: f64,
    pub rho_star: f64,
    pub optimal: RateReport,
    pub uniform: RateReport,
    /// `100 (1 - r_mc_opt / r_mc_unif)`.
    pub rate_reduction_pct: f64,
    pub method: String,
    pub kkt_residual: f64,
}

/// Columns after the per-user `zeta_t_<k>` block.
pub const CSV_FIXED_COLUMNS: [&str; 13] = [
    "zeta_d",
    "rho_star",
    "r_lb_opt",
    "r_mc_opt",
    "r_mc_hw_opt",
    "r_ub_opt",
    "r_lb_unif",
    "r_mc_unif",
    "r_mc_hw_unif",
    "r_ub_unif",
    "rate_reduction_pct",
    "method",
    "kkt_residual",
];

fn evaluate_point(spec: &ScenarioSpec, pw_db: f64) -> Result<SweepRow, CliError> {
    let cfg = spec.system_config()?;
    let budget: JammerBudget = budget_from_db(pw_db)?;
    let uniform_alloc = uniform_allocation(&cfg);
    let (alloc, method, residual) = match optimal_or_flat(&cfg, budget)
        .map_err(|e| CliError::Solver(format!("P_w = {pw_db} dB: {e}")))?
    {
        Some(r) => (r.alloc, r.method.to_string(), r.kkt_residual),
        None => (uniform_alloc.clone(), "flat".to_string(), 0.0),
    };
    // Both allocations see the same channel draws.
    let optimal = rate_report(&alloc, &cfg, budget, &spec.mc)?;
    let uniform = rate_report(&uniform_alloc, &cfg, budget, &spec.mc)?;
    let rate_reduction_pct = if uniform.r_mc > 0.0 {
        100.0 * (1.0 - optimal.r_mc / uniform.r_mc)
    } else {
        0.0
    };
    Ok(SweepRow {
        pw_db,
        zeta_t: alloc.zeta_t().to_vec(),
        zeta_d: alloc.zeta_d(),
        rho_star: crate::model::objective_rho(&alloc, &cfg, budget)?,
        optimal,
        uniform,
        rate_reduction_pct,
        method,
        kkt_residual: residual,
    })
}

/// Evaluates every sweep point in parallel; rows come back in sweep order.
pub fn run_sweep(spec: &ScenarioSpec) -> Result<Vec<SweepRow>, CliError> {
    spec.jammer_points_db()
        .into_par_iter()
        .map(|pw_db| evaluate_point(spec, pw_db))
        .collect()
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(out: &mut dyn Write, rows: &[SweepRow], users: usize) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["pw_db".to_string()];
    header.extend((1..=users).map(|k| format!("zeta_t_{k}")));
    header.extend(CSV_FIXED_COLUMNS.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![num(r.pw_db)];
        rec.extend(r.zeta_t.iter().map(|&z| num(z)));
        rec.extend([
            num(r.zeta_d),
            num(r.rho_star),
            num(r.optimal.r_lb),
            num(r.optimal.r_mc),
            num(r.optimal.r_mc_halfwidth),
            num(r.optimal.r_ub),
            num(r.uniform.r_lb),
            num(r.uniform.r_mc),
            num(r.uniform.r_mc_halfwidth),
            num(r.uniform.r_ub),
            num(r.rate_reduction_pct),
            r.method.clone(),
            num(r.kkt_residual),
        ]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Gnuplot script drawing rate curves and allocation curves from
/// `<stem>.csv`.
pub fn plot_script(stem: &str, users: usize) -> String {
    let csv = format!("{stem}.csv");
    // Column numbers are 1-based; zeta_t_k sits at k + 1.
    let col = |name: &str| {
        let idx = CSV_FIXED_COLUMNS
            .iter()
            .position(|c| *c == name)
            .expect("known column");
        users + 2 + idx
    };
    let mut s = String::new();
    s.push_str("# Generated by `jamalloc sweep`. Render with: gnuplot ");
    s.push_str(&format!("{stem}.plot\n"));
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str("set key outside right\n");
    s.push_str("set grid\n");
    s.push_str("set xlabel 'average jamming power P_w (dB)'\n\n");
    s.push_str(&format!("set output '{stem}_rates.png'\n"));
    s.push_str("set ylabel 'ergodic sum-rate (bits/channel use)'\n");
    let series = [
        ("r_lb_opt", "R_LB optimal", "lines dt 2 lc 1"),
        ("r_mc_opt", "R optimal", "lines lc 1"),
        ("r_ub_opt", "R_UB optimal", "lines dt 3 lc 1"),
        ("r_lb_unif", "R_LB uniform", "lines dt 2 lc 2"),
        ("r_mc_unif", "R uniform", "lines lc 2"),
        ("r_ub_unif", "R_UB uniform", "lines dt 3 lc 2"),
    ];
    let parts: Vec<String> = series
        .iter()
        .map(|(name, title, style)| {
            format!(
                "'{csv}' skip 1 using 1:{} title '{title}' with {style}",
                col(name)
            )
        })
        .collect();
    s.push_str(&format!("plot {}\n\n", parts.join(", \\\n     ")));
    s.push_str(&format!("set output '{stem}_allocation.png'\n"));
    s.push_str("set ylabel 'energy fraction'\n");
    s.push_str("set yrange [0:1]\n");
    let mut parts: Vec<String> = (1..=users)
        .map(|k| {
            format!(
                "'{csv}' skip 1 using 1:{} title 'zeta_t_{k}' with lines",
                k + 1
            )
        })
        .collect();
    parts.push(format!(
        "'{csv}' skip 1 using 1:{} title 'zeta_d' with lines lw 2",
        col("zeta_d")
    ));
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}

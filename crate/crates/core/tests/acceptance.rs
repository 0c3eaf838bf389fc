//! End-to-end acceptance checks, one test per criterion. Each prints a
//! PASS/FAIL line with the measured quantities; run with `--nocapture` to see
//! the lines of passing criteria too.

mod common;

use std::time::Instant;

use common::*;
use jamalloc::cli::{run_sweep, SweepRow};
use jamalloc::model::{objective_rho, RhoObjective};
use jamalloc::optimizer::{
    check_corollary_orderings, solve_closed_form, solve_kkt, solve_oracle, solve_projected_descent,
    ClosedFormOutcome, Corollary, DescentOptions, KktOptions, OracleOptions, ACTIVE_TOL,
};
use jamalloc::rates::{rate_report, sum_rate_mc, EULER_GAMMA};
use jamalloc::{
    load_scenario, solve, JammerBudget, MonteCarloSettings, ScenarioSpec, SolveResult,
    SystemConfig, UserParams,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn kkt(cfg: &SystemConfig, budget: JammerBudget) -> SolveResult {
    solve_kkt(cfg, budget, &KktOptions::default()).unwrap()
}

fn fig(name: &str) -> ScenarioSpec {
    load_scenario(scenarios_dir().join(format!("{name}.scenario"))).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let cfg = random_config(&mut rng, 3);
        let budget = random_budget(&mut rng);
        let oracle = solve_oracle(&cfg, budget, &OracleOptions::default()).unwrap();
        worst = worst.max((kkt(&cfg, budget).rho_star - oracle.result.rho_star).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-4 && secs < 60.0,
        format!("max |rho_kkt - rho_oracle| = {worst:.2e} over 30 configs in {secs:.1} s"),
    )
}

fn closed_form_consistency() -> Outcome {
    let mut rng = rng(102);
    let (mut worst_alloc, mut worst_rho) = (0.0f64, 0.0f64);
    for _ in 0..30 {
        let cfg = random_config(&mut rng, 4);
        let mut pw = 10.0;
        let cf = loop {
            let budget = JammerBudget::new(pw).unwrap();
            if let ClosedFormOutcome::Interior(r) = solve_closed_form(&cfg, budget).unwrap() {
                break (r, budget);
            }
            pw *= 10.0;
        };
        let k = kkt(&cfg, cf.1);
        worst_alloc = worst_alloc.max(inf_norm(&cf.0.alloc.coords(), &k.alloc.coords()));
        worst_rho = worst_rho.max(rel_diff(cf.0.rho_star, k.rho_star));
    }
    outcome(
        worst_alloc < 1e-4 && worst_rho < 1e-6,
        format!("max allocation gap {worst_alloc:.2e}, max relative rho gap {worst_rho:.2e}"),
    )
}

fn high_power_limit() -> Outcome {
    let cfg = fig("fig2").system_config().unwrap();
    let r = solve(&cfg, JammerBudget::from_db(60.0).unwrap()).unwrap();
    let weights: Vec<f64> = cfg
        .users()
        .iter()
        .map(|u| f64::from(u.train_len()) * (u.train_power() * u.data_power()).sqrt())
        .collect();
    let (wsum, zsum): (f64, f64) = (weights.iter().sum(), r.alloc.zeta_t().iter().sum());
    let worst = weights
        .iter()
        .zip(r.alloc.zeta_t())
        .map(|(w, z)| rel_diff(z / zsum, w / wsum))
        .fold(0.0, f64::max);
    let dev = (r.alloc.zeta_d() - 0.5).abs();
    outcome(
        dev < 1e-2 && worst < 1e-2,
        format!("|zeta_d - 0.5| = {dev:.2e}, max relative share error {worst:.2e}"),
    )
}

/// Randomized suite shared by the certificate and ratio-law criteria.
fn suite() -> Vec<(SystemConfig, JammerBudget)> {
    let mut rng = rng(104);
    (0..200)
        .map(|_| (random_config(&mut rng, 5), random_budget(&mut rng)))
        .collect()
}

/// Recomputes the optimality conditions from the gradient and returns the
/// worst violation.
fn kkt_violation(cfg: &SystemConfig, budget: JammerBudget, r: &SolveResult) -> f64 {
    let obj = RhoObjective::new(cfg, budget);
    let x = r.alloc.coords();
    let g: Vec<f64> = obj.gradient(&x).iter().map(|v| -v).collect();
    let nu = r.nu_star;
    let mut worst = (x.iter().sum::<f64>() - 1.0).abs();
    for (i, (&xi, &gi)) in x.iter().zip(&g).enumerate() {
        worst = worst.max(-xi).max(-r.lambdas[i]);
        worst = worst.max((gi - nu) / nu);
        if xi > ACTIVE_TOL {
            worst = worst.max((gi - nu).abs() / nu);
        }
        worst = worst.max(r.lambdas[i] * xi);
    }
    worst.max(r.kkt_residual)
}

fn kkt_certificate() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (cfg, budget) in suite() {
        let mut results = vec![
            solve(&cfg, budget).unwrap(),
            kkt(&cfg, budget),
            solve_projected_descent(&cfg, budget, &DescentOptions::default()).unwrap(),
        ];
        if let ClosedFormOutcome::Interior(r) = solve_closed_form(&cfg, budget).unwrap() {
            results.push(r);
        }
        for r in &results {
            worst = worst.max(kkt_violation(&cfg, budget, r));
            checked += 1;
        }
    }
    outcome(
        worst < 1e-8,
        format!("worst violation {worst:.2e} over {checked} solver results"),
    )
}

fn interior_ratio_law() -> Outcome {
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for (cfg, budget) in suite() {
        let r = solve(&cfg, budget).unwrap();
        let (pw, block) = (budget.avg_power(), f64::from(cfg.block_len()));
        let ratio: Vec<Option<f64>> = cfg
            .users()
            .iter()
            .zip(r.alloc.zeta_t())
            .map(|(u, &z)| {
                let tt = f64::from(u.train_len());
                let denom = pw * z * block + (u.train_power() * tt + 1.0) * tt;
                (z > 1e-6).then(|| u.data_power() * u.train_power() * tt * tt / (denom * denom))
            })
            .collect();
        for i in 0..ratio.len() {
            for j in (i + 1)..ratio.len() {
                if let (Some(a), Some(b)) = (ratio[i], ratio[j]) {
                    worst = worst.max(rel_diff(a, b));
                    pairs += 1;
                }
            }
        }
    }
    outcome(
        worst < 1e-6 && pairs > 0,
        format!("max relative spread {worst:.2e} over {pairs} interior pairs"),
    )
}

fn bound_sandwich() -> Outcome {
    let mut rng = rng(106);
    let settings = MonteCarloSettings {
        samples: 200_000,
        seed: 17,
        confidence_z: 1.96,
    };
    let (mut violations, mut worst_gap) = (0, 0.0f64);
    for _ in 0..100 {
        let cfg = random_config(&mut rng, 4);
        let budget = random_budget(&mut rng);
        let alloc = random_allocation(&mut rng, cfg.num_users());
        let r = rate_report(&alloc, &cfg, budget, &settings).unwrap();
        let sigma = r.r_mc_halfwidth / settings.confidence_z;
        if r.r_lb > r.r_mc + 3.0 * sigma || r.r_mc - 3.0 * sigma > r.r_ub {
            violations += 1;
        }
        let rho = objective_rho(&alloc, &cfg, budget).unwrap();
        let identity =
            cfg.data_fraction() * ((1.0 + rho) / (1.0 + rho * (-EULER_GAMMA).exp())).log2();
        worst_gap = worst_gap.max((r.r_ub - r.r_lb - identity).abs());
    }
    outcome(
        violations == 0 && worst_gap < 1e-12,
        format!("{violations}/100 sandwich violations, max gap-identity error {worst_gap:.2e}"),
    )
}

/// Two users sharing two of `(T_t, P_t, P_d)` and differing in the third.
fn ordering_pair(
    rng: &mut rand_chacha::ChaCha8Rng,
    which: Corollary,
) -> (SystemConfig, JammerBudget) {
    let power = |rng: &mut rand_chacha::ChaCha8Rng| 10f64.powf(rng.random_range(-0.5..2.5));
    let (tt, pt, pd) = (rng.random_range(1..=3u32), power(rng), power(rng));
    let (a, b) = match which {
        Corollary::DataPower => ((pt, pd, tt), (pt, power(rng), tt)),
        Corollary::TrainPower => ((pt, pd, tt), (power(rng), pd, tt)),
        Corollary::TrainLen => {
            let other = loop {
                let t = rng.random_range(1..=4u32);
                if t != tt {
                    break t;
                }
            };
            ((pt, pd, tt), (pt, pd, other))
        }
    };
    let users: Vec<UserParams> = [a, b]
        .iter()
        .map(|&(pt, pd, tt)| UserParams::new(pt, pd, tt).unwrap())
        .collect();
    let train: u32 = users.iter().map(|u| u.train_len()).sum();
    let cfg = SystemConfig::new(train + rng.random_range(2..150), users).unwrap();
    (cfg, random_budget(rng))
}

fn corollary_orderings() -> Outcome {
    let mut rng = rng(107);
    let mut parts = Vec::new();
    let mut pass = true;
    for (which, label) in [
        (Corollary::DataPower, "larger P_d"),
        (Corollary::TrainPower, "larger P_t"),
        (Corollary::TrainLen, "larger T_t"),
    ] {
        let mut held = 0;
        let mut counterexample = None;
        for _ in 0..100 {
            let (cfg, budget) = ordering_pair(&mut rng, which);
            let r = solve(&cfg, budget).unwrap();
            let verdicts = check_corollary_orderings(&r, &cfg);
            let v = verdicts
                .iter()
                .find(|v| v.corollary == which)
                .expect("hypothesis holds");
            if v.holds {
                held += 1;
            } else if counterexample.is_none() {
                // Confirm by brute force that the solver is not at fault.
                let oracle = solve_oracle(&cfg, budget, &OracleOptions::default()).unwrap();
                let z = oracle.result.alloc.zeta_t().to_vec();
                counterexample = Some(format!(
                    "e.g. users {:?}, T = {}, P_w = {:.3}: zeta = ({:.4}, {:.4}), oracle ({:.4}, {:.4})",
                    cfg.users()
                        .iter()
                        .map(|u| (u.train_power(), u.data_power(), u.train_len()))
                        .collect::<Vec<_>>(),
                    cfg.block_len(),
                    budget.avg_power(),
                    v.zeta_larger,
                    v.zeta_smaller,
                    z[v.larger],
                    z[v.smaller],
                ));
            }
        }
        pass &= held == 100;
        parts.push(format!("{label}: {held}/100"));
        if let Some(c) = counterexample {
            parts.push(c);
        }
    }
    outcome(pass, parts.join("; "))
}

/// Lowest jammer power (dB) at which `active` holds, assuming it holds at
/// `hi` and switches on once.
fn threshold_db(
    cfg: &SystemConfig,
    lo: f64,
    hi: f64,
    active: impl Fn(&SolveResult) -> bool,
) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if active(&solve(cfg, JammerBudget::from_db(mid).unwrap()).unwrap()) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn first_active(rows: &[SweepRow], coord: impl Fn(&SweepRow) -> f64) -> Option<usize> {
    rows.iter().position(|r| coord(r) > ACTIVE_TOL)
}

fn stays_active(rows: &[SweepRow], coord: impl Fn(&SweepRow) -> f64) -> bool {
    match first_active(rows, &coord) {
        Some(i) => rows[i..].iter().all(|r| coord(r) > ACTIVE_TOL),
        None => true,
    }
}

fn qualitative_sweep() -> Outcome {
    let start = Instant::now();
    let fig2 = fig("fig2");
    let cfg = fig2.system_config().unwrap();
    let alloc_rows = run_sweep(&fig2).unwrap();
    let rate_rows = run_sweep(&fig("fig1")).unwrap();
    let k = cfg.num_users();

    // (a) budget order: user k has budget rank k, so activation runs k, k-1, ..., 1.
    let bottom = -60.0;
    let thresholds: Vec<f64> = (0..k)
        .map(|u| {
            let on = |r: &SolveResult| r.alloc.zeta_t()[u] > ACTIVE_TOL;
            if on(&solve(&cfg, JammerBudget::from_db(bottom).unwrap()).unwrap()) {
                f64::NEG_INFINITY
            } else {
                threshold_db(&cfg, bottom, 60.0, on)
            }
        })
        .collect();
    let ordered = thresholds.windows(2).all(|w| w[0] > w[1]);
    let grid_ordered = (1..k).all(|u| {
        first_active(&alloc_rows, |r| r.zeta_t[u]) <= first_active(&alloc_rows, |r| r.zeta_t[u - 1])
    });
    let monotone = (0..k).all(|u| stays_active(&alloc_rows, |r| r.zeta_t[u]));
    let a = ordered && grid_ordered && monotone;

    // (b) single data-phase activation near 20 dB.
    let crossings = alloc_rows
        .windows(2)
        .filter(|w| (w[0].zeta_d > ACTIVE_TOL) != (w[1].zeta_d > ACTIVE_TOL))
        .count();
    let data_threshold = threshold_db(&cfg, bottom, 60.0, |r| r.alloc.zeta_d() > ACTIVE_TOL);
    let b = crossings == 1
        && alloc_rows[0].zeta_d <= ACTIVE_TOL
        && (data_threshold - 20.0).abs() <= 5.0;

    // (c) optimal jamming always hurts more than uniform jamming.
    let c = rate_rows.iter().all(|r| r.optimal.r_mc < r.uniform.r_mc);

    // (d) peak rate reduction.
    let (peak_db, peak) = rate_rows
        .iter()
        .map(|r| (r.pw_db, r.rate_reduction_pct))
        .fold(
            (f64::NAN, f64::NEG_INFINITY),
            |m, v| if v.1 > m.1 { v } else { m },
        );
    let d = (35.0..=90.0).contains(&peak);

    let secs = start.elapsed().as_secs_f64();
    let mark = |ok: bool| if ok { "ok" } else { "FAILED" };
    outcome(
        a && b && c && d && secs < 300.0,
        format!(
            "(a) {} training thresholds {:?} dB; (b) {} data threshold {data_threshold:.2} dB; \
             (c) {} optimal below uniform at all {} points; (d) {} peak reduction {peak:.2}% at {peak_db} dB; {secs:.1} s",
            mark(a),
            thresholds.iter().map(|t| (t * 100.0).round() / 100.0).collect::<Vec<_>>(),
            mark(b),
            mark(c),
            rate_rows.len(),
            mark(d),
        ),
    )
}

fn zero_budget_flatness() -> Outcome {
    let mut rng = rng(109);
    let zero = JammerBudget::new(0.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let cfg = random_config(&mut rng, 4);
        let values: Vec<f64> = (0..100)
            .map(|_| {
                objective_rho(&random_allocation(&mut rng, cfg.num_users()), &cfg, zero).unwrap()
            })
            .collect();
        let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(spread);
    }

    let dir = tempfile::tempdir().unwrap();
    let scenario = scenarios_dir().join("fig1.scenario").display().to_string();
    let alloc = dir.path().join("a.toml");
    std::fs::write(&alloc, "zeta_t = [0.05, 0.6, 0.0, 0.1]\nzeta_d = 0.25\n").unwrap();
    let rates_of = |choice: &str| {
        let (code, stdout, _) =
            run_cli(&["rates", &scenario, "--alloc", choice, "--pw-db", "-inf"]);
        assert_eq!(code, 0);
        stdout
            .lines()
            .filter(|l| l.starts_with("r_"))
            .map(String::from)
            .collect::<Vec<_>>()
    };
    let same = rates_of("uniform") == rates_of(&format!("file:{}", alloc.display()))
        && rates_of("uniform") == rates_of("optimal");
    outcome(
        worst < 1e-12 && same,
        format!("max rho spread {worst:.2e}; CLI rates identical across allocations: {same}"),
    )
}

fn determinism() -> Outcome {
    let scenario = scenarios_dir().join("fig2.scenario").display().to_string();
    let csvs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = dir.path().display().to_string();
            assert_eq!(run_cli(&["sweep", &scenario, "--out-dir", &out]).0, 0);
            std::fs::read(dir.path().join("fig2.csv")).unwrap()
        })
        .collect();
    let csv_same = csvs[0] == csvs[1];

    let mut rng = rng(110);
    let cfg = random_config_k(&mut rng, 4);
    let budget = random_budget(&mut rng);
    let alloc = random_allocation(&mut rng, 4);
    let settings = MonteCarloSettings {
        samples: 100_003,
        seed: 8,
        confidence_z: 1.96,
    };
    let estimates: Vec<(u64, u64)> = [1, 3, 8]
        .iter()
        .map(|&threads| {
            let e = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sum_rate_mc(&alloc, &cfg, budget, &settings).unwrap());
            (e.mean.to_bits(), e.halfwidth.to_bits())
        })
        .collect();
    let mc_same = estimates.windows(2).all(|w| w[0] == w[1]);
    outcome(
        csv_same && mc_same,
        format!(
            "repeated sweep CSV identical: {csv_same}; MC identical for 1/3/8 workers: {mc_same}"
        ),
    )
}

fn report(number: u32, name: &str, check: fn() -> Outcome) {
    let o = check();
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {number:>2} {name:<26} {verdict}  {}", o.detail);
    assert!(o.pass, "criterion {number} ({name}) failed: {}", o.detail);
}

#[test]
fn criterion_01_oracle_equivalence() {
    report(1, "oracle equivalence", oracle_equivalence);
}

#[test]
fn criterion_02_closed_form_consistency() {
    report(2, "closed form vs active set", closed_form_consistency);
}

#[test]
fn criterion_03_high_power_limit() {
    report(3, "high-power limit", high_power_limit);
}

#[test]
fn criterion_04_optimality_certificate() {
    report(4, "optimality certificate", kkt_certificate);
}

#[test]
fn criterion_05_interior_ratio_law() {
    report(5, "interior ratio law", interior_ratio_law);
}

#[test]
fn criterion_06_bound_sandwich() {
    report(6, "rate bound sandwich", bound_sandwich);
}

#[test]
fn criterion_07_pairwise_orderings() {
    report(7, "pairwise orderings", corollary_orderings);
}

#[test]
fn criterion_08_sweep_shape() {
    report(8, "sweep qualitative shape", qualitative_sweep);
}

#[test]
fn criterion_09_zero_budget_flatness() {
    report(9, "zero-budget flatness", zero_budget_flatness);
}

#[test]
fn criterion_10_determinism() {
    report(10, "determinism", determinism);
}

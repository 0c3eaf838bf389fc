#![allow(dead_code)]

use std::path::PathBuf;

use jamalloc::{JammerAllocation, JammerBudget, SystemConfig, UserParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

pub fn random_user(rng: &mut ChaCha8Rng) -> UserParams {
    let pt = 10f64.powf(rng.random_range(-0.5..2.5));
    let pd = 10f64.powf(rng.random_range(-0.5..2.5));
    UserParams::new(pt, pd, rng.random_range(1..=3)).unwrap()
}

/// Random system with `k` users and a block at least a few symbols longer
/// than the training phase.
pub fn random_config_k(rng: &mut ChaCha8Rng, k: usize) -> SystemConfig {
    let users: Vec<UserParams> = (0..k).map(|_| random_user(rng)).collect();
    let train: u32 = users.iter().map(|u| u.train_len()).sum();
    SystemConfig::new(train + rng.random_range(2..150), users).unwrap()
}

pub fn random_config(rng: &mut ChaCha8Rng, max_users: usize) -> SystemConfig {
    let k = rng.random_range(1..=max_users);
    random_config_k(rng, k)
}

pub fn random_budget(rng: &mut ChaCha8Rng) -> JammerBudget {
    JammerBudget::new(log_uniform(rng, 0.1, 1e4)).unwrap()
}

/// Uniform point on the simplex of dimension `dim`.
pub fn dirichlet(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    x
}

pub fn random_allocation(rng: &mut ChaCha8Rng, users: usize) -> JammerAllocation {
    JammerAllocation::from_coords(&dirichlet(rng, users + 1)).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

pub fn inf_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_jamalloc"))
}

/// Runs the CLI and returns `(exit code, stdout, stderr)`.
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(bin())
        .args(args)
        .output()
        .expect("spawn jamalloc");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Adaptive Simpson quadrature.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scalar_deform::cli::{Problem, ProblemSpec};
use scalar_deform::cli::corpus;
use scalar_deform::expr::Expression;
use scalar_deform::geometry::{coordinate_names, PhasePoint};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random expression over `vars` that is finite for arguments in [-1, 1].
///
/// Every partial function is guarded: `ln(1 + u^2)`, `sqrt(1 + u^2)`,
/// `/(1 + u^2)`, `exp(sin u)`.
pub fn random_expr(rng: &mut ChaCha8Rng, vars: &[String], depth: usize) -> Expression {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.7) {
            Expression::var(&vars[rng.gen_range(0..vars.len())])
        } else {
            Expression::constant((rng.gen_range(-20..=20) as f64) / 8.0)
        };
    }
    let a = random_expr(rng, vars, depth - 1);
    let one = Expression::one;
    match rng.gen_range(0..11) {
        0 => a + random_expr(rng, vars, depth - 1),
        1 => a - random_expr(rng, vars, depth - 1),
        2 | 3 => a * random_expr(rng, vars, depth - 1),
        4 => a / (one() + random_expr(rng, vars, depth - 1).powf(2.0)),
        5 => a.sin().exp(),
        6 => (one() + a.powf(2.0)).ln(),
        7 => (one() + a.powf(2.0)).sqrt(),
        8 => a.sin(),
        9 => a.cos(),
        _ => a.powf(rng.gen_range(2..=3) as f64),
    }
}

pub fn random_point(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> PhasePoint {
    let x = (0..dim).map(|_| rng.gen_range(lo..hi)).collect();
    let y = (0..dim).map(|_| rng.gen_range(lo..hi)).collect();
    PhasePoint::new(x, y)
}

pub fn names(dim: usize) -> Vec<String> {
    coordinate_names(dim)
}

pub fn bundled_spec(name: &str) -> ProblemSpec {
    ProblemSpec::from_json(corpus::bundled(name).expect("bundled problem")).expect("valid json")
}

pub fn bundled(name: &str) -> Problem {
    bundled_spec(name).validate().expect("valid problem")
}

/// Largest residual of the least-squares fit `u ≈ α v + β`, relative to
/// `1 + max|u|`, or `None` when the fitted `α` vanishes.
pub fn affine_residual(u: &[f64], v: &[f64]) -> Option<f64> {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let cov: f64 = u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum();
    let var: f64 = v.iter().map(|b| (b - mv).powi(2)).sum();
    if var == 0.0 {
        return None;
    }
    let alpha = cov / var;
    if alpha.abs() < 1e-12 {
        return None;
    }
    let beta = mu - alpha * mv;
    let scale = 1.0 + u.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    Some(
        u.iter()
            .zip(v)
            .map(|(a, b)| (a - alpha * b - beta).abs())
            .fold(0.0, f64::max)
            / scale,
    )
}

pub fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Print one line per criterion and return whether all checks hold.
pub fn report(criterion: u32, checks: &[(String, bool)]) -> bool {
    let ok = checks.iter().all(|(_, c)| *c);
    println!("criterion {criterion}: {}", if ok { "PASS" } else { "FAIL" });
    for (what, c) in checks {
        println!("  [{}] {what}", if *c { "ok" } else { "failed" });
    }
    ok
}

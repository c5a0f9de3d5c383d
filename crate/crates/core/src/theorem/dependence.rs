use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{draw_samples, Guards, LagrangeSystem, SamplePlan, TheoremError};
use crate::expr::Expression;
use crate::geometry::PhasePoint;

/// Fewest accepted points for a usable cloud.
pub const MIN_CLOUD: usize = 8;

const NEWTON_ITERATIONS: usize = 30;
const STEP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub dependent: bool,
    /// `(L, f_raw)` at accepted points, sorted by `L` with duplicates merged.
    pub cloud: Vec<(f64, f64)>,
    /// Largest `|f(Q) − f(P)|` over level-set pairs `L(Q) = L(P)`.
    pub max_spread: f64,
    pub pairs: usize,
    pub tolerance: f64,
    pub rejected: usize,
}

/// Test whether `f_raw` is a function of `L` alone.
///
/// Each accepted point `P` is paired with a point `Q` on the same level set
/// of `L`: a step orthogonal to `∇L` followed by Newton projection back onto
/// `L = L(P)`. The test passes when `|f_raw(Q) − f_raw(P)| ≤ tol·(1 + |median f|)`
/// for every pair.
pub fn functional_dependence_test(
    system: &LagrangeSystem,
    plan: &SamplePlan,
    tol: f64,
) -> Result<DependenceReport, TheoremError> {
    let guard = plan.guard;
    let accept = |p: &PhasePoint| {
        Guards::full().accepts(system, p, guard) && system.f_raw(p, guard).is_ok()
    };
    let samples = draw_samples(plan, accept)?;
    if samples.points.len() < MIN_CLOUD {
        return Err(TheoremError::InsufficientSamples {
            found: samples.points.len(),
            required: MIN_CLOUD,
        });
    }

    let mut raw = Vec::with_capacity(samples.points.len());
    for p in &samples.points {
        raw.push((system.lagrangian_at(p)?, system.f_raw(p, guard)?));
    }
    let mut fs: Vec<f64> = raw.iter().map(|(_, f)| *f).collect();
    fs.sort_by(f64::total_cmp);
    let median = fs[fs.len() / 2];
    let tolerance = tol * (1.0 + median.abs());

    let gradient: Vec<Expression> = {
        let n = system.dim();
        let mut g = system.position_gradient.clone();
        g.extend((0..n).map(|i| system.vertical.component(i).clone()));
        g
    };
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x5eed_1e7e1);
    let step = STEP_FRACTION * plan.min_width();
    let mut max_spread: f64 = 0.0;
    let mut pairs = 0;
    for (p, &(level, f)) in samples.points.iter().zip(&raw) {
        let Some(q) = level_set_partner(system, &gradient, p, level, step, &mut rng) else {
            continue;
        };
        if !plan.contains(&q) || !accept(&q) {
            continue;
        }
        let fq = system.f_raw(&q, guard)?;
        max_spread = max_spread.max((fq - f).abs());
        pairs += 1;
    }

    Ok(DependenceReport {
        dependent: pairs > 0 && max_spread <= tolerance,
        cloud: merge_sorted(raw),
        max_spread,
        pairs,
        tolerance,
        rejected: samples.rejected,
    })
}

fn eval_gradient(gradient: &[Expression], p: &PhasePoint) -> Option<Vec<f64>> {
    let b = p.binding();
    gradient.iter().map(|g| g.eval(&b).ok()).collect()
}

fn level_set_partner(
    system: &LagrangeSystem,
    gradient: &[Expression],
    p: &PhasePoint,
    level: f64,
    step: f64,
    rng: &mut ChaCha8Rng,
) -> Option<PhasePoint> {
    let grad = eval_gradient(gradient, p)?;
    let norm2: f64 = grad.iter().map(|g| g * g).sum();
    if norm2 == 0.0 {
        return None;
    }
    let mut dir: Vec<f64> = (0..grad.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let along: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum::<f64>() / norm2;
    for (d, g) in dir.iter_mut().zip(&grad) {
        *d -= along * g;
    }
    let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    if len == 0.0 {
        return None;
    }
    let mut q: Vec<f64> = p
        .to_flat()
        .iter()
        .zip(&dir)
        .map(|(v, d)| v + step * d / len)
        .collect();
    let target = 1e-14 * (1.0 + level.abs());
    for _ in 0..NEWTON_ITERATIONS {
        let point = PhasePoint::from_flat(&q);
        let defect = system.lagrangian_at(&point).ok()? - level;
        if defect.abs() <= target {
            return Some(point);
        }
        let g = eval_gradient(gradient, &point)?;
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if g2 == 0.0 {
            return None;
        }
        for (v, gi) in q.iter_mut().zip(&g) {
            *v -= defect * gi / g2;
        }
    }
    let point = PhasePoint::from_flat(&q);
    let defect = system.lagrangian_at(&point).ok()? - level;
    (defect.abs() <= 1e3 * target).then_some(point)
}

/// Sort by `L` and average `f` over exactly repeated `L` values.
fn merge_sorted(mut raw: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64, usize)> = Vec::with_capacity(raw.len());
    for (l, f) in raw {
        match out.last_mut() {
            Some(last) if last.0 == l => {
                last.1 += f;
                last.2 += 1;
            }
            _ => out.push((l, f, 1)),
        }
    }
    out.into_iter().map(|(l, f, k)| (l, f / k as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn dissipative_cloud_is_minus_half_over_l() {
        let sys = dissipative();
        let r = functional_dependence_test(&sys, &plan(2, 0.5, 2.0, 300), 1e-6).unwrap();
        assert!(r.dependent, "{} > {}", r.max_spread, r.tolerance);
        assert!(r.pairs > 200);
        for (l, f) in &r.cloud {
            assert!((f + 0.5 / l).abs() <= 1e-12 * (1.0 + f.abs()));
        }
        assert!(r.cloud.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn log_class_cloud_is_minus_one_over_l() {
        let sys = system(
            &["0", "x2", "0"],
            "exp(y1)*exp(y3)*exp(0.5*y2^2 - x2^2 + y2)",
        );
        let mut p = plan(3, 0.2, 1.0, 200);
        p.bounds[1] = (-1.0, 1.0);
        p.bounds[4] = (-0.4, 1.2);
        let r = functional_dependence_test(&sys, &p, 1e-6).unwrap();
        assert!(r.dependent);
        for (l, f) in &r.cloud {
            assert!((f + 1.0 / l).abs() <= 1e-10 * (1.0 + f.abs()));
        }
    }

    #[test]
    fn inhomogeneous_free_particle_is_not_a_function_of_l() {
        let sys = system(&["0", "0"], "0.5*(y1^2 + y2^2) + x1");
        let r = functional_dependence_test(&sys, &plan(2, 0.5, 2.0, 100), 1e-6).unwrap();
        assert!(!r.dependent);
        assert!(r.max_spread > 1e-3);
    }

    #[test]
    fn too_few_points() {
        let sys = dissipative();
        let err = functional_dependence_test(&sys, &plan(2, 0.5, 2.0, 5), 1e-6).unwrap_err();
        assert!(matches!(err, TheoremError::InsufficientSamples { found: 5, .. }));
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LagrangeSystem, TheoremError};
use crate::expr::Expression;
use crate::geometry::{PhasePoint, SemiBasicForm};

/// Box, count and seed for rejection sampling of phase points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    /// `[lo, hi]` for `x1..xn` then `y1..yn`.
    pub bounds: Vec<(f64, f64)>,
    pub count: usize,
    pub seed: u64,
    /// Minimum accepted `|S(L)|`, `|C(L)|` where guarded.
    pub guard: f64,
    /// Largest tolerated fraction of rejected attempts.
    pub max_rejection_ratio: f64,
}

impl SamplePlan {
    pub const DEFAULT_GUARD: f64 = 1e-6;
    pub const DEFAULT_MAX_REJECTION_RATIO: f64 = 0.75;

    pub fn new(bounds: Vec<(f64, f64)>, count: usize, seed: u64) -> Self {
        SamplePlan {
            bounds,
            count,
            seed,
            guard: Self::DEFAULT_GUARD,
            max_rejection_ratio: Self::DEFAULT_MAX_REJECTION_RATIO,
        }
    }

    /// Same interval for every coordinate.
    pub fn uniform(dim: usize, lo: f64, hi: f64, count: usize, seed: u64) -> Self {
        SamplePlan::new(vec![(lo, hi); 2 * dim], count, seed)
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.len() / 2
    }

    pub fn validate(&self) -> Result<(), TheoremError> {
        let bad = |m: String| Err(TheoremError::InvalidPlan(m));
        if self.bounds.is_empty() || !self.bounds.len().is_multiple_of(2) {
            return bad(format!("{} bounds do not describe a phase space", self.bounds.len()));
        }
        for (k, (lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("bound {k} is [{lo}, {hi}]"));
            }
        }
        if self.count == 0 {
            return bad("sample count is zero".into());
        }
        if !(self.guard > 0.0) {
            return bad(format!("guard {} is not positive", self.guard));
        }
        if !(0.0..1.0).contains(&self.max_rejection_ratio) {
            return bad(format!(
                "rejection ratio {} is outside [0, 1)",
                self.max_rejection_ratio
            ));
        }
        Ok(())
    }

    pub fn contains(&self, p: &PhasePoint) -> bool {
        p.x.iter()
            .chain(&p.y)
            .zip(&self.bounds)
            .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Smallest side length of the box.
    pub fn min_width(&self) -> f64 {
        self.bounds
            .iter()
            .map(|(lo, hi)| hi - lo)
            .fold(f64::INFINITY, f64::min)
    }

    /// Maximum number of attempts before giving up.
    pub fn budget(&self) -> usize {
        (self.count as f64 / (1.0 - self.max_rejection_ratio)).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<PhasePoint>,
    pub rejected: usize,
}

/// Draw `plan.count` points accepted by `accept`, deterministically in the
/// seed.
pub fn draw_samples<F>(plan: &SamplePlan, mut accept: F) -> Result<SampleSet, TheoremError>
where
    F: FnMut(&PhasePoint) -> bool,
{
    plan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let n = plan.dim();
    let budget = plan.budget();
    let mut points = Vec::with_capacity(plan.count);
    let mut attempted = 0;
    while points.len() < plan.count {
        if attempted - points.len() > budget - plan.count {
            return Err(TheoremError::TooManyRejections {
                accepted: points.len(),
                attempted,
                required: plan.count,
            });
        }
        attempted += 1;
        let flat: Vec<f64> = plan
            .bounds
            .iter()
            .map(|&(lo, hi)| rng.gen_range(lo..hi))
            .collect();
        let p = PhasePoint::new(flat[..n].to_vec(), flat[n..].to_vec());
        if accept(&p) {
            points.push(p);
        }
    }
    Ok(SampleSet {
        rejected: attempted - points.len(),
        points,
    })
}

/// Acceptance rule: every field of the system evaluates, extra expressions
/// evaluate, and the selected hypotheses of the first theorem hold.
#[derive(Debug, Clone, Default)]
pub struct Guards {
    pub spray_lagrangian: bool,
    pub liouville: bool,
    extra: Vec<Expression>,
}

impl Guards {
    /// Evaluability only.
    pub fn none() -> Self {
        Guards::default()
    }

    /// `|C(L)| > ε_g`.
    pub fn liouville() -> Self {
        Guards {
            liouville: true,
            ..Guards::default()
        }
    }

    /// `|S(L)| > ε_g` and `|C(L)| > ε_g`.
    pub fn full() -> Self {
        Guards {
            spray_lagrangian: true,
            liouville: true,
            extra: Vec::new(),
        }
    }

    pub fn with_expr(mut self, e: &Expression) -> Self {
        self.extra.push(e.clone());
        self
    }

    pub fn with_form(mut self, form: &SemiBasicForm) -> Self {
        self.extra.extend(form.components().iter().cloned());
        self
    }

    pub fn accepts(&self, system: &LagrangeSystem, p: &PhasePoint, guard: f64) -> bool {
        let b = p.binding();
        let ok = |e: &Expression| e.eval(&b).is_ok();
        let above = |e: &Expression| e.eval(&b).map(|v| v.abs() > guard).unwrap_or(false);
        if self.spray_lagrangian && !above(&system.spray_lagrangian) {
            return false;
        }
        if self.liouville && !above(&system.liouville) {
            return false;
        }
        let n = system.dim();
        ok(system.lagrangian.expr())
            && ok(&system.liouville)
            && ok(&system.spray_lagrangian)
            && ok(&system.spray_energy)
            && system.vertical.components().iter().all(ok)
            && system.lagrange.components().iter().all(ok)
            && system.position_gradient.iter().all(ok)
            && (0..n).all(|i| (i..n).all(|j| ok(system.hessian.entry(i, j))))
            && self.extra.iter().all(ok)
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let sys = dissipative();
        let plan = plan(2, 0.5, 2.0, 40);
        let a = draw_samples(&plan, |p| Guards::full().accepts(&sys, p, 1e-6)).unwrap();
        let b = draw_samples(&plan, |p| Guards::full().accepts(&sys, p, 1e-6)).unwrap();
        assert_eq!(a, b);
        let c = draw_samples(&plan.clone().with_seed(8), |p| {
            Guards::full().accepts(&sys, p, 1e-6)
        })
        .unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn dissipative_acceptance_is_high() {
        let sys = dissipative();
        let s = draw_samples(&plan(2, 0.5, 2.0, 1000), |p| {
            Guards::full().accepts(&sys, p, 1e-6)
        })
        .unwrap();
        let ratio = 1000.0 / (1000 + s.rejected) as f64;
        assert!(ratio > 0.9, "acceptance {ratio}");
        assert!(s.points.iter().all(|p| plan(2, 0.5, 2.0, 1).contains(p)));
    }

    #[test]
    fn free_particle_is_rejected_everywhere() {
        let sys = system(&["0", "0"], "0.5*(y1^2 + y2^2)");
        let err = draw_samples(&plan(2, 1.0, 2.0, 20), |p| Guards::full().accepts(&sys, p, 1e-6))
            .unwrap_err();
        assert!(matches!(err, TheoremError::TooManyRejections { accepted: 0, .. }));
    }

    #[test]
    fn invalid_plans() {
        let mut p = plan(1, 0.0, 1.0, 5);
        p.bounds[1] = (1.0, 1.0);
        assert!(p.validate().is_err());
        assert!(plan(1, 0.0, 1.0, 0).validate().is_err());
        assert!(plan(1, 0.0, 1.0, 3).with_guard(0.0).validate().is_err());
    }
}

//! Sampled checks of the deformation conditions.
//!
//! Every check draws points from a [`SamplePlan`], rejects points where the
//! hypotheses of the check do not hold (vanishing `S(L)`, `C(L)`, or an
//! expression outside its domain), and aggregates per-point residuals into a
//! [`ConditionReport`].

mod classify;
mod dependence;
mod dissipative;
mod hessian;
mod homogeneous;
mod sampling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{evaluate_dual, EvalError, Expression};
use crate::geometry::{
    self, contract_with_spray, lagrange_differential, position_var, velocity_var,
    vertical_differential, FiberHessian, GeometryError, PhasePoint, ScalarField, SemiBasicForm,
    SemiSpray,
};

pub use classify::{classify, DeformationClass, FamilyResidual, FunctionalFit};
pub(crate) use classify::round_param;
pub use dependence::{functional_dependence_test, DependenceReport, MIN_CLOUD};
pub use dissipative::{check_dissipative, DissipativeReport, RayleighReport};
pub use hessian::{hessian_report, numerical_rank, HessianReport, RANK_CUTOFF};
pub use homogeneous::{check_homogeneous, HomogeneousReport};
pub use sampling::{draw_samples, Guards, SamplePlan, SampleSet};

#[derive(Debug, Clone, Error)]
pub enum TheoremError {
    #[error("invalid sample plan: {0}")]
    InvalidPlan(String),
    #[error("too many rejected samples: accepted {accepted} of {attempted} attempts, needed {required}")]
    TooManyRejections {
        accepted: usize,
        attempted: usize,
        required: usize,
    },
    #[error("guard violated: |{quantity}| = {value:e} is below the threshold")]
    GuardViolation { quantity: &'static str, value: f64 },
    #[error("insufficient samples: {found} usable, {required} required")]
    InsufficientSamples { found: usize, required: usize },
    #[error("hypotheses of the homogeneous check fail: {reason}")]
    NotHomogeneous {
        reason: String,
        lagrangian_degree: Option<f64>,
        sigma_degree: Option<f64>,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Default tolerances, overridable per problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Pointwise identities: σ-condition, deformed Euler-Lagrange, dissipative.
    pub identity: f64,
    /// Residual below which a family fit is accepted.
    pub classification: f64,
    /// Spread of `f_raw` along level sets of `L`.
    pub dependence: f64,
    /// `d_J L ∧ σ` in the homogeneous check.
    pub wedge: f64,
    /// Finite-difference Euler-Lagrange residual along trajectories.
    pub trajectory: f64,
    /// Drift of the deformed energy along trajectories.
    pub energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-9,
            classification: 1e-6,
            dependence: 1e-6,
            wedge: 1e-10,
            trajectory: 1e-4,
            energy: 1e-6,
        }
    }
}

/// Outcome of one sampled condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub accepted: usize,
    pub rejected: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub worst_point: Option<PhasePoint>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Running max/mean of per-point residuals, reduced in sample order.
#[derive(Debug, Default)]
pub(crate) struct ResidualAccumulator {
    sum: f64,
    count: usize,
    max: f64,
    worst: Option<PhasePoint>,
}

impl ResidualAccumulator {
    pub(crate) fn push(&mut self, point: &PhasePoint, residual: f64) {
        self.sum += residual;
        self.count += 1;
        if self.worst.is_none() || residual > self.max {
            self.max = residual;
            self.worst = Some(point.clone());
        }
    }

    pub(crate) fn finish(
        self,
        condition: &str,
        rejected: usize,
        tolerance: f64,
    ) -> ConditionReport {
        let mean = if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        };
        ConditionReport {
            condition: condition.to_string(),
            accepted: self.count,
            rejected,
            max_residual: self.max,
            mean_residual: mean,
            worst_point: self.worst,
            tolerance,
            passed: self.max <= tolerance,
        }
    }
}

/// A semi-spray and a Lagrangian with every derived field precomputed.
#[derive(Debug, Clone)]
pub struct LagrangeSystem {
    pub spray: SemiSpray,
    pub lagrangian: ScalarField,
    /// `C(L)`
    pub liouville: Expression,
    /// `S(L)`
    pub spray_lagrangian: Expression,
    /// `E_L`
    pub energy: Expression,
    /// `S(E_L)`
    pub spray_energy: Expression,
    /// `d_J L`
    pub vertical: SemiBasicForm,
    /// `δ_S L`
    pub lagrange: SemiBasicForm,
    /// `∂L/∂x^i`
    pub position_gradient: Vec<Expression>,
    pub hessian: FiberHessian,
}

impl LagrangeSystem {
    pub fn new(spray: SemiSpray, lagrangian: ScalarField) -> Result<Self, GeometryError> {
        let energy = geometry::energy(&lagrangian);
        let spray_lagrangian = geometry::spray_apply(&spray, &lagrangian)?;
        let spray_energy = geometry::spray_apply(&spray, &energy)?;
        let vertical = vertical_differential(&lagrangian);
        let lagrange = lagrange_differential(&spray, &lagrangian)?;
        let liouville = contract_with_spray(&spray, &vertical)?;
        let position_gradient = (0..lagrangian.dim()).map(|i| lagrangian.d_position(i)).collect();
        let hessian = geometry::fiber_hessian(&lagrangian);
        Ok(LagrangeSystem {
            liouville: liouville.expr().clone(),
            spray_lagrangian: spray_lagrangian.expr().clone(),
            energy: energy.expr().clone(),
            spray_energy: spray_energy.expr().clone(),
            vertical,
            lagrange,
            position_gradient,
            hessian,
            spray,
            lagrangian,
        })
    }

    pub fn dim(&self) -> usize {
        self.lagrangian.dim()
    }

    pub fn lagrangian_at(&self, p: &PhasePoint) -> Result<f64, EvalError> {
        self.lagrangian.eval(p)
    }

    /// `−S(E_L) / (S(L)·C(L))` at `p`.
    pub fn f_raw(&self, p: &PhasePoint, guard: f64) -> Result<f64, TheoremError> {
        let b = p.binding();
        let sl = self.spray_lagrangian.eval(&b)?;
        let cl = self.liouville.eval(&b)?;
        let se = self.spray_energy.eval(&b)?;
        f_raw_from(sl, cl, se, guard)
    }

    /// Same quantity with every first derivative taken by dual numbers.
    ///
    /// `S(E_L)` differentiates the energy expression forward-mode; the only
    /// symbolic step left is the `C(L)` inside `E_L`.
    pub fn f_raw_forward(&self, p: &PhasePoint, guard: f64) -> Result<f64, TheoremError> {
        let b = p.binding();
        let n = self.dim();
        let g = self.spray.acceleration(p)?;
        let directional = |e: &Expression| -> Result<(f64, f64), EvalError> {
            let mut along_spray = 0.0;
            let mut along_fiber = 0.0;
            for i in 0..n {
                let (_, dx) = evaluate_dual(e, &b, &position_var(i))?;
                let (_, dy) = evaluate_dual(e, &b, &velocity_var(i))?;
                along_spray += p.y[i] * dx + g[i] * dy;
                along_fiber += p.y[i] * dy;
            }
            Ok((along_spray, along_fiber))
        };
        let (sl, cl) = directional(self.lagrangian.expr())?;
        let (se, _) = directional(&self.energy)?;
        f_raw_from(sl, cl, se, guard)
    }
}

fn f_raw_from(sl: f64, cl: f64, se: f64, guard: f64) -> Result<f64, TheoremError> {
    if sl.abs() <= guard {
        return Err(TheoremError::GuardViolation {
            quantity: "S(L)",
            value: sl,
        });
    }
    if cl.abs() <= guard {
        return Err(TheoremError::GuardViolation {
            quantity: "C(L)",
            value: cl,
        });
    }
    Ok(-se / (sl * cl))
}

/// Condition (i): `σ = (S(E_L)/C(L))·d_J L`, componentwise relative residual
/// `|σ_i − (S(E_L)/C(L))·∂L/∂y^i| / (1 + |σ_i|)`.
pub fn check_sigma_condition(
    system: &LagrangeSystem,
    sigma: &SemiBasicForm,
    plan: &SamplePlan,
    tol: f64,
) -> Result<ConditionReport, TheoremError> {
    if sigma.dim() != system.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: system.dim(),
            found: sigma.dim(),
        }
        .into());
    }
    let guards = Guards::liouville().with_form(sigma);
    let samples = draw_samples(plan, |p| guards.accepts(system, p, plan.guard))?;
    let mut acc = ResidualAccumulator::default();
    for p in &samples.points {
        let b = p.binding();
        let ratio = system.spray_energy.eval(&b)? / system.liouville.eval(&b)?;
        let s = sigma.eval(p)?;
        let dj = system.vertical.eval(p)?;
        let r = s
            .iter()
            .zip(&dj)
            .map(|(si, li)| (si - ratio * li).abs() / (1.0 + si.abs()))
            .fold(0.0, f64::max);
        acc.push(p, r);
    }
    Ok(acc.finish("sigma-condition", samples.rejected, tol))
}

/// Agreement of a supplied force form with the Lagrange defect `δ_S L`,
/// relative residual `|σ_i − (δ_S L)_i| / (1 + |σ_i|)`.
pub fn check_sigma_consistency(
    system: &LagrangeSystem,
    sigma: &SemiBasicForm,
    plan: &SamplePlan,
    tol: f64,
) -> Result<ConditionReport, TheoremError> {
    let guards = Guards::none().with_form(sigma);
    let samples = draw_samples(plan, |p| guards.accepts(system, p, plan.guard))?;
    let mut acc = ResidualAccumulator::default();
    for p in &samples.points {
        let s = sigma.eval(p)?;
        let d = system.lagrange.eval(p)?;
        let r = s
            .iter()
            .zip(&d)
            .map(|(si, di)| (si - di).abs() / (1.0 + si.abs()))
            .fold(0.0, f64::max);
        acc.push(p, r);
    }
    Ok(acc.finish("sigma-consistency", samples.rejected, tol))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::expr::parse;
    use crate::geometry::coordinate_names;

    pub fn system(spray: &[&str], lagrangian: &str) -> LagrangeSystem {
        let n = spray.len();
        let names = coordinate_names(n);
        let g = spray.iter().map(|s| parse(s, &names).unwrap()).collect();
        let l = parse(lagrangian, &names).unwrap();
        LagrangeSystem::new(SemiSpray::new(g).unwrap(), ScalarField::new(n, l).unwrap()).unwrap()
    }

    pub fn form(components: &[&str]) -> SemiBasicForm {
        let n = components.len();
        let names = coordinate_names(n);
        SemiBasicForm::new(n, components.iter().map(|s| parse(s, &names).unwrap()).collect())
            .unwrap()
    }

    pub fn dissipative() -> LagrangeSystem {
        system(&["0.5*(x1 + x2 + y1)", "0.5*(-x1 + x2 - y2)"], "0.5*(y1^2 + y2^2)")
    }

    /// The force form printed alongside the dissipative system.
    pub fn dissipative_sigma() -> SemiBasicForm {
        let k = "(x1*y1 + x2*y1 + y1^2 - x1*y2 + x2*y2 - y2^2)/(y1^2 + y2^2)";
        form(&[&format!("-{k}*y1"), &format!("-{k}*y2")])
    }

    pub fn lienard() -> LagrangeSystem {
        system(&["0.5*(y1 - 2*x1)"], "(y1 + 2*x1)^2")
    }

    pub fn plan(dim: usize, lo: f64, hi: f64, count: usize) -> SamplePlan {
        SamplePlan::uniform(dim, lo, hi, count, 7)
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn pt(x: &[f64], y: &[f64]) -> PhasePoint {
        PhasePoint::new(x.to_vec(), y.to_vec())
    }

    #[test]
    fn f_raw_dissipative_point() {
        let sys = dissipative();
        let f = sys.f_raw(&pt(&[1.0, 0.0], &[2.0, 1.0]), 1e-6).unwrap();
        assert!((f + 0.2).abs() < 1e-15);
    }

    #[test]
    fn f_raw_lienard_point() {
        let sys = lienard();
        let f = sys.f_raw(&pt(&[1.0], &[1.0]), 1e-6).unwrap();
        assert!((f - 1.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn f_raw_exp_class_is_constant() {
        let sys = system(
            &["0", "0", "0.5*x1*y1"],
            "1 + ln(x1*y1 + x2*y2 + x3*y3 + y1^2 + y2^2 - 0.1)",
        );
        let plan = plan(3, 0.5, 2.0, 50);
        let s = draw_samples(&plan, |p| Guards::full().accepts(&sys, p, 1e-6)).unwrap();
        for p in &s.points {
            assert!((sys.f_raw(p, 1e-6).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn f_raw_guard() {
        let sys = system(&["0", "0"], "0.5*(y1^2 + y2^2)");
        assert!(matches!(
            sys.f_raw(&pt(&[1.0, 1.0], &[1.0, 1.0]), 1e-6),
            Err(TheoremError::GuardViolation { quantity: "S(L)", .. })
        ));
    }

    #[test]
    fn f_raw_forward_mode_agrees() {
        let sys = dissipative();
        let plan = plan(2, 0.5, 2.0, 100);
        let s = draw_samples(&plan, |p| Guards::full().accepts(&sys, p, 1e-6)).unwrap();
        for p in &s.points {
            let a = sys.f_raw(p, 1e-6).unwrap();
            let b = sys.f_raw_forward(p, 1e-6).unwrap();
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn sigma_condition_dissipative_printed_form() {
        let sys = dissipative();
        let r = check_sigma_condition(&sys, &dissipative_sigma(), &plan(2, 0.5, 2.0, 500), 1e-9)
            .unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.max_residual <= 1e-10);
        assert_eq!(r.accepted, 500);
    }

    #[test]
    fn sigma_condition_detects_perturbation() {
        let sys = dissipative();
        let k = "(x1*y1 + x2*y1 + y1^2 - x1*y2 + x2*y2 - y2^2)/(y1^2 + y2^2)";
        let bad = form(&[&format!("-{k}*y1 + 0.1"), &format!("-{k}*y2")]);
        let r = check_sigma_condition(&sys, &bad, &plan(2, 0.5, 2.0, 200), 1e-9).unwrap();
        assert!(!r.passed);
        assert!(r.max_residual > 0.01);
    }

    #[test]
    fn sigma_condition_vacuous_for_conservative() {
        let sys = system(&["0", "0"], "0.5*(y1^2 + y2^2)");
        let r = check_sigma_condition(&sys, &SemiBasicForm::zero(2), &plan(2, 1.0, 2.0, 50), 1e-9)
            .unwrap();
        assert!(r.passed);
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn lienard_sigma_is_lagrange_defect() {
        let sys = lienard();
        let sigma = form(&["-2*(y1 + 2*x1)"]);
        let r = check_sigma_consistency(&sys, &sigma, &plan(1, 0.5, 2.0, 100), 1e-9).unwrap();
        assert!(r.passed);
        let r = check_sigma_condition(&sys, &sigma, &plan(1, 0.5, 2.0, 100), 1e-9).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn printed_dissipative_form_differs_from_defect() {
        let sys = dissipative();
        let r = check_sigma_consistency(&sys, &dissipative_sigma(), &plan(2, 0.5, 2.0, 100), 1e-9)
            .unwrap();
        assert!(!r.passed);
    }
}

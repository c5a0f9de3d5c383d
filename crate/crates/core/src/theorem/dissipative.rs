use serde::{Deserialize, Serialize};

use super::{draw_samples, ConditionReport, Guards, LagrangeSystem, ResidualAccumulator, SamplePlan, TheoremError};
use crate::geometry::{homogeneity_degree, liouville_apply, vertical_differential, ScalarField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayleighReport {
    /// `|S(E_L) − 2D| / (1 + |S(E_L)|)`.
    pub balance: ConditionReport,
    /// `D < 0` at every sample.
    pub negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativeReport {
    /// `δ_S L = d_J D`, relative residual `|δ_i − ∂D/∂y^i| / (1 + |δ_i|)`.
    pub force_is_vertical_differential: ConditionReport,
    /// `S(E_L) = C(D)`, relative residual `|S(E_L) − C(D)| / (1 + |S(E_L)|)`.
    pub energy_balance: ConditionReport,
    /// Present when `D` is fiber-homogeneous of degree 2.
    pub rayleigh: Option<RayleighReport>,
}

/// Dissipative structure `σ = d_J D` of the Lagrange defect.
pub fn check_dissipative(
    system: &LagrangeSystem,
    dissipation: &ScalarField,
    plan: &SamplePlan,
    tol: f64,
) -> Result<DissipativeReport, TheoremError> {
    let dj = vertical_differential(dissipation);
    let cd = liouville_apply(dissipation);
    let guards = Guards::none()
        .with_expr(dissipation.expr())
        .with_expr(cd.expr())
        .with_form(&dj);
    let samples = draw_samples(plan, |p| guards.accepts(system, p, plan.guard))?;

    let degree = homogeneity_degree(std::slice::from_ref(dissipation.expr()), &samples.points);
    let rayleigh = degree.is_some_and(|p| (p - 2.0).abs() <= 1e-9);

    let mut force = ResidualAccumulator::default();
    let mut balance = ResidualAccumulator::default();
    let mut twice = ResidualAccumulator::default();
    let mut negative = true;
    for p in &samples.points {
        let b = p.binding();
        let delta = system.lagrange.eval(p)?;
        let d = dj.eval(p)?;
        let r = delta
            .iter()
            .zip(&d)
            .map(|(a, b)| (a - b).abs() / (1.0 + a.abs()))
            .fold(0.0, f64::max);
        force.push(p, r);
        let se = system.spray_energy.eval(&b)?;
        let c = cd.expr().eval(&b)?;
        balance.push(p, (se - c).abs() / (1.0 + se.abs()));
        if rayleigh {
            let dv = dissipation.expr().eval(&b)?;
            twice.push(p, (se - 2.0 * dv).abs() / (1.0 + se.abs()));
            negative &= dv < 0.0;
        }
    }
    Ok(DissipativeReport {
        force_is_vertical_differential: force.finish("dissipative-force", samples.rejected, tol),
        energy_balance: balance.finish("dissipative-energy", samples.rejected, tol),
        rayleigh: rayleigh.then(|| RayleighReport {
            balance: twice.finish("rayleigh-balance", samples.rejected, tol),
            negative,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::expr::parse;
    use crate::geometry::coordinate_names;

    fn field(dim: usize, src: &str) -> ScalarField {
        ScalarField::new(dim, parse(src, &coordinate_names(dim)).unwrap()).unwrap()
    }

    const DISSIPATION: &str = "-(x1*y1 + x2*y2) + (x1*y2 - x2*y1) + 0.5*(y2^2 - y1^2)";

    #[test]
    fn printed_dissipation_function() {
        let r = check_dissipative(&dissipative(), &field(2, DISSIPATION), &plan(2, 0.5, 2.0, 200), 1e-9)
            .unwrap();
        assert!(r.force_is_vertical_differential.passed);
        assert!(r.energy_balance.passed);
        assert!(r.rayleigh.is_none());
    }

    #[test]
    fn zero_dissipation_for_conservative_system() {
        let sys = system(&["0", "0"], "0.5*(y1^2 + y2^2)");
        let r = check_dissipative(&sys, &field(2, "0"), &plan(2, 0.5, 2.0, 50), 1e-9).unwrap();
        assert!(r.force_is_vertical_differential.passed && r.energy_balance.passed);
        assert_eq!(r.force_is_vertical_differential.max_residual, 0.0);
    }

    #[test]
    fn perturbed_dissipation_fails_force_check() {
        let d = field(2, &format!("{DISSIPATION} + x1*y1"));
        let r = check_dissipative(&dissipative(), &d, &plan(2, 0.5, 2.0, 100), 1e-9).unwrap();
        assert!(!r.force_is_vertical_differential.passed);
    }

    #[test]
    fn rayleigh_dissipation() {
        let sys = system(&["0.5*y1", "0.5*y2"], "0.5*(y1^2 + y2^2)");
        let r = check_dissipative(&sys, &field(2, "-0.5*(y1^2 + y2^2)"), &plan(2, 0.2, 2.0, 100), 1e-9)
            .unwrap();
        assert!(r.force_is_vertical_differential.passed && r.energy_balance.passed);
        let ray = r.rayleigh.unwrap();
        assert!(ray.balance.passed && ray.negative);
    }
}

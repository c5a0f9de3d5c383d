use serde::{Deserialize, Serialize};

use super::{draw_samples, ConditionReport, DeformationClass, Guards, LagrangeSystem, ResidualAccumulator, SamplePlan, TheoremError};
use crate::geometry::{homogeneity_degree, is_spray, SemiBasicForm};

const TRIVIAL_ENTRY: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousReport {
    pub lagrangian_degree: f64,
    pub sigma_degree: f64,
    pub spray: bool,
    /// Max over `i < j` of `|∂L/∂y^i·σ_j − ∂L/∂y^j·σ_i|`.
    pub wedge: ConditionReport,
    /// `Φ = L^{1/p}`, the canonical member of `aL^{1/p} + b`.
    pub deformation: DeformationClass,
    /// Whether `((1−p)/p)·L_i·L_j + L·g_ij` is non-zero somewhere.
    pub nontrivial: bool,
}

/// Homogeneous variant: for `L`, `σ` of common degree `p > 1` and a spray,
/// test `d_J L ∧ σ = 0` and prescribe `Φ = L^{1/p}`.
pub fn check_homogeneous(
    system: &LagrangeSystem,
    sigma: &SemiBasicForm,
    plan: &SamplePlan,
    tol: f64,
) -> Result<HomogeneousReport, TheoremError> {
    let guards = Guards::none().with_form(sigma);
    let samples = draw_samples(plan, |p| {
        guards.accepts(system, p, plan.guard)
            && !p.velocity_is_zero()
            && system.lagrangian_at(p).is_ok_and(|l| l > plan.guard)
    })?;
    let points = &samples.points;

    let fail = |reason: String, l: Option<f64>, s: Option<f64>| TheoremError::NotHomogeneous {
        reason,
        lagrangian_degree: l,
        sigma_degree: s,
    };

    let p_l = homogeneity_degree(std::slice::from_ref(system.lagrangian.expr()), points);
    let sigma_vanishes = points
        .iter()
        .all(|p| sigma.eval(p).is_ok_and(|v| v.iter().all(|c| *c == 0.0)));
    let p_s = if sigma_vanishes {
        p_l
    } else {
        homogeneity_degree(sigma.components(), points)
    };
    let Some(p) = p_l else {
        return Err(fail("L is not fiber-homogeneous".into(), p_l, p_s));
    };
    if (p - 1.0).abs() <= 1e-9 {
        return Err(fail(
            "degree 1: E_L vanishes, so only σ = 0 is admissible".into(),
            p_l,
            p_s,
        ));
    }
    if p < 1.0 {
        return Err(fail(format!("degree {p} is not above 1"), p_l, p_s));
    }
    match p_s {
        Some(q) if (q - p).abs() <= 1e-9 * (1.0 + p.abs()) => {}
        _ => return Err(fail("σ is not homogeneous of the degree of L".into(), p_l, p_s)),
    }
    let spray = is_spray(&system.spray, points);
    if !spray {
        return Err(fail("the semi-spray is not 2-homogeneous".into(), p_l, p_s));
    }

    let n = system.dim();
    let mut acc = ResidualAccumulator::default();
    let mut nontrivial = false;
    for pt in points {
        let lj = system.vertical.eval(pt)?;
        let s = sigma.eval(pt)?;
        let mut wedge: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                wedge = wedge.max((lj[i] * s[j] - lj[j] * s[i]).abs());
            }
        }
        acc.push(pt, wedge);
        if !nontrivial {
            let l = system.lagrangian_at(pt)?;
            let g = system.hessian.eval(pt)?;
            let k = (1.0 - p) / p;
            nontrivial = (0..n).any(|i| {
                (0..n).any(|j| (k * lj[i] * lj[j] + l * g[(i, j)]).abs() > TRIVIAL_ENTRY)
            });
        }
    }
    Ok(HomogeneousReport {
        lagrangian_degree: p,
        sigma_degree: p_s.unwrap_or(p),
        spray,
        wedge: acc.finish("theorem2-wedge", samples.rejected, tol),
        deformation: DeformationClass::HomogeneousRoot { p },
        nontrivial,
    })
}

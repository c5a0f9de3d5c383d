//! check → dependence → classify → synthesize → verify → simulate.

use std::collections::BTreeMap;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::problem::Problem;
use crate::deform::{
    deformed_hessian, synthesize, verify_deformed_el, ClosedForm, Deformation, DeformedLagrangian, VerifyReport,
};
use crate::dynamics::{
    dissipation_along, el_residual_along, energy_along, integrate_geodesic, IntegratorConfig,
    TrajectoryLagrangian,
};
use crate::expr::Expression;
use crate::theorem::round_param;
use crate::geometry::{homogeneity_degree, is_spray, PhasePoint, SemiBasicForm};
use crate::theorem::{
    check_dissipative, check_homogeneous, check_sigma_condition, check_sigma_consistency,
    classify, draw_samples, functional_dependence_test, hessian_report, ConditionReport,
    DeformationClass, DissipativeReport, FunctionalFit, Guards, HessianReport, HomogeneousReport,
    TheoremError, Tolerances,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    DeformableRegular,
    DeformableSingular,
    NotOfTheoremForm,
    ConservativeAffineOnly,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::DeformableRegular
            | Verdict::DeformableSingular
            | Verdict::ConservativeAffineOnly => 0,
            Verdict::NotOfTheoremForm => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

/// How far the pipeline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Everything up to the deformed Euler-Lagrange check.
    Analyze,
    /// Additionally integrate a geodesic and check it.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemEcho {
    pub name: String,
    pub dim: usize,
    pub params: BTreeMap<String, f64>,
    pub spray: Vec<String>,
    pub lagrangian: String,
    pub sigma: Option<Vec<String>>,
    pub dissipation: Option<String>,
    pub seed: u64,
    pub samples: usize,
    /// `supplied` or `lagrange-defect`.
    pub sigma_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceSummary {
    pub dependent: bool,
    pub max_spread: f64,
    pub tolerance: f64,
    pub pairs: usize,
    pub cloud_points: usize,
    pub l_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationSummary {
    pub family: String,
    /// Closed-form class, absent for numeric deformations.
    pub class: Option<DeformationClass>,
    /// `Φ(t)` for closed forms.
    pub formula: Option<String>,
    pub interval: (f64, f64),
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneitySummary {
    pub lagrangian_degree: Option<f64>,
    pub declared_degree: Option<f64>,
    pub spray: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Summary {
    pub report: Option<HomogeneousReport>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationTrace {
    pub balance_max: f64,
    pub rayleigh: bool,
    pub rayleigh_max: Option<f64>,
    pub negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub initial: PhasePoint,
    pub step: f64,
    pub horizon: f64,
    pub states: usize,
    pub truncated: bool,
    pub el_residual_raw: Option<f64>,
    pub el_residual_deformed: Option<f64>,
    pub energy_drift_raw: f64,
    pub raw_energy_decreasing: bool,
    pub energy_drift_deformed: Option<f64>,
    pub energy_tolerance: f64,
    pub trajectory_tolerance: f64,
    pub dissipation: Option<DissipationTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub problem: ProblemEcho,
    pub tolerances: Tolerances,
    pub sigma_consistency: Option<ConditionReport>,
    pub sigma_condition: Option<ConditionReport>,
    pub dependence: Option<DependenceSummary>,
    pub fit: Option<FunctionalFit>,
    pub deformation: Option<DeformationSummary>,
    pub verify: Option<VerifyReport>,
    pub hessian_lagrangian: Option<HessianReport>,
    pub hessian_deformed: Option<HessianReport>,
    pub homogeneity: HomogeneitySummary,
    pub theorem2: Option<Theorem2Summary>,
    pub dissipative: Option<DissipativeReport>,
    pub trajectory: Option<TrajectorySummary>,
    pub note: Option<String>,
    pub diagnostics: Vec<String>,
    pub verdict: Verdict,
}

/// Everything a run produces, including objects that are not serialized.
pub struct PipelineRun {
    pub report: ReportDocument,
    pub deformation: Option<Deformation>,
}

impl PipelineRun {
    pub fn deformed(&self, problem: &Problem) -> Option<DeformedLagrangian> {
        self.deformation
            .as_ref()
            .map(|d| DeformedLagrangian::new(problem.system.clone(), d.clone()))
    }
}

fn echo(problem: &Problem) -> ProblemEcho {
    let s = &problem.spec;
    ProblemEcho {
        name: s.name.clone(),
        dim: s.dim,
        params: s.params.clone(),
        spray: s.spray.clone(),
        lagrangian: s.lagrangian.clone(),
        sigma: s.sigma.clone(),
        dissipation: s.dissipation.clone(),
        seed: problem.plan.seed,
        samples: problem.plan.count,
        sigma_source: if s.sigma.is_some() {
            "supplied".into()
        } else {
            "lagrange-defect".into()
        },
    }
}

/// Whether `δ_S L` vanishes on the box.
fn lagrange_defect_vanishes(problem: &Problem, tol: f64) -> Result<bool, TheoremError> {
    let sys = &problem.system;
    let samples = draw_samples(&problem.plan, |p| Guards::none().accepts(sys, p, problem.plan.guard))?;
    for p in &samples.points {
        let d = sys.lagrange.eval(p)?;
        if d.iter().any(|v| v.abs() > tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn run_pipeline(problem: &Problem, mode: Mode) -> PipelineRun {
    let tol = problem.tolerances;
    let sys = &problem.system;
    let plan = &problem.plan;
    let n = sys.dim();
    let mut diagnostics = Vec::new();
    let mut report = ReportDocument {
        problem: echo(problem),
        tolerances: tol,
        sigma_consistency: None,
        sigma_condition: None,
        dependence: None,
        fit: None,
        deformation: None,
        verify: None,
        hessian_lagrangian: None,
        hessian_deformed: None,
        homogeneity: HomogeneitySummary {
            lagrangian_degree: None,
            declared_degree: problem.spec.homogeneity,
            spray: false,
        },
        theorem2: None,
        dissipative: None,
        trajectory: None,
        note: super::corpus::note(&problem.spec.name).map(str::to_string),
        diagnostics: Vec::new(),
        verdict: Verdict::Inconclusive,
    };
    let sigma: SemiBasicForm = problem.sigma.clone().unwrap_or_else(|| sys.lagrange.clone());

    // Condition (i), and agreement of a supplied σ with the Lagrange defect.
    if let Some(s) = &problem.sigma {
        match check_sigma_consistency(sys, s, plan, tol.identity) {
            Ok(r) => report.sigma_consistency = Some(r),
            Err(e) => diagnostics.push(format!("sigma-consistency: {e}")),
        }
    }
    match check_sigma_condition(sys, &sigma, plan, tol.identity) {
        Ok(r) => report.sigma_condition = Some(r),
        Err(e) => diagnostics.push(format!("sigma-condition: {e}")),
    }

    // Reference points without the S(L), C(L) guards, for Hessians and
    // homogeneity.
    let reference = draw_samples(plan, |p| Guards::none().accepts(sys, p, plan.guard));
    let reference = match reference {
        Ok(s) => s.points,
        Err(e) => {
            diagnostics.push(format!("sampling: {e}"));
            Vec::new()
        }
    };
    match hessian_report(n, &reference, |p| sys.hessian.eval(p)) {
        Ok(r) if !reference.is_empty() => report.hessian_lagrangian = Some(r),
        Ok(_) => {}
        Err(e) => diagnostics.push(format!("hessian: {e}")),
    }
    let degree = homogeneity_degree(std::slice::from_ref(sys.lagrangian.expr()), &reference);
    let spray = is_spray(&sys.spray, &reference);
    report.homogeneity.lagrangian_degree = degree;
    report.homogeneity.spray = spray;
    if let (Some(declared), Some(p)) = (problem.spec.homogeneity, degree) {
        if (declared - p).abs() > 1e-9 * (1.0 + p.abs()) {
            diagnostics.push(format!("declared homogeneity {declared} differs from measured {p}"));
        }
    } else if problem.spec.homogeneity.is_some() {
        diagnostics.push("declared homogeneity, but L is not fiber-homogeneous".into());
    }

    // Homogeneous variant.
    match degree {
        Some(p) if p > 1.0 + 1e-9 && spray => {
            report.theorem2 = Some(match check_homogeneous(sys, &sigma, plan, tol.wedge) {
                Ok(r) => Theorem2Summary {
                    report: Some(r),
                    skipped: None,
                },
                Err(e) => Theorem2Summary {
                    report: None,
                    skipped: Some(e.to_string()),
                },
            });
        }
        _ => {}
    }

    if let Some(d) = &problem.dissipation {
        match check_dissipative(sys, d, plan, tol.identity) {
            Ok(r) => report.dissipative = Some(r),
            Err(e) => diagnostics.push(format!("dissipative: {e}")),
        }
    }

    // Dependence, classification, synthesis.
    let mut conservative_path = None;
    let mut deformation = None;
    match functional_dependence_test(sys, plan, tol.dependence) {
        Ok(dep) => {
            let l_range = (
                dep.cloud.first().map_or(0.0, |c| c.0),
                dep.cloud.last().map_or(0.0, |c| c.0),
            );
            report.dependence = Some(DependenceSummary {
                dependent: dep.dependent,
                max_spread: dep.max_spread,
                tolerance: dep.tolerance,
                pairs: dep.pairs,
                cloud_points: dep.cloud.len(),
                l_range,
            });
            let fit = classify(&dep.cloud, tol.classification);
            info!("{}: fitted {}", problem.spec.name, fit.chosen);
            match synthesize(&fit.chosen, l_range) {
                Ok(d) => deformation = Some(d),
                Err(e) => diagnostics.push(format!("synthesize: {e}")),
            }
            report.fit = Some(fit);
        }
        Err(TheoremError::TooManyRejections { .. }) => {
            let conservative = lagrange_defect_vanishes(problem, tol.identity);
            diagnostics.push(
                "S(L) or C(L) vanishes on the box; f = -S(E_L)/(S(L)C(L)) is undefined".into(),
            );
            conservative_path = Some(matches!(conservative, Ok(true)));
            if conservative_path == Some(true) {
                // Only affine deformations remain; report the identity member.
                match synthesize(&DeformationClass::Constant { gamma: 0.0 }, (0.0, 1.0)) {
                    Ok(d) => deformation = Some(d),
                    Err(e) => diagnostics.push(format!("synthesize: {e}")),
                }
            }
        }
        Err(e) => diagnostics.push(format!("dependence: {e}")),
    }

    if let Some(d) = &deformation {
        report.deformation = Some(summarize(d, report.dependence.as_ref()));
        match verify_deformed_el(sys, d, plan, tol.identity) {
            Ok(r) => report.verify = Some(r),
            Err(e) => diagnostics.push(format!("verify: {e}")),
        }
        let deformed = DeformedLagrangian::new(sys.clone(), d.clone());
        let usable: Vec<PhasePoint> = reference
            .iter()
            .filter(|p| deformed.value(p).is_ok())
            .cloned()
            .collect();
        if usable.is_empty() {
            diagnostics.push("deformed hessian: no sample in the domain of Phi".into());
        } else {
            match deformed_hessian(&deformed, &usable) {
                Ok(r) => report.hessian_deformed = Some(r),
                Err(e) => diagnostics.push(format!("deformed hessian: {e}")),
            }
        }
    }

    if mode == Mode::Full {
        let deformed = deformation
            .as_ref()
            .map(|d| DeformedLagrangian::new(sys.clone(), d.clone()));
        match simulate(problem, &reference, deformed.as_ref()) {
            Ok(t) => {
                if t.truncated {
                    diagnostics.push("trajectory left the chart box and was truncated".into());
                }
                report.trajectory = Some(t);
            }
            Err(e) => diagnostics.push(format!("simulate: {e}")),
        }
    }

    report.verdict = decide(&report, conservative_path, n, &mut diagnostics);
    report.diagnostics = diagnostics;
    PipelineRun { report, deformation }
}

fn summarize(d: &Deformation, dep: Option<&DependenceSummary>) -> DeformationSummary {
    match d {
        Deformation::ClosedForm(c) => DeformationSummary {
            family: c.class.family().into(),
            class: Some(c.class.clone()),
            formula: Some(
                ClosedForm {
                    class: c.class.rounded(),
                    scale: round_param(c.scale),
                    shift: round_param(c.shift),
                    interval: c.interval,
                }
                .compose(&Expression::var("t"))
                .to_string(),
            ),
            interval: c.interval,
            grid: None,
        },
        Deformation::Numeric(num) => DeformationSummary {
            family: "Tabulated".into(),
            class: None,
            formula: None,
            interval: dep.map_or(num.interval(), |d| d.l_range),
            grid: Some(num.grid_len()),
        },
    }
}

fn decide(
    r: &ReportDocument,
    conservative_path: Option<bool>,
    n: usize,
    diagnostics: &mut Vec<String>,
) -> Verdict {
    if r.sigma_consistency.as_ref().is_some_and(|c| !c.passed) {
        diagnostics.push("supplied sigma differs from the Lagrange defect of L".into());
        return Verdict::NotOfTheoremForm;
    }
    let Some(cond) = &r.sigma_condition else {
        return Verdict::Inconclusive;
    };
    if !cond.passed {
        return Verdict::NotOfTheoremForm;
    }
    match conservative_path {
        Some(true) => return Verdict::ConservativeAffineOnly,
        Some(false) => return Verdict::Inconclusive,
        None => {}
    }
    let Some(dep) = &r.dependence else {
        return Verdict::Inconclusive;
    };
    if !dep.dependent {
        return Verdict::NotOfTheoremForm;
    }
    if r.deformation.is_none() {
        return Verdict::Inconclusive;
    }
    match &r.verify {
        Some(v) if v.direct.passed => {}
        Some(_) => {
            diagnostics.push("Phi(L) still has a Lagrange defect at the sampled points".into());
            return Verdict::Inconclusive;
        }
        None => return Verdict::Inconclusive,
    }
    match &r.hessian_deformed {
        Some(h) if !h.nontrivial => Verdict::NotOfTheoremForm,
        Some(h) if h.min_rank == n => Verdict::DeformableRegular,
        Some(_) => Verdict::DeformableSingular,
        None => Verdict::Inconclusive,
    }
}

/// Default geodesic step and horizon.
pub const SIMULATION_STEP: f64 = 1e-3;
pub const SIMULATION_HORIZON: f64 = 1.0;
const SIMULATION_CANDIDATES: usize = 200;

/// Integrate from the first sample whose run stays in the chart box (and in
/// the domain of `Φ`), or else from the one that lasts longest.
fn simulate(
    problem: &Problem,
    candidates: &[PhasePoint],
    deformed: Option<&DeformedLagrangian>,
) -> Result<TrajectorySummary, String> {
    let sys = &problem.system;
    let mut best: Option<crate::dynamics::Trajectory> = None;
    for p in candidates.iter().take(SIMULATION_CANDIDATES) {
        let cfg = IntegratorConfig::new(SIMULATION_STEP, SIMULATION_HORIZON, p.clone())
            .within(problem.plan.bounds.clone());
        let Ok(t) = integrate_geodesic(&sys.spray, &cfg) else {
            continue;
        };
        let usable = deformed.is_none_or(|d| t.states.iter().all(|s| d.value(s).is_ok()))
            && t.states.iter().all(|s| sys.energy.eval(&s.binding()).is_ok());
        if !usable {
            continue;
        }
        let done = !t.truncated;
        if best.as_ref().is_none_or(|b| t.len() > b.len()) {
            best = Some(t);
        }
        if done {
            break;
        }
    }
    let Some(traj) = best else {
        return Err("no sample point yields a usable trajectory".into());
    };
    if traj.truncated {
        warn!("{}: every candidate trajectory left the chart box", problem.spec.name);
    }
    let raw = energy_along(&traj, sys).map_err(|e| e.to_string())?;
    let el_raw = el_residual_along(&traj, sys).ok();
    let (drift_def, el_def) = match deformed {
        Some(d) => (
            Some(energy_along(&traj, d as &dyn TrajectoryLagrangian).map_err(|e| e.to_string())?.drift),
            el_residual_along(&traj, d).ok(),
        ),
        None => (None, None),
    };
    let dissipation = match &problem.dissipation {
        Some(d) => {
            let s = dissipation_along(&traj, sys, d).map_err(|e| e.to_string())?;
            Some(DissipationTrace {
                balance_max: s.balance_max,
                rayleigh: s.rayleigh,
                rayleigh_max: s.rayleigh_max,
                negative: s.negative,
            })
        }
        None => None,
    };
    Ok(TrajectorySummary {
        initial: traj.states[0].clone(),
        step: traj.step,
        horizon: traj.times.last().copied().unwrap_or(0.0),
        states: traj.len(),
        truncated: traj.truncated,
        el_residual_raw: el_raw,
        el_residual_deformed: el_def,
        energy_drift_raw: raw.drift,
        raw_energy_decreasing: raw.strictly_decreasing(),
        energy_drift_deformed: drift_def,
        energy_tolerance: problem.tolerances.energy,
        trajectory_tolerance: problem.tolerances.trajectory,
        dissipation,
    })
}

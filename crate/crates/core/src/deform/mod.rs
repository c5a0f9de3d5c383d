//! Construction and verification of the deformation `Φ`.

mod interp;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expression};
use crate::geometry::{lagrange_differential, GeometryError, PhasePoint, ScalarField, SemiBasicForm};
use crate::theorem::{
    draw_samples, hessian_report, ConditionReport, DeformationClass, Guards, HessianReport,
    LagrangeSystem, ResidualAccumulator, SamplePlan, TheoremError, MIN_CLOUD,
};

pub use interp::Hermite;

/// Default grid size for numeric quadrature.
pub const DEFAULT_GRID: usize = 4096;

#[derive(Debug, Clone, Error)]
pub enum DeformError {
    #[error("{family} deformation is not defined on [{lo}, {hi}]: {reason}")]
    DomainConflict {
        family: &'static str,
        lo: f64,
        hi: f64,
        reason: String,
    },
    #[error("insufficient samples: {found} usable, {required} required")]
    InsufficientSamples { found: usize, required: usize },
    #[error("sample abscissae are not strictly increasing")]
    UnsortedCloud,
    #[error("t = {t} lies outside the interval [{lo}, {hi}]")]
    OutOfInterval { t: f64, lo: f64, hi: f64 },
    #[error("{family} deformation cannot be evaluated at t = {t}")]
    Formula { family: &'static str, t: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Theorem(#[from] TheoremError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A closed-form family member `scale·φ(t) + shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub class: DeformationClass,
    pub scale: f64,
    pub shift: f64,
    /// `L`-interval the deformation was synthesized for.
    pub interval: (f64, f64),
}

/// Quadrature of `Φ'' = f·Φ'` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericDeformation {
    /// `Φ` through node values with slopes `Φ'`.
    phi: Hermite,
    /// Monotone interpolant of `Φ'`; its derivative is `Φ''`.
    dphi: Hermite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Deformation {
    ClosedForm(ClosedForm),
    Numeric(NumericDeformation),
}

/// Numerator coefficients `(A, B)` of the canonical Möbius member.
fn moebius_numerator(d: f64) -> (f64, f64) {
    if d != 0.0 {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    }
}

impl ClosedForm {
    /// `(φ, φ', φ'')` of the unscaled family member, `None` outside its domain.
    fn base(&self, t: f64) -> Option<(f64, f64, f64)> {
        let out = match self.class {
            DeformationClass::Constant { gamma } if gamma == 0.0 => (t, 1.0, 0.0),
            DeformationClass::Constant { gamma } => {
                let e = (gamma * t).exp();
                (e / gamma, e, gamma * e)
            }
            DeformationClass::PowerShift { gamma, a } => {
                let u = t + a;
                if u <= 0.0 {
                    return None;
                }
                (
                    u.powf(1.0 + gamma) / (1.0 + gamma),
                    u.powf(gamma),
                    gamma * u.powf(gamma - 1.0),
                )
            }
            DeformationClass::Logarithmic { a } => {
                let u = t + a;
                if u <= 0.0 {
                    return None;
                }
                (u.ln(), 1.0 / u, -1.0 / (u * u))
            }
            DeformationClass::Moebius { c, d } => {
                let (a, b) = moebius_numerator(d);
                let w = c * t + d;
                if w == 0.0 {
                    return None;
                }
                let det = a * d - b * c;
                ((a * t + b) / w, det / (w * w), -2.0 * c * det / (w * w * w))
            }
            DeformationClass::HomogeneousRoot { p } => {
                if t <= 0.0 {
                    return None;
                }
                let q = 1.0 / p;
                (t.powf(q), q * t.powf(q - 1.0), q * (q - 1.0) * t.powf(q - 2.0))
            }
            DeformationClass::Tabulated { .. } => return None,
        };
        (out.0.is_finite() && out.1.is_finite() && out.2.is_finite()).then_some(out)
    }

    pub fn eval(&self, t: f64) -> Option<(f64, f64, f64)> {
        let (v, d1, d2) = self.base(t)?;
        Some((self.scale * v + self.shift, self.scale * d1, self.scale * d2))
    }

    /// `Φ(e)` as an expression.
    pub fn compose(&self, l: &Expression) -> Expression {
        let l = l.clone();
        let base = match self.class {
            DeformationClass::Constant { gamma } if gamma == 0.0 => l,
            DeformationClass::Constant { gamma } => (gamma * l).exp() / gamma,
            DeformationClass::PowerShift { gamma, a } => (l + a).powf(1.0 + gamma) / (1.0 + gamma),
            DeformationClass::Logarithmic { a } => (l + a).ln(),
            DeformationClass::Moebius { c, d } => {
                let (a, b) = moebius_numerator(d);
                (a * l.clone() + b) / (c * l + d)
            }
            DeformationClass::HomogeneousRoot { p } => l.powf(1.0 / p),
            DeformationClass::Tabulated { .. } => unreachable!("tabulated classes are numeric"),
        };
        self.scale * base + self.shift
    }
}

impl NumericDeformation {
    pub fn interval(&self) -> (f64, f64) {
        (self.dphi.lo(), self.dphi.hi())
    }

    pub fn grid_len(&self) -> usize {
        self.dphi.nodes().len()
    }

    /// Smallest and largest node value of `Φ'`.
    pub fn derivative_range(&self) -> (f64, f64) {
        let v = self.dphi.values();
        (
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64), DeformError> {
        let (lo, hi) = self.interval();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(DeformError::OutOfInterval { t, lo, hi });
        }
        let (phi, _) = self.phi.eval(t);
        let (d1, d2) = self.dphi.eval(t);
        Ok((phi, d1, d2))
    }
}

impl Deformation {
    pub fn family(&self) -> &'static str {
        match self {
            Deformation::ClosedForm(c) => c.class.family(),
            Deformation::Numeric(_) => "Tabulated",
        }
    }

    /// `(Φ, Φ', Φ'')` at `t`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64), DeformError> {
        match self {
            Deformation::ClosedForm(c) => c.eval(t).ok_or(DeformError::Formula {
                family: c.class.family(),
                t,
            }),
            Deformation::Numeric(n) => n.eval(t),
        }
    }

    /// `Φ(L)` as a symbolic field, for closed forms.
    pub fn compose(&self, l: &ScalarField) -> Option<ScalarField> {
        match self {
            Deformation::ClosedForm(c) => ScalarField::new(l.dim(), c.compose(l.expr())).ok(),
            Deformation::Numeric(_) => None,
        }
    }
}

/// `(Φ, Φ', Φ'')` at `t`.
pub fn phi_eval(phi: &Deformation, t: f64) -> Result<(f64, f64, f64), DeformError> {
    phi.eval(t)
}

/// Canonical deformation of a class over the `L`-interval `[lo, hi]`.
pub fn synthesize(class: &DeformationClass, interval: (f64, f64)) -> Result<Deformation, DeformError> {
    let (lo, hi) = interval;
    let family = class.family();
    let conflict = |reason: String| DeformError::DomainConflict {
        family,
        lo,
        hi,
        reason,
    };
    let mut scale = 1.0;
    match *class {
        DeformationClass::Constant { .. } => {}
        DeformationClass::PowerShift { gamma, a } => {
            if gamma == 0.0 || gamma == -1.0 {
                return Err(conflict(format!("exponent gamma = {gamma} is excluded")));
            }
            if lo + a <= 0.0 {
                return Err(conflict(format!("L + {a} is not positive")));
            }
        }
        DeformationClass::Logarithmic { a } => {
            if lo + a <= 0.0 {
                return Err(conflict(format!("L + {a} is not positive")));
            }
        }
        DeformationClass::Moebius { c, d } => {
            let (a, b) = moebius_numerator(d);
            let det = a * d - b * c;
            if det == 0.0 {
                return Err(conflict("degenerate coefficients".into()));
            }
            let (wl, wh) = (c * lo + d, c * hi + d);
            if wl == 0.0 || wh == 0.0 || wl.signum() != wh.signum() {
                return Err(conflict(format!("{c}·L + {d} vanishes")));
            }
            scale = det.signum();
        }
        DeformationClass::HomogeneousRoot { p } => {
            if !(p > 0.0) {
                return Err(conflict(format!("degree {p} is not positive")));
            }
            if lo <= 0.0 {
                return Err(conflict("L is not positive".into()));
            }
        }
        DeformationClass::Tabulated { ref samples } => {
            return synthesize_numeric(samples, DEFAULT_GRID);
        }
    }
    let form = ClosedForm {
        class: class.clone(),
        scale,
        shift: 0.0,
        interval,
    };
    for t in [lo, hi] {
        match form.eval(t) {
            Some((_, d1, _)) if d1 > 0.0 => {}
            _ => return Err(conflict(format!("not strictly increasing at {t}"))),
        }
    }
    Ok(Deformation::ClosedForm(form))
}

/// Numeric deformation from sampled `f`: `F = ∫f`, `Φ' = exp F`, `Φ = ∫Φ'`,
/// each by the trapezoid rule on `m` uniform nodes over the sampled range.
pub fn synthesize_numeric(cloud: &[(f64, f64)], m: usize) -> Result<Deformation, DeformError> {
    if cloud.len() < MIN_CLOUD {
        return Err(DeformError::InsufficientSamples {
            found: cloud.len(),
            required: MIN_CLOUD,
        });
    }
    if cloud.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(DeformError::UnsortedCloud);
    }
    let m = m.max(2);
    let f = Hermite::pchip(
        cloud.iter().map(|c| c.0).collect(),
        cloud.iter().map(|c| c.1).collect(),
    );
    let (lo, hi) = (f.lo(), f.hi());
    let h = (hi - lo) / (m - 1) as f64;
    let grid: Vec<f64> = (0..m)
        .map(|j| if j == m - 1 { hi } else { lo + h * j as f64 })
        .collect();
    let fv: Vec<f64> = grid.iter().map(|t| f.eval(*t).0).collect();
    let mut big_f = vec![0.0; m];
    let mut phi = vec![0.0; m];
    let mut dphi = vec![1.0; m];
    for j in 1..m {
        let step = grid[j] - grid[j - 1];
        big_f[j] = big_f[j - 1] + 0.5 * step * (fv[j - 1] + fv[j]);
        dphi[j] = big_f[j].exp();
        phi[j] = phi[j - 1] + 0.5 * step * (dphi[j - 1] + dphi[j]);
    }
    if dphi.iter().any(|v| !(v.is_finite() && *v > 0.0)) || phi.iter().any(|v| !v.is_finite()) {
        return Err(DeformError::DomainConflict {
            family: "Tabulated",
            lo,
            hi,
            reason: "exp of the integrated generator overflows".into(),
        });
    }
    Ok(Deformation::Numeric(NumericDeformation {
        phi: Hermite::with_slopes(grid.clone(), phi, dphi.clone()),
        dphi: Hermite::pchip(grid, dphi),
    }))
}

/// `Φ(L)` with its chain-rule derivatives.
#[derive(Debug, Clone)]
pub struct DeformedLagrangian {
    pub system: LagrangeSystem,
    pub deformation: Deformation,
}

impl DeformedLagrangian {
    pub fn new(system: LagrangeSystem, deformation: Deformation) -> Self {
        DeformedLagrangian {
            system,
            deformation,
        }
    }

    fn phi_at(&self, p: &PhasePoint) -> Result<(f64, f64, f64), DeformError> {
        self.deformation.eval(self.system.lagrangian_at(p)?)
    }

    pub fn value(&self, p: &PhasePoint) -> Result<f64, DeformError> {
        Ok(self.phi_at(p)?.0)
    }

    /// `Φ'(L)·∂L/∂y^i`.
    pub fn momenta(&self, p: &PhasePoint) -> Result<Vec<f64>, DeformError> {
        let (_, d1, _) = self.phi_at(p)?;
        Ok(self.system.vertical.eval(p)?.into_iter().map(|v| d1 * v).collect())
    }

    /// `Φ'(L)·∂L/∂x^i`.
    pub fn position_gradient(&self, p: &PhasePoint) -> Result<Vec<f64>, DeformError> {
        let (_, d1, _) = self.phi_at(p)?;
        let b = p.binding();
        self.system
            .position_gradient
            .iter()
            .map(|g| Ok(d1 * g.eval(&b)?))
            .collect()
    }

    /// `E_{Φ(L)} = Φ'(L)·C(L) − Φ(L)`.
    pub fn energy(&self, p: &PhasePoint) -> Result<f64, DeformError> {
        let (v, d1, _) = self.phi_at(p)?;
        Ok(d1 * self.system.liouville.eval(&p.binding())? - v)
    }

    /// `Φ''·L_{y^i}·L_{y^j} + Φ'·g_ij`.
    pub fn hessian(&self, p: &PhasePoint) -> Result<DMatrix<f64>, DeformError> {
        let (_, d1, d2) = self.phi_at(p)?;
        let lj = nalgebra::DVector::from_vec(self.system.vertical.eval(p)?);
        let g = self.system.hessian.eval(p)?;
        Ok(&lj * lj.transpose() * d2 + g * d1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// `δ_S Φ(L) = 0`, relative residual
    /// `|δ_S Φ(L)_i| / (1 + |Φ''·S(L)·L_{y^i}| + |Φ'·(δ_S L)_i|)`.
    pub direct: ConditionReport,
    /// Same normalization for `Φ''·S(L)·d_J L + Φ'·δ_S L`.
    pub expanded_max: f64,
    /// Largest normalized difference between the two forms.
    pub agreement_max: f64,
}

/// Check that `Φ(L)` has no Lagrange defect for `S` at sampled points.
///
/// Closed forms are composed symbolically and differentiated exactly; numeric
/// deformations use the chain rule pointwise.
pub fn verify_deformed_el(
    system: &LagrangeSystem,
    phi: &Deformation,
    plan: &SamplePlan,
    tol: f64,
) -> Result<VerifyReport, DeformError> {
    let direct_form: Option<SemiBasicForm> = match phi.compose(&system.lagrangian) {
        Some(field) => Some(lagrange_differential(&system.spray, &field)?),
        None => None,
    };
    let guards = match &direct_form {
        Some(f) => Guards::none().with_form(f),
        None => Guards::none(),
    };
    let samples = draw_samples(plan, |p| {
        guards.accepts(system, p, plan.guard)
            && system
                .lagrangian_at(p)
                .is_ok_and(|l| phi.eval(l).is_ok())
    })?;

    let mut acc = ResidualAccumulator::default();
    let mut expanded_max: f64 = 0.0;
    let mut agreement_max: f64 = 0.0;
    for p in &samples.points {
        let b = p.binding();
        let (_, d1, d2) = phi.eval(system.lagrangian_at(p)?)?;
        let sl = system.spray_lagrangian.eval(&b)?;
        let lj = system.vertical.eval(p)?;
        let delta = system.lagrange.eval(p)?;
        let lx: Vec<f64> = system
            .position_gradient
            .iter()
            .map(|g| g.eval(&b))
            .collect::<Result<_, _>>()?;
        let direct: Vec<f64> = match &direct_form {
            Some(f) => f.eval(p)?,
            // S(Φ'(L)·L_{y^i}) − Φ'(L)·L_{x^i} with S(L_{y^i}) = (δ_S L)_i + L_{x^i}.
            None => (0..lj.len())
                .map(|i| d2 * sl * lj[i] + d1 * (delta[i] + lx[i]) - d1 * lx[i])
                .collect(),
        };
        let mut worst: f64 = 0.0;
        for i in 0..lj.len() {
            let first = d2 * sl * lj[i];
            let second = d1 * delta[i];
            let scale = 1.0 + first.abs() + second.abs();
            let expanded = first + second;
            worst = worst.max(direct[i].abs() / scale);
            expanded_max = expanded_max.max(expanded.abs() / scale);
            agreement_max = agreement_max.max((direct[i] - expanded).abs() / scale);
        }
        acc.push(p, worst);
    }
    Ok(VerifyReport {
        direct: acc.finish("deformed-euler-lagrange", samples.rejected, tol),
        expanded_max,
        agreement_max,
    })
}

/// Rank and non-triviality of the fiber Hessian of `Φ(L)` at the points.
pub fn deformed_hessian(
    deformed: &DeformedLagrangian,
    points: &[PhasePoint],
) -> Result<HessianReport, DeformError> {
    hessian_report(deformed.system.dim(), points, |p| deformed.hessian(p))
}

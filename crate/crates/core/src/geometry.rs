//! Coordinate forms of the tangent-bundle operators.
//!
//! A single chart is used throughout: positions are named `x1..xn`, fiber
//! (velocity) coordinates `y1..yn`. Every operator composes expressions; values
//! are only produced when a field is evaluated at a [`PhasePoint`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Binding, EvalError, Expression};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("variable `{name}` is not a coordinate of a {dim}-dimensional chart")]
    ForeignVariable { name: String, dim: usize },
}

pub fn position_var(i: usize) -> String {
    format!("x{}", i + 1)
}

pub fn velocity_var(i: usize) -> String {
    format!("y{}", i + 1)
}

/// `x1..xn` followed by `y1..yn`.
pub fn coordinate_names(dim: usize) -> Vec<String> {
    (0..dim)
        .map(position_var)
        .chain((0..dim).map(velocity_var))
        .collect()
}

fn check_vars(dim: usize, exprs: &[&Expression]) -> Result<(), GeometryError> {
    if dim == 0 {
        return Err(GeometryError::EmptyDimension);
    }
    let names = coordinate_names(dim);
    for e in exprs {
        if let Some(name) = e.variables().into_iter().find(|v| !names.contains(v)) {
            return Err(GeometryError::ForeignVariable { name, dim });
        }
    }
    Ok(())
}

fn check_dim(expected: usize, found: usize) -> Result<(), GeometryError> {
    if expected == found {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, found })
    }
}

/// A point `(x, y)` of the tangent bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len(), "position and velocity lengths differ");
        PhasePoint { x, y }
    }

    /// Split a flat `[x.., y..]` vector.
    pub fn from_flat(flat: &[f64]) -> Self {
        let n = flat.len() / 2;
        PhasePoint::new(flat[..n].to_vec(), flat[n..2 * n].to_vec())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn binding(&self) -> Binding {
        let mut b = Binding::new();
        for (i, v) in self.x.iter().enumerate() {
            b.set(&position_var(i), *v);
        }
        for (i, v) in self.y.iter().enumerate() {
            b.set(&velocity_var(i), *v);
        }
        b
    }

    /// `(x, r·y)`.
    pub fn with_scaled_velocity(&self, r: f64) -> PhasePoint {
        PhasePoint::new(self.x.clone(), self.y.iter().map(|v| r * v).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    pub fn velocity_is_zero(&self) -> bool {
        self.y.iter().all(|v| *v == 0.0)
    }
}

/// A function on the tangent bundle: a Lagrangian, a dissipation function, an
/// energy.
#[derive(Debug, Clone)]
pub struct ScalarField {
    dim: usize,
    expr: Expression,
}

impl ScalarField {
    pub fn new(dim: usize, expr: Expression) -> Result<Self, GeometryError> {
        check_vars(dim, &[&expr])?;
        Ok(ScalarField { dim, expr })
    }

    pub(crate) fn from_parts(dim: usize, expr: Expression) -> Self {
        ScalarField { dim, expr }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn expr(&self) -> &Expression {
        &self.expr
    }

    pub fn eval(&self, p: &PhasePoint) -> Result<f64, EvalError> {
        self.expr.eval(&p.binding())
    }

    pub fn d_position(&self, i: usize) -> Expression {
        self.expr.partial(&position_var(i))
    }

    pub fn d_velocity(&self, i: usize) -> Expression {
        self.expr.partial(&velocity_var(i))
    }
}

/// A semi-basic 1-form `ω_i dx^i`.
#[derive(Debug, Clone)]
pub struct SemiBasicForm {
    components: Vec<Expression>,
}

impl SemiBasicForm {
    pub fn new(dim: usize, components: Vec<Expression>) -> Result<Self, GeometryError> {
        check_dim(dim, components.len())?;
        check_vars(dim, &components.iter().collect::<Vec<_>>())?;
        Ok(SemiBasicForm { components })
    }

    pub(crate) fn from_parts(components: Vec<Expression>) -> Self {
        SemiBasicForm { components }
    }

    pub fn zero(dim: usize) -> Self {
        SemiBasicForm {
            components: vec![Expression::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Expression {
        &self.components[i]
    }

    pub fn eval(&self, p: &PhasePoint) -> Result<Vec<f64>, EvalError> {
        let b = p.binding();
        self.components.iter().map(|c| c.eval(&b)).collect()
    }

    /// Componentwise `self + other`.
    pub fn add(&self, other: &SemiBasicForm) -> Result<SemiBasicForm, GeometryError> {
        check_dim(self.dim(), other.dim())?;
        Ok(SemiBasicForm::from_parts(
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn scale(&self, factor: &Expression) -> SemiBasicForm {
        SemiBasicForm::from_parts(self.components.iter().map(|c| factor * c).collect())
    }
}

/// Second-order vector field `S = y^i ∂/∂x^i − 2G^i ∂/∂y^i`.
///
/// `JS = C` holds by construction in this representation.
#[derive(Debug, Clone)]
pub struct SemiSpray {
    coeffs: Vec<Expression>,
}

impl SemiSpray {
    /// Build from the coefficients `G^i`.
    pub fn new(coeffs: Vec<Expression>) -> Result<Self, GeometryError> {
        check_vars(coeffs.len(), &coeffs.iter().collect::<Vec<_>>())?;
        Ok(SemiSpray { coeffs })
    }

    /// The spray of straight lines, `G ≡ 0`.
    pub fn flat(dim: usize) -> Self {
        SemiSpray {
            coeffs: vec![Expression::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coefficients(&self) -> &[Expression] {
        &self.coeffs
    }

    /// Accelerations `−2G^i(x, y)`.
    pub fn acceleration(&self, p: &PhasePoint) -> Result<Vec<f64>, EvalError> {
        let b = p.binding();
        self.coeffs.iter().map(|g| Ok(-2.0 * g.eval(&b)?)).collect()
    }

    /// Apply `S` to an arbitrary expression (no dimension check).
    pub(crate) fn derive(&self, e: &Expression) -> Expression {
        Expression::sum((0..self.dim()).map(|i| {
            let along_x = Expression::var(&velocity_var(i)) * e.partial(&position_var(i));
            let along_y = 2.0 * self.coeffs[i].clone() * e.partial(&velocity_var(i));
            along_x - along_y
        }))
    }
}

/// `C(F) = y^i ∂F/∂y^i`.
pub fn liouville_apply(f: &ScalarField) -> ScalarField {
    ScalarField::from_parts(f.dim, liouville_expr(f.dim, &f.expr))
}

pub(crate) fn liouville_expr(dim: usize, e: &Expression) -> Expression {
    Expression::sum((0..dim).map(|i| Expression::var(&velocity_var(i)) * e.partial(&velocity_var(i))))
}

/// `S(F) = y^i ∂F/∂x^i − 2G^i ∂F/∂y^i`.
pub fn spray_apply(s: &SemiSpray, f: &ScalarField) -> Result<ScalarField, GeometryError> {
    check_dim(s.dim(), f.dim)?;
    Ok(ScalarField::from_parts(f.dim, s.derive(&f.expr)))
}

/// Lagrangian energy `E_L = C(L) − L`.
pub fn energy(l: &ScalarField) -> ScalarField {
    ScalarField::from_parts(l.dim, liouville_apply(l).expr - l.expr.clone())
}

/// `d_J L = ∂L/∂y^i dx^i`.
pub fn vertical_differential(l: &ScalarField) -> SemiBasicForm {
    SemiBasicForm::from_parts((0..l.dim).map(|i| l.d_velocity(i)).collect())
}

/// `δ_S L = (S(∂L/∂y^i) − ∂L/∂x^i) dx^i`.
pub fn lagrange_differential(
    s: &SemiSpray,
    l: &ScalarField,
) -> Result<SemiBasicForm, GeometryError> {
    check_dim(s.dim(), l.dim)?;
    Ok(SemiBasicForm::from_parts(
        (0..l.dim)
            .map(|i| s.derive(&l.d_velocity(i)) - l.d_position(i))
            .collect(),
    ))
}

/// `i_S ω = ω_i y^i` for a semi-basic form.
pub fn contract_with_spray(
    s: &SemiSpray,
    omega: &SemiBasicForm,
) -> Result<ScalarField, GeometryError> {
    check_dim(s.dim(), omega.dim())?;
    let n = omega.dim();
    Ok(ScalarField::from_parts(
        n,
        Expression::sum(
            omega
                .components
                .iter()
                .enumerate()
                .map(|(i, c)| c * &Expression::var(&velocity_var(i))),
        ),
    ))
}

/// Fiber Hessian `g_ij = ∂²L/∂y^i∂y^j`, stored symmetric.
#[derive(Debug, Clone)]
pub struct FiberHessian {
    dim: usize,
    entries: Vec<Expression>,
}

impl FiberHessian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expression {
        &self.entries[i * self.dim + j]
    }

    pub fn eval(&self, p: &PhasePoint) -> Result<DMatrix<f64>, EvalError> {
        let b = p.binding();
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.entry(i, j).eval(&b)?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }
}

pub fn fiber_hessian(l: &ScalarField) -> FiberHessian {
    let n = l.dim;
    let first: Vec<Expression> = (0..n).map(|i| l.d_velocity(i)).collect();
    let mut entries = vec![Expression::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let g = first[i].partial(&velocity_var(j));
            entries[i * n + j] = g.clone();
            entries[j * n + i] = g;
        }
    }
    FiberHessian { dim: n, entries }
}

/// Velocity scalings used to probe fiber homogeneity.
pub const HOMOGENEITY_SCALES: [f64; 3] = [0.5, 2.0, 3.0];

/// Common degree `p` with `F(x, r·y) = r^p F(x, y)` for every expression and
/// every usable point, or `None`.
///
/// Points with `y = 0` or that fail to evaluate are skipped. Expressions that
/// vanish at every probe carry no degree information; if nothing else does
/// either, the answer is `None`.
pub fn homogeneity_degree(exprs: &[Expression], points: &[PhasePoint]) -> Option<f64> {
    let mut estimates = Vec::new();
    for p in points.iter().filter(|p| !p.velocity_is_zero()) {
        let b0 = p.binding();
        for e in exprs {
            let Ok(base) = e.eval(&b0) else { continue };
            for r in HOMOGENEITY_SCALES {
                let Ok(scaled) = e.eval(&p.with_scaled_velocity(r).binding()) else {
                    continue;
                };
                let magnitude = base.abs().max(scaled.abs());
                if magnitude == 0.0 {
                    continue;
                }
                if base.abs() <= 1e-14 * magnitude || scaled.abs() <= 1e-14 * magnitude {
                    return None;
                }
                let ratio = scaled / base;
                if ratio <= 0.0 {
                    return None;
                }
                estimates.push(ratio.ln() / r.ln());
            }
        }
    }
    if estimates.is_empty() {
        return None;
    }
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let consistent = estimates
        .iter()
        .all(|e| (e - mean).abs() <= 1e-8 * (1.0 + mean.abs()));
    consistent.then_some(mean)
}

/// Whether every expression satisfies `F(x, r·y) = r^p F(x, y)` at the points.
pub fn is_homogeneous_of_degree(exprs: &[Expression], p: f64, points: &[PhasePoint]) -> bool {
    points.iter().filter(|q| !q.velocity_is_zero()).all(|q| {
        let b0 = q.binding();
        exprs.iter().all(|e| {
            let Ok(base) = e.eval(&b0) else { return true };
            HOMOGENEITY_SCALES.iter().all(|&r| {
                match e.eval(&q.with_scaled_velocity(r).binding()) {
                    Ok(scaled) => {
                        let expected = r.powf(p) * base;
                        (scaled - expected).abs() <= 1e-9 * (1.0 + scaled.abs() + expected.abs())
                    }
                    Err(_) => true,
                }
            })
        })
    })
}

/// A semi-spray is a spray when its coefficients are 2-homogeneous in `y`.
pub fn is_spray(s: &SemiSpray, points: &[PhasePoint]) -> bool {
    is_homogeneous_of_degree(&s.coeffs, 2.0, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn field(dim: usize, src: &str) -> ScalarField {
        ScalarField::new(dim, parse(src, &coordinate_names(dim)).unwrap()).unwrap()
    }

    fn spray(srcs: &[&str]) -> SemiSpray {
        let names = coordinate_names(srcs.len());
        SemiSpray::new(srcs.iter().map(|s| parse(s, &names).unwrap()).collect()).unwrap()
    }

    /// Dissipative system with a = b = ω = 1.
    fn dissipative() -> SemiSpray {
        spray(&["0.5*(x1 + x2 + y1)", "0.5*(-x1 + x2 - y2)"])
    }

    fn lienard() -> SemiSpray {
        spray(&["0.5*(y1 - 2*x1)"])
    }

    fn pt(x: &[f64], y: &[f64]) -> PhasePoint {
        PhasePoint::new(x.to_vec(), y.to_vec())
    }

    #[test]
    fn liouville_examples() {
        let l = field(2, "0.5*(y1^2 + y2^2)");
        let c = liouville_apply(&l);
        let p = pt(&[0.3, 0.4], &[2.0, 1.0]);
        assert_eq!(c.eval(&p).unwrap(), 2.0 * l.eval(&p).unwrap());
        assert!(liouville_apply(&field(2, "x1")).expr().is_zero());
        let lien = field(1, "(y1 + 2*x1)^2");
        assert_eq!(liouville_apply(&lien).eval(&pt(&[1.0], &[1.0])).unwrap(), 6.0);
    }

    #[test]
    fn spray_apply_examples() {
        let l = field(2, "0.5*(y1^2 + y2^2)");
        let v = spray_apply(&dissipative(), &l).unwrap();
        assert_eq!(v.eval(&pt(&[1.0, 0.0], &[2.0, 1.0])).unwrap(), -4.0);
        assert!(spray_apply(&dissipative(), &field(2, "3.5")).unwrap().expr().is_zero());
        let lien = field(1, "(y1 + 2*x1)^2");
        assert_eq!(spray_apply(&lienard(), &lien).unwrap().eval(&pt(&[1.0], &[1.0])).unwrap(), 18.0);
        assert!(matches!(
            spray_apply(&lienard(), &l),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn energy_examples() {
        let l = field(2, "0.5*(y1^2 + y2^2)");
        assert_eq!(energy(&l).eval(&pt(&[0.0, 0.0], &[2.0, 1.0])).unwrap(), 2.5);
        assert_eq!(energy(&field(1, "y1")).eval(&pt(&[0.4], &[1.7])).unwrap(), 0.0);
        let cubic = field(2, "exp(x2)*y1^3 + x1*y1*y2^2");
        let p = pt(&[0.2, -0.1], &[0.7, 1.3]);
        let e = energy(&cubic).eval(&p).unwrap();
        assert!((e - 2.0 * cubic.eval(&p).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn vertical_differential_examples() {
        let d = vertical_differential(&field(2, "0.5*(y1^2 + y2^2)"));
        assert_eq!(d.eval(&pt(&[0.0, 0.0], &[2.0, 1.0])).unwrap(), vec![2.0, 1.0]);
        assert!(vertical_differential(&field(2, "x1")).components().iter().all(|c| c.is_zero()));
        let d = vertical_differential(&field(1, "(y1 + 2*x1)^2"));
        assert_eq!(d.eval(&pt(&[1.0], &[1.0])).unwrap(), vec![6.0]);
    }

    #[test]
    fn lagrange_differential_examples() {
        let lien = field(1, "(y1 + 2*x1)^2");
        let d = lagrange_differential(&lienard(), &lien).unwrap();
        assert_eq!(d.eval(&pt(&[1.0], &[1.0])).unwrap(), vec![-6.0]);
        let kinetic = field(3, "0.5*(y1^2 + y2^2 + y3^2)");
        let d = lagrange_differential(&SemiSpray::flat(3), &kinetic).unwrap();
        assert!(d.components().iter().all(|c| c.is_zero()));
        let d = lagrange_differential(&dissipative(), &field(2, "0.5*(y1^2 + y2^2)")).unwrap();
        assert_eq!(d.eval(&pt(&[1.0, 0.0], &[2.0, 1.0])).unwrap(), vec![-3.0, 2.0]);
    }

    #[test]
    fn fiber_hessian_examples() {
        let p = pt(&[0.5, 0.5], &[2.0, 1.0]);
        let g = fiber_hessian(&field(2, "0.5*(y1^2 + y2^2)")).eval(&p).unwrap();
        assert_eq!(g, DMatrix::identity(2, 2));
        let g = fiber_hessian(&field(1, "(y1 + 2*x1)^2")).eval(&pt(&[0.3], &[0.1])).unwrap();
        assert_eq!(g[(0, 0)], 2.0);
        // a·sqrt(y1² + y2²) with a = 1.5: a/|y|³ [[y2², −y1y2], [−y1y2, y1²]]
        let g = fiber_hessian(&field(2, "1.5*sqrt(y1^2 + y2^2)")).eval(&p).unwrap();
        let s = 1.5 / 5f64.powf(1.5);
        let want = DMatrix::from_row_slice(2, 2, &[s, -2.0 * s, -2.0 * s, 4.0 * s]);
        assert!((g.clone() - want).abs().max() < 1e-15);
        assert!(g.determinant().abs() < 1e-15);
    }

    #[test]
    fn contraction_examples() {
        let s = dissipative();
        let l = field(2, "exp(x1)*y1^2 + y1*y2 + sin(x2)");
        let p = pt(&[0.3, 0.9], &[1.2, -0.7]);
        let lhs = contract_with_spray(&s, &vertical_differential(&l)).unwrap().eval(&p).unwrap();
        let rhs = liouville_apply(&l).eval(&p).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        let lhs = contract_with_spray(&s, &lagrange_differential(&s, &l).unwrap())
            .unwrap()
            .eval(&p)
            .unwrap();
        let rhs = spray_apply(&s, &energy(&l)).unwrap().eval(&p).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
        assert!(contract_with_spray(&s, &SemiBasicForm::zero(2)).unwrap().expr().is_zero());
    }

    #[test]
    fn homogeneity_examples() {
        let pts: Vec<PhasePoint> = (1..6)
            .map(|k| {
                let t = k as f64 * 0.3;
                pt(&[t, 1.0 - t, 0.5 * t], &[1.0 + t, 0.5 - t, t])
            })
            .collect();
        let l = field(3, "0.5*exp(2*x1)*(y1^2+y2^2+y3^2)");
        let p = homogeneity_degree(&[l.expr().clone()], &pts).unwrap();
        assert!((p - 2.0).abs() < 1e-12);
        let inhom = field(3, "0.5*(y1^2+y2^2) + x1");
        assert_eq!(homogeneity_degree(&[inhom.expr().clone()], &pts), None);
        let root = field(3, "sqrt(0.5*exp(2*x1)*(y1^2+y2^2+y3^2))");
        let p = homogeneity_degree(&[root.expr().clone()], &pts).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert_eq!(homogeneity_degree(&[Expression::zero()], &pts), None);
    }

    #[test]
    fn spray_detection() {
        let pts = vec![pt(&[0.1, 0.2, 0.3], &[0.5, 1.5, -1.0])];
        assert!(is_spray(&spray(&["-0.5*(y1^2+y2^2+y3^2)", "0", "0"]), &pts));
        assert!(is_spray(&SemiSpray::flat(3), &pts));
        assert!(!is_spray(&spray(&["x1 + y1", "0", "0"]), &pts));
    }

    #[test]
    fn foreign_variables_rejected() {
        let e = parse("q*y1", &["q", "y1"]).unwrap();
        assert!(matches!(
            ScalarField::new(1, e),
            Err(GeometryError::ForeignVariable { name, .. }) if name == "q"
        ));
        let e = parse("y2", &["y2"]).unwrap();
        assert!(ScalarField::new(1, e).is_err());
    }
}

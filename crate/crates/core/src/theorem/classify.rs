use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::expr::Dual;

/// Closed-form families for `f = Φ''/Φ'`, plus a sampled fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DeformationClass {
    /// `f = γ`
    Constant { gamma: f64 },
    /// `f = γ/(L + a)`, `γ ∉ {0, −1}`
    PowerShift { gamma: f64, a: f64 },
    /// `f = −1/(L + a)`
    Logarithmic { a: f64 },
    /// `f = −2c/(cL + d)`
    Moebius { c: f64, d: f64 },
    /// `f = (1/p − 1)/L`
    HomogeneousRoot { p: f64 },
    /// Sampled `(L_k, f_k)` with strictly increasing `L_k`.
    Tabulated { samples: Vec<(f64, f64)> },
}

impl DeformationClass {
    pub fn family(&self) -> &'static str {
        match self {
            DeformationClass::Constant { .. } => "Constant",
            DeformationClass::PowerShift { .. } => "PowerShift",
            DeformationClass::Logarithmic { .. } => "Logarithmic",
            DeformationClass::Moebius { .. } => "Moebius",
            DeformationClass::HomogeneousRoot { .. } => "HomogeneousRoot",
            DeformationClass::Tabulated { .. } => "Tabulated",
        }
    }

    /// `f(t)` for the closed-form families.
    pub fn generator(&self, t: f64) -> Option<f64> {
        match *self {
            DeformationClass::Constant { gamma } => Some(gamma),
            DeformationClass::PowerShift { gamma, a } => Some(gamma / (t + a)),
            DeformationClass::Logarithmic { a } => Some(-1.0 / (t + a)),
            DeformationClass::Moebius { c, d } => Some(-2.0 * c / (c * t + d)),
            DeformationClass::HomogeneousRoot { p } => Some((1.0 / p - 1.0) / t),
            DeformationClass::Tabulated { .. } => None,
        }
    }
}

/// Parameter value as printed in reports: rounded to 1e-9, never `-0`.
pub(crate) fn round_param(v: f64) -> f64 {
    let r = (v * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl DeformationClass {
    /// Copy with every parameter passed through the report rounding.
    pub fn rounded(&self) -> DeformationClass {
        let r = round_param;
        match *self {
            DeformationClass::Constant { gamma } => DeformationClass::Constant { gamma: r(gamma) },
            DeformationClass::PowerShift { gamma, a } => DeformationClass::PowerShift {
                gamma: r(gamma),
                a: r(a),
            },
            DeformationClass::Logarithmic { a } => DeformationClass::Logarithmic { a: r(a) },
            DeformationClass::Moebius { c, d } => DeformationClass::Moebius { c: r(c), d: r(d) },
            DeformationClass::HomogeneousRoot { p } => DeformationClass::HomogeneousRoot { p: r(p) },
            DeformationClass::Tabulated { .. } => self.clone(),
        }
    }
}

impl fmt::Display for DeformationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = round_param;
        match *self {
            DeformationClass::Constant { gamma } => write!(f, "Constant(gamma={})", r(gamma)),
            DeformationClass::PowerShift { gamma, a } => {
                write!(f, "PowerShift(gamma={}, a={})", r(gamma), r(a))
            }
            DeformationClass::Logarithmic { a } => write!(f, "Logarithmic(a={})", r(a)),
            DeformationClass::Moebius { c, d } => write!(f, "Moebius(c={}, d={})", r(c), r(d)),
            DeformationClass::HomogeneousRoot { p } => write!(f, "HomogeneousRoot(p={})", r(p)),
            DeformationClass::Tabulated { ref samples } => {
                write!(f, "Tabulated({} samples)", samples.len())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyResidual {
    pub family: String,
    /// Best fit of the family, if any admissible fit exists.
    pub fit: Option<DeformationClass>,
    pub residual: Option<f64>,
    pub penalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalFit {
    pub chosen: DeformationClass,
    /// Root-mean-square of `(model − f)/(1 + |f|)` for the chosen family
    /// (zero for `Tabulated`).
    pub residual: f64,
    pub competitors: Vec<FamilyResidual>,
    /// Set when the chosen power law is `L^{1/p}` with integer `p ≥ 2`.
    pub homogeneous_root: Option<f64>,
}

const ITERATIONS: usize = 50;
const SHIFT_STARTS: [f64; 7] = [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0];
const RATIO_STARTS: [f64; 6] = [0.5, -0.5, 1.0, -1.0, 2.0, -2.0];

/// Fit every family to the cloud and pick the best by penalized residual.
pub fn classify(cloud: &[(f64, f64)], tol_fit: f64) -> FunctionalFit {
    let candidates = [
        ("Constant", fit_constant(cloud), 1.0),
        ("PowerShift", fit_power_shift(cloud), 2.0),
        ("Logarithmic", fit_logarithmic(cloud), 1.0),
        ("Moebius", fit_moebius(cloud), 1.0),
    ];
    let mut competitors = Vec::new();
    let mut best: Option<(DeformationClass, f64, f64)> = None;
    for (family, fit, params) in candidates {
        let penalized = fit.as_ref().map(|(_, r)| r + tol_fit * params);
        competitors.push(FamilyResidual {
            family: family.to_string(),
            fit: fit.as_ref().map(|(c, _)| c.clone()),
            residual: fit.as_ref().map(|(_, r)| *r),
            penalized,
        });
        if let (Some((class, residual)), Some(pen)) = (fit, penalized) {
            if best.as_ref().is_none_or(|(_, _, b)| pen < *b) {
                best = Some((class, residual, pen));
            }
        }
    }
    match best {
        Some((chosen, residual, _)) if residual <= tol_fit => {
            let homogeneous_root = match chosen {
                DeformationClass::PowerShift { gamma, a } if a.abs() <= 1e-6 => {
                    let p = 1.0 / (1.0 + gamma);
                    (p.round() >= 2.0 && (p - p.round()).abs() <= 1e-6).then(|| p.round())
                }
                _ => None,
            };
            FunctionalFit {
                chosen,
                residual,
                competitors,
                homogeneous_root,
            }
        }
        _ => FunctionalFit {
            chosen: DeformationClass::Tabulated {
                samples: cloud.to_vec(),
            },
            residual: 0.0,
            competitors,
            homogeneous_root: None,
        },
    }
}

fn weight(f: f64) -> f64 {
    1.0 / (1.0 + f.abs())
}

fn rms<M: Fn(f64) -> f64>(cloud: &[(f64, f64)], model: M) -> Option<f64> {
    if cloud.is_empty() {
        return None;
    }
    let s: f64 = cloud
        .iter()
        .map(|&(l, f)| ((model(l) - f) * weight(f)).powi(2))
        .sum();
    let r = (s / cloud.len() as f64).sqrt();
    r.is_finite().then_some(r)
}

/// `L + shift` keeps one strict sign over the cloud.
fn shift_admissible(cloud: &[(f64, f64)], shift: f64) -> bool {
    let scale = cloud.iter().map(|(l, _)| l.abs()).fold(0.0, f64::max) + shift.abs();
    let floor = 1e-12 * (1.0 + scale);
    let pos = cloud.iter().all(|(l, _)| l + shift > floor);
    let neg = cloud.iter().all(|(l, _)| l + shift < -floor);
    pos || neg
}

/// Damped Gauss-Newton on weighted residuals with a dual-number Jacobian.
fn levenberg_marquardt<M>(cloud: &[(f64, f64)], start: &[f64], model: M) -> Option<Vec<f64>>
where
    M: Fn(f64, &[Dual]) -> Dual,
{
    let k = start.len();
    let cost = |theta: &[f64]| -> f64 {
        let params: Vec<Dual> = theta.iter().map(|v| Dual::constant(*v)).collect();
        cloud
            .iter()
            .map(|&(l, f)| ((model(l, &params).re - f) * weight(f)).powi(2))
            .sum()
    };
    let mut theta = start.to_vec();
    let mut current = cost(&theta);
    if !current.is_finite() {
        return None;
    }
    let mut lambda = 1e-3;
    for _ in 0..ITERATIONS {
        let mut jac = DMatrix::zeros(cloud.len(), k);
        let mut res = DVector::zeros(cloud.len());
        for (row, &(l, f)) in cloud.iter().enumerate() {
            let w = weight(f);
            for j in 0..k {
                let params: Vec<Dual> = theta
                    .iter()
                    .enumerate()
                    .map(|(m, v)| if m == j { Dual::variable(*v) } else { Dual::constant(*v) })
                    .collect();
                let d = model(l, &params);
                jac[(row, j)] = d.eps * w;
                res[row] = (d.re - f) * w;
            }
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &res;
        if !jtj.iter().all(|v| v.is_finite()) || !jtr.iter().all(|v| v.is_finite()) {
            return None;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj.clone();
            for d in 0..k {
                damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            let c = cost(&trial);
            if c.is_finite() && c <= current {
                let small = step
                    .iter()
                    .zip(&theta)
                    .all(|(s, t)| s.abs() <= 1e-15 * (1.0 + t.abs()));
                theta = trial;
                current = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = !small;
                break;
            }
            lambda *= 10.0;
        }
        if !improved || current == 0.0 {
            break;
        }
    }
    theta.iter().all(|v| v.is_finite()).then_some(theta)
}

fn fit_constant(cloud: &[(f64, f64)]) -> Option<(DeformationClass, f64)> {
    let (num, den) = cloud.iter().fold((0.0, 0.0), |(n, d), &(_, f)| {
        let w2 = weight(f).powi(2);
        (n + w2 * f, d + w2)
    });
    if den == 0.0 {
        return None;
    }
    let gamma = num / den;
    let r = rms(cloud, |_| gamma)?;
    Some((DeformationClass::Constant { gamma }, r))
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

fn better(best: &mut Option<(DeformationClass, f64)>, class: DeformationClass, r: Option<f64>) {
    if let Some(r) = r {
        if best.as_ref().is_none_or(|(_, b)| r < *b) {
            *best = Some((class, r));
        }
    }
}

fn fit_power_shift(cloud: &[(f64, f64)]) -> Option<(DeformationClass, f64)> {
    let mut starts: Vec<(f64, f64)> = Vec::new();
    for a in SHIFT_STARTS {
        if !shift_admissible(cloud, a) {
            continue;
        }
        // Closed-form γ for fixed a.
        let (num, den) = cloud.iter().fold((0.0, 0.0), |(n, d), &(l, f)| {
            let w2 = weight(f).powi(2);
            let u = 1.0 / (l + a);
            (n + w2 * f * u, d + w2 * u * u)
        });
        if den > 0.0 {
            starts.push((num / den, a));
        }
    }
    // 1/f = (L + a)/γ is linear in L.
    if cloud.iter().all(|(_, f)| *f != 0.0) {
        let m = cloud.len() as f64;
        let (sl, sv, sll, slv) = cloud.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(l, f)| {
            let v = 1.0 / f;
            (acc.0 + l, acc.1 + v, acc.2 + l * l, acc.3 + l * v)
        });
        let det = m * sll - sl * sl;
        if det != 0.0 {
            let alpha = (m * slv - sl * sv) / det;
            let beta = (sv - alpha * sl) / m;
            if alpha != 0.0 && alpha.is_finite() && beta.is_finite() {
                starts.push((1.0 / alpha, beta / alpha));
            }
        }
    }
    let model = |l: f64, t: &[Dual]| t[0] / (t[1] + l);
    let mut best = None;
    for (g0, a0) in starts {
        let Some(theta) = levenberg_marquardt(cloud, &[g0, a0], model) else {
            continue;
        };
        let (gamma, a) = (theta[0], theta[1]);
        if gamma.abs() <= 1e-9 || (gamma + 1.0).abs() <= 1e-9 || !shift_admissible(cloud, a) {
            continue;
        }
        let r = rms(cloud, |l| gamma / (l + a));
        better(&mut best, DeformationClass::PowerShift { gamma, a }, r);
    }
    best
}

fn fit_logarithmic(cloud: &[(f64, f64)]) -> Option<(DeformationClass, f64)> {
    let mut starts: Vec<f64> = SHIFT_STARTS.to_vec();
    if let Some(a) = median(cloud.iter().map(|(l, f)| -1.0 / f - l).collect()) {
        starts.push(a);
    }
    let model = |l: f64, t: &[Dual]| -Dual::constant(1.0) / (t[0] + l);
    let mut best = None;
    for a0 in starts {
        if !shift_admissible(cloud, a0) {
            continue;
        }
        let Some(theta) = levenberg_marquardt(cloud, &[a0], model) else {
            continue;
        };
        let a = theta[0];
        if !shift_admissible(cloud, a) {
            continue;
        }
        better(&mut best, DeformationClass::Logarithmic { a }, rms(cloud, |l| -1.0 / (l + a)));
    }
    best
}

/// Normalize `(c, d)` to `max(|c|, |d|) = 1`, `c ≥ 0`.
pub(crate) fn normalize_moebius(c: f64, d: f64) -> (f64, f64) {
    let m = c.abs().max(d.abs());
    let s = if c < 0.0 { -1.0 / m } else { 1.0 / m };
    let (c, d) = (c * s, d * s);
    (c + 0.0, d + 0.0)
}

fn fit_moebius(cloud: &[(f64, f64)]) -> Option<(DeformationClass, f64)> {
    let mut best = None;
    // c = 0: the degenerate member f ≡ 0.
    better(&mut best, DeformationClass::Moebius { c: 0.0, d: 1.0 }, rms(cloud, |_| 0.0));
    let mut starts: Vec<f64> = RATIO_STARTS.to_vec();
    if let Some(r) = median(cloud.iter().map(|(l, f)| -2.0 / f - l).collect()) {
        starts.push(r);
    }
    let model = |l: f64, t: &[Dual]| Dual::constant(-2.0) / (t[0] + l);
    for r0 in starts {
        if !shift_admissible(cloud, r0) {
            continue;
        }
        let Some(theta) = levenberg_marquardt(cloud, &[r0], model) else {
            continue;
        };
        let r = theta[0];
        if !shift_admissible(cloud, r) {
            continue;
        }
        let (c, d) = normalize_moebius(1.0, r);
        better(&mut best, DeformationClass::Moebius { c, d }, rms(cloud, |l| -2.0 / (l + r)));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> Vec<(f64, f64)> {
        (0..60)
            .map(|k| {
                let l = lo + (hi - lo) * k as f64 / 59.0;
                (l, f(l))
            })
            .collect()
    }

    #[test]
    fn minus_half_over_l_is_square_root() {
        let fit = classify(&cloud(0.3, 4.0, |l| -0.5 / l), 1e-6);
        match fit.chosen {
            DeformationClass::PowerShift { gamma, a } => {
                assert!((gamma + 0.5).abs() < 1e-9 && a.abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(fit.homogeneous_root, Some(2.0));
    }

    #[test]
    fn constant_data() {
        let fit = classify(&cloud(0.3, 4.0, |_| 3.0), 1e-6);
        assert_eq!(fit.chosen, DeformationClass::Constant { gamma: 3.0 });
    }

    #[test]
    fn zero_data_prefers_constant_over_moebius() {
        let fit = classify(&cloud(0.3, 4.0, |_| 0.0), 1e-6);
        assert_eq!(fit.chosen, DeformationClass::Constant { gamma: 0.0 });
    }

    #[test]
    fn logarithmic_data() {
        let fit = classify(&cloud(0.5, 5.0, |l| -1.0 / (l + 0.7)), 1e-6);
        match fit.chosen {
            DeformationClass::Logarithmic { a } => assert!((a - 0.7).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn moebius_data_normalized() {
        // c = 1, d = 2 over a negative L range.
        let fit = classify(&cloud(-1.9, -1.05, |l| -2.0 / (l + 2.0)), 1e-6);
        match fit.chosen {
            DeformationClass::Moebius { c, d } => {
                assert!((c - 0.5).abs() < 1e-9 && (d - 1.0).abs() < 1e-9, "{c} {d}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn power_shift_with_offset() {
        let fit = classify(&cloud(0.1, 3.0, |l| 0.75 / (l + 1.5)), 1e-6);
        match fit.chosen {
            DeformationClass::PowerShift { gamma, a } => {
                assert!((gamma - 0.75).abs() < 1e-8 && (a - 1.5).abs() < 1e-8);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(fit.homogeneous_root, None);
    }

    #[test]
    fn unmatched_data_is_tabulated() {
        let data = cloud(0.1, 3.0, |l| l.sin() + 0.3 * l * l);
        let fit = classify(&data, 1e-6);
        assert_eq!(fit.chosen, DeformationClass::Tabulated { samples: data });
        assert_eq!(fit.competitors.len(), 4);
    }

    #[test]
    fn display_rounds_parameters() {
        let c = DeformationClass::PowerShift {
            gamma: -0.5000000000001,
            a: -1e-13,
        };
        assert_eq!(c.to_string(), "PowerShift(gamma=-0.5, a=0)");
    }
}

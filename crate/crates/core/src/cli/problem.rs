//! Problem files: schema, validation and conversion to checked systems.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::corpus;
use crate::expr::{parse, Expression, ParseError};
use crate::geometry::{coordinate_names, ScalarField, SemiBasicForm, SemiSpray};
use crate::theorem::{LagrangeSystem, SamplePlan, Tolerances};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("schema error in `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error("cannot parse `{field}` = \"{expression}\": {source}")]
    Parse {
        field: String,
        expression: String,
        source: ParseError,
    },
}

fn schema(field: impl Into<String>, reason: impl Into<String>) -> ProblemError {
    ProblemError::Schema {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub count: usize,
    pub seed: u64,
    pub guard: f64,
}

/// A problem file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    pub dim: usize,
    pub params: BTreeMap<String, f64>,
    pub spray: Vec<String>,
    pub lagrangian: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissipation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homogeneity: Option<f64>,
    #[serde(rename = "box")]
    pub bounds: BTreeMap<String, [f64; 2]>,
    pub sampling: SamplingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

/// A validated problem with parsed expressions.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub system: LagrangeSystem,
    pub sigma: Option<SemiBasicForm>,
    pub dissipation: Option<ScalarField>,
    pub plan: SamplePlan,
    pub tolerances: Tolerances,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            // serde reports the offending key inside backticks.
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<document>".into());
            schema(field, msg)
        })
    }

    pub fn validate(&self) -> Result<Problem, ProblemError> {
        let n = self.dim;
        if n == 0 {
            return Err(schema("dim", "must be at least 1"));
        }
        let coords = coordinate_names(n);
        for (name, value) in &self.params {
            if coords.contains(name) {
                return Err(schema(format!("params.{name}"), "shadows a coordinate"));
            }
            if !value.is_finite() {
                return Err(schema(format!("params.{name}"), "is not finite"));
            }
        }
        let declared: Vec<String> = coords.iter().cloned().chain(self.params.keys().cloned()).collect();
        let expr = |field: String, src: &str| -> Result<Expression, ProblemError> {
            let e = parse(src, &declared).map_err(|source| ProblemError::Parse {
                field,
                expression: src.to_string(),
                source,
            })?;
            Ok(self
                .params
                .iter()
                .fold(e, |acc, (name, value)| acc.substitute(name, *value)))
        };
        let exprs = |field: &str, srcs: &[String]| -> Result<Vec<Expression>, ProblemError> {
            if srcs.len() != n {
                return Err(schema(field, format!("has {} entries, expected dim = {n}", srcs.len())));
            }
            srcs.iter()
                .enumerate()
                .map(|(i, s)| expr(format!("{field}[{i}]"), s))
                .collect()
        };

        let spray = SemiSpray::new(exprs("spray", &self.spray)?)
            .map_err(|e| schema("spray", e.to_string()))?;
        let lagrangian = ScalarField::new(n, expr("lagrangian".into(), &self.lagrangian)?)
            .map_err(|e| schema("lagrangian", e.to_string()))?;
        let sigma = match &self.sigma {
            Some(s) => Some(
                SemiBasicForm::new(n, exprs("sigma", s)?).map_err(|e| schema("sigma", e.to_string()))?,
            ),
            None => None,
        };
        let dissipation = match &self.dissipation {
            Some(d) => Some(
                ScalarField::new(n, expr("dissipation".into(), d)?)
                    .map_err(|e| schema("dissipation", e.to_string()))?,
            ),
            None => None,
        };
        if let Some(p) = self.homogeneity {
            if !p.is_finite() {
                return Err(schema("homogeneity", "is not finite"));
            }
        }

        for key in self.bounds.keys() {
            if !coords.contains(key) {
                return Err(schema(format!("box.{key}"), "is not a coordinate"));
            }
        }
        let mut bounds = Vec::with_capacity(2 * n);
        for name in &coords {
            let [lo, hi] = *self
                .bounds
                .get(name)
                .ok_or_else(|| schema("box", format!("missing bounds for {name}")))?;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(schema(format!("box.{name}"), format!("[{lo}, {hi}] is degenerate")));
            }
            bounds.push((lo, hi));
        }
        if self.sampling.count == 0 {
            return Err(schema("sampling.count", "must be positive"));
        }
        if !(self.sampling.guard > 0.0 && self.sampling.guard.is_finite()) {
            return Err(schema("sampling.guard", "must be positive"));
        }
        let plan = SamplePlan::new(bounds, self.sampling.count, self.sampling.seed)
            .with_guard(self.sampling.guard);

        let tolerances = self.tolerances.unwrap_or_default();
        for (field, v) in [
            ("identity", tolerances.identity),
            ("classification", tolerances.classification),
            ("dependence", tolerances.dependence),
            ("wedge", tolerances.wedge),
            ("trajectory", tolerances.trajectory),
            ("energy", tolerances.energy),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(schema(format!("tolerances.{field}"), "must be positive"));
            }
        }

        let system = LagrangeSystem::new(spray, lagrangian)
            .map_err(|e| schema("spray", e.to_string()))?;
        Ok(Problem {
            spec: self.clone(),
            system,
            sigma,
            dissipation,
            plan,
            tolerances,
        })
    }
}

/// Read and validate a problem file, falling back to the bundled corpus for
/// names such as `dissipative` or `corpus/dissipative.json`.
pub fn load_problem(path: &Path) -> Result<Problem, ProblemError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => match corpus::bundled(&path.to_string_lossy()) {
            Some(t) => t.to_string(),
            None => {
                return Err(ProblemError::Io {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })
            }
        },
    };
    ProblemSpec::from_json(&text)?.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "name": "free",
            "dim": 1,
            "params": {"k": 2.0},
            "spray": ["0.5*k*y1"],
            "lagrangian": "0.5*y1^2",
            "box": {"x1": [0.0, 1.0], "y1": [0.5, 1.5]},
            "sampling": {"count": 10, "seed": 1, "guard": 1e-6}
        })
    }

    fn load(v: &serde_json::Value) -> Result<Problem, ProblemError> {
        ProblemSpec::from_json(&v.to_string())?.validate()
    }

    #[test]
    fn parameters_are_substituted() {
        let p = load(&minimal()).unwrap();
        assert!(p.system.spray.coefficients()[0].variables().contains("y1"));
        assert!(!p.system.spray.coefficients()[0].variables().contains("k"));
        assert_eq!(p.plan.bounds, vec![(0.0, 1.0), (0.5, 1.5)]);
    }

    #[test]
    fn missing_lagrangian() {
        let mut v = minimal();
        v.as_object_mut().unwrap().remove("lagrangian");
        assert!(matches!(load(&v), Err(ProblemError::Schema { .. })));
    }

    #[test]
    fn unknown_key() {
        let mut v = minimal();
        v["notes"] = serde_json::json!("x");
        match load(&v) {
            Err(ProblemError::Schema { field, .. }) => assert_eq!(field, "notes"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sigma_arity() {
        let mut v = minimal();
        v["dim"] = serde_json::json!(2);
        v["spray"] = serde_json::json!(["0", "0"]);
        v["sigma"] = serde_json::json!(["0"]);
        v["box"] = serde_json::json!({"x1": [0, 1], "x2": [0, 1], "y1": [0, 1], "y2": [0, 1]});
        match load(&v) {
            Err(ProblemError::Schema { field, .. }) => assert_eq!(field, "sigma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn undeclared_identifier() {
        let mut v = minimal();
        v["lagrangian"] = serde_json::json!("q*y1");
        assert!(matches!(load(&v), Err(ProblemError::Parse { .. })));
    }

    #[test]
    fn degenerate_box() {
        let mut v = minimal();
        v["box"]["y1"] = serde_json::json!([1.0, 1.0]);
        assert!(matches!(load(&v), Err(ProblemError::Schema { .. })));
        let mut v = minimal();
        v["box"].as_object_mut().unwrap().remove("x1");
        assert!(matches!(load(&v), Err(ProblemError::Schema { .. })));
    }

    #[test]
    fn bundled_fallback() {
        let p = load_problem(Path::new("corpus/dissipative.json")).unwrap();
        assert_eq!(p.spec.dim, 2);
        assert!(p.spec.params.contains_key("omega"));
        assert!(load_problem(Path::new("/nonexistent/problem.json")).is_err());
    }
}
